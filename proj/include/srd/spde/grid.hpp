#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "srd/kinetics/species.hpp"

namespace srd::spde {

using kinetics::Vec4;

struct TorusGrid {
    int d = 1;
    int M = 64;

    TorusGrid() = default;
    TorusGrid(int d_, int M_);

    double h() const { return 1.0 / M; }
    double cell_volume() const { return d == 1 ? h() : h() * h(); }
    std::size_t cells() const { return d == 1 ? static_cast<std::size_t>(M) : static_cast<std::size_t>(M) * M; }
    int wrap(int i) const { return ((i % M) + M) % M; }
    std::size_t index(int ix, int iy = 0) const {
        return d == 1 ? static_cast<std::size_t>(wrap(ix))
                      : static_cast<std::size_t>(wrap(iy)) * M + static_cast<std::size_t>(wrap(ix));
    }
    // coordinate of the cell along the given axis, x_j = j h
    double coord(std::size_t cell, int axis) const;
    void validate() const;

    bool operator==(const TorusGrid& o) const { return d == o.d && M == o.M; }
};

// Species-major storage: four arrays of M^d values.
class TorusField {
public:
    TorusField() = default;
    TorusField(TorusGrid grid, Vec4 kappa);

    const TorusGrid& grid() const { return grid_; }
    const Vec4& kappa() const { return kappa_; }
    double min_kappa() const;
    double max_kappa() const;

    std::span<double> species(int i) { return a_[static_cast<std::size_t>(i)]; }
    std::span<const double> species(int i) const { return a_[static_cast<std::size_t>(i)]; }

    Vec4 at(std::size_t cell) const {
        return {a_[0][cell], a_[1][cell], a_[2][cell], a_[3][cell]};
    }
    void set(std::size_t cell, const Vec4& v) {
        for (std::size_t i = 0; i < 4; ++i) a_[i][cell] = v[i];
    }

    // Throws unless every value is finite and >= 0 and every kappa > 0.
    void validate() const;

    bool operator==(const TorusField& o) const {
        return grid_ == o.grid_ && kappa_ == o.kappa_ && a_ == o.a_;
    }

private:
    TorusGrid grid_;
    Vec4 kappa_{1.0, 1.0, 1.0, 1.0};
    std::array<std::vector<double>, 4> a_;
};

struct FourierMode {
    std::array<int, 2> k{1, 0};  // wave numbers along x, y
    double amplitude = 0.0;
    double phase = 0.0;  // radians
};

struct SpeciesInitial {
    double mean = 1.0;
    std::vector<FourierMode> modes;
};

// mean + sum amp*cos(2 pi (kx x + ky y) + phase) per species; if any value
// is negative the species is shifted up so its minimum is zero.
TorusField make_initial(const TorusGrid& grid, const Vec4& kappa, const std::array<SpeciesInitial, 4>& spec);
TorusField constant_field(const TorusGrid& grid, const Vec4& kappa, const Vec4& value);

}  // namespace srd::spde
