#include "srd/spde/grid.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace srd::spde {

TorusGrid::TorusGrid(int d_, int M_) : d(d_), M(M_) { validate(); }

void TorusGrid::validate() const {
    if (d != 1 && d != 2) throw std::invalid_argument("TorusGrid: d must be 1 or 2");
    if (M < 4) throw std::invalid_argument("TorusGrid: M must be >= 4");
}

double TorusGrid::coord(std::size_t cell, int axis) const {
    const std::size_t m = static_cast<std::size_t>(M);
    if (axis == 0) return static_cast<double>(cell % m) * h();
    return static_cast<double>(cell / m) * h();
}

TorusField::TorusField(TorusGrid grid, Vec4 kappa) : grid_(grid), kappa_(kappa) {
    grid_.validate();
    for (double k : kappa_) {
        if (!(k > 0.0) || !std::isfinite(k)) throw std::invalid_argument("TorusField: every kappa must be > 0");
    }
    for (auto& v : a_) v.assign(grid_.cells(), 0.0);
}

double TorusField::min_kappa() const { return std::min(std::min(kappa_[0], kappa_[1]), std::min(kappa_[2], kappa_[3])); }
double TorusField::max_kappa() const { return std::max(std::max(kappa_[0], kappa_[1]), std::max(kappa_[2], kappa_[3])); }

void TorusField::validate() const {
    for (double k : kappa_) {
        if (!(k > 0.0)) throw std::invalid_argument("TorusField: every kappa must be > 0");
    }
    for (const auto& v : a_) {
        if (v.size() != grid_.cells()) throw std::invalid_argument("TorusField: storage does not match grid");
        for (double x : v) {
            if (!std::isfinite(x)) throw std::invalid_argument("TorusField: non-finite value");
            if (x < 0.0) throw std::invalid_argument("TorusField: negative value");
        }
    }
}

TorusField make_initial(const TorusGrid& grid, const Vec4& kappa, const std::array<SpeciesInitial, 4>& spec) {
    TorusField f(grid, kappa);
    for (int i = 0; i < 4; ++i) {
        auto a = f.species(i);
        const auto& s = spec[static_cast<std::size_t>(i)];
        double lo = INFINITY;
        for (std::size_t c = 0; c < grid.cells(); ++c) {
            const double x = grid.coord(c, 0);
            const double y = grid.d == 2 ? grid.coord(c, 1) : 0.0;
            double v = s.mean;
            for (const auto& m : s.modes) {
                v += m.amplitude * std::cos(2.0 * std::numbers::pi * (m.k[0] * x + m.k[1] * y) + m.phase);
            }
            a[c] = v;
            lo = std::min(lo, v);
        }
        if (lo < 0.0) {
            for (double& v : a) v -= lo;
        }
    }
    f.validate();
    return f;
}

TorusField constant_field(const TorusGrid& grid, const Vec4& kappa, const Vec4& value) {
    TorusField f(grid, kappa);
    for (std::size_t c = 0; c < grid.cells(); ++c) f.set(c, value);
    f.validate();
    return f;
}

}  // namespace srd::spde
