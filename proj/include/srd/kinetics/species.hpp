#pragma once

#include <array>
#include <cmath>
#include <string>

#include <Eigen/Core>

namespace srd::kinetics {

inline constexpr int kSpecies = 4;
inline constexpr int kMaxChannels = 8;

using Vec4 = std::array<double, kSpecies>;
using NoiseMatrix = Eigen::Matrix<double, kSpecies, Eigen::Dynamic, 0, kSpecies, kMaxChannels>;

// Concentrations (a1, a2, a3, a4) at one point or in one reactor.
class SpeciesVector {
public:
    SpeciesVector() = default;
    SpeciesVector(double a1, double a2, double a3, double a4);
    explicit SpeciesVector(const Vec4& a);

    // Componentwise positive part; still rejects NaN and infinities.
    static SpeciesVector positive_part(const Vec4& a);

    double operator[](int i) const { return a_[static_cast<std::size_t>(i)]; }
    const Vec4& values() const { return a_; }
    double norm() const;

private:
    Vec4 a_{};
};

// Sign of species i (0-based) in the forward reaction A1 + A3 -> A2 + A4.
inline constexpr double stoich(int i) { return (i % 2 == 0) ? -1.0 : 1.0; }

struct ReactionNetwork {
    double lambda_fwd = 1.0;
    double lambda_bwd = 1.0;

    static constexpr std::array<int, kSpecies> stoich_fwd{-1, 1, -1, 1};
    static constexpr std::array<int, kSpecies> stoich_bwd{1, -1, 1, -1};

    static double eta_fwd(const Vec4& a) { return a[0] * a[2]; }
    static double eta_bwd(const Vec4& a) { return a[1] * a[3]; }
    void validate() const;
};

enum class NoiseKind { True, Smoothed, Truncated };

std::string to_string(NoiseKind k);
NoiseKind noise_kind_from_string(const std::string& s);

struct NoiseModel {
    NoiseKind kind = NoiseKind::Smoothed;
    double nu = 0.01;         // growth constant; 0 switches the noise off
    double eps_sigma = 0.01;  // boundary smoothing scale
    double trunc_n = 1.0;     // level n, Truncated only
    int channels = 2;

    void validate() const;
};

// Quintic smoothstep S(t) = 6t^5 - 15t^4 + 10t^3 on clamp(t, 0, 1).
inline double smooth_step(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

double cutoff_chi(double r, double n);

Vec4 reaction_drift(const SpeciesVector& a);
Vec4 reaction_drift(const SpeciesVector& a, const ReactionNetwork& rates);
Vec4 truncated_drift(const SpeciesVector& a, double n);

NoiseMatrix noise_coefficients(const SpeciesVector& a, const NoiseModel& m);

namespace detail {

// Columns 0 and 1 of the noise matrix (all other channels vanish), scaled by
// `factor`. No validation; used by the solvers on already-valid states.
inline void noise_columns(const Vec4& a, const NoiseModel& m, double factor, Vec4& c0, Vec4& c1) {
    const double s = std::sqrt(m.nu) * factor;
    const double r0 = s * std::sqrt(a[0] * a[2]);
    const double r1 = s * std::sqrt(a[1] * a[3]);
    for (int i = 0; i < kSpecies; ++i) {
        double cut = 1.0;
        if (m.kind != NoiseKind::True) cut = smooth_step(a[static_cast<std::size_t>(i)] / m.eps_sigma);
        c0[static_cast<std::size_t>(i)] = stoich(i) * r0 * cut;
        c1[static_cast<std::size_t>(i)] = stoich(i) * r1 * cut;
    }
}

inline double norm(const Vec4& a) { return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2] + a[3] * a[3]); }

}  // namespace detail

}  // namespace srd::kinetics
