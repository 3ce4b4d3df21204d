#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "srd/spde/grid.hpp"
#include "srd/spde/solver.hpp"

namespace srd::duality {

using spde::TorusField;
using spde::TorusGrid;
using spde::Vec4;

// [time index][cell]
using SpaceTime = std::vector<std::vector<double>>;

struct ForwardZ {
    TorusGrid grid;
    Vec4 kappa{};
    double dt = 0.0;
    int channels = 2;
    std::vector<double> times;  // t_0..t_N
    SpaceTime z;                // N+1 entries
    SpaceTime K;                // N+1 entries, K = kappa_min where z = 0
    SpaceTime Kz;               // sum kappa_i Phibar(a_i), N+1 entries
    std::vector<SpaceTime> g;   // [alpha][n][cell], n < N
    std::vector<std::vector<double>> dB;  // [n][alpha], n < N
    SpaceTime F_recon;          // S - sum kappa_i |grad a_i|^2 / (1+a_i), n < N
    SpaceTime F_full;           // closes the discrete forward identity exactly, n < N
    SpaceTime slack;            // C1 z - F_recon, n < N
    double C1 = 0.0;
    double min_slack = 0.0;
    std::size_t negative_slack_cells = 0;  // slack < -tol
    double g_ratio_max = 0.0;   // max sum_alpha |g|^2 / (nu z^2) over z > 0 cells
    double K_min = 0.0, K_max = 0.0;
};

// Needs a record with keep_fields (fields and increments at every step).
ForwardZ assemble_forward(const spde::TrajectoryRecord& rec, const spde::SolverConfig& cfg, double C1,
                          double slack_tol = 1e-9);

struct RegularizedK {
    double eps = 0.0;
    SpaceTime K_tilde;  // N+1 entries
    double max_deviation = 0.0;       // max (K - K_tilde) z
    double max_deviation_ratio = 0.0; // max (K - K_tilde) z / (eps K)
    double min_deviation = 0.0;       // min (K - K_tilde) z, >= 0
};
// K_tilde = sum kappa_i Phibar(a_i) / (z + eps)
RegularizedK regularize_K(const ForwardZ& fz, double eps);

enum class DualMode { DeterministicDual, RegressionBSDE };
std::string to_string(DualMode m);
DualMode dual_mode_from_string(const std::string& s);

struct DualSolution {
    TorusGrid grid;
    double dt = 0.0;
    DualMode mode = DualMode::DeterministicDual;
    std::vector<double> times;
    SpaceTime w;               // N+1 entries, w[N] = 0
    std::vector<SpaceTime> q;  // [alpha][n][cell], n < N
    double min_w = 0.0;
};

// Backward gate for monotonicity: 1 + C1 dt - 2 d dt max K_tilde / h^2 >= 0.
double dual_gate(const TorusGrid& grid, double dt, double C1, double K_tilde_max);

// Deterministic dual: w^N = 0,
//   w^n = w^{n+1} + dt (K_tilde^n Lap w^{n+1} + C1 w^{n+1} + H^n),  q = 0.
// H and K_tilde need at least N entries (index n < N is used).
DualSolution solve_dual(const TorusGrid& grid, double dt, int steps, const SpaceTime& H, const SpaceTime& K_tilde,
                        double C1, int channels = 2, bool enforce_gate = true, bool require_bounds = true,
                        double kappa_max = 0.0);

// One forward path as seen by the regression dual.
struct RegressionPath {
    SpaceTime H;        // n < N
    SpaceTime K_tilde;  // n < N
    std::vector<std::vector<double>> features;  // [n][feature], n < N
    std::vector<std::vector<double>> dB;        // [n][alpha], n < N
};

struct RegressionConfig {
    int degree = 2;          // total degree of the polynomial basis, 0..2
    double cond_limit = 1e10;  // on the Gram matrix of the standardized basis
};

// Cell averages of each species, E and E2 of the field.
std::vector<double> field_features(const TorusField& field);

// Backward sweep with one least-squares regression per time step:
//   w^n = E[w^{n+1} + dt (K_tilde Lap w^{n+1} + C1 w^{n+1} + H) | F_n],
//   q^n = E[w^{n+1} dB^n | F_n] / dt.
std::vector<DualSolution> solve_dual_regression(const TorusGrid& grid, double dt, int steps,
                                                std::span<const RegressionPath> paths, double C1,
                                                const RegressionConfig& cfg = {});

// Per-path terms of the discrete duality identity:
//   lhs = sum dt <H^n, z^n>
//   initial = <z^0, w^0>
//   mismatch = sum dt <(K - K_tilde)^n z^n, Lap w^{n+1}>
//   slack = sum dt <F^n - C1 z^n, w^{n+1}>
//   noise = sum dt <g^n, q^n>
//   martingale = sum <G^n, w^{n+1}>, G^n = sum_alpha g^n_alpha dB^n_alpha (observed, not in the budget)
struct DualityTerms {
    double lhs = 0.0;
    double initial = 0.0;
    double mismatch = 0.0;
    double slack = 0.0;
    double slack_recon = 0.0;  // slack with F_recon in place of F_full
    double noise = 0.0;
    double martingale = 0.0;
    double residual() const { return lhs - (initial + mismatch + slack + noise); }
    double residual_recon() const { return lhs - (initial + mismatch + slack_recon + noise); }
};

DualityTerms duality_terms(const ForwardZ& fz, const DualSolution& dual, const SpaceTime& H,
                           const SpaceTime& K_tilde);

struct DualityResidual {
    std::size_t paths = 0;
    double lhs = 0.0, initial = 0.0, mismatch = 0.0, slack = 0.0, noise = 0.0;
    double residual = 0.0, residual_se = 0.0;  // bootstrap SE of the ensemble mean
    double residual_recon = 0.0, residual_recon_se = 0.0;
    double martingale = 0.0;
    double scale = 0.0;  // mean |lhs|
};

DualityResidual duality_residual(std::span<const DualityTerms> terms, std::uint64_t bootstrap_seed,
                                 int resamples = 1000);

struct EnergyBound {
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;  // lhs / rhs, 0 when rhs = 0
    double grad_w0 = 0.0, lap_w = 0.0, grad_q = 0.0;
};

// Per-path energies with forward-difference gradients; average over paths to get E[.].
EnergyBound energy_terms(const DualSolution& dual, const SpaceTime& H, double C1);
EnergyBound energy_bound_check(std::span<const DualSolution> duals, std::span<const SpaceTime> H, double C1);

// Discrete operators shared with the tests.
double inner(const TorusGrid& grid, std::span<const double> a, std::span<const double> b);
double grad_norm_sq(const TorusGrid& grid, std::span<const double> u);  // h^d sum |D+ u|^2

}  // namespace srd::duality
