#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "srd/kinetics/entropy.hpp"
#include "srd/spde/grid.hpp"
#include "srd/spde/solver.hpp"

namespace srd::diagnostics {

using spde::TorusField;
using spde::TorusGrid;
using spde::TrajectoryRecord;

struct EntropyPair {
    double E = 0.0;   // h^d sum Phibar(a_i)
    double E2 = 0.0;  // h^d sum Phibar(a_i)^2
};
EntropyPair entropy_functionals(const TorusField& field);

// Centered periodic differences, gradient[species][axis][cell].
struct Gradients {
    int d = 1;
    std::array<std::array<std::vector<double>, 2>, 4> g;
};
Gradients centered_gradients(const TorusField& field);

// h^d sum_cells sum_i kappa_i |grad a_i|^2 / (1 + a_i); the driver multiplies by dt.
double dissipation_increment(const TorusField& field, const Gradients& grads);
double dissipation_increment(const TorusField& field);

struct TruncatedPair {
    double E_xi = 0.0;    // h^d sum Phi((a_i - xi)^+)
    double psi_sq = 0.0;  // h^d sum Psi((a_i - xi)^+)^2
    double D_rate = 0.0;  // h^d sum kappa_i |grad (a_i - xi)^+|^2 / (1 + (a_i - xi)^+)
};
TruncatedPair truncated_functionals(const TorusField& field, double xi,
                                    const kinetics::PsiTable& psi = kinetics::PsiTable::shared());

// (1 - 2^{-k-1}) xi for k = 0..K
std::vector<double> degiorgi_levels(double xi, int K);
// K with 2^{-K} xi closest to 1 (at least 0)
int default_ladder_depth(double xi);

struct EntropyTrace {
    std::vector<double> times;
    std::vector<double> E;
    std::vector<double> D;    // cumulative
    std::vector<double> E2;
    std::vector<double> U;    // sup_{s<=t} E(s) + D(t)
    std::vector<double> intE;   // trapezoid integral of E
    std::vector<double> intE2;  // trapezoid integral of E2
};

// Feed fields in time order; D, intE and intE2 are updated at every step,
// the trace is stored every `stride` steps (and always at the first and last).
class EntropyAccumulator {
public:
    explicit EntropyAccumulator(int stride = 1) : stride_(stride) {}
    void start(const TorusField& field, double t = 0.0);
    void add(int step, double t, const TorusField& field, bool force_record = false);
    void finish();  // records the last state if it was skipped by the stride
    const EntropyTrace& trace() const { return trace_; }

private:
    void record();
    int stride_;
    EntropyTrace trace_;
    bool pending_ = false;
    double t_ = 0.0, E_ = 0.0, E2_ = 0.0, D_ = 0.0, supE_ = 0.0, intE_ = 0.0, intE2_ = 0.0;
};

class EntropyObserver : public spde::TrajectoryObserver {
public:
    explicit EntropyObserver(int stride = 1) : acc_(stride) {}
    void on_start(const TorusField& field, const spde::SolverConfig& cfg) override;
    void on_step(int step, double t, const TorusField& field, const spde::StepResult& res) override;
    // Call after simulate() returns.
    const EntropyTrace& trace() {
        acc_.finish();
        return acc_.trace();
    }

private:
    EntropyAccumulator acc_;
};

// Replays a record carrying every field (keep_fields).
EntropyTrace entropy_trace(const TrajectoryRecord& rec, int stride = 1);

// R(t) = E(t) + D(t) - E(0) - C1 int_0^t E
std::vector<double> entropy_residual(const EntropyTrace& trace, double C1);

struct LadderLevel {
    int k = 0;
    double xi_k = 0.0;
    double sup_E = 0.0;    // sup_t E(t; xi_k)
    double D = 0.0;        // D(T; xi_k)
    double U = 0.0;        // sup_E + D
    double U_psi = 0.0;    // [int_0^T h^d sum Psi(a^xi_k)^2 dt]^{1/2}
    double threshold = 0.0;  // delta^{rho^k}
    bool pass = false;
    // recursion coefficients toward level k+1 (k < K)
    double W = 0.0;
    double W_scaled = 0.0;     // W / (1 min ln(1 + 2^{-k-2} xi))
    double W_reference = 0.0;  // 8^k / xi + 4^k
};

struct DeGiorgiLadder {
    double xi = 0.0;
    int K = 0;
    double C6 = 1.0;
    double delta = 0.0;
    double rho_under = 1.25;
    std::vector<double> levels;
    std::vector<LadderLevel> report;  // filled by ladder accumulation

    // K < 0 selects default_ladder_depth(xi).
    static DeGiorgiLadder make(double xi, int K = -1, double C6 = 1.0, double rho_under = 1.25);
};

// delta = 1 / max(C6, sqrt(ln xi))
double ladder_delta(double xi, double C6);
// W_alpha(xi, zeta) = (xi - zeta)^{-alpha-1} + (xi - zeta)^{-alpha}
double w_alpha(int alpha, double xi, double zeta);
// W_k = xi_{k+1}^2 W_2(xi_{k+1}, xi_k) + xi_{k+1} W_1(xi_{k+1}, xi_k)
double w_k(double xi, int k);

class LadderAccumulator {
public:
    explicit LadderAccumulator(DeGiorgiLadder ladder);
    void start(const TorusField& field);
    void add(double t, const TorusField& field);
    DeGiorgiLadder result() const;

private:
    DeGiorgiLadder ladder_;
    std::vector<double> supE_, D_, psi_int_, last_psi_, last_D_rate_;
    double t_ = 0.0;
};

class LadderObserver : public spde::TrajectoryObserver {
public:
    explicit LadderObserver(DeGiorgiLadder ladder) : acc_(std::move(ladder)) {}
    void on_start(const TorusField& field, const spde::SolverConfig&) override { acc_.start(field); }
    void on_step(int, double t, const TorusField& field, const spde::StepResult&) override { acc_.add(t, field); }
    DeGiorgiLadder result() const { return acc_.result(); }

private:
    LadderAccumulator acc_;
};

DeGiorgiLadder ladder_check(const TrajectoryRecord& rec, const DeGiorgiLadder& ladder);

struct TailObservation {
    double B_T = 0.0;       // sup over time, cells and species
    bool censored = false;  // trajectory stopped at the threshold
};

struct TailReport {
    std::vector<double> xi_grid;
    std::vector<double> survival_naive;
    std::vector<double> survival_km;  // Kaplan-Meier, censored paths right-censored at B_T
    std::size_t n = 0, censored = 0;
    double theta_mean = 0.0, theta_se = 0.0, theta_ci_lo = 0.0, theta_ci_hi = 0.0;
    double theta_uncensored_mean = 0.0;
    // nonnegative least squares fit of survival on
    // { 1/sqrt(ln(1+xi)), exp(-delta(xi)^{-(3-2 rho)}), exp(-xi^3) }, empirical only
    std::array<double, 3> shape_coeffs{};
    double shape_rms = 0.0;
};

TailReport tail_and_theta(std::span<const TailObservation> obs, std::span<const double> xi_grid, double C6 = 1.0,
                          double rho_under = 1.25);

}  // namespace srd::diagnostics
