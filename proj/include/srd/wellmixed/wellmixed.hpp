#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "srd/kinetics/species.hpp"
#include "srd/rng.hpp"
#include "srd/wellmixed/polynomial.hpp"

namespace srd::wellmixed {

using kinetics::ReactionNetwork;
using kinetics::SpeciesVector;

struct JumpState {
    std::array<std::int64_t, 4> counts{};
    std::int64_t N = 1;
    double t = 0.0;

    Vec4 concentrations() const;
    void validate() const;
};

// Gillespie direct method. The returned list starts with `initial`, holds one
// entry per event with t <= T and ends with the state held at time T.
std::vector<JumpState> ssa_simulate(const JumpState& initial, const ReactionNetwork& rates, double T, Rng& rng);
std::vector<JumpState> ssa_simulate(const JumpState& initial, const ReactionNetwork& rates, double T,
                                    std::uint64_t seed);
// Same dynamics without recording; returns the state at T.
JumpState ssa_final_state(const JumpState& initial, const ReactionNetwork& rates, double T, Rng& rng);

enum class Scaling { Paper, TaylorExact };
std::string to_string(Scaling s);
Scaling scaling_from_string(const std::string& s);

struct SdeConfig {
    double N = 100.0;  // +inf switches the noise off
    double dt = 1e-3;
    Scaling scaling = Scaling::TaylorExact;
    std::uint64_t rng_seed = 0;
    bool clamp = false;
    int record_every = 1;  // keep every k-th step (the final state is always kept)
    // Each Brownian increment is summed from this many N(0, dt/substeps)
    // draws, so a run at dt with substeps=2 shares its path with a run at
    // dt/2 with substeps=1 from the same seed.
    int substeps = 1;

    double amplitude() const;  // sqrt(2/N) or sqrt(1/N)
    void validate() const;
};

struct LangevinTrajectory {
    std::vector<double> times;
    std::vector<Vec4> states;
    double clamped_mass = 0.0;
    std::int64_t clamp_events = 0;
    bool ok = true;
    std::string error;
};

LangevinTrajectory langevin_simulate(const SpeciesVector& a0, const SdeConfig& cfg, const ReactionNetwork& rates,
                                     double T);
LangevinTrajectory langevin_simulate(const SpeciesVector& a0, const SdeConfig& cfg, double T);

// Classical RK4 for da/dt = f(a); returns the states at t = 0, dt, ..., T.
std::vector<Vec4> ode_trajectory(const Vec4& a0, const ReactionNetwork& rates, double T, double dt);

struct GeneratorExpansion {
    double exact = 0.0;
    double first_order = 0.0;
    double remainder = 0.0;
};

// Exact jump generator versus its first-order expansion under the given
// convention: TaylorExact keeps the 1/2 from Taylor's formula in the second
// order term, Paper drops it.
GeneratorExpansion apply_generator(const Polynomial& phi, const SpeciesVector& a, double N,
                                   const ReactionNetwork& rates = {}, Scaling convention = Scaling::TaylorExact);

// Mean of the reaction coordinate x(T) (a = a0 + x * stoich) when
// lambda_fwd == lambda_bwd, where the mean equation is closed and linear.
double exact_coordinate_mean(const Vec4& a0, const ReactionNetwork& rates, double T);
// The Euler-Maruyama counterpart without clamping, after `steps` steps of size dt.
double euler_coordinate_mean(const Vec4& a0, const ReactionNetwork& rates, double dt, int steps);

struct WeakErrorConfig {
    double dt = 1e-2;
    std::size_t sde_trials = 0;  // 0: same as the SSA trial count
    std::uint64_t master_seed = 1;
    bool control_variate = true;
    int workers = 1;
    ReactionNetwork rates;
};

struct WeakErrorRow {
    double N = 0.0;
    Scaling scaling = Scaling::TaylorExact;
    std::string estimator;  // "control_variate" or "plain"
    double ssa_mean = 0.0, ssa_se = 0.0;
    double sde_mean = 0.0, sde_se = 0.0;
    double error = 0.0, error_se = 0.0;
    double plain_error = 0.0, plain_error_se = 0.0;
    bool inconclusive = false;
};

struct WeakErrorTable {
    std::vector<WeakErrorRow> rows;
    double fitted_order_taylor = 0.0;
    double fitted_order_paper = 0.0;

    const WeakErrorRow& at(double N, Scaling s) const;
};

WeakErrorTable weak_error_study(const Polynomial& phi, const SpeciesVector& a0, const std::vector<double>& N_list,
                                std::size_t trials, double T, const WeakErrorConfig& cfg = {});

}  // namespace srd::wellmixed
