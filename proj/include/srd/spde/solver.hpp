#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "srd/kinetics/species.hpp"
#include "srd/rng.hpp"
#include "srd/spde/diffusion.hpp"
#include "srd/spde/grid.hpp"

namespace srd::spde {

using kinetics::kMaxChannels;
using kinetics::NoiseModel;
using kinetics::ReactionNetwork;

enum class Scheme { SemiImplicit, Explicit };
std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

struct SolverConfig {
    double dt = 1e-3;
    double T = 0.1;
    NoiseModel noise;
    ReactionNetwork rates;
    double trunc_n = 0.0;  // level for f^n, sigma^n; 0 = untruncated
    Scheme scheme = Scheme::SemiImplicit;
    double stop_threshold = std::numeric_limits<double>::infinity();
    std::uint64_t seed = 0;
    bool reaction = true;      // false: pure diffusion (noise is skipped too)
    int diagnostic_stride = 1;  // observers' record stride, in steps
    bool keep_fields = false;   // store fields and increments at every step

    int steps() const;
    // Level acting on drift and noise: trunc_n, else the Truncated noise level.
    double effective_truncation() const;
    bool noise_active() const { return reaction && noise.nu > 0.0; }
    void validate(const TorusGrid& grid, const Vec4& kappa) const;
};

// Source of per-step Wiener increments, one per channel.
class IncrementSource {
public:
    virtual ~IncrementSource() = default;
    virtual void next(std::span<double> out) = 0;
};

// N(0, dt) increments from a seeded stream; each one is the sum of
// `substeps` draws of N(0, dt/substeps), which couples a run at dt with
// substeps = 2 to a run at dt/2 with substeps = 1 on the same seed.
class GaussianIncrements : public IncrementSource {
public:
    GaussianIncrements(std::uint64_t seed, double dt, int substeps = 1);
    void next(std::span<double> out) override;

private:
    Rng rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    double sub_sd_;
    int substeps_;
};

struct StepResult {
    double clamp_mass = 0.0;  // h^d * sum of removed negative parts
    std::size_t clamp_events = 0;
    std::array<double, kMaxChannels> increments{};
    int channels = 0;
};

class Stepper {
public:
    Stepper(const TorusGrid& grid, const Vec4& kappa, const SolverConfig& cfg);

    // Advances `field` by one step using the given channel increments.
    StepResult step(TorusField& field, std::span<const double> increments);
    StepResult step(TorusField& field, IncrementSource& source);

    const SolverConfig& config() const { return cfg_; }

private:
    SolverConfig cfg_;
    TorusGrid grid_;
    Vec4 kappa_;
    std::optional<DiffusionSolver> implicit_;
    std::vector<double> lap_;
};

struct StepOutput {
    TorusField field;
    double clamp_mass = 0.0;
    std::vector<double> noise_increments;
};

// One step from a copy of `field`.
StepOutput step(const TorusField& field, const SolverConfig& cfg, IncrementSource& source);

class TrajectoryObserver {
public:
    virtual ~TrajectoryObserver() = default;
    virtual void on_start(const TorusField& field, const SolverConfig& cfg) = 0;
    // Called after every step with the post-step field.
    virtual void on_step(int step, double t, const TorusField& field, const StepResult& res) = 0;
};

enum class TrajectoryStatus { Completed, Stopped, Failed };
std::string to_string(TrajectoryStatus s);

struct TrajectoryRecord {
    TrajectoryStatus status = TrajectoryStatus::Completed;
    std::string error;
    std::uint64_t seed = 0;
    std::string seed_lineage;
    int steps_taken = 0;
    double t_end = 0.0;
    std::optional<double> hitting_time;  // first t with sup_norm > stop_threshold
    double clamp_mass = 0.0;
    std::size_t clamp_events = 0;
    double max_species_value = 0.0;  // running sup over time, cells and species
    // recorded every diagnostic_stride steps, including t = 0 and the last step
    std::vector<double> times;
    std::vector<double> sup_norms;
    // every step when keep_fields: fields[n] at t_n, increments[n] = dB over [t_n, t_{n+1}]
    std::vector<TorusField> fields;
    std::vector<std::vector<double>> increments;
    std::optional<TorusField> final_field;  // state at t_end
};

// Default noise: GaussianIncrements(cfg.seed, cfg.dt).
TrajectoryRecord simulate(const TorusField& a0, const SolverConfig& cfg,
                          std::span<TrajectoryObserver* const> observers = {}, IncrementSource* source = nullptr);

double sup_norm(const TorusField& field);
double max_species_value(const TorusField& field);

}  // namespace srd::spde
