#include "srd/spde/solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace srd::spde {

using kinetics::NoiseKind;
using kinetics::stoich;

std::string to_string(Scheme s) { return s == Scheme::Explicit ? "explicit" : "semi_implicit"; }

Scheme scheme_from_string(const std::string& s) {
    if (s == "semi_implicit") return Scheme::SemiImplicit;
    if (s == "explicit") return Scheme::Explicit;
    throw std::invalid_argument("unknown scheme '" + s + "' (expected semi_implicit or explicit)");
}

std::string to_string(TrajectoryStatus s) {
    switch (s) {
        case TrajectoryStatus::Completed: return "completed";
        case TrajectoryStatus::Stopped: return "stopped";
        case TrajectoryStatus::Failed: return "failed";
    }
    return "unknown";
}

int SolverConfig::steps() const {
    const double q = T / dt;
    return static_cast<int>(std::llround(q));
}

double SolverConfig::effective_truncation() const {
    if (trunc_n > 0.0) return trunc_n;
    return noise.kind == NoiseKind::Truncated ? noise.trunc_n : 0.0;
}

void SolverConfig::validate(const TorusGrid& grid, const Vec4& kappa) const {
    grid.validate();
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("solver.dt must be > 0");
    if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("solver.T must be > 0");
    const double q = T / dt;
    if (q < 0.5 || std::abs(q - std::round(q)) > 1e-6 * std::max(1.0, q)) {
        throw std::invalid_argument("solver.T must be an integer multiple of solver.dt");
    }
    noise.validate();
    rates.validate();
    if (trunc_n != 0.0 && !(trunc_n >= 1.0)) throw std::invalid_argument("solver.trunc_n must be 0 or >= 1");
    if (trunc_n > 0.0 && noise.kind == NoiseKind::Truncated && trunc_n != noise.trunc_n) {
        throw std::invalid_argument("solver.trunc_n conflicts with the truncated noise level");
    }
    if (!(stop_threshold > 0.0)) throw std::invalid_argument("solver.stop_threshold must be > 0");
    if (diagnostic_stride < 1) throw std::invalid_argument("solver.diagnostic_stride must be >= 1");
    double kmax = 0.0;
    for (double k : kappa) {
        if (!(k > 0.0)) throw std::invalid_argument("kappa must be > 0 for every species");
        kmax = std::max(kmax, k);
    }
    if (scheme == Scheme::Explicit) {
        const double gate = grid.h() * grid.h() / (2.0 * grid.d * kmax);
        if (dt > gate) {
            throw std::invalid_argument("explicit stability gate violated: dt = " + std::to_string(dt) +
                                        " > h^2/(2 d max kappa) = " + std::to_string(gate));
        }
    }
}

GaussianIncrements::GaussianIncrements(std::uint64_t seed, double dt, int substeps)
    : rng_(seed), sub_sd_(std::sqrt(dt / substeps)), substeps_(substeps) {
    if (!(dt > 0.0) || substeps < 1) throw std::invalid_argument("GaussianIncrements: need dt > 0, substeps >= 1");
}

void GaussianIncrements::next(std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (int s = 0; s < substeps_; ++s) {
        for (double& v : out) v += sub_sd_ * normal_(rng_);
    }
}

Stepper::Stepper(const TorusGrid& grid, const Vec4& kappa, const SolverConfig& cfg)
    : cfg_(cfg), grid_(grid), kappa_(kappa) {
    cfg_.validate(grid_, kappa_);
    if (cfg_.scheme == Scheme::SemiImplicit) implicit_.emplace(grid_, kappa_, cfg_.dt);
    lap_.resize(grid_.cells());
}

StepResult Stepper::step(TorusField& field, std::span<const double> increments) {
    if (!(field.grid() == grid_)) throw std::invalid_argument("Stepper: grid mismatch");
    StepResult res;
    res.channels = cfg_.noise.channels;
    const double dt = cfg_.dt;

    for (int s = 0; s < 4; ++s) {
        auto u = field.species(s);
        if (implicit_) {
            implicit_->solve(s, u);
        } else {
            apply_laplacian(grid_, u, lap_);
            const double c = dt * kappa_[static_cast<std::size_t>(s)];
            for (std::size_t k = 0; k < u.size(); ++k) u[k] += c * lap_[k];
        }
    }
    if (!cfg_.reaction) return res;

    const bool noisy = cfg_.noise_active();
    if (noisy && increments.size() < static_cast<std::size_t>(res.channels)) {
        throw std::invalid_argument("Stepper: too few noise increments");
    }
    for (int k = 0; k < res.channels && noisy; ++k) res.increments[static_cast<std::size_t>(k)] = increments[static_cast<std::size_t>(k)];
    const double db0 = noisy ? increments[0] : 0.0;
    const double db1 = noisy ? increments[1] : 0.0;
    const double level = cfg_.effective_truncation();
    const auto& rates = cfg_.rates;

    double clamped = 0.0;
    for (std::size_t c = 0; c < grid_.cells(); ++c) {
        Vec4 a = field.at(c);
        double chi = 1.0;
        if (level > 0.0) chi = kinetics::cutoff_chi(kinetics::detail::norm(a), level);
        const double r = chi * chi * (rates.lambda_fwd * a[0] * a[2] - rates.lambda_bwd * a[1] * a[3]);
        Vec4 c0{}, c1{};
        if (noisy) kinetics::detail::noise_columns(a, cfg_.noise, chi, c0, c1);
        for (std::size_t i = 0; i < 4; ++i) {
            double v = a[i] + stoich(static_cast<int>(i)) * r * dt;
            if (noisy) v += c0[i] * db0 + c1[i] * db1;
            if (!std::isfinite(v)) throw std::runtime_error("non-finite value in cell " + std::to_string(c));
            if (v < 0.0) {
                clamped -= v;
                ++res.clamp_events;
                v = 0.0;
            }
            a[i] = v;
        }
        field.set(c, a);
    }
    res.clamp_mass = clamped * grid_.cell_volume();
    return res;
}

StepResult Stepper::step(TorusField& field, IncrementSource& source) {
    std::vector<double> inc(static_cast<std::size_t>(cfg_.noise.channels), 0.0);
    if (cfg_.noise_active()) source.next(inc);
    return step(field, inc);
}

StepOutput step(const TorusField& field, const SolverConfig& cfg, IncrementSource& source) {
    Stepper stepper(field.grid(), field.kappa(), cfg);
    StepOutput out{field, 0.0, {}};
    std::vector<double> inc(static_cast<std::size_t>(cfg.noise.channels), 0.0);
    if (cfg.noise_active()) source.next(inc);
    const StepResult r = stepper.step(out.field, inc);
    out.clamp_mass = r.clamp_mass;
    out.noise_increments = inc;
    return out;
}

double sup_norm(const TorusField& field) {
    double m = 0.0;
    for (std::size_t c = 0; c < field.grid().cells(); ++c) m = std::max(m, kinetics::detail::norm(field.at(c)));
    return m;
}

double max_species_value(const TorusField& field) {
    double m = 0.0;
    for (int i = 0; i < 4; ++i) {
        for (double v : field.species(i)) m = std::max(m, v);
    }
    return m;
}

TrajectoryRecord simulate(const TorusField& a0, const SolverConfig& cfg, std::span<TrajectoryObserver* const> observers,
                          IncrementSource* source) {
    a0.validate();
    cfg.validate(a0.grid(), a0.kappa());
    TrajectoryRecord rec;
    rec.seed = cfg.seed;
    rec.seed_lineage = "seed=" + std::to_string(cfg.seed);

    TorusField field = a0;
    Stepper stepper(a0.grid(), a0.kappa(), cfg);
    GaussianIncrements default_source(cfg.seed, cfg.dt);
    IncrementSource* src = source ? source : &default_source;
    const int steps = cfg.steps();
    const std::size_t channels = static_cast<std::size_t>(cfg.noise.channels);

    double sn = sup_norm(field);
    rec.times.push_back(0.0);
    rec.sup_norms.push_back(sn);
    rec.max_species_value = max_species_value(field);
    for (auto* obs : observers) obs->on_start(field, cfg);
    if (cfg.keep_fields) rec.fields.push_back(field);
    if (sn > cfg.stop_threshold) {
        rec.status = TrajectoryStatus::Stopped;
        rec.hitting_time = 0.0;
        rec.final_field = field;
        return rec;
    }

    std::vector<double> inc(channels, 0.0);
    for (int n = 1; n <= steps; ++n) {
        if (cfg.noise_active()) src->next(inc);
        StepResult res;
        try {
            res = stepper.step(field, inc);
        } catch (const std::exception& e) {
            rec.status = TrajectoryStatus::Failed;
            rec.error = std::string("step ") + std::to_string(n) + ": " + e.what();
            break;
        }
        const double t = n * cfg.dt;
        rec.steps_taken = n;
        rec.t_end = t;
        rec.clamp_mass += res.clamp_mass;
        rec.clamp_events += res.clamp_events;
        sn = sup_norm(field);
        rec.max_species_value = std::max(rec.max_species_value, max_species_value(field));
        for (auto* obs : observers) obs->on_step(n, t, field, res);
        if (cfg.keep_fields) {
            rec.increments.push_back(inc);
            rec.fields.push_back(field);
        }
        const bool stop = sn > cfg.stop_threshold;
        if (n % cfg.diagnostic_stride == 0 || n == steps || stop) {
            rec.times.push_back(t);
            rec.sup_norms.push_back(sn);
        }
        if (stop) {
            rec.status = TrajectoryStatus::Stopped;
            rec.hitting_time = t;
            break;
        }
    }
    rec.final_field = std::move(field);
    return rec;
}

}  // namespace srd::spde
