#include "srd/wellmixed/wellmixed.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace srd::wellmixed {

using kinetics::stoich;

Vec4 JumpState::concentrations() const {
    const double inv = 1.0 / static_cast<double>(N);
    return {counts[0] * inv, counts[1] * inv, counts[2] * inv, counts[3] * inv};
}

void JumpState::validate() const {
    if (N < 1) throw std::invalid_argument("JumpState: N must be >= 1");
    for (auto c : counts) {
        if (c < 0) throw std::invalid_argument("JumpState: negative count");
    }
    if (!std::isfinite(t)) throw std::invalid_argument("JumpState: non-finite time");
}

namespace {

template <class OnEvent>
JumpState ssa_run(const JumpState& initial, const ReactionNetwork& rates, double T, Rng& rng, OnEvent&& on_event) {
    initial.validate();
    rates.validate();
    if (!(T > 0.0)) throw std::invalid_argument("ssa_simulate: T must be > 0");
    JumpState s = initial;
    const double end = initial.t + T;
    const double invN = 1.0 / static_cast<double>(s.N);
    std::exponential_distribution<double> expo(1.0);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double t = initial.t;
    for (;;) {
        const double rf = rates.lambda_fwd * static_cast<double>(s.counts[0]) * static_cast<double>(s.counts[2]) * invN;
        const double rb = rates.lambda_bwd * static_cast<double>(s.counts[1]) * static_cast<double>(s.counts[3]) * invN;
        const double r = rf + rb;
        if (!(r > 0.0)) break;  // absorbing
        const double tau = expo(rng) / r;
        if (t + tau > end) break;
        t += tau;
        const std::int64_t dir = (uni(rng) * r < rf) ? 1 : -1;
        s.counts[0] -= dir;
        s.counts[1] += dir;
        s.counts[2] -= dir;
        s.counts[3] += dir;
        s.t = t;
        on_event(s);
    }
    s.t = end;
    return s;
}

}  // namespace

std::vector<JumpState> ssa_simulate(const JumpState& initial, const ReactionNetwork& rates, double T, Rng& rng) {
    std::vector<JumpState> path{initial};
    JumpState last = ssa_run(initial, rates, T, rng, [&path](const JumpState& s) { path.push_back(s); });
    path.push_back(last);
    return path;
}

std::vector<JumpState> ssa_simulate(const JumpState& initial, const ReactionNetwork& rates, double T,
                                    std::uint64_t seed) {
    Rng rng(seed);
    return ssa_simulate(initial, rates, T, rng);
}

JumpState ssa_final_state(const JumpState& initial, const ReactionNetwork& rates, double T, Rng& rng) {
    return ssa_run(initial, rates, T, rng, [](const JumpState&) {});
}

std::string to_string(Scaling s) { return s == Scaling::Paper ? "paper" : "taylor_exact"; }

Scaling scaling_from_string(const std::string& s) {
    if (s == "paper") return Scaling::Paper;
    if (s == "taylor_exact") return Scaling::TaylorExact;
    throw std::invalid_argument("unknown scaling '" + s + "' (expected paper or taylor_exact)");
}

double SdeConfig::amplitude() const {
    if (std::isinf(N)) return 0.0;
    return std::sqrt((scaling == Scaling::Paper ? 2.0 : 1.0) / N);
}

void SdeConfig::validate() const {
    if (!(N >= 1.0)) throw std::invalid_argument("SdeConfig: N must be >= 1");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("SdeConfig: dt must be > 0");
    if (record_every < 1) throw std::invalid_argument("SdeConfig: record_every must be >= 1");
    if (substeps < 1) throw std::invalid_argument("SdeConfig: substeps must be >= 1");
}

LangevinTrajectory langevin_simulate(const SpeciesVector& a0, const SdeConfig& cfg, const ReactionNetwork& rates,
                                     double T) {
    cfg.validate();
    rates.validate();
    if (!(T > 0.0)) throw std::invalid_argument("langevin_simulate: T must be > 0");
    const int steps = std::max(1, static_cast<int>(std::ceil(T / cfg.dt - 1e-9)));
    const double h = T / steps;
    const double c = cfg.amplitude();
    const double sub_sd = std::sqrt(h / cfg.substeps);
    Rng rng(cfg.rng_seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    LangevinTrajectory out;
    Vec4 a = a0.values();
    out.times.push_back(0.0);
    out.states.push_back(a);
    for (int n = 1; n <= steps; ++n) {
        const double r = rates.lambda_fwd * a[0] * a[2] - rates.lambda_bwd * a[1] * a[3];
        double incr = r * h;
        if (c > 0.0) {
            double dbf = 0.0, dbb = 0.0;
            for (int k = 0; k < cfg.substeps; ++k) {
                dbf += sub_sd * normal(rng);
                dbb += sub_sd * normal(rng);
            }
            const double ef = rates.lambda_fwd * std::max(a[0], 0.0) * std::max(a[2], 0.0);
            const double eb = rates.lambda_bwd * std::max(a[1], 0.0) * std::max(a[3], 0.0);
            incr += c * (std::sqrt(ef) * dbf - std::sqrt(eb) * dbb);
        }
        for (int i = 0; i < 4; ++i) a[static_cast<std::size_t>(i)] += stoich(i) * incr;
        if (cfg.clamp) {
            for (double& v : a) {
                if (v < 0.0) {
                    out.clamped_mass -= v;
                    ++out.clamp_events;
                    v = 0.0;
                }
            }
        }
        bool finite = true;
        for (double v : a) finite = finite && std::isfinite(v);
        if (!finite) {
            out.ok = false;
            out.error = "non-finite state at step " + std::to_string(n);
            out.times.push_back(n * h);
            out.states.push_back(a);
            return out;
        }
        if (n % cfg.record_every == 0 || n == steps) {
            out.times.push_back(n * h);
            out.states.push_back(a);
        }
    }
    return out;
}

LangevinTrajectory langevin_simulate(const SpeciesVector& a0, const SdeConfig& cfg, double T) {
    return langevin_simulate(a0, cfg, ReactionNetwork{}, T);
}

std::vector<Vec4> ode_trajectory(const Vec4& a0, const ReactionNetwork& rates, double T, double dt) {
    if (!(T > 0.0) || !(dt > 0.0)) throw std::invalid_argument("ode_trajectory: T and dt must be > 0");
    const int steps = std::max(1, static_cast<int>(std::ceil(T / dt - 1e-9)));
    const double h = T / steps;
    auto f = [&rates](const Vec4& a) {
        const double r = rates.lambda_fwd * a[0] * a[2] - rates.lambda_bwd * a[1] * a[3];
        return Vec4{-r, r, -r, r};
    };
    auto axpy = [](const Vec4& a, double s, const Vec4& k) {
        return Vec4{a[0] + s * k[0], a[1] + s * k[1], a[2] + s * k[2], a[3] + s * k[3]};
    };
    std::vector<Vec4> out{a0};
    Vec4 a = a0;
    for (int n = 0; n < steps; ++n) {
        const Vec4 k1 = f(a);
        const Vec4 k2 = f(axpy(a, 0.5 * h, k1));
        const Vec4 k3 = f(axpy(a, 0.5 * h, k2));
        const Vec4 k4 = f(axpy(a, h, k3));
        for (std::size_t i = 0; i < 4; ++i) a[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        out.push_back(a);
    }
    return out;
}

GeneratorExpansion apply_generator(const Polynomial& phi, const SpeciesVector& a, double N,
                                   const ReactionNetwork& rates, Scaling convention) {
    if (!(N >= 1.0)) throw std::invalid_argument("apply_generator: N must be >= 1");
    if (phi.degree() > 4) throw std::invalid_argument("apply_generator: degree must be <= 4");
    const Vec4& v = a.values();
    const Vec4 l{-1.0, 1.0, -1.0, 1.0};
    const Vec4 lm{1.0, -1.0, 1.0, -1.0};
    const double w2 = convention == Scaling::TaylorExact ? 1.0 : 2.0;
    GeneratorExpansion g;
    auto channel = [&](double density, const Vec4& dir) {
        const auto c = phi.shift_coefficients(v, dir);
        // N * (phi(a + dir/N) - phi(a)) = sum_{k>=1} c_k N^{1-k}
        double exact = 0.0;
        double scale = 1.0;
        for (int k = 1; k <= 4; ++k) {
            exact += c[static_cast<std::size_t>(k)] * scale;
            scale /= N;
        }
        g.exact += density * exact;
        g.first_order += density * (c[1] + w2 * c[2] / N);
    };
    channel(rates.lambda_fwd * v[0] * v[2], l);
    channel(rates.lambda_bwd * v[1] * v[3], lm);
    g.remainder = g.exact - g.first_order;
    return g;
}

double exact_coordinate_mean(const Vec4& a0, const ReactionNetwork& rates, double T) {
    if (rates.lambda_fwd != rates.lambda_bwd) {
        throw std::invalid_argument("exact_coordinate_mean: needs lambda_fwd == lambda_bwd");
    }
    const double lam = rates.lambda_fwd;
    const double mu0 = lam * (a0[0] * a0[2] - a0[1] * a0[3]);
    const double k = lam * (a0[0] + a0[1] + a0[2] + a0[3]);
    if (k == 0.0) return mu0 * T;
    return mu0 / k * -std::expm1(-k * T);
}

double euler_coordinate_mean(const Vec4& a0, const ReactionNetwork& rates, double dt, int steps) {
    if (rates.lambda_fwd != rates.lambda_bwd) {
        throw std::invalid_argument("euler_coordinate_mean: needs lambda_fwd == lambda_bwd");
    }
    const double lam = rates.lambda_fwd;
    const double mu0 = lam * (a0[0] * a0[2] - a0[1] * a0[3]);
    const double k = lam * (a0[0] + a0[1] + a0[2] + a0[3]);
    double m = 0.0;
    for (int n = 0; n < steps; ++n) m += dt * (mu0 - k * m);
    return m;
}

}  // namespace srd::wellmixed
