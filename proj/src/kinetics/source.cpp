#include "srd/kinetics/source.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "srd/kinetics/entropy.hpp"
#include "srd/rng.hpp"

namespace srd::kinetics {

double source_term(const SpeciesVector& a, const NoiseModel& m, double xi) {
    if (!(xi >= 0.0)) throw std::invalid_argument("source_term: xi must be >= 0");
    const Vec4& v = a.values();
    const double chi = (m.kind == NoiseKind::Truncated) ? cutoff_chi(a.norm(), m.trunc_n) : 1.0;
    auto log_star = [xi](double x) { return std::log1p(positive_excess(x, xi)); };
    const double r = v[0] * v[2] - v[1] * v[3];
    const double logs = log_star(v[0]) + log_star(v[2]) - log_star(v[1]) - log_star(v[3]);
    const double drift_part = -chi * chi * r * logs;

    if (m.nu == 0.0) return drift_part;
    Vec4 c0, c1;
    detail::noise_columns(v, m, chi, c0, c1);
    double noise_part = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        if (xi > 0.0 && !(v[i] > xi)) continue;
        noise_part += (c0[i] * c0[i] + c1[i] * c1[i]) / (1.0 + positive_excess(v[i], xi));
    }
    return drift_part + 0.5 * noise_part;
}

double source_ratio(const SpeciesVector& a, const NoiseModel& m) {
    double denom = 0.0;
    for (double v : a.values()) denom += phi_bar(v);
    const double s = source_term(a, m);
    if (denom == 0.0) return 0.0;
    return s / denom;
}

SourceLemmaResult check_source_lemma(std::size_t samples, double box, const NoiseModel& m, std::uint64_t seed) {
    if (samples < 1) throw std::invalid_argument("check_source_lemma: samples must be >= 1");
    if (!(box > 0.0)) throw std::invalid_argument("check_source_lemma: box must be > 0");
    m.validate();
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, box);
    SourceLemmaResult res;
    res.samples = samples;
    res.worst_ratio = -INFINITY;
    for (std::size_t k = 0; k < samples; ++k) {
        const Vec4 p{u(rng), u(rng), u(rng), u(rng)};
        const double r = source_ratio(SpeciesVector(p), m);
        if (r > res.worst_ratio) {
            res.worst_ratio = r;
            res.argmax = p;
        }
    }
    return res;
}

namespace {

// Compass search on u_i = log(1 + a_i), u_i in [0, log(1 + box)].
Vec4 refine_max(const Vec4& start, double box, const std::function<double(const Vec4&)>& f) {
    const double umax = std::log1p(box);
    Vec4 u;
    for (std::size_t i = 0; i < 4; ++i) u[i] = std::log1p(start[i]);
    auto to_a = [](const Vec4& uu) {
        Vec4 a;
        for (std::size_t i = 0; i < 4; ++i) a[i] = std::expm1(uu[i]);
        return a;
    };
    double best = f(to_a(u));
    double step = 0.25;
    while (step > 1e-12) {
        bool improved = false;
        for (std::size_t i = 0; i < 4; ++i) {
            for (double sgn : {1.0, -1.0}) {
                Vec4 trial = u;
                trial[i] = std::clamp(trial[i] + sgn * step, 0.0, umax);
                if (trial[i] == u[i]) continue;
                const double val = f(to_a(trial));
                if (val > best) {
                    best = val;
                    u = trial;
                    improved = true;
                }
            }
        }
        if (!improved) step *= 0.5;
    }
    return to_a(u);
}

}  // namespace

SourceLemmaResult calibrate_source_constant(const NoiseModel& m, double box, std::uint64_t seed) {
    if (!(box > 0.0)) throw std::invalid_argument("calibrate_source_constant: box must be > 0");
    m.validate();
    auto ratio = [&m, box](const Vec4& a) {
        Vec4 c;
        for (std::size_t i = 0; i < 4; ++i) c[i] = std::clamp(a[i], 0.0, box);
        return source_ratio(SpeciesVector(c), m);
    };

    struct Candidate {
        double value;
        Vec4 point;
    };
    std::vector<Candidate> best;
    const std::size_t keep = 16;
    auto offer = [&](const Vec4& p) {
        const double r = ratio(p);
        if (best.size() < keep || r > best.back().value) {
            best.push_back({r, p});
            std::sort(best.begin(), best.end(), [](const Candidate& x, const Candidate& y) { return x.value > y.value; });
            if (best.size() > keep) best.pop_back();
        }
    };

    std::vector<double> axis{0.0};
    const int grid = 23;
    for (int j = 0; j < grid; ++j) axis.push_back(box * std::pow(10.0, -5.0 + 5.0 * j / (grid - 1)));
    for (double a0 : axis)
        for (double a1 : axis)
            for (double a2 : axis)
                for (double a3 : axis) offer({a0, a1, a2, a3});

    Rng rng(seed);
    std::uniform_real_distribution<double> uni(0.0, box);
    std::uniform_real_distribution<double> lg(-5.0, 0.0);
    for (int k = 0; k < 200000; ++k) offer({uni(rng), uni(rng), uni(rng), uni(rng)});
    for (int k = 0; k < 200000; ++k) {
        offer({box * std::pow(10.0, lg(rng)), box * std::pow(10.0, lg(rng)), box * std::pow(10.0, lg(rng)),
               box * std::pow(10.0, lg(rng))});
    }

    SourceLemmaResult res;
    res.samples = axis.size() * axis.size() * axis.size() * axis.size() + 400000;
    res.worst_ratio = best.front().value;
    res.argmax = best.front().point;
    for (const auto& c : best) {
        const Vec4 p = refine_max(c.point, box, ratio);
        const double r = ratio(p);
        if (r > res.worst_ratio) {
            res.worst_ratio = r;
            res.argmax = p;
        }
    }
    return res;
}

TruncationComparison compare_truncated_source(std::size_t samples, double box, const NoiseModel& base, double level,
                                              std::uint64_t seed) {
    if (base.kind != NoiseKind::Smoothed) throw std::invalid_argument("compare_truncated_source: base must be smoothed");
    NoiseModel trunc = base;
    trunc.kind = NoiseKind::Truncated;
    trunc.trunc_n = level;
    trunc.validate();
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, box);
    TruncationComparison out;
    out.samples = samples;
    out.worst_ratio_base = -INFINITY;
    out.worst_ratio_truncated = -INFINITY;
    for (std::size_t k = 0; k < samples; ++k) {
        const SpeciesVector a(u(rng), u(rng), u(rng), u(rng));
        double denom = 0.0;
        for (double v : a.values()) denom += phi_bar(v);
        const double s = source_term(a, base);
        const double sn = source_term(a, trunc);
        const double tol = 1e-13 * (std::abs(s) + denom);
        if (sn > std::max(s, 0.0) + tol) ++out.violations;
        if (sn > s + tol) ++out.literal_exceedances;
        if (denom > 0.0) {
            out.worst_ratio_base = std::max(out.worst_ratio_base, s / denom);
            out.worst_ratio_truncated = std::max(out.worst_ratio_truncated, sn / denom);
        }
    }
    return out;
}

bool InequalityReport::all_hold() const {
    return std::all_of(checks.begin(), checks.end(), [](const InequalityCheck& c) { return c.violations == 0; });
}

double g_weight(double a) { return a <= 1.0 ? a * a * a : a * a; }

double ratio_g_psi(double a) {
    if (a == 0.0) return 0.0;
    const double p = psi(a);
    return g_weight(a) * std::log1p(a) / (p * p);
}

double ratio_psi_phi(double a) {
    if (a == 0.0) return 0.0;
    const double p = psi(a);
    const double f = phi(a);
    return p * p * std::log1p(a) / (f * f);
}

double maximize_on_log_grid(const std::function<double(double)>& f, double lo, double hi, int points) {
    if (!(lo > 0.0) || !(hi > lo) || points < 3) throw std::invalid_argument("maximize_on_log_grid: bad range");
    const double llo = std::log(lo), lhi = std::log(hi);
    std::vector<double> xs(static_cast<std::size_t>(points)), fs(xs.size());
    std::size_t arg = 0;
    for (std::size_t j = 0; j < xs.size(); ++j) {
        xs[j] = llo + (lhi - llo) * static_cast<double>(j) / (points - 1);
        fs[j] = f(std::exp(xs[j]));
        if (fs[j] > fs[arg]) arg = j;
    }
    double best = fs[arg];
    if (arg == 0 || arg + 1 == xs.size()) return best;
    // golden section on the bracketing cell pair
    double a = xs[arg - 1], b = xs[arg + 1];
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = f(std::exp(c)), fd = f(std::exp(d));
    for (int it = 0; it < 80 && (b - a) > 1e-14; ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = f(std::exp(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = f(std::exp(d));
        }
    }
    return std::max({best, fc, fd});
}

double reference_constant_g_psi() {
    static const double c = maximize_on_log_grid(ratio_g_psi, 1e-6, 1e6);
    return c;
}

double reference_constant_psi_phi() {
    static const double c = maximize_on_log_grid(ratio_psi_phi, 1e-6, 1e6);
    return c;
}

namespace {

double log_uniform(Rng& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    return std::exp(u(rng));
}

InequalityCheck run_check(const std::string& name, std::size_t samples, double reference,
                          const std::function<std::vector<double>(Rng&)>& draw,
                          const std::function<std::pair<double, double>(const std::vector<double>&)>& sides, Rng& rng,
                          double rel_tol) {
    InequalityCheck c;
    c.name = name;
    c.samples = samples;
    c.reference_constant = reference;
    for (std::size_t k = 0; k < samples; ++k) {
        const auto x = draw(rng);
        const auto [lhs, rhs] = sides(x);
        if (rhs > 0.0) c.derived_constant = std::max(c.derived_constant, lhs / rhs);
        const bool bad = (rhs > 0.0) ? (lhs > reference * rhs * (1.0 + rel_tol)) : (lhs > 0.0);
        if (bad) {
            if (c.violations == 0) c.counterexample = x;
            ++c.violations;
        }
    }
    return c;
}

}  // namespace

InequalityReport check_inequalities(std::size_t samples, std::uint64_t seed) {
    if (samples < 1) throw std::invalid_argument("check_inequalities: samples must be >= 1");
    InequalityReport rep;

    Rng r1(derive_seed(seed, 1, "ineq/cross-log"));
    rep.checks.push_back(run_check(
        "cross_log", samples, 1.0,
        [](Rng& g) {
            std::bernoulli_distribution zero(0.01);
            const double ai = zero(g) ? 0.0 : log_uniform(g, 1e-6, 1e6);
            const double aj = zero(g) ? 0.0 : log_uniform(g, 1e-6, 1e6);
            return std::vector<double>{ai, aj};
        },
        [](const std::vector<double>& x) {
            const double lhs = (1.0 + x[0]) * std::log1p(x[1]);
            return std::make_pair(lhs, phi_bar(x[0]) + phi_bar(x[1]));
        },
        r1, 1e-12));

    Rng r2(derive_seed(seed, 2, "ineq/g-psi"));
    rep.checks.push_back(run_check(
        "g_psi", samples, reference_constant_g_psi(),
        [](Rng& g) { return std::vector<double>{log_uniform(g, 1e-6, 1e6)}; },
        [](const std::vector<double>& x) {
            const double p = psi(x[0]);
            return std::make_pair(g_weight(x[0]) * std::log1p(x[0]), p * p);
        },
        r2, 1e-9));

    Rng r3(derive_seed(seed, 3, "ineq/psi-phi"));
    rep.checks.push_back(run_check(
        "psi_phi", samples, reference_constant_psi_phi(),
        [](Rng& g) { return std::vector<double>{log_uniform(g, 1e-6, 1e6)}; },
        [](const std::vector<double>& x) {
            const double p = psi(x[0]);
            const double f = phi(x[0]);
            return std::make_pair(p * p * std::log1p(x[0]), f * f);
        },
        r3, 1e-9));

    for (int alpha : {1, 2}) {
        Rng r4(derive_seed(seed, 4 + static_cast<std::uint64_t>(alpha), "ineq/level-indicator"));
        rep.checks.push_back(run_check(
            "level_indicator_alpha" + std::to_string(alpha), samples, 1.0,
            [](Rng& g) {
                std::uniform_real_distribution<double> u(0.0, 1.0);
                const double xi = log_uniform(g, 1e-2, 1e3);
                const double zeta = xi * u(g);
                const double a = u(g) * (xi + 3.0 * (xi - zeta) + 2.0);
                return std::vector<double>{a, xi, zeta};
            },
            [alpha](const std::vector<double>& x) {
                const double a = x[0], xi = x[1], zeta = x[2];
                const double lhs = a > xi ? 1.0 : 0.0;
                const double az = positive_excess(a, zeta);
                const double q = az / (xi - zeta);
                const double rhs = az <= 1.0 ? std::pow(q, alpha + 1) : std::pow(q, alpha);
                return std::make_pair(lhs, rhs);
            },
            r4, 1e-12));
    }
    return rep;
}

}  // namespace srd::kinetics
