#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "srd/parallel.hpp"
#include "srd/stats.hpp"
#include "srd/wellmixed/wellmixed.hpp"

namespace srd::wellmixed {

namespace {

struct Estimate {
    double mean = 0.0, se = 0.0;
    double plain_mean = 0.0, plain_se = 0.0;
};

// Control variate on the reaction coordinate x, whose exact mean is known.
Estimate estimate(const std::vector<double>& phi, const std::vector<double>& x, std::optional<double> x_mean) {
    Estimate e;
    const auto plain = stats::mean_se(phi);
    e.plain_mean = plain.mean;
    e.plain_se = plain.se;
    e.mean = plain.mean;
    e.se = plain.se;
    if (!x_mean) return e;
    const std::size_t n = phi.size();
    double mp = 0.0, mx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mp += phi[i];
        mx += x[i];
    }
    mp /= n;
    mx /= n;
    double sxx = 0.0, sxp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxp += (x[i] - mx) * (phi[i] - mp);
    }
    const double beta = sxx > 0.0 ? sxp / sxx : 0.0;
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = phi[i] - beta * (x[i] - *x_mean);
    const auto cv = stats::mean_se(y);
    e.mean = cv.mean;
    e.se = cv.se;
    return e;
}

std::string n_label(double N) {
    std::ostringstream os;
    os.precision(17);
    os << N;
    return os.str();
}

}  // namespace

const WeakErrorRow& WeakErrorTable::at(double N, Scaling s) const {
    for (const auto& r : rows) {
        if (r.N == N && r.scaling == s) return r;
    }
    throw std::out_of_range("WeakErrorTable: no row for N=" + n_label(N));
}

WeakErrorTable weak_error_study(const Polynomial& phi, const SpeciesVector& a0, const std::vector<double>& N_list,
                                std::size_t trials, double T, const WeakErrorConfig& cfg) {
    if (N_list.empty()) throw std::invalid_argument("weak_error_study: N_list must not be empty");
    if (trials < 100) throw std::invalid_argument("weak_error_study: trials must be >= 100");
    if (!(T > 0.0)) throw std::invalid_argument("weak_error_study: T must be > 0");
    const std::size_t sde_trials = cfg.sde_trials ? cfg.sde_trials : trials;
    const bool use_cv = cfg.control_variate && cfg.rates.lambda_fwd == cfg.rates.lambda_bwd;
    const int steps = std::max(1, static_cast<int>(std::ceil(T / cfg.dt - 1e-9)));
    const double h = T / steps;

    WeakErrorTable table;
    for (double N : N_list) {
        if (!(N >= 1.0) || N != std::floor(N)) throw std::invalid_argument("weak_error_study: N must be a positive integer");
        JumpState init;
        init.N = static_cast<std::int64_t>(N);
        for (std::size_t i = 0; i < 4; ++i) init.counts[i] = std::llround(N * a0[static_cast<int>(i)]);
        const Vec4 start = init.concentrations();
        const SpeciesVector start_sv(start);

        std::vector<double> phi_ssa(trials), x_ssa(trials);
        const std::string ssa_label = "wellmixed/ssa/N=" + n_label(N);
        parallel_for(trials, cfg.workers, [&](std::size_t p) {
            Rng rng(derive_seed(cfg.master_seed, p, ssa_label));
            const JumpState end = ssa_final_state(init, cfg.rates, T, rng);
            const Vec4 a = end.concentrations();
            phi_ssa[p] = phi(a);
            x_ssa[p] = static_cast<double>(end.counts[1] - init.counts[1]) / N;
        });
        std::optional<double> m_ssa, m_em;
        if (use_cv) {
            m_ssa = exact_coordinate_mean(start, cfg.rates, T);
            m_em = euler_coordinate_mean(start, cfg.rates, h, steps);
        }
        const Estimate ssa = estimate(phi_ssa, x_ssa, m_ssa);

        for (Scaling sc : {Scaling::TaylorExact, Scaling::Paper}) {
            std::vector<double> phi_sde(sde_trials), x_sde(sde_trials);
            const std::string sde_label = "wellmixed/sde/" + to_string(sc) + "/N=" + n_label(N);
            parallel_for(sde_trials, cfg.workers, [&](std::size_t p) {
                SdeConfig sde;
                sde.N = N;
                sde.dt = cfg.dt;
                sde.scaling = sc;
                sde.clamp = false;
                sde.record_every = steps;
                sde.rng_seed = derive_seed(cfg.master_seed, p, sde_label);
                const auto tr = langevin_simulate(start_sv, sde, cfg.rates, T);
                const Vec4& a = tr.states.back();
                phi_sde[p] = tr.ok ? phi(a) : NAN;
                x_sde[p] = a[1] - start[1];
            });
            const Estimate sde = estimate(phi_sde, x_sde, m_em);
            WeakErrorRow row;
            row.N = N;
            row.scaling = sc;
            row.estimator = use_cv ? "control_variate" : "plain";
            row.ssa_mean = ssa.mean;
            row.ssa_se = ssa.se;
            row.sde_mean = sde.mean;
            row.sde_se = sde.se;
            row.error = std::abs(ssa.mean - sde.mean);
            row.error_se = std::hypot(ssa.se, sde.se);
            row.plain_error = std::abs(ssa.plain_mean - sde.plain_mean);
            row.plain_error_se = std::hypot(ssa.plain_se, sde.plain_se);
            row.inconclusive = row.error < 2.0 * row.error_se;
            table.rows.push_back(row);
        }
    }

    auto fit = [&](Scaling sc) {
        std::vector<double> ns, es;
        for (const auto& r : table.rows) {
            if (r.scaling == sc) {
                ns.push_back(r.N);
                es.push_back(r.error);
            }
        }
        if (ns.size() < 2) return 0.0;
        try {
            return -stats::loglog_slope(ns, es);
        } catch (const std::invalid_argument&) {
            return 0.0;
        }
    };
    table.fitted_order_taylor = fit(Scaling::TaylorExact);
    table.fitted_order_paper = fit(Scaling::Paper);
    return table;
}

}  // namespace srd::wellmixed
