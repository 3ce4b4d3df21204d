#include "srd/runner/ensemble.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "srd/diagnostics/diagnostics.hpp"
#include "srd/duality/duality.hpp"
#include "srd/kinetics/source.hpp"
#include "srd/parallel.hpp"
#include "srd/rng.hpp"
#include "srd/runner/io.hpp"
#include "srd/stats.hpp"
#include "srd/wellmixed/wellmixed.hpp"

namespace srd::runner {

using nlohmann::json;

namespace {

std::string pad(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%05zu", i);
    return buf;
}

std::string join(const std::vector<double>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ";" : "") + format_double(xs[i]);
    return s;
}

std::vector<std::string> cells(std::initializer_list<double> xs) {
    std::vector<std::string> out;
    for (double x : xs) out.push_back(format_double(x));
    return out;
}

class RunDir {
public:
    RunDir(const RunConfig& cfg) : dir_(cfg.output_dir), hash_(config_hash(cfg)) {
        fs::create_directories(dir_);
        fs::remove(dir_ / "manifest.json");
    }
    const fs::path& dir() const { return dir_; }
    const std::string& hash() const { return hash_; }
    fs::path sub(const std::string& rel) const {
        const fs::path p = dir_ / rel;
        fs::create_directories(p.parent_path());
        return p;
    }

private:
    fs::path dir_;
    std::string hash_;
};

spde::TorusField initial_field(const RunConfig& cfg) {
    return spde::make_initial(cfg.torus(), cfg.grid.kappa, cfg.grid.initial);
}

// Source field for the dual problem, constant in time.
std::vector<double> eval_on_grid(const spde::TorusGrid& g, const spde::SpeciesInitial& sp) {
    std::vector<double> v(g.cells());
    for (std::size_t c = 0; c < g.cells(); ++c) {
        double s = sp.mean;
        const double x = g.coord(c, 0);
        const double y = g.d == 2 ? g.coord(c, 1) : 0.0;
        for (const auto& m : sp.modes) s += m.amplitude * std::cos(2.0 * M_PI * (m.k[0] * x + m.k[1] * y) + m.phase);
        v[c] = s;
    }
    return v;
}

void finish_run(RunRecord& rec, const RunDir& rd, const std::chrono::steady_clock::time_point& t0, double units) {
    rec.files = hash_tree(rd.dir());
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rec.throughput = rec.wall_seconds > 0.0 ? units / rec.wall_seconds : 0.0;
    json files = json::array();
    for (const auto& f : rec.files) files.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    json manifest = {{"format", "srd-run/1"},
                     {"version", rec.version},
                     {"kind", to_string(rec.config.kind)},
                     {"status", rec.status},
                     {"config", to_json(rec.config)},
                     {"config_hash", rec.config_hash},
                     {"master_seed", rec.config.master_seed},
                     {"seeds", rec.seeds},
                     {"failed", rec.failed},
                     {"metadata", rec.metadata},
                     {"summary", rec.summary},
                     {"files", files}};
    json metrics = {{"wall_seconds", rec.wall_seconds}, {"throughput_per_second", rec.throughput}, {"units", units}};
    write_json(rd.dir() / "metrics.json", metrics);
    write_json(rd.dir() / "manifest.json", manifest);
}

RunRecord new_record(const RunConfig& cfg, const RunDir& rd) {
    RunRecord rec;
    rec.config = cfg;
    rec.config_hash = rd.hash();
    rec.version = SRD_VERSION;
    rec.status = "completed";
    rec.dir = rd.dir();
    rec.metadata["nu_prime"] = cfg.solver.noise.nu;
    return rec;
}

spde::SolverConfig solver_for(const RunConfig& cfg, std::uint64_t seed) {
    spde::SolverConfig s = cfg.solver;
    s.seed = seed;
    s.diagnostic_stride = cfg.diagnostic_stride;
    return s;
}

// ---- spde / diagnostics ----

struct PathOut {
    spde::TrajectoryRecord rec;
    diagnostics::EntropyTrace trace;
    std::optional<diagnostics::DeGiorgiLadder> ladder;
};

void run_spde(const RunConfig& cfg, const RunOptions& opt, RunDir& rd, RunRecord& rec) {
    const bool diag = cfg.kind == ExperimentKind::Diagnostics;
    const double C1 = resolve_C1(cfg);
    rec.metadata["C1"] = C1;
    rec.metadata["C1_source"] = cfg.diagnostics.C1 ? "configured" : "calibrated";
    const auto a0 = initial_field(cfg);
    const double sup0 = spde::max_species_value(a0);
    const double xi = cfg.diagnostics.xi ? *cfg.diagnostics.xi : 4.0 * std::max(1.0, sup0);
    std::optional<diagnostics::DeGiorgiLadder> ladder;
    if (diag) ladder = diagnostics::DeGiorgiLadder::make(xi, cfg.diagnostics.K, cfg.diagnostics.C6, cfg.diagnostics.rho_under);

    const std::size_t P = cfg.ensemble_size;
    for (std::size_t p = 0; p < P; ++p) rec.seeds.push_back(derive_seed(cfg.master_seed, p, "spde/trajectory"));
    std::vector<PathOut> out(P);
    parallel_for(P, opt.workers, [&](std::size_t p) {
        diagnostics::EntropyObserver eo(cfg.diagnostic_stride);
        std::optional<diagnostics::LadderObserver> lo;
        std::vector<spde::TrajectoryObserver*> obs{&eo};
        if (ladder) {
            lo.emplace(*ladder);
            obs.push_back(&*lo);
        }
        const auto scfg = solver_for(cfg, rec.seeds[p]);
        out[p].rec = spde::simulate(a0, scfg, obs);
        out[p].rec.seed_lineage = "master=" + std::to_string(cfg.master_seed) + "/index=" + std::to_string(p) +
                                  "/label=spde/trajectory";
        out[p].trace = eo.trace();
        if (lo) out[p].ladder = lo->result();

        const auto resid = diagnostics::entropy_residual(out[p].trace, C1);
        CsvWriter w(rd.sub("trajectories/traj_" + pad(p) + ".csv"),
                    {"t", "sup_norm", "E", "D", "E2", "U", "int_E", "int_E2", "R"}, rd.hash());
        const auto& tr = out[p].trace;
        const auto& r = out[p].rec;
        const std::size_t rows = std::min(tr.times.size(), r.times.size());
        for (std::size_t k = 0; k < rows; ++k) {
            w.row(cells({tr.times[k], r.sup_norms[k], tr.E[k], tr.D[k], tr.E2[k], tr.U[k], tr.intE[k], tr.intE2[k], resid[k]}));
        }
        w.close();
    });

    write_snapshot(rd.sub("fields/initial.bin"), a0);
    write_json(rd.sub("fields/initial.json"),
               {{"d", cfg.grid.d}, {"M", cfg.grid.M}, {"kappa", cfg.grid.kappa}, {"t", 0.0}, {"seed", nullptr},
                {"format", "SRDF"}, {"version", kSnapshotVersion}, {"config_hash", rd.hash()}});

    CsvWriter sw(rd.sub("summary.csv"),
                 {"index", "seed", "status", "steps", "t_end", "hitting_time", "clamp_mass", "clamp_events", "B_T",
                  "censored", "E0", "E_T", "D_T", "int_E_T", "E2_0", "int_E2_T", "R_T", "D_monotone"},
                 rd.hash());
    std::vector<double> RT, e2ratio;
    std::vector<diagnostics::TailObservation> tails;
    std::size_t monotone = 0;
    json failures = json::array();
    for (std::size_t p = 0; p < P; ++p) {
        const auto& r = out[p].rec;
        const auto& tr = out[p].trace;
        if (r.status == spde::TrajectoryStatus::Failed) {
            ++rec.failed;
            failures.push_back({{"index", p}, {"error", r.error}});
        }
        bool mono = true;
        for (std::size_t k = 1; k < tr.D.size(); ++k) mono = mono && tr.D[k] >= tr.D[k - 1];
        monotone += mono ? 1 : 0;
        const double R_T = tr.E.back() + tr.D.back() - tr.E.front() - C1 * tr.intE.back();
        const bool censored = r.status == spde::TrajectoryStatus::Stopped;
        if (r.status != spde::TrajectoryStatus::Failed) {
            RT.push_back(R_T);
            if (tr.E2.front() > 0.0) e2ratio.push_back(tr.intE2.back() / tr.E2.front());
            tails.push_back({r.max_species_value, censored});
        }
        sw.row({std::to_string(p), std::to_string(r.seed), spde::to_string(r.status), std::to_string(r.steps_taken),
                format_double(r.t_end), r.hitting_time ? format_double(*r.hitting_time) : "", format_double(r.clamp_mass),
                std::to_string(r.clamp_events), format_double(r.max_species_value), censored ? "1" : "0",
                format_double(tr.E.front()), format_double(tr.E.back()), format_double(tr.D.back()),
                format_double(tr.intE.back()), format_double(tr.E2.front()), format_double(tr.intE2.back()),
                format_double(R_T), mono ? "1" : "0"});
    }
    sw.close();
    if (P > 0 && out[0].rec.final_field) {
        write_snapshot(rd.sub("fields/final_00000.bin"), *out[0].rec.final_field);
        write_snapshot_csv(rd.sub("fields/final_00000.csv"), *out[0].rec.final_field, rd.hash());
    }

    json s;
    s["paths"] = P;
    s["failed"] = rec.failed;
    s["failures"] = failures;
    s["C1"] = C1;
    if (!RT.empty()) {
        const auto m = stats::mean_se(RT);
        s["entropy_residual"] = {{"mean_R_T", m.mean}, {"se", m.se}, {"within_3se_of_nonpositive", m.mean <= 3.0 * m.se}};
    }
    s["D_monotone_paths"] = monotone;
    if (!e2ratio.empty()) {
        const auto m = stats::mean_se(e2ratio);
        const double T = cfg.solver.T;
        s["E2_propagation"] = {{"mean_int_E2_over_E2_0", m.mean},
                               {"se", m.se},
                               {"empirical_C", m.mean / std::exp(2.0 * C1 * T)},
                               {"label", "empirical"}};
    }

    if (diag) {
        CsvWriter lw(rd.sub("ladder.csv"),
                     {"index", "k", "xi_k", "sup_E", "D", "U", "U_psi", "threshold", "pass", "W", "W_scaled", "W_reference"},
                     rd.hash());
        double sob = 0.0;
        for (std::size_t p = 0; p < P; ++p) {
            if (!out[p].ladder) continue;
            for (const auto& lv : out[p].ladder->report) {
                lw.row({std::to_string(p), std::to_string(lv.k), format_double(lv.xi_k), format_double(lv.sup_E),
                        format_double(lv.D), format_double(lv.U), format_double(lv.U_psi), format_double(lv.threshold),
                        lv.pass ? "1" : "0", format_double(lv.W), format_double(lv.W_scaled), format_double(lv.W_reference)});
                if (lv.U > 0.0) sob = std::max(sob, lv.U_psi * lv.U_psi / lv.U);
            }
        }
        lw.close();
        s["ladder"] = {{"xi", ladder->xi}, {"K", ladder->K}, {"delta", ladder->delta},
                       {"rho_under", ladder->rho_under}, {"C6", ladder->C6},
                       {"sobolev_ratio_max_Upsi2_over_U", sob}, {"label", "empirical"}};
        if (tails.size() >= 30) {
            std::vector<double> grid = cfg.diagnostics.xi_grid;
            if (grid.empty()) {
                for (int k = 0; k < 32; ++k) grid.push_back(1.0 + (2.0 * xi - 1.0) * k / 31.0);
            }
            const auto t = diagnostics::tail_and_theta(tails, grid, cfg.diagnostics.C6, cfg.diagnostics.rho_under);
            CsvWriter tw(rd.sub("tail.csv"), {"xi", "survival_naive", "survival_km"}, rd.hash());
            for (std::size_t k = 0; k < grid.size(); ++k) tw.row(cells({grid[k], t.survival_naive[k], t.survival_km[k]}));
            tw.close();
            s["tail"] = {{"n", t.n},
                         {"censored", t.censored},
                         {"theta_mean", t.theta_mean},
                         {"theta_se", t.theta_se},
                         {"theta_ci", {t.theta_ci_lo, t.theta_ci_hi}},
                         {"theta_uncensored_mean", t.theta_uncensored_mean},
                         {"shape_coeffs_empirical", t.shape_coeffs},
                         {"shape_rms", t.shape_rms}};
        }
    }
    rec.summary = s;
    if (P > 0 && static_cast<double>(rec.failed) / P > cfg.max_failure_fraction) rec.status = "failed";
}

// ---- wellmixed ----

void run_wellmixed(const RunConfig& cfg, const RunOptions& opt, RunDir& rd, RunRecord& rec) {
    wellmixed::Polynomial phi;
    for (const auto& m : cfg.wellmixed.phi) phi.add(m.coeff, m.exponents);
    wellmixed::WeakErrorConfig wc;
    wc.dt = cfg.wellmixed.dt;
    wc.sde_trials = cfg.wellmixed.sde_trials;
    wc.master_seed = cfg.master_seed;
    wc.control_variate = cfg.wellmixed.control_variate;
    wc.workers = opt.workers;
    wc.rates = cfg.solver.rates;
    const kinetics::SpeciesVector a0(cfg.wellmixed.a0);
    const auto table = wellmixed::weak_error_study(phi, a0, cfg.wellmixed.N_list, cfg.wellmixed.trials, cfg.wellmixed.T, wc);
    CsvWriter w(rd.sub("weak_error.csv"),
                {"N", "scaling", "estimator", "ssa_mean", "ssa_se", "sde_mean", "sde_se", "error", "error_se",
                 "plain_error", "plain_error_se", "inconclusive"},
                rd.hash());
    for (const auto& r : table.rows) {
        w.row({format_double(r.N), wellmixed::to_string(r.scaling), r.estimator, format_double(r.ssa_mean),
               format_double(r.ssa_se), format_double(r.sde_mean), format_double(r.sde_se), format_double(r.error),
               format_double(r.error_se), format_double(r.plain_error), format_double(r.plain_error_se),
               r.inconclusive ? "1" : "0"});
    }
    w.close();
    CsvWriter g(rd.sub("generator.csv"), {"N", "convention", "exact", "first_order", "remainder"}, rd.hash());
    for (double N : cfg.wellmixed.N_list) {
        for (auto sc : {wellmixed::Scaling::TaylorExact, wellmixed::Scaling::Paper}) {
            const auto e = wellmixed::apply_generator(phi, a0, N, cfg.solver.rates, sc);
            g.row({format_double(N), wellmixed::to_string(sc), format_double(e.exact), format_double(e.first_order),
                   format_double(e.remainder)});
        }
    }
    g.close();
    const double Nmax = *std::max_element(cfg.wellmixed.N_list.begin(), cfg.wellmixed.N_list.end());
    const auto& te = table.at(Nmax, wellmixed::Scaling::TaylorExact);
    const auto& pe = table.at(Nmax, wellmixed::Scaling::Paper);
    rec.seeds = {cfg.master_seed};
    rec.summary = {{"fitted_order_taylor_exact", table.fitted_order_taylor},
                   {"fitted_order_paper", table.fitted_order_paper},
                   {"N_max", Nmax},
                   {"taylor_exact_error_at_N_max", te.error},
                   {"paper_error_at_N_max", pe.error},
                   {"matching_convention", te.error <= pe.error ? "taylor_exact" : "paper"},
                   {"phi", phi.describe()}};
}

// ---- duality ----

void run_duality(const RunConfig& cfg, const RunOptions& opt, RunDir& rd, RunRecord& rec) {
    const double C1 = resolve_C1(cfg);
    rec.metadata["C1"] = C1;
    rec.metadata["C1_source"] = cfg.diagnostics.C1 ? "configured" : "calibrated";
    const auto a0 = initial_field(cfg);
    const auto grid = a0.grid();
    const int N = cfg.solver.steps();
    const double dt = cfg.solver.dt;
    const std::vector<double> Hx = eval_on_grid(grid, cfg.duality.H);
    for (double h : Hx) {
        if (h < 0.0) throw ConfigError("duality.H", "source must be >= 0 on the grid");
    }
    const duality::SpaceTime H(static_cast<std::size_t>(N), Hx);
    const double kmax = a0.max_kappa();
    const std::size_t P = cfg.ensemble_size;
    for (std::size_t p = 0; p < P; ++p) rec.seeds.push_back(derive_seed(cfg.master_seed, p, "duality/forward"));

    auto forward = [&](std::uint64_t seed, bool noise) {
        auto s = solver_for(cfg, seed);
        s.keep_fields = true;
        if (!noise) s.noise.nu = 0.0;
        auto r = spde::simulate(a0, s);
        if (r.status != spde::TrajectoryStatus::Completed) {
            throw std::runtime_error("duality forward path did not complete: " + (r.error.empty() ? spde::to_string(r.status) : r.error));
        }
        return duality::assemble_forward(r, s, C1);
    };

    std::vector<duality::DualityTerms> terms(P);
    json fwd_checks;
    duality::EnergyBound energy;
    double min_w = 0.0;
    json s;
    if (cfg.duality.mode == duality::DualMode::DeterministicDual) {
        const auto fz0 = forward(0, false);
        const auto rk = duality::regularize_K(fz0, cfg.duality.eps);
        const auto dual = duality::solve_dual(grid, dt, N, H, rk.K_tilde, C1, 2, true, true, kmax);
        double kt_max = 0.0;
        for (const auto& row : rk.K_tilde) kt_max = std::max(kt_max, *std::max_element(row.begin(), row.end()));
        min_w = dual.min_w;
        energy = duality::energy_terms(dual, H, C1);
        std::vector<std::size_t> neg(P);
        std::vector<double> gmax(P);
        parallel_for(P, opt.workers, [&](std::size_t p) {
            const auto fz = forward(rec.seeds[p], true);
            terms[p] = duality::duality_terms(fz, dual, H, rk.K_tilde);
            neg[p] = fz.negative_slack_cells;
            gmax[p] = fz.g_ratio_max;
        });
        fwd_checks = {{"negative_slack_cells", std::accumulate(neg.begin(), neg.end(), std::size_t{0})},
                      {"g_ratio_max", P ? *std::max_element(gmax.begin(), gmax.end()) : 0.0},
                      {"K_tilde_max_deviation", rk.max_deviation},
                      {"K_tilde_max_deviation_over_eps_K", rk.max_deviation_ratio},
                      {"K_tilde_min_deviation", rk.min_deviation},
                      {"gate_margin", duality::dual_gate(grid, dt, C1, kt_max)}};
        CsvWriter w(rd.sub("dual_w.csv"), {"n", "t", "cell", "w"}, rd.hash());
        for (std::size_t n = 0; n < dual.w.size(); ++n) {
            for (std::size_t c = 0; c < grid.cells(); ++c) {
                w.row({std::to_string(n), format_double(dual.times[n]), std::to_string(c), format_double(dual.w[n][c])});
            }
        }
        w.close();
    } else {
        std::vector<duality::ForwardZ> fzs(P);
        std::vector<duality::RegressionPath> rp(P);
        std::vector<duality::SpaceTime> Kt(P);
        parallel_for(P, opt.workers, [&](std::size_t p) {
            auto sc = solver_for(cfg, rec.seeds[p]);
            sc.keep_fields = true;
            auto r = spde::simulate(a0, sc);
            if (r.status != spde::TrajectoryStatus::Completed) throw std::runtime_error("duality forward path did not complete");
            fzs[p] = duality::assemble_forward(r, sc, C1);
            Kt[p] = duality::regularize_K(fzs[p], cfg.duality.eps).K_tilde;
            rp[p].H = H;
            rp[p].K_tilde = Kt[p];
            rp[p].dB = r.increments;
            for (int n = 0; n < N; ++n) rp[p].features.push_back(duality::field_features(r.fields[static_cast<std::size_t>(n)]));
        });
        for (const auto& k : Kt) {
            for (int n = 0; n < N; ++n) {
                for (double v : k[static_cast<std::size_t>(n)]) {
                    if (duality::dual_gate(grid, dt, C1, v) < 0.0) throw std::runtime_error("dual monotonicity gate violated");
                }
            }
        }
        duality::RegressionConfig rc{cfg.duality.degree, cfg.duality.cond_limit};
        const auto duals = duality::solve_dual_regression(grid, dt, N, rp, C1, rc);
        std::vector<duality::SpaceTime> Hs(P, H);
        energy = duality::energy_bound_check(duals, Hs, C1);
        for (std::size_t p = 0; p < P; ++p) {
            terms[p] = duality::duality_terms(fzs[p], duals[p], H, Kt[p]);
            min_w = std::min(min_w, duals[p].min_w);
        }
    }
    CsvWriter tw(rd.sub("duality_terms.csv"),
                 {"index", "lhs", "initial", "mismatch", "slack", "slack_recon", "noise", "martingale", "residual",
                  "residual_recon"},
                 rd.hash());
    for (std::size_t p = 0; p < P; ++p) {
        const auto& t = terms[p];
        auto row = cells({t.lhs, t.initial, t.mismatch, t.slack, t.slack_recon, t.noise, t.martingale, t.residual(),
                          t.residual_recon()});
        row.insert(row.begin(), std::to_string(p));
        tw.row(row);
    }
    tw.close();
    const auto res = duality::duality_residual(terms, derive_seed(cfg.master_seed, 0, "duality/bootstrap"));
    s["mode"] = duality::to_string(cfg.duality.mode);
    s["paths"] = P;
    s["C1"] = C1;
    s["terms_mean"] = {{"lhs", res.lhs}, {"initial", res.initial}, {"mismatch", res.mismatch}, {"slack", res.slack},
                       {"noise", res.noise}, {"martingale", res.martingale}};
    s["residual"] = {{"mean", res.residual}, {"bootstrap_se", res.residual_se},
                     {"within_3se", std::abs(res.residual) <= 3.0 * res.residual_se}};
    s["residual_recon"] = {{"mean", res.residual_recon}, {"bootstrap_se", res.residual_recon_se}};
    s["energy"] = {{"lhs", energy.lhs}, {"rhs", energy.rhs}, {"R1_empirical", energy.ratio},
                   {"grad_w0", energy.grad_w0}, {"lap_w", energy.lap_w}, {"grad_q", energy.grad_q}};
    s["min_w"] = min_w;
    if (!fwd_checks.is_null()) s["forward_checks"] = fwd_checks;
    rec.summary = s;
}

// ---- inequality suite ----

void run_inequalities(const RunConfig& cfg, const RunOptions& opt, RunDir& rd, RunRecord& rec) {
    const auto& ic = cfg.inequalities;
    rec.seeds = ic.seeds;
    std::vector<kinetics::InequalityReport> reps(ic.seeds.size());
    parallel_for(ic.seeds.size(), opt.workers, [&](std::size_t k) {
        reps[k] = kinetics::check_inequalities(ic.samples, derive_seed(ic.seeds[k], 0, "inequalities"));
    });
    CsvWriter w(rd.sub("inequalities.csv"),
                {"seed", "name", "samples", "derived_constant", "reference_constant", "violations", "counterexample"},
                rd.hash());
    json stab = json::object();
    bool all_hold = true;
    for (std::size_t k = 0; k < reps.size(); ++k) {
        all_hold = all_hold && reps[k].all_hold();
        for (const auto& c : reps[k].checks) {
            w.row({std::to_string(ic.seeds[k]), c.name, std::to_string(c.samples), format_double(c.derived_constant),
                   format_double(c.reference_constant), std::to_string(c.violations), join(c.counterexample)});
        }
    }
    w.close();
    if (!reps.empty()) {
        for (std::size_t i = 0; i < reps[0].checks.size(); ++i) {
            double lo = INFINITY, hi = -INFINITY;
            for (const auto& r : reps) {
                lo = std::min(lo, r.checks[i].derived_constant);
                hi = std::max(hi, r.checks[i].derived_constant);
            }
            stab[reps[0].checks[i].name] = {{"min", lo}, {"max", hi}, {"relative_spread", hi > 0.0 ? (hi - lo) / hi : 0.0}};
        }
    }

    std::vector<json> src(ic.nu_list.size());
    CsvWriter sw(rd.sub("source_lemma.csv"),
                 {"nu", "C1_calibrated", "samples", "worst_ratio", "violations", "truncated_worst_ratio",
                  "truncated_violations", "literal_exceedances"},
                 rd.hash());
    std::vector<std::vector<std::string>> rows(ic.nu_list.size());
    parallel_for(ic.nu_list.size(), opt.workers, [&](std::size_t k) {
        kinetics::NoiseModel m = cfg.solver.noise;
        m.kind = kinetics::NoiseKind::Smoothed;
        m.nu = ic.nu_list[k];
        const auto cal = kinetics::calibrate_source_constant(m, ic.box, derive_seed(cfg.master_seed, k, "calibration"));
        const auto lem = kinetics::check_source_lemma(ic.source_samples, ic.box, m, derive_seed(cfg.master_seed, k, "source/sample"));
        const auto tr = kinetics::compare_truncated_source(ic.source_samples, ic.box, m, ic.trunc_level,
                                                           derive_seed(cfg.master_seed, k, "source/truncated"));
        const std::size_t viol = lem.worst_ratio > cal.worst_ratio ? 1 : 0;
        rows[k] = {format_double(m.nu), format_double(cal.worst_ratio), std::to_string(lem.samples),
                   format_double(lem.worst_ratio), std::to_string(viol), format_double(tr.worst_ratio_truncated),
                   std::to_string(tr.violations), std::to_string(tr.literal_exceedances)};
    });
    for (const auto& r : rows) sw.row(r);
    sw.close();
    rec.summary = {{"all_hold", all_hold}, {"stability", stab}};
}

}  // namespace

double resolve_C1(const RunConfig& cfg) {
    if (cfg.diagnostics.C1) return *cfg.diagnostics.C1;
    return kinetics::calibrate_source_constant(cfg.solver.noise, cfg.diagnostics.calibration_box,
                                               derive_seed(cfg.master_seed, 0, "calibration"))
        .worst_ratio;
}

std::vector<FileEntry> hash_tree(const fs::path& dir) {
    std::vector<FileEntry> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const std::string rel = fs::relative(e.path(), dir).generic_string();
        if (rel == "metrics.json" || rel == "manifest.json" || rel.ends_with(".tmp")) continue;
        out.push_back({rel, sha256_file(e.path()), e.file_size()});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
    return out;
}

RunRecord run_ensemble(const RunConfig& cfg, const RunOptions& opt) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    RunDir rd(cfg);
    RunRecord rec = new_record(cfg, rd);
    write_atomic(rd.dir() / "config.json", experiment_dump(cfg));
    double units = static_cast<double>(cfg.ensemble_size);
    switch (cfg.kind) {
        case ExperimentKind::Spde:
        case ExperimentKind::Diagnostics: run_spde(cfg, opt, rd, rec); break;
        case ExperimentKind::WellMixed:
            run_wellmixed(cfg, opt, rd, rec);
            units = static_cast<double>(cfg.wellmixed.trials * cfg.wellmixed.N_list.size());
            break;
        case ExperimentKind::Duality: run_duality(cfg, opt, rd, rec); break;
        case ExperimentKind::InequalitySuite:
            run_inequalities(cfg, opt, rd, rec);
            units = static_cast<double>(cfg.inequalities.samples * cfg.inequalities.seeds.size());
            break;
    }
    finish_run(rec, rd, t0, units);
    return rec;
}

RunRecord load_run(const fs::path& dir) {
    const fs::path mpath = dir / "manifest.json";
    if (!fs::exists(mpath)) throw std::runtime_error("missing input: " + mpath.string() + " (run incomplete or absent)");
    const json m = read_json(mpath);
    RunRecord rec;
    rec.dir = dir;
    rec.config = config_from_json(m.at("config"));
    rec.config_hash = m.at("config_hash").get<std::string>();
    rec.version = m.at("version").get<std::string>();
    rec.status = m.at("status").get<std::string>();
    rec.seeds = m.at("seeds").get<std::vector<std::uint64_t>>();
    rec.failed = m.at("failed").get<std::size_t>();
    rec.summary = m.at("summary");
    rec.metadata = m.at("metadata");
    for (const auto& f : m.at("files")) {
        FileEntry e{f.at("path").get<std::string>(), f.at("sha256").get<std::string>(), f.at("bytes").get<std::uintmax_t>()};
        const fs::path p = dir / e.path;
        if (!fs::exists(p)) throw std::runtime_error("manifest lists missing file " + p.string());
        if (sha256_file(p) != e.sha256) throw std::runtime_error("hash mismatch for " + p.string());
        rec.files.push_back(e);
    }
    if (config_hash(rec.config) != rec.config_hash) throw std::runtime_error("config hash mismatch in " + mpath.string());
    return rec;
}

// ---- heat check ----

double cos_mode_amplitude(const spde::TorusField& field) {
    const auto& g = field.grid();
    if (g.d != 1) throw std::invalid_argument("cos_mode_amplitude: d must be 1");
    const auto u = field.species(0);
    double s = 0.0;
    for (int j = 0; j < g.M; ++j) s += u[static_cast<std::size_t>(j)] * std::cos(2.0 * M_PI * j / g.M);
    return 2.0 * s / g.M;
}

ConvergenceStudy heat_convergence(double kappa, double T, int M_temporal, std::vector<double> dts, std::vector<int> Ms,
                                  double dt_over_h2) {
    ConvergenceStudy st;
    auto run = [&](int M, double dt) {
        const spde::TorusGrid g(1, M);
        std::array<spde::SpeciesInitial, 4> sp{};
        sp[0] = {1.0, {spde::FourierMode{{1, 0}, 1.0, 0.0}}};
        for (int i = 1; i < 4; ++i) sp[static_cast<std::size_t>(i)] = {1.0, {}};
        auto f = spde::make_initial(g, {kappa, kappa, kappa, kappa}, sp);
        spde::SolverConfig c;
        c.dt = dt;
        c.T = T;
        c.reaction = false;
        c.noise.nu = 0.0;
        spde::Stepper s(g, f.kappa(), c);
        const std::vector<double> inc(2, 0.0);
        for (int n = 0; n < c.steps(); ++n) s.step(f, inc);
        return cos_mode_amplitude(f);
    };
    std::vector<double> tx, ty, sx, sy;
    for (double dt : dts) {
        const double h = 1.0 / M_temporal;
        const double lam = kappa * 2.0 / (h * h) * (1.0 - std::cos(2.0 * M_PI * h));
        const double ref = std::exp(-lam * T);
        const double a = run(M_temporal, dt);
        st.rows.push_back({"temporal", M_temporal, dt, a, ref, std::abs(a - ref)});
        tx.push_back(dt);
        ty.push_back(std::abs(a - ref));
    }
    for (int M : Ms) {
        const double h = 1.0 / M;
        const int steps = static_cast<int>(std::ceil(T / (dt_over_h2 * h * h) - 1e-9));
        const double dt = T / steps;
        const double ref = std::exp(-4.0 * M_PI * M_PI * kappa * T);
        const double a = run(M, dt);
        st.rows.push_back({"spatial", M, dt, a, ref, std::abs(a - ref)});
        sx.push_back(h);
        sy.push_back(std::abs(a - ref));
    }
    st.temporal_order = tx.size() >= 2 ? stats::loglog_slope(tx, ty) : 0.0;
    st.spatial_order = sx.size() >= 2 ? stats::loglog_slope(sx, sy) : 0.0;
    return st;
}

RunRecord run_convergence(const RunConfig& cfg, const RunOptions&) {
    const auto t0 = std::chrono::steady_clock::now();
    RunDir rd(cfg);
    RunRecord rec = new_record(cfg, rd);
    write_atomic(rd.dir() / "config.json", experiment_dump(cfg));
    const auto st = heat_convergence(cfg.grid.kappa[0], cfg.solver.T);
    CsvWriter w(rd.sub("converge.csv"), {"ladder", "M", "dt", "amplitude", "reference", "error"}, rd.hash());
    for (const auto& r : st.rows) {
        w.row({r.ladder, std::to_string(r.M), format_double(r.dt), format_double(r.amplitude), format_double(r.reference),
               format_double(r.error)});
    }
    w.close();
    rec.summary = {{"temporal_order", st.temporal_order}, {"spatial_order", st.spatial_order},
                   {"kappa", cfg.grid.kappa[0]}, {"T", cfg.solver.T}};
    write_json(rd.sub("converge.json"), rec.summary);
    finish_run(rec, rd, t0, static_cast<double>(st.rows.size()));
    return rec;
}

// ---- reports ----

std::vector<fs::path> report(const fs::path& dir, const std::string& kind) {
    const RunRecord run = load_run(dir);
    const std::string h = run.config_hash;
    std::vector<fs::path> out;
    auto need = [&](const std::string& rel) {
        const fs::path p = dir / rel;
        if (!fs::exists(p)) throw std::runtime_error("report '" + kind + "': missing input " + p.string());
        return p;
    };
    if (kind == "entropy") {
        const auto t = read_csv(need("summary.csv"));
        if (t.rows.empty()) throw std::runtime_error("report 'entropy': no trajectory rows in " + (dir / "summary.csv").string());
        const double C1 = run.metadata.at("C1").get<double>();
        const fs::path p = dir / "report_entropy.csv";
        CsvWriter w(p, {"index", "R_T", "int_E2_over_E2_0", "D_monotone"}, h);
        std::vector<double> R, q;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            if (!fs::exists(dir / ("trajectories/traj_" + pad(r) + ".csv"))) {
                throw std::runtime_error("report 'entropy': missing trajectory file traj_" + pad(r) + ".csv");
            }
            const double e20 = t.number(r, "E2_0");
            const double ratio = e20 > 0.0 ? t.number(r, "int_E2_T") / e20 : 0.0;
            R.push_back(t.number(r, "R_T"));
            q.push_back(ratio);
            w.row({t.rows[r][t.column("index")], format_double(R.back()), format_double(ratio), t.rows[r][t.column("D_monotone")]});
        }
        w.close();
        const auto mr = stats::mean_se(R);
        const auto mq = stats::mean_se(q);
        const json j = {{"C1_empirical", C1},
                        {"mean_R_T", mr.mean},
                        {"se_R_T", mr.se},
                        {"mean_int_E2_over_E2_0", mq.mean},
                        {"se_int_E2_over_E2_0", mq.se},
                        {"config_hash", h},
                        {"label", "empirical"}};
        write_json(dir / "report_entropy.json", j);
        out = {p, dir / "report_entropy.json"};
    } else if (kind == "ladder") {
        const auto t = read_csv(need("ladder.csv"));
        int K = -1;
        for (std::size_t r = 0; r < t.rows.size(); ++r) K = std::max(K, static_cast<int>(t.number(r, "k")));
        if (K < 0) throw std::runtime_error("report 'ladder': empty ladder table");
        const fs::path p = dir / "report_ladder.csv";
        CsvWriter w(p, {"k", "xi_k", "mean_U", "pass_fraction", "threshold", "W", "W_scaled", "W_reference", "W_over_reference"}, h);
        for (int k = 0; k <= K; ++k) {
            double sumU = 0.0, pass = 0.0, n = 0.0, xi_k = 0.0, thr = 0.0, W = 0.0, Ws = 0.0, Wr = 0.0;
            for (std::size_t r = 0; r < t.rows.size(); ++r) {
                if (static_cast<int>(t.number(r, "k")) != k) continue;
                sumU += t.number(r, "U");
                pass += t.number(r, "pass");
                n += 1.0;
                xi_k = t.number(r, "xi_k");
                thr = t.number(r, "threshold");
                W = t.number(r, "W");
                Ws = t.number(r, "W_scaled");
                Wr = t.number(r, "W_reference");
            }
            w.row({std::to_string(k), format_double(xi_k), format_double(sumU / n), format_double(pass / n),
                   format_double(thr), format_double(W), format_double(Ws), format_double(Wr), format_double(W / Wr)});
        }
        w.close();
        out = {p};
    } else if (kind == "tail") {
        const auto t = read_csv(need("tail.csv"));
        const fs::path p = dir / "report_tail.csv";
        CsvWriter w(p, {"xi", "survival_naive", "survival_km", "shape_fit_empirical"}, h);
        const auto& tail = run.summary.at("tail");
        const auto coeffs = tail.at("shape_coeffs_empirical").get<std::vector<double>>();
        const double C6 = run.config.diagnostics.C6, rho = run.config.diagnostics.rho_under;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const double xi = t.number(r, "xi");
            const double fit = coeffs[0] / std::sqrt(std::log1p(xi)) +
                               coeffs[1] * std::exp(-std::pow(diagnostics::ladder_delta(xi, C6), -(3.0 - 2.0 * rho))) +
                               coeffs[2] * std::exp(-xi * xi * xi);
            w.row(cells({xi, t.number(r, "survival_naive"), t.number(r, "survival_km"), fit}));
        }
        w.close();
        write_json(dir / "report_tail.json", {{"tail", tail}, {"config_hash", h}, {"label", "empirical"}});
        out = {p, dir / "report_tail.json"};
    } else if (kind == "duality") {
        const auto t = read_csv(need("duality_terms.csv"));
        if (t.rows.empty()) throw std::runtime_error("report 'duality': no path rows");
        const fs::path p = dir / "report_duality.csv";
        CsvWriter w(p, {"term", "mean"}, h);
        for (const char* name : {"lhs", "initial", "mismatch", "slack", "slack_recon", "noise", "martingale", "residual", "residual_recon"}) {
            double s = 0.0;
            for (std::size_t r = 0; r < t.rows.size(); ++r) s += t.number(r, name);
            w.row({name, format_double(s / t.rows.size())});
        }
        w.close();
        write_json(dir / "report_duality.json", {{"summary", run.summary}, {"config_hash", h}, {"label", "empirical"}});
        out = {p, dir / "report_duality.json"};
    } else if (kind == "weak_error") {
        const auto t = read_csv(need("weak_error.csv"));
        const fs::path p = dir / "report_weak_error.csv";
        CsvWriter w(p, {"scaling", "N", "error", "error_se", "inconclusive"}, h);
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            w.row({t.rows[r][t.column("scaling")], t.rows[r][t.column("N")], t.rows[r][t.column("error")],
                   t.rows[r][t.column("error_se")], t.rows[r][t.column("inconclusive")]});
        }
        w.close();
        write_json(dir / "report_weak_error.json", {{"summary", run.summary}, {"config_hash", h}, {"label", "empirical"}});
        out = {p, dir / "report_weak_error.json"};
    } else if (kind == "heat") {
        const auto t = read_csv(need("converge.csv"));
        const fs::path p = dir / "report_heat.csv";
        CsvWriter w(p, {"ladder", "fitted_order"}, h);
        w.row({"temporal", format_double(run.summary.at("temporal_order").get<double>())});
        w.row({"spatial", format_double(run.summary.at("spatial_order").get<double>())});
        w.close();
        (void)t;
        out = {p};
    } else if (kind == "inequalities") {
        const auto t = read_csv(need("inequalities.csv"));
        need("source_lemma.csv");
        const fs::path p = dir / "report_inequalities.csv";
        CsvWriter w(p, {"seed", "name", "derived_constant", "violations"}, h);
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            w.row({t.rows[r][t.column("seed")], t.rows[r][t.column("name")], t.rows[r][t.column("derived_constant")],
                   t.rows[r][t.column("violations")]});
        }
        w.close();
        write_json(dir / "report_inequalities.json", {{"summary", run.summary}, {"config_hash", h}, {"label", "empirical"}});
        out = {p, dir / "report_inequalities.json"};
    } else {
        throw std::invalid_argument("unknown report kind '" + kind +
                                    "' (expected entropy, ladder, tail, duality, weak_error, heat or inequalities)");
    }
    return out;
}

}  // namespace srd::runner
