// srd: command-line front end for the reaction-diffusion experiments.
#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "srd/runner/config.hpp"
#include "srd/runner/ensemble.hpp"
#include "srd/runner/io.hpp"

namespace {

using namespace srd::runner;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    int workers = 1;
    std::optional<int> stride;
    bool print_config = false;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "configuration file (JSON)")->check(CLI::ExistingFile);
    app->add_option("--seed", c.seed, "master seed (overrides the config)");
    app->add_option("--out", c.out, "output directory (overrides the config)");
    app->add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
    app->add_option("--stride", c.stride, "diagnostic stride in steps")->check(CLI::PositiveNumber);
    app->add_flag("--print-config", c.print_config, "print the materialized configuration and exit");
}

RunConfig resolve(const Common& c, std::optional<ExperimentKind> kind) {
    RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
    if (kind) cfg.kind = *kind;
    if (c.seed) cfg.master_seed = *c.seed;
    if (!c.out.empty()) cfg.output_dir = c.out;
    if (c.stride) cfg.diagnostic_stride = *c.stride;
    cfg.validate();
    return cfg;
}

int finish(const RunRecord& rec) {
    std::cout << "run " << rec.status << ": " << rec.dir.string() << "\n";
    std::cout << "config_hash " << rec.config_hash << "\n";
    std::cout << rec.summary.dump(2) << "\n";
    return rec.status == "completed" ? 0 : 2;
}

int run_kind(const Common& c, ExperimentKind kind) {
    const RunConfig cfg = resolve(c, kind);
    if (c.print_config) {
        std::cout << canonical_dump(cfg);
        return 0;
    }
    return finish(run_ensemble(cfg, {c.workers}));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic reaction-diffusion experiments"};
    app.require_subcommand(1);
    Common common;

    auto* simulate = app.add_subcommand("simulate", "forward SPDE ensemble with entropy traces");
    add_common(simulate, common);
    auto* diagnose = app.add_subcommand("diagnose", "SPDE ensemble with ladder and tail diagnostics");
    add_common(diagnose, common);
    auto* wm = app.add_subcommand("wellmixed", "well-mixed generator and weak-error study");
    add_common(wm, common);
    auto* converge = app.add_subcommand("converge", "heat-check refinement ladders");
    add_common(converge, common);
    auto* ineq = app.add_subcommand("inequalities", "sampled inequality and source-lemma checks");
    add_common(ineq, common);

    auto* dual = app.add_subcommand("duality", "dual backward problem");
    dual->require_subcommand(1);
    auto* dual_run = dual->add_subcommand("run", "forward paths, dual solve and residual terms");
    add_common(dual_run, common);
    std::string dual_dir;
    auto* dual_res = dual->add_subcommand("residual", "residual table of a finished duality run");
    dual_res->add_option("--out", dual_dir, "run directory")->required();
    auto* dual_en = dual->add_subcommand("energy", "energy ratio of a finished duality run");
    dual_en->add_option("--out", dual_dir, "run directory")->required();

    auto* rep = app.add_subcommand("report", "derived tables from a finished run");
    std::string rep_dir, rep_kind;
    rep->add_option("kind", rep_kind, "entropy, ladder, tail, duality, weak_error, heat or inequalities")->required();
    rep->add_option("--out", rep_dir, "run directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) return run_kind(common, ExperimentKind::Spde);
        if (diagnose->parsed()) return run_kind(common, ExperimentKind::Diagnostics);
        if (wm->parsed()) return run_kind(common, ExperimentKind::WellMixed);
        if (ineq->parsed()) return run_kind(common, ExperimentKind::InequalitySuite);
        if (dual_run->parsed()) return run_kind(common, ExperimentKind::Duality);
        if (converge->parsed()) {
            const RunConfig cfg = resolve(common, std::nullopt);
            if (common.print_config) {
                std::cout << canonical_dump(cfg);
                return 0;
            }
            return finish(run_convergence(cfg, {common.workers}));
        }
        if (dual_res->parsed() || dual_en->parsed()) {
            const RunRecord run = load_run(dual_dir);
            const auto files = report(dual_dir, "duality");
            const std::string key = dual_res->parsed() ? "residual" : "energy";
            std::cout << run.summary.at(key).dump(2) << "\n";
            if (dual_res->parsed()) std::cout << run.summary.at("residual_recon").dump(2) << "\n";
            for (const auto& f : files) std::cout << "wrote " << f.string() << "\n";
            return 0;
        }
        if (rep->parsed()) {
            for (const auto& f : report(rep_dir, rep_kind)) std::cout << "wrote " << f.string() << "\n";
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
