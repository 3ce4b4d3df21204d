#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "srd/runner/config.hpp"

namespace srd::runner {

namespace fs = std::filesystem;

struct FileEntry {
    std::string path;  // relative to the run directory
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct RunRecord {
    RunConfig config;
    std::string config_hash;
    std::string version;
    std::string status;  // "completed" or "failed"
    std::vector<std::uint64_t> seeds;
    std::vector<FileEntry> files;
    std::size_t failed = 0;
    nlohmann::json summary;   // kind-specific, deterministic
    nlohmann::json metadata;  // resolved constants (C1, nu', ...)
    double wall_seconds = 0.0;
    double throughput = 0.0;  // trajectories (or samples) per second
    fs::path dir;
};

struct RunOptions {
    int workers = 1;
};

// Executes the experiment described by cfg into cfg.output_dir. The manifest
// is written last; metrics.json (wall clock) is kept out of the manifest.
RunRecord run_ensemble(const RunConfig& cfg, const RunOptions& opt = {});

// Reads manifest.json and checks every listed hash.
RunRecord load_run(const fs::path& dir);

// Kinds: entropy, ladder, tail, duality, weak_error, heat, inequalities.
std::vector<fs::path> report(const fs::path& dir, const std::string& kind);

// Resolved source constant: configured value or the calibration sweep.
double resolve_C1(const RunConfig& cfg);

struct ConvergenceRow {
    std::string ladder;  // "temporal" or "spatial"
    int M = 0;
    double dt = 0.0;
    double amplitude = 0.0;
    double reference = 0.0;
    double error = 0.0;
};

struct ConvergenceStudy {
    std::vector<ConvergenceRow> rows;
    double temporal_order = 0.0;
    double spatial_order = 0.0;
};

// Pure-diffusion heat check on a0 = 1 + cos(2 pi x) (d = 1) with diffusivity kappa.
//   temporal: fixed M, dt halved, error against the exact semi-discrete decay
//   spatial: M doubled with dt = c h^2, error against exp(-4 pi^2 kappa t)
ConvergenceStudy heat_convergence(double kappa = 1.0, double T = 0.1, int M_temporal = 64,
                                  std::vector<double> dts = {1e-3, 5e-4, 2.5e-4, 1.25e-4},
                                  std::vector<int> Ms = {16, 32, 64, 128}, double dt_over_h2 = 0.25);

// Amplitude of cos(2 pi x) in species 0 of a d = 1 field.
double cos_mode_amplitude(const spde::TorusField& field);

// Runs heat_convergence and writes converge.csv, converge.json and the manifest.
RunRecord run_convergence(const RunConfig& cfg, const RunOptions& opt = {});

// Every file under dir except metrics.json, with hashes, in path order.
std::vector<FileEntry> hash_tree(const fs::path& dir);

}  // namespace srd::runner
