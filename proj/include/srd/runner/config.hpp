#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "srd/duality/duality.hpp"
#include "srd/kinetics/species.hpp"
#include "srd/spde/grid.hpp"
#include "srd/spde/solver.hpp"
#include "srd/wellmixed/polynomial.hpp"

namespace srd::runner {

using json = nlohmann::json;

enum class ExperimentKind { WellMixed, Spde, Duality, Diagnostics, InequalitySuite };
std::string to_string(ExperimentKind k);
ExperimentKind kind_from_string(const std::string& s);

// Errors raised while loading; `where` names the field or line/column.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& where, const std::string& what)
        : std::runtime_error(where + ": " + what), where_(where) {}
    const std::string& where() const { return where_; }

private:
    std::string where_;
};

struct GridConfig {
    int d = 1;
    int M = 64;
    spde::Vec4 kappa{1.0, 1.0, 1.0, 1.0};
    std::array<spde::SpeciesInitial, 4> initial{};
};

struct WellMixedSection {
    std::vector<wellmixed::Monomial> phi{wellmixed::Monomial{1.0, {2, 0, 0, 0}}};
    spde::Vec4 a0{1.0, 1.0, 1.0, 1.0};
    std::vector<double> N_list{100.0, 1000.0, 10000.0};
    std::size_t trials = 100000;
    std::size_t sde_trials = 0;  // 0: same as trials
    double T = 0.5;
    double dt = 0.02;
    bool control_variate = true;
};

struct DiagnosticsSection {
    std::optional<double> C1;  // empty: calibrated by the source-lemma sweep
    double calibration_box = 100.0;
    double C6 = 1.0;
    double rho_under = 1.25;
    std::optional<double> xi;  // empty: 4 max(1, sup |a0|)
    int K = -1;                // < 0: 2^{-K} xi ~ 1
    std::vector<double> xi_grid;  // empty: 32 points on [1, 2 xi]
};

struct DualitySection {
    duality::DualMode mode = duality::DualMode::DeterministicDual;
    double eps = 0.1;
    spde::SpeciesInitial H{1.0, {spde::FourierMode{{1, 0}, 0.5, 0.0}}};
    int degree = 2;
    double cond_limit = 1e10;
};

struct InequalitySection {
    std::size_t samples = 100000;
    std::vector<std::uint64_t> seeds{1, 2};
    std::size_t source_samples = 1000000;
    double box = 100.0;
    std::vector<double> nu_list{0.01, 0.1};
    double trunc_level = 50.0;
};

struct RunConfig {
    ExperimentKind kind = ExperimentKind::Spde;
    std::uint64_t master_seed = 1;
    std::size_t ensemble_size = 1;
    std::string output_dir = "out";
    int diagnostic_stride = 1;
    double max_failure_fraction = 0.0;
    GridConfig grid;
    spde::SolverConfig solver;  // solver.seed and solver.diagnostic_stride are set per run
    WellMixedSection wellmixed;
    DiagnosticsSection diagnostics;
    DualitySection duality;
    InequalitySection inequalities;

    // Checks every gate; throws ConfigError naming the field.
    void validate() const;
    spde::TorusGrid torus() const { return {grid.d, grid.M}; }
};

RunConfig parse_config(const std::string& text, const std::string& source = "<string>");
RunConfig load_config(const std::string& path);
RunConfig config_from_json(const json& j);
json to_json(const RunConfig& cfg);
// Stable-key-order dump of to_json(cfg).
std::string canonical_dump(const RunConfig& cfg);
// As canonical_dump without output_dir: where a run is written does not change it.
std::string experiment_dump(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);  // sha256 of experiment_dump

// Doubles: numbers, or strings holding hex-float, "inf", "-inf" or decimal.
double parse_double(const json& v, const std::string& where);
json encode_double(double x);  // +-inf as strings, finite as numbers

}  // namespace srd::runner
