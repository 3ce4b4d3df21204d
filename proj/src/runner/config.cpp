#include "srd/runner/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "srd/rng.hpp"

namespace srd::runner {

std::string to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::WellMixed: return "wellmixed";
        case ExperimentKind::Spde: return "spde";
        case ExperimentKind::Duality: return "duality";
        case ExperimentKind::Diagnostics: return "diagnostics";
        case ExperimentKind::InequalitySuite: return "inequality-suite";
    }
    return "unknown";
}

ExperimentKind kind_from_string(const std::string& s) {
    if (s == "wellmixed") return ExperimentKind::WellMixed;
    if (s == "spde") return ExperimentKind::Spde;
    if (s == "duality") return ExperimentKind::Duality;
    if (s == "diagnostics") return ExperimentKind::Diagnostics;
    if (s == "inequality-suite") return ExperimentKind::InequalitySuite;
    throw std::invalid_argument("unknown experiment kind '" + s +
                                "' (expected wellmixed, spde, duality, diagnostics or inequality-suite)");
}

double parse_double(const json& v, const std::string& where) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "inf" || s == "+inf" || s == "infinity") return INFINITY;
        if (s == "-inf" || s == "-infinity") return -INFINITY;
        errno = 0;
        char* end = nullptr;
        const double x = std::strtod(s.c_str(), &end);
        if (end == s.c_str() || *end != '\0' || errno == ERANGE || std::isnan(x)) {
            throw ConfigError(where, "cannot parse '" + s + "' as a number");
        }
        return x;
    }
    throw ConfigError(where, "expected a number");
}

json encode_double(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
}

namespace {

// Walks one JSON object, remembering which keys were used so unknown keys
// can be rejected with their full path.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    bool has(const std::string& k) const { return j_.contains(k); }
    std::string at(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

    const json* get(const std::string& k) {
        used_.insert(k);
        auto it = j_.find(k);
        return it == j_.end() ? nullptr : &*it;
    }

    void num(const std::string& k, double& out) {
        if (const json* v = get(k)) out = parse_double(*v, at(k));
    }
    void opt_num(const std::string& k, std::optional<double>& out, const char* auto_word) {
        if (const json* v = get(k)) {
            if (v->is_string() && v->get<std::string>() == auto_word) {
                out.reset();
            } else {
                out = parse_double(*v, at(k));
            }
        }
    }
    template <class Int>
    void integer(const std::string& k, Int& out) {
        if (const json* v = get(k)) {
            if (v->is_number_integer() || v->is_number_unsigned()) {
                if constexpr (std::is_unsigned_v<Int>) {
                    if (v->is_number_integer() && v->get<long long>() < 0) throw ConfigError(at(k), "must be >= 0");
                    out = static_cast<Int>(v->get<unsigned long long>());
                } else {
                    out = static_cast<Int>(v->get<long long>());
                }
            } else if (v->is_string()) {
                errno = 0;
                char* end = nullptr;
                const std::string s = v->get<std::string>();
                const unsigned long long x = std::strtoull(s.c_str(), &end, 0);
                if (end == s.c_str() || *end != '\0' || errno == ERANGE) throw ConfigError(at(k), "not an integer");
                out = static_cast<Int>(x);
            } else {
                throw ConfigError(at(k), "expected an integer");
            }
        }
    }
    void boolean(const std::string& k, bool& out) {
        if (const json* v = get(k)) {
            if (!v->is_boolean()) throw ConfigError(at(k), "expected true or false");
            out = v->get<bool>();
        }
    }
    void string(const std::string& k, std::string& out) {
        if (const json* v = get(k)) {
            if (!v->is_string()) throw ConfigError(at(k), "expected a string");
            out = v->get<std::string>();
        }
    }
    void vec4(const std::string& k, spde::Vec4& out) {
        if (const json* v = get(k)) {
            if (!v->is_array() || v->size() != 4) throw ConfigError(at(k), "expected an array of 4 numbers");
            for (std::size_t i = 0; i < 4; ++i) out[i] = parse_double((*v)[i], at(k) + "[" + std::to_string(i) + "]");
        }
    }
    void nums(const std::string& k, std::vector<double>& out) {
        if (const json* v = get(k)) {
            if (!v->is_array()) throw ConfigError(at(k), "expected an array of numbers");
            out.clear();
            for (std::size_t i = 0; i < v->size(); ++i) out.push_back(parse_double((*v)[i], at(k) + "[" + std::to_string(i) + "]"));
        }
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!used_.count(it.key())) throw ConfigError(at(it.key()), "unknown key");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

spde::SpeciesInitial read_species(const json& j, const std::string& path) {
    Section s(j, path);
    spde::SpeciesInitial out;
    out.modes.clear();
    s.num("mean", out.mean);
    if (const json* m = s.get("modes")) {
        if (!m->is_array()) throw ConfigError(s.at("modes"), "expected an array");
        for (std::size_t i = 0; i < m->size(); ++i) {
            Section ms((*m)[i], s.at("modes") + "[" + std::to_string(i) + "]");
            spde::FourierMode fm;
            if (const json* k = ms.get("k")) {
                if (!k->is_array() || k->size() != 2) throw ConfigError(ms.at("k"), "expected [kx, ky]");
                fm.k = {(*k)[0].get<int>(), (*k)[1].get<int>()};
            }
            ms.num("amplitude", fm.amplitude);
            ms.num("phase", fm.phase);
            ms.finish();
            out.modes.push_back(fm);
        }
    }
    s.finish();
    return out;
}

json species_json(const spde::SpeciesInitial& sp) {
    json modes = json::array();
    for (const auto& m : sp.modes) {
        modes.push_back({{"k", {m.k[0], m.k[1]}}, {"amplitude", m.amplitude}, {"phase", m.phase}});
    }
    return {{"mean", sp.mean}, {"modes", modes}};
}

json vec4_json(const spde::Vec4& v) { return json::array({v[0], v[1], v[2], v[3]}); }

}  // namespace

RunConfig config_from_json(const json& j) {
    RunConfig c;
    for (auto& sp : c.grid.initial) sp = spde::SpeciesInitial{1.0, {}};
    Section root(j, "");
    std::string kind = to_string(c.kind);
    root.string("kind", kind);
    try {
        c.kind = kind_from_string(kind);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("kind", e.what());
    }
    root.integer("master_seed", c.master_seed);
    root.integer("ensemble_size", c.ensemble_size);
    root.string("output_dir", c.output_dir);
    root.integer("diagnostic_stride", c.diagnostic_stride);
    root.num("max_failure_fraction", c.max_failure_fraction);

    if (const json* g = root.get("grid")) {
        Section s(*g, "grid");
        s.integer("d", c.grid.d);
        s.integer("M", c.grid.M);
        s.vec4("kappa", c.grid.kappa);
        if (const json* init = s.get("initial")) {
            if (!init->is_array() || init->size() != 4) throw ConfigError("grid.initial", "expected 4 species entries");
            for (std::size_t i = 0; i < 4; ++i) {
                c.grid.initial[i] = read_species((*init)[i], "grid.initial[" + std::to_string(i) + "]");
            }
        }
        s.finish();
    }
    if (const json* sj = root.get("solver")) {
        Section s(*sj, "solver");
        s.num("dt", c.solver.dt);
        s.num("T", c.solver.T);
        s.num("trunc_n", c.solver.trunc_n);
        std::string scheme = spde::to_string(c.solver.scheme);
        s.string("scheme", scheme);
        try {
            c.solver.scheme = spde::scheme_from_string(scheme);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("solver.scheme", e.what());
        }
        s.num("stop_threshold", c.solver.stop_threshold);
        s.boolean("reaction", c.solver.reaction);
        s.finish();
    }
    if (const json* nj = root.get("noise")) {
        Section s(*nj, "noise");
        std::string kind_s = kinetics::to_string(c.solver.noise.kind);
        s.string("kind", kind_s);
        try {
            c.solver.noise.kind = kinetics::noise_kind_from_string(kind_s);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("noise.kind", e.what());
        }
        s.num("nu", c.solver.noise.nu);
        s.num("eps_sigma", c.solver.noise.eps_sigma);
        s.num("trunc_n", c.solver.noise.trunc_n);
        s.integer("channels", c.solver.noise.channels);
        s.finish();
    }
    if (const json* rj = root.get("rates")) {
        Section s(*rj, "rates");
        s.num("lambda_fwd", c.solver.rates.lambda_fwd);
        s.num("lambda_bwd", c.solver.rates.lambda_bwd);
        s.finish();
    }
    if (const json* wj = root.get("wellmixed")) {
        Section s(*wj, "wellmixed");
        if (const json* p = s.get("phi")) {
            if (!p->is_array() || p->empty()) throw ConfigError("wellmixed.phi", "expected a non-empty array of monomials");
            c.wellmixed.phi.clear();
            for (std::size_t i = 0; i < p->size(); ++i) {
                const std::string path = "wellmixed.phi[" + std::to_string(i) + "]";
                Section ms((*p)[i], path);
                wellmixed::Monomial m;
                ms.num("coeff", m.coeff);
                if (const json* e = ms.get("exponents")) {
                    if (!e->is_array() || e->size() != 4) throw ConfigError(path + ".exponents", "expected 4 integers");
                    for (std::size_t k = 0; k < 4; ++k) m.exponents[k] = (*e)[k].get<int>();
                }
                ms.finish();
                c.wellmixed.phi.push_back(m);
            }
        }
        s.vec4("a0", c.wellmixed.a0);
        s.nums("N_list", c.wellmixed.N_list);
        s.integer("trials", c.wellmixed.trials);
        s.integer("sde_trials", c.wellmixed.sde_trials);
        s.num("T", c.wellmixed.T);
        s.num("dt", c.wellmixed.dt);
        s.boolean("control_variate", c.wellmixed.control_variate);
        s.finish();
    }
    if (const json* dj = root.get("diagnostics")) {
        Section s(*dj, "diagnostics");
        s.opt_num("C1", c.diagnostics.C1, "calibrated");
        s.num("calibration_box", c.diagnostics.calibration_box);
        s.num("C6", c.diagnostics.C6);
        s.num("rho_under", c.diagnostics.rho_under);
        s.opt_num("xi", c.diagnostics.xi, "auto");
        if (s.has("K") && s.get("K")->is_string()) {
            if (s.get("K")->get<std::string>() != "auto") throw ConfigError("diagnostics.K", "expected an integer or \"auto\"");
            c.diagnostics.K = -1;
        } else {
            s.integer("K", c.diagnostics.K);
        }
        s.nums("xi_grid", c.diagnostics.xi_grid);
        s.finish();
    }
    if (const json* dj = root.get("duality")) {
        Section s(*dj, "duality");
        std::string mode = duality::to_string(c.duality.mode);
        s.string("mode", mode);
        try {
            c.duality.mode = duality::dual_mode_from_string(mode);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("duality.mode", e.what());
        }
        s.num("eps", c.duality.eps);
        if (const json* h = s.get("H")) c.duality.H = read_species(*h, "duality.H");
        s.integer("degree", c.duality.degree);
        s.num("cond_limit", c.duality.cond_limit);
        s.finish();
    }
    if (const json* ij = root.get("inequalities")) {
        Section s(*ij, "inequalities");
        s.integer("samples", c.inequalities.samples);
        if (const json* sd = s.get("seeds")) {
            if (!sd->is_array() || sd->empty()) throw ConfigError("inequalities.seeds", "expected a non-empty array");
            c.inequalities.seeds.clear();
            for (const auto& v : *sd) c.inequalities.seeds.push_back(v.get<std::uint64_t>());
        }
        s.integer("source_samples", c.inequalities.source_samples);
        s.num("box", c.inequalities.box);
        s.nums("nu_list", c.inequalities.nu_list);
        s.num("trunc_level", c.inequalities.trunc_level);
        s.finish();
    }
    root.finish();
    c.solver.diagnostic_stride = c.diagnostic_stride;
    c.validate();
    return c;
}

void RunConfig::validate() const {
    auto wrap = [](const std::string& where, auto&& fn) {
        try {
            fn();
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(where, e.what());
        }
    };
    if (ensemble_size < 1) throw ConfigError("ensemble_size", "must be >= 1");
    if (diagnostic_stride < 1) throw ConfigError("diagnostic_stride", "must be >= 1");
    if (!(max_failure_fraction >= 0.0 && max_failure_fraction <= 1.0)) {
        throw ConfigError("max_failure_fraction", "must lie in [0, 1]");
    }
    if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
    const bool spatial = kind == ExperimentKind::Spde || kind == ExperimentKind::Diagnostics || kind == ExperimentKind::Duality;
    if (spatial) {
        wrap("grid", [&] { spde::TorusGrid(grid.d, grid.M).validate(); });
        for (std::size_t i = 0; i < 4; ++i) {
            if (!(grid.kappa[i] > 0.0)) throw ConfigError("grid.kappa[" + std::to_string(i) + "]", "kappa must be > 0");
        }
        wrap("solver", [&] {
            spde::SolverConfig s = solver;
            s.diagnostic_stride = diagnostic_stride;
            s.validate(torus(), grid.kappa);
        });
    }
    if (diagnostics.C1 && !(*diagnostics.C1 >= 0.0)) throw ConfigError("diagnostics.C1", "must be >= 0");
    if (!(diagnostics.calibration_box > 0.0)) throw ConfigError("diagnostics.calibration_box", "must be > 0");
    if (!(diagnostics.rho_under > 1.0 && diagnostics.rho_under < 1.5)) {
        throw ConfigError("diagnostics.rho_under", "must lie in (1, 3/2)");
    }
    if (!(diagnostics.C6 > 0.0)) throw ConfigError("diagnostics.C6", "must be > 0");
    if (diagnostics.xi && !(*diagnostics.xi > 0.0)) throw ConfigError("diagnostics.xi", "must be > 0");
    if (kind == ExperimentKind::Duality) {
        if (!(duality.eps > 0.0)) throw ConfigError("duality.eps", "must be > 0");
        if (duality.degree < 0 || duality.degree > 2) throw ConfigError("duality.degree", "must be 0, 1 or 2");
        if (!(duality.cond_limit > 1.0)) throw ConfigError("duality.cond_limit", "must be > 1");
    }
    if (kind == ExperimentKind::WellMixed) {
        if (wellmixed.N_list.empty()) throw ConfigError("wellmixed.N_list", "must not be empty");
        for (double N : wellmixed.N_list) {
            if (!(N >= 1.0) || N != std::floor(N)) throw ConfigError("wellmixed.N_list", "entries must be positive integers");
        }
        if (wellmixed.trials < 100) throw ConfigError("wellmixed.trials", "must be >= 100");
        if (!(wellmixed.T > 0.0)) throw ConfigError("wellmixed.T", "must be > 0");
        if (!(wellmixed.dt > 0.0)) throw ConfigError("wellmixed.dt", "must be > 0");
        for (const auto& m : wellmixed.phi) {
            if (m.degree() > 4) throw ConfigError("wellmixed.phi", "degree must be <= 4");
        }
        wrap("wellmixed.a0", [&] { kinetics::SpeciesVector{wellmixed.a0}; });
    }
    if (kind == ExperimentKind::InequalitySuite) {
        if (inequalities.samples < 1) throw ConfigError("inequalities.samples", "must be >= 1");
        if (inequalities.source_samples < 1) throw ConfigError("inequalities.source_samples", "must be >= 1");
        if (!(inequalities.box > 0.0)) throw ConfigError("inequalities.box", "must be > 0");
        if (!(inequalities.trunc_level >= 1.0)) throw ConfigError("inequalities.trunc_level", "must be >= 1");
    }
}

json to_json(const RunConfig& c) {
    json j;
    j["kind"] = to_string(c.kind);
    j["master_seed"] = c.master_seed;
    j["ensemble_size"] = c.ensemble_size;
    j["output_dir"] = c.output_dir;
    j["diagnostic_stride"] = c.diagnostic_stride;
    j["max_failure_fraction"] = c.max_failure_fraction;
    json init = json::array();
    for (const auto& sp : c.grid.initial) init.push_back(species_json(sp));
    j["grid"] = {{"d", c.grid.d}, {"M", c.grid.M}, {"kappa", vec4_json(c.grid.kappa)}, {"initial", init}};
    j["solver"] = {{"dt", c.solver.dt},
                   {"T", c.solver.T},
                   {"trunc_n", c.solver.trunc_n},
                   {"scheme", spde::to_string(c.solver.scheme)},
                   {"stop_threshold", encode_double(c.solver.stop_threshold)},
                   {"reaction", c.solver.reaction}};
    j["noise"] = {{"kind", kinetics::to_string(c.solver.noise.kind)},
                  {"nu", c.solver.noise.nu},
                  {"eps_sigma", c.solver.noise.eps_sigma},
                  {"trunc_n", c.solver.noise.trunc_n},
                  {"channels", c.solver.noise.channels}};
    j["rates"] = {{"lambda_fwd", c.solver.rates.lambda_fwd}, {"lambda_bwd", c.solver.rates.lambda_bwd}};
    json phi = json::array();
    for (const auto& m : c.wellmixed.phi) {
        phi.push_back({{"coeff", m.coeff},
                       {"exponents", {m.exponents[0], m.exponents[1], m.exponents[2], m.exponents[3]}}});
    }
    j["wellmixed"] = {{"phi", phi},
                      {"a0", vec4_json(c.wellmixed.a0)},
                      {"N_list", c.wellmixed.N_list},
                      {"trials", c.wellmixed.trials},
                      {"sde_trials", c.wellmixed.sde_trials},
                      {"T", c.wellmixed.T},
                      {"dt", c.wellmixed.dt},
                      {"control_variate", c.wellmixed.control_variate}};
    j["diagnostics"] = {{"C1", c.diagnostics.C1 ? json(*c.diagnostics.C1) : json("calibrated")},
                        {"calibration_box", c.diagnostics.calibration_box},
                        {"C6", c.diagnostics.C6},
                        {"rho_under", c.diagnostics.rho_under},
                        {"xi", c.diagnostics.xi ? json(*c.diagnostics.xi) : json("auto")},
                        {"K", c.diagnostics.K < 0 ? json("auto") : json(c.diagnostics.K)},
                        {"xi_grid", c.diagnostics.xi_grid}};
    j["duality"] = {{"mode", duality::to_string(c.duality.mode)},
                    {"eps", c.duality.eps},
                    {"H", species_json(c.duality.H)},
                    {"degree", c.duality.degree},
                    {"cond_limit", c.duality.cond_limit}};
    j["inequalities"] = {{"samples", c.inequalities.samples},
                         {"seeds", c.inequalities.seeds},
                         {"source_samples", c.inequalities.source_samples},
                         {"box", c.inequalities.box},
                         {"nu_list", c.inequalities.nu_list},
                         {"trunc_level", c.inequalities.trunc_level}};
    return j;
}

std::string canonical_dump(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

std::string experiment_dump(const RunConfig& cfg) {
    json j = to_json(cfg);
    j.erase("output_dir");
    return j.dump(2) + "\n";
}

std::string config_hash(const RunConfig& cfg) { return sha256_hex(experiment_dump(cfg)); }

RunConfig parse_config(const std::string& text, const std::string& source) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        const std::size_t upto = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
        for (std::size_t i = 0; i < upto; ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col), "parse error");
    }
    return config_from_json(j);
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path, "cannot open configuration file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

}  // namespace srd::runner
