#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "srd/rng.hpp"
#include "srd/runner/config.hpp"
#include "srd/runner/ensemble.hpp"
#include "srd/runner/io.hpp"

using namespace srd::runner;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("srd_unit_" + name);
    fs::remove_all(p);
    return p;
}

RunConfig small_spde(const fs::path& out) {
    RunConfig c;
    c.kind = ExperimentKind::Spde;
    c.output_dir = out.string();
    c.ensemble_size = 6;
    c.grid.M = 16;
    c.solver.dt = 0.005;
    c.solver.T = 0.05;
    c.solver.noise.nu = 0.05;
    c.diagnostics.C1 = 0.06;
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("seed derivation") {
    CHECK(srd::derive_seed(1, 0, "a") == srd::derive_seed(1, 0, "a"));
    CHECK(srd::derive_seed(1, 0, "a") != srd::derive_seed(1, 1, "a"));
    CHECK(srd::derive_seed(1, 0, "a") != srd::derive_seed(1, 0, "b"));
    CHECK(srd::derive_seed(1, 0, "a") != srd::derive_seed(2, 0, "a"));
    CHECK(srd::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("config round trip with defaults materialized") {
    const std::string text = R"({"kind": "spde", "grid": {"d": 1, "M": 32}, "solver": {"dt": "0x1.0624dd2f1a9fcp-10", "T": 0.1}})";
    const RunConfig c = parse_config(text);
    CHECK(c.grid.M == 32);
    CHECK(c.solver.dt == 0x1.0624dd2f1a9fcp-10);
    const std::string dump = canonical_dump(c);
    CHECK(dump.find("\"eps_sigma\"") != std::string::npos);
    CHECK(dump.find("\"lambda_fwd\"") != std::string::npos);
    const RunConfig back = parse_config(dump);
    CHECK(canonical_dump(back) == dump);
    CHECK(config_hash(back) == config_hash(c));
    CHECK(back.solver.dt == c.solver.dt);
    // sentinels survive
    CHECK(dump.find("\"calibrated\"") != std::string::npos);
    RunConfig d = c;
    d.diagnostics.C1 = 0.1 + 0.2;
    CHECK(*parse_config(canonical_dump(d)).diagnostics.C1 == 0.1 + 0.2);
}

TEST_CASE("config errors") {
    try {
        parse_config("{\n  \"kind\": \"spde\",\n  \"grid\": {\"M\": 16,,}\n}", "cfg.json");
        FAIL("expected parse error");
    } catch (const ConfigError& e) {
        CHECK(e.where().find("cfg.json:3:") == 0);
    }
    try {
        parse_config(R"({"grid": {"M": 16, "Mx": 3}})");
        FAIL("expected unknown key");
    } catch (const ConfigError& e) {
        CHECK(e.where() == "grid.Mx");
    }
    try {
        parse_config(R"({"solver": {"scheme": "explicit", "dt": 0.001, "T": 0.1}, "grid": {"M": 64}})").validate();
        FAIL("expected gate rejection");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("explicit stability gate") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config(R"({"grid": {"M": "many"}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"kind": "nope"})"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/cfg.json"), ConfigError);
}

TEST_CASE("csv quoting and reading") {
    CHECK(csv_escape("plain") == "plain");
    CHECK(csv_escape("a,b") == "\"a,b\"");
    CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(format_double(0.1) == "0.10000000000000001");
    const fs::path dir = scratch("csv");
    fs::create_directories(dir);
    {
        CsvWriter w(dir / "t.csv", {"name", "x"}, "h");
        w.row({"a,b", format_double(1.5)});
        w.row({"line\nbreak", format_double(-INFINITY)});
        CHECK_THROWS(w.row({"only one"}));
        w.close();
    }
    const auto t = read_csv(dir / "t.csv");
    CHECK(t.header == std::vector<std::string>{"name", "x", "config_hash"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][0] == "a,b");
    CHECK(t.rows[1][0] == "line\nbreak");
    CHECK(t.number(1, "x") == -INFINITY);
    CHECK(t.rows[0][2] == "h");
    CHECK(slurp(dir / "t.csv").find("\r\n") != std::string::npos);
}

TEST_CASE("binary snapshot round trip") {
    const fs::path dir = scratch("snap");
    fs::create_directories(dir);
    std::array<srd::spde::SpeciesInitial, 4> sp{};
    sp[2] = {1.0, {srd::spde::FourierMode{{1, 1}, 0.3, 0.2}}};
    const auto f = srd::spde::make_initial(srd::spde::TorusGrid(2, 8), {0.5, 1, 2, 4}, sp);
    write_snapshot(dir / "f.bin", f);
    CHECK(read_snapshot(dir / "f.bin") == f);
    const std::string raw = slurp(dir / "f.bin");
    CHECK(raw.substr(0, 4) == "SRDF");
    CHECK(raw.size() == 24 + 8 * (4 + 4 * 64));
    std::ofstream(dir / "bad.bin", std::ios::binary) << raw.substr(0, 100);
    CHECK_THROWS(read_snapshot(dir / "bad.bin"));
}

TEST_CASE("single deterministic trajectory") {
    const fs::path out = scratch("single");
    RunConfig c = small_spde(out);
    c.ensemble_size = 1;
    c.solver.noise.nu = 0.0;
    const auto rec = run_ensemble(c);
    CHECK(rec.status == "completed");
    std::size_t trajectories = 0;
    for (const auto& f : rec.files) trajectories += f.path.rfind("trajectories/", 0) == 0 ? 1 : 0;
    CHECK(trajectories == 1);
    CHECK(fs::exists(out / "manifest.json"));
    const auto loaded = load_run(out);
    CHECK(loaded.config_hash == rec.config_hash);
    CHECK(loaded.files.size() == rec.files.size());
}

TEST_CASE("determinism across repeats and worker counts") {
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    RunConfig c = small_spde(a);
    const auto r1 = run_ensemble(c, {1});
    c.output_dir = b.string();
    const auto r2 = run_ensemble(c, {4});
    REQUIRE(r1.files.size() == r2.files.size());
    for (std::size_t i = 0; i < r1.files.size(); ++i) {
        CHECK(r1.files[i].path == r2.files[i].path);
        CHECK(r1.files[i].sha256 == r2.files[i].sha256);
    }
    CHECK(r1.seeds == r2.seeds);
    CHECK(r1.config_hash == r2.config_hash);
    // output_dir is part of the config, so only the data hashes are compared
    const auto r3 = run_ensemble(small_spde(a), {2});
    CHECK(r3.config_hash == r1.config_hash);
    for (std::size_t i = 0; i < r1.files.size(); ++i) CHECK(r1.files[i].sha256 == r3.files[i].sha256);
}

TEST_CASE("reports") {
    const fs::path out = scratch("report");
    run_ensemble(small_spde(out));
    const auto files = report(out, "entropy");
    REQUIRE(files.size() == 2);
    const std::string first = slurp(files[0]);
    report(out, "entropy");
    CHECK(slurp(files[0]) == first);
    CHECK(slurp(files[1]).find("\"empirical\"") != std::string::npos);
    CHECK_THROWS_WITH_AS(report(out, "ladder"), doctest::Contains("ladder.csv"), std::runtime_error);
    CHECK_THROWS_AS(report(out, "bogus"), std::invalid_argument);

    fs::remove(out / "trajectories" / "traj_00000.csv");
    CHECK_THROWS_WITH(report(out, "entropy"), doctest::Contains("traj_00000.csv"));
    CHECK_THROWS_WITH(report(scratch("absent"), "entropy"), doctest::Contains("manifest.json"));
}

TEST_CASE("tampered outputs are detected") {
    const fs::path out = scratch("tamper");
    run_ensemble(small_spde(out));
    std::ofstream(out / "summary.csv", std::ios::app) << "x";
    CHECK_THROWS_WITH(load_run(out), doctest::Contains("hash mismatch"));
}

TEST_CASE("heat-check convergence table") {
    const auto st = heat_convergence(1.0, 0.1, 64, {1e-3, 5e-4, 2.5e-4}, {16, 32, 64});
    CHECK(st.rows.size() == 6);
    CHECK(st.temporal_order > 0.9);
    CHECK(st.spatial_order > 1.9);
    const fs::path out = scratch("converge");
    RunConfig c;
    c.output_dir = out.string();
    const auto rec = run_convergence(c);
    CHECK(fs::exists(out / "converge.csv"));
    CHECK(report(out, "heat").size() == 1);
    CHECK(rec.summary.at("spatial_order").get<double>() > 1.9);
}
