#include <doctest.h>

#include <cmath>
#include <numeric>

#include "srd/spde/diffusion.hpp"
#include "srd/spde/grid.hpp"
#include "srd/spde/solver.hpp"

using namespace srd::spde;
using srd::kinetics::NoiseKind;

namespace {

TorusField cos_field(int d, int M, double amp = 0.5, Vec4 kappa = {1, 1, 1, 1}) {
    std::array<SpeciesInitial, 4> sp{};
    for (auto& s : sp) s = {1.0, {}};
    sp[0].modes = {FourierMode{{1, 0}, amp, 0.0}};
    sp[1].modes = {FourierMode{{1, d == 2 ? 1 : 0}, -amp * 0.6, 0.3}};
    sp[3].modes = {FourierMode{{2, 0}, amp * 0.4, 1.0}};
    return make_initial(TorusGrid(d, M), kappa, sp);
}

double pair_sum(const TorusField& f, int i, int j) {
    double s = 0.0;
    for (std::size_t c = 0; c < f.grid().cells(); ++c) s += f.species(i)[c] + f.species(j)[c];
    return s;
}

class ThrowingSource : public IncrementSource {
public:
    void next(std::span<double>) override { throw std::logic_error("no draws expected"); }
};

}  // namespace

TEST_CASE("grid wrapping and validation") {
    const TorusGrid g(2, 8);
    CHECK(g.index(8, 0) == g.index(0, 0));
    CHECK(g.index(-1, 3) == g.index(7, 3));
    CHECK(g.cells() == 64);
    CHECK_THROWS(TorusGrid(3, 8));
    CHECK_THROWS(TorusGrid(1, 2));
    TorusField f(TorusGrid(1, 8), {1, 1, 1, 1});
    f.species(2)[3] = -0.1;
    CHECK_THROWS(f.validate());
    CHECK_THROWS(TorusField(TorusGrid(1, 8), {1, 0, 1, 1}).validate());
}

TEST_CASE("discrete laplacian eigenvectors") {
    const TorusGrid g1(1, 128);
    TorusField c = constant_field(g1, {1, 1, 1, 1}, {2, 2, 2, 2});
    for (double v : discrete_laplacian(c, 0)) CHECK(v == 0.0);

    TorusField f(g1, {1, 1, 1, 1});
    for (std::size_t j = 0; j < g1.cells(); ++j) f.species(0)[j] = std::cos(2 * M_PI * j / 128.0);
    const double h = g1.h();
    const double lam = -(2 / (h * h)) * (1 - std::cos(2 * M_PI * h));
    const auto L = discrete_laplacian(f, 0);
    for (std::size_t j = 0; j < g1.cells(); ++j) CHECK(std::abs(L[j] - lam * f.species(0)[j]) < 1e-12 * std::abs(lam));

    const TorusGrid g2(2, 16);
    TorusField cb(g2, {1, 1, 1, 1});
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) cb.species(1)[g2.index(x, y)] = ((x + y) % 2) ? -1.0 : 1.0;
    }
    const auto L2 = discrete_laplacian(cb, 1);
    const double h2 = g2.h() * g2.h();
    for (std::size_t c2 = 0; c2 < g2.cells(); ++c2) CHECK(L2[c2] == doctest::Approx(-8 / h2 * cb.species(1)[c2]));
}

TEST_CASE("implicit diffusion solves (I - dt kappa L) u = b") {
    for (auto [d, M] : {std::pair{1, 20}, std::pair{2, 16}, std::pair{2, 12}}) {
        const TorusGrid g(d, M);
        const Vec4 kappa{0.5, 1, 2, 0.25};
        DiffusionSolver s(g, kappa, 1e-3);
        const auto f = cos_field(d, M);
        for (int i = 0; i < 4; ++i) {
            std::vector<double> u(f.species(i).begin(), f.species(i).end());
            s.solve(i, u);
            std::vector<double> Lu(u.size());
            apply_laplacian(g, u, Lu);
            for (std::size_t c = 0; c < u.size(); ++c) {
                CHECK(std::abs(u[c] - 1e-3 * kappa[static_cast<std::size_t>(i)] * Lu[c] - f.species(i)[c]) < 1e-10);
            }
        }
    }
}

TEST_CASE("sup norm examples") {
    const TorusGrid g(1, 8);
    CHECK(sup_norm(TorusField(g, {1, 1, 1, 1})) == 0.0);
    TorusField f(g, {1, 1, 1, 1});
    f.set(3, {3, 0, 4, 0});
    CHECK(sup_norm(f) == 5.0);
    CHECK(sup_norm(constant_field(g, {1, 1, 1, 1}, {1, 1, 1, 1})) == 2.0);
}

TEST_CASE("trivial fixed points") {
    SolverConfig cfg;
    cfg.dt = 1e-3;
    cfg.T = 0.05;
    cfg.noise.nu = 0.5;
    cfg.seed = 3;
    const TorusGrid g(2, 8);
    const auto zero = simulate(TorusField(g, {1, 2, 1, 1}), cfg);
    CHECK(zero.clamp_mass == 0.0);
    CHECK(zero.final_field->species(0)[5] == 0.0);
    CHECK(sup_norm(*zero.final_field) == 0.0);

    cfg.noise.nu = 0.0;
    const auto c = constant_field(g, {1, 2, 1, 1}, {0.7, 0.7, 0.7, 0.7});
    ThrowingSource src;
    const auto rec = simulate(c, cfg, {}, &src);
    CHECK(rec.status == TrajectoryStatus::Completed);
    CHECK(*rec.final_field == c);
}

TEST_CASE("exact pair conservation with the true noise model") {
    SolverConfig cfg;
    cfg.dt = 1e-3;
    cfg.T = 0.2;
    cfg.noise.kind = NoiseKind::True;
    cfg.noise.nu = 0.01;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        cfg.seed = seed;
        const auto a0 = cos_field(1, 64);
        const auto rec = simulate(a0, cfg);
        REQUIRE(rec.clamp_events == 0);
        CHECK(std::abs(pair_sum(*rec.final_field, 0, 1) / pair_sum(a0, 0, 1) - 1) < 1e-12);
        CHECK(std::abs(pair_sum(*rec.final_field, 2, 3) / pair_sum(a0, 2, 3) - 1) < 1e-12);
    }
}

TEST_CASE("explicit scheme gate") {
    SolverConfig cfg;
    cfg.scheme = Scheme::Explicit;
    cfg.dt = 1e-3;
    cfg.T = 0.01;
    const TorusGrid g(1, 64);
    try {
        cfg.validate(g, {1, 1, 1, 1});
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("explicit stability gate") != std::string::npos);
    }
    cfg.dt = 1e-4;
    CHECK_NOTHROW(cfg.validate(g, {1, 1, 1, 1}));
    cfg.T = 0.01005;
    CHECK_THROWS(cfg.validate(g, {1, 1, 1, 1}));
}

TEST_CASE("explicit and implicit agree to first order") {
    SolverConfig cfg;
    cfg.dt = 1e-5;
    cfg.T = 0.01;
    cfg.noise.nu = 0.0;
    const auto a0 = cos_field(1, 32);
    const auto imp = simulate(a0, cfg);
    cfg.scheme = Scheme::Explicit;
    const auto exp = simulate(a0, cfg);
    double diff = 0.0;
    for (std::size_t c = 0; c < 32; ++c) diff = std::max(diff, std::abs(imp.final_field->species(0)[c] - exp.final_field->species(0)[c]));
    CHECK(diff < 1e-4);
}

TEST_CASE("seed determinism and record coverage") {
    SolverConfig cfg;
    cfg.dt = 1e-3;
    cfg.T = 0.05;
    cfg.noise.nu = 0.2;
    cfg.seed = 77;
    cfg.diagnostic_stride = 7;
    const auto a0 = cos_field(2, 16);
    const auto r1 = simulate(a0, cfg);
    const auto r2 = simulate(a0, cfg);
    CHECK(*r1.final_field == *r2.final_field);
    CHECK(r1.sup_norms == r2.sup_norms);
    CHECK(r1.times.front() == 0.0);
    CHECK(r1.times.back() == doctest::Approx(cfg.T));
    CHECK(r1.steps_taken == 50);
    cfg.seed = 78;
    CHECK(!(*simulate(a0, cfg).final_field == *r1.final_field));
}

TEST_CASE("truncated system agrees with the untruncated one until the hitting time") {
    SolverConfig base;
    base.dt = 1e-3;
    base.T = 0.5;
    base.noise.kind = NoiseKind::Smoothed;
    base.noise.nu = 2.0;
    base.seed = 12;
    base.keep_fields = true;
    const auto a0 = cos_field(1, 32, 0.9);
    const double n = 2.3;
    SolverConfig trunc = base;
    trunc.trunc_n = n;
    trunc.noise.kind = NoiseKind::Truncated;
    trunc.noise.trunc_n = n;
    trunc.stop_threshold = n;
    SolverConfig plain = base;
    plain.stop_threshold = n;
    const auto rt = simulate(a0, trunc);
    const auto rp = simulate(a0, plain);
    REQUIRE(rt.hitting_time.has_value());
    CHECK(rp.hitting_time == rt.hitting_time);
    REQUIRE(rt.fields.size() == rp.fields.size());
    for (std::size_t k = 0; k < rt.fields.size(); ++k) CHECK(rt.fields[k] == rp.fields[k]);

    // nested thresholds along one path
    std::optional<double> prev;
    for (double level : {2.1, 2.2, 2.3, 2.4, 2.6}) {
        SolverConfig c = base;
        c.keep_fields = false;
        c.stop_threshold = level;
        const auto r = simulate(a0, c);
        if (prev && r.hitting_time) CHECK(*prev <= *r.hitting_time);
        if (r.hitting_time) {
            CHECK(r.status == TrajectoryStatus::Stopped);
            prev = r.hitting_time;
        } else {
            CHECK(r.status == TrajectoryStatus::Completed);
        }
    }
    SolverConfig big = base;
    big.keep_fields = false;
    big.stop_threshold = 1e300;
    CHECK(simulate(a0, big).t_end == doctest::Approx(base.T));
}

TEST_CASE("coupled increments") {
    GaussianIncrements coarse(9, 0.02, 2), fine(9, 0.01);
    std::vector<double> c(2), f1(2), f2(2);
    for (int k = 0; k < 10; ++k) {
        coarse.next(c);
        fine.next(f1);
        fine.next(f2);
        CHECK(c[0] == doctest::Approx(f1[0] + f2[0]).epsilon(1e-14));
        CHECK(c[1] == doctest::Approx(f1[1] + f2[1]).epsilon(1e-14));
    }
}

TEST_CASE("non-finite state is reported as a failed record") {
    SolverConfig cfg;
    cfg.dt = 0.05;
    cfg.T = 5.0;
    cfg.noise.nu = 0.0;
    cfg.rates.lambda_fwd = 1.0;
    cfg.rates.lambda_bwd = 1e200;
    const auto a0 = constant_field(TorusGrid(1, 8), {1, 1, 1, 1}, {1, 1e5, 1, 1e5});
    const auto rec = simulate(a0, cfg);
    CHECK(rec.status == TrajectoryStatus::Failed);
    CHECK(rec.error.find("step") == 0);
}
