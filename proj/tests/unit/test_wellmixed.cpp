#include <doctest.h>

#include <cmath>

#include "srd/stats.hpp"
#include "srd/wellmixed/polynomial.hpp"
#include "srd/wellmixed/wellmixed.hpp"

using namespace srd::wellmixed;
using srd::kinetics::Vec4;

namespace {

Vec4 ode_rhs(const Vec4& a) {
    const double r = a[0] * a[2] - a[1] * a[3];
    return {-r, r, -r, r};
}

// Classical RK4 for da/dt = f(a).
Vec4 rk4(Vec4 a, double T, int steps) {
    const double h = T / steps;
    auto axpy = [](const Vec4& x, double s, const Vec4& y) {
        Vec4 o;
        for (std::size_t i = 0; i < 4; ++i) o[i] = x[i] + s * y[i];
        return o;
    };
    for (int n = 0; n < steps; ++n) {
        const Vec4 k1 = ode_rhs(a), k2 = ode_rhs(axpy(a, h / 2, k1)), k3 = ode_rhs(axpy(a, h / 2, k2)),
                   k4 = ode_rhs(axpy(a, h, k3));
        for (std::size_t i = 0; i < 4; ++i) a[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    }
    return a;
}

}  // namespace

TEST_CASE("SSA single jump and its reverse") {
    JumpState s;
    s.counts = {1, 0, 1, 0};
    s.N = 2;
    ReactionNetwork rates;
    rates.lambda_bwd = 1.0;
    const auto path = ssa_simulate(s, rates, 50.0, 42);
    REQUIRE(path.size() >= 2);
    CHECK(path[1].counts == std::array<std::int64_t, 4>{0, 1, 0, 1});
    for (std::size_t k = 1; k < path.size(); ++k) {
        const auto& c = path[k].counts;
        CHECK((c == std::array<std::int64_t, 4>{0, 1, 0, 1} || c == std::array<std::int64_t, 4>{1, 0, 1, 0}));
        if (path[k].t < 50.0) CHECK(c != path[k - 1].counts);
    }
    // mean first waiting time is 1 / 0.5
    std::vector<double> waits;
    srd::Rng rng(5);
    for (int k = 0; k < 4000; ++k) {
        rates.lambda_bwd = 0.0;
        const auto p = ssa_simulate(s, rates, 1e9, rng);
        REQUIRE(p.size() >= 2);
        waits.push_back(p[1].t);
    }
    const auto m = srd::stats::mean_se(waits);
    CHECK(std::abs(m.mean - 2.0) < 4 * m.se);
}

TEST_CASE("SSA absorbing state and conservation") {
    JumpState s;
    s.counts = {0, 7, 0, 3};
    s.N = 10;
    ReactionNetwork rates;
    rates.lambda_bwd = 0.0;
    const auto path = ssa_simulate(s, rates, 5.0, 1);
    for (const auto& st : path) CHECK(st.counts == s.counts);

    s.counts = {40, 25, 30, 10};
    s.N = 50;
    rates.lambda_bwd = 1.0;
    const auto p2 = ssa_simulate(s, rates, 3.0, 2);
    CHECK(p2.size() > 10);
    for (const auto& st : p2) {
        CHECK(st.counts[0] + st.counts[1] == 65);
        CHECK(st.counts[2] + st.counts[3] == 40);
        for (auto c : st.counts) CHECK(c >= 0);
    }
    CHECK(ssa_simulate(s, rates, 3.0, 2).back().counts == p2.back().counts);
}

TEST_CASE("Langevin zero-noise limit against RK4") {
    const SpeciesVector a0(1.5, 0.5, 1.0, 0.25);
    double prev = 0.0;
    for (double dt : {0.01, 0.005}) {
        SdeConfig cfg;
        cfg.N = INFINITY;
        cfg.dt = dt;
        const auto tr = langevin_simulate(a0, cfg, 1.0);
        REQUIRE(tr.ok);
        const Vec4 ref = rk4(a0.values(), 1.0, 1000);
        double err = 0.0;
        for (std::size_t i = 0; i < 4; ++i) err = std::max(err, std::abs(tr.states.back()[i] - ref[i]));
        CHECK(err < 2.0 * dt);
        if (prev > 0.0) CHECK(err / prev == doctest::Approx(0.5).epsilon(0.1));
        prev = err;
    }
}

TEST_CASE("Langevin at detailed balance and pairwise cancellation") {
    const SpeciesVector a0(1, 1, 1, 1);
    std::vector<double> finals[4];
    for (int k = 0; k < 10000; ++k) {
        SdeConfig cfg;
        cfg.N = 100.0;
        cfg.dt = 0.01;
        cfg.rng_seed = srd::derive_seed(3, static_cast<std::uint64_t>(k), "test");
        const auto tr = langevin_simulate(a0, cfg, 0.2);
        REQUIRE(tr.ok);
        for (std::size_t i = 0; i < 4; ++i) finals[i].push_back(tr.states.back()[i]);
        if (k < 50) {
            for (const auto& st : tr.states) {
                CHECK(st[0] + st[1] == doctest::Approx(2.0).epsilon(1e-13));
                CHECK(st[2] + st[3] == doctest::Approx(2.0).epsilon(1e-13));
            }
        }
    }
    for (auto& f : finals) {
        const auto m = srd::stats::mean_se(f);
        CHECK(std::abs(m.mean - 1.0) <= 3 * m.se);
    }
}

TEST_CASE("generator expansion") {
    const SpeciesVector a(1.3, 0.4, 2.1, 0.7);
    const double f1 = -(1.3 * 2.1 - 0.4 * 0.7);
    const auto lin = apply_generator(Polynomial::monomial(1.0, {1, 0, 0, 0}), a, 100.0);
    CHECK(lin.remainder == 0.0);
    CHECK(lin.exact == doctest::Approx(f1).epsilon(1e-13));
    for (double N : {10.0, 100.0, 1e4}) {
        const auto q = apply_generator(Polynomial::monomial(1.0, {2, 0, 0, 0}), a, N, {}, Scaling::TaylorExact);
        CHECK(q.exact == doctest::Approx(2 * 1.3 * f1 + (1.3 * 2.1 + 0.4 * 0.7) / N).epsilon(1e-12));
        CHECK(std::abs(q.remainder) <= 1e-12);
        const auto mixed = apply_generator(Polynomial().add(1.0, {1, 1, 0, 0}).add(-2.0, {0, 0, 1, 1}).add(0.5, {0, 2, 0, 0}),
                                           a, N, {}, Scaling::TaylorExact);
        CHECK(std::abs(mixed.remainder) <= 1e-12);
        const auto qp = apply_generator(Polynomial::monomial(1.0, {2, 0, 0, 0}), a, N, {}, Scaling::Paper);
        CHECK(std::abs(qp.remainder) > 1e-3 / N);
    }
    const auto cubic = Polynomial::monomial(1.0, {3, 0, 0, 0});
    for (double N : {100.0, 1000.0}) {
        const double r1 = apply_generator(cubic, a, N).remainder;
        const double r2 = apply_generator(cubic, a, 2 * N).remainder;
        CHECK(r1 / r2 == doctest::Approx(4.0).epsilon(0.01));
    }
}

TEST_CASE("weak error study, small") {
    const auto phi = Polynomial::monomial(1.0, {2, 0, 0, 0});
    WeakErrorConfig cfg;
    cfg.dt = 0.02;
    const auto table = weak_error_study(phi, SpeciesVector(1, 1, 1, 1), {100.0, 10000.0}, 4000, 0.5, cfg);
    CHECK(table.rows.size() == 4);
    const auto& e = table.at(100.0, Scaling::TaylorExact);
    const auto& p = table.at(100.0, Scaling::Paper);
    CHECK(std::isfinite(e.error));
    CHECK(e.error < p.error);
    // reproducible
    const auto again = weak_error_study(phi, SpeciesVector(1, 1, 1, 1), {100.0, 10000.0}, 4000, 0.5, cfg);
    CHECK(again.at(100.0, Scaling::Paper).sde_mean == p.sde_mean);
}

TEST_CASE("linear test function matches the ODE gap") {
    const auto phi = Polynomial::monomial(1.0, {1, 0, 0, 0});
    WeakErrorConfig cfg;
    cfg.dt = 0.02;
    const auto table = weak_error_study(phi, SpeciesVector(2, 0.5, 1, 1), {1000.0}, 4000, 0.5, cfg);
    const auto& r = table.at(1000.0, Scaling::TaylorExact);
    CHECK(r.error <= 3 * r.error_se + 5e-3);
}
