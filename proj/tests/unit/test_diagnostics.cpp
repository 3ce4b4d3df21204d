#include <doctest.h>

#include <cmath>

#include "srd/diagnostics/diagnostics.hpp"
#include "srd/kinetics/entropy.hpp"
#include "srd/spde/solver.hpp"

using namespace srd::diagnostics;
using namespace srd::spde;

namespace {

TorusField bump(int M, Vec4 kappa = {1, 1, 1, 1}) {
    TorusField f(TorusGrid(1, M), kappa);
    for (int j = 0; j < M; ++j) f.species(0)[static_cast<std::size_t>(j)] = 1 + std::cos(2 * M_PI * j / M);
    return f;
}

double simpson(double (*f)(double), int n) {
    const double h = 1.0 / n;
    double s = f(0) + f(1);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * f(i * h);
    return s * h / 3;
}

double dissipation_integrand(double x) {
    const double g = -2 * M_PI * std::sin(2 * M_PI * x);
    return g * g / (2 + std::cos(2 * M_PI * x));
}

TorusField noisy_field(int d, int M) {
    std::array<SpeciesInitial, 4> sp{};
    sp[0] = {1.0, {FourierMode{{1, 0}, 0.8, 0.0}}};
    sp[1] = {2.0, {FourierMode{{1, 1}, 1.5, 0.4}}};
    sp[2] = {0.5, {FourierMode{{2, 0}, 0.3, 0.0}}};
    sp[3] = {3.0, {FourierMode{{0, 1}, 2.5, 1.1}}};
    return make_initial(TorusGrid(d, M), {1, 0.5, 2, 1}, sp);
}

}  // namespace

TEST_CASE("entropy functionals") {
    const TorusGrid g(2, 8);
    const auto z = entropy_functionals(TorusField(g, {1, 1, 1, 1}));
    CHECK(z.E == 0.0);
    CHECK(z.E2 == 0.0);
    const auto c = entropy_functionals(constant_field(g, {1, 1, 1, 1}, {1, 1, 1, 1}));
    CHECK(c.E == doctest::Approx(8 * std::log(2.0)).epsilon(1e-14));
    CHECK(c.E2 == doctest::Approx(4 * std::pow(2 * std::log(2.0), 2)).epsilon(1e-14));
    const auto c3 = entropy_functionals(constant_field(g, {1, 1, 1, 1}, {3, 3, 3, 3}));
    CHECK(c3.E2 >= c3.E * c3.E / 4 * (1 - 1e-14));
}

TEST_CASE("dissipation increment") {
    CHECK(dissipation_increment(constant_field(TorusGrid(2, 8), {1, 1, 1, 1}, {2, 1, 3, 1})) == 0.0);
    const double exact = simpson(dissipation_integrand, 4096);
    double prev_err = 0.0;
    for (int M : {64, 128}) {
        const double err = std::abs(dissipation_increment(bump(M)) - exact);
        CHECK(err / exact < 5e-3);
        if (prev_err > 0) CHECK(prev_err / err > 3.5);
        prev_err = err;
    }
    CHECK(dissipation_increment(bump(64, {2, 1, 1, 1})) == doctest::Approx(2 * dissipation_increment(bump(64))).epsilon(1e-14));
}

TEST_CASE("truncated functionals") {
    const auto f = noisy_field(2, 16);
    const double sup = max_species_value(f);
    const auto top = truncated_functionals(f, sup);
    CHECK(top.E_xi == 0.0);
    CHECK(top.psi_sq == 0.0);
    double mass = 0.0;
    for (int i = 0; i < 4; ++i) {
        for (double v : f.species(i)) mass += v;
    }
    mass *= f.grid().cell_volume();
    CHECK(truncated_functionals(f, 0.0).E_xi == doctest::Approx(entropy_functionals(f).E - mass).epsilon(1e-12));
    double prevE = INFINITY, prevP = INFINITY;
    for (double xi = 0.0; xi < sup + 1; xi += 0.25) {
        const auto t = truncated_functionals(f, xi);
        CHECK(t.E_xi <= prevE);
        CHECK(t.psi_sq <= prevP);
        prevE = t.E_xi;
        prevP = t.psi_sq;
    }
}

TEST_CASE("De Giorgi levels and ladder") {
    const auto lv = degiorgi_levels(8.0, 3);
    REQUIRE(lv.size() == 4);
    CHECK(lv[0] == 4.0);
    CHECK(lv[1] == 6.0);
    CHECK(lv[2] == 7.0);
    CHECK(lv[3] == 7.5);
    CHECK(degiorgi_levels(13.0, 60).back() == doctest::Approx(13.0));
    CHECK(degiorgi_levels(3.3, 0)[0] == doctest::Approx(1.65));
    CHECK(default_ladder_depth(16.0) == 4);
    for (double xi : {2.0, 10.0, 1000.0}) {
        CHECK(ladder_delta(xi, 1.0) == doctest::Approx(1.0 / std::max(1.0, std::sqrt(std::log(xi)))));
        CHECK(ladder_delta(xi, 3.0) == doctest::Approx(1.0 / 3.0));
    }
    CHECK_THROWS(DeGiorgiLadder::make(8.0, 3, 1.0, 1.5));
    CHECK_THROWS(DeGiorgiLadder::make(8.0, 3, 1.0, 1.0));

    // W_k against 8^k/xi + 4^k: bounded ratio across levels and xi
    for (double xi : {4.0, 16.0, 100.0}) {
        for (int k = 0; k < 6; ++k) {
            const double r = w_k(xi, k) / (std::pow(8.0, k) / xi + std::pow(4.0, k));
            CHECK(r >= 1.0);
            CHECK(r <= 64.0);
        }
    }

    SolverConfig cfg;
    cfg.dt = 1e-3;
    cfg.T = 0.05;
    cfg.noise.nu = 0.01;
    cfg.keep_fields = true;
    const auto a0 = noisy_field(1, 32);
    const auto rec = simulate(a0, cfg);
    const double B = rec.max_species_value;
    const auto ladder = ladder_check(rec, DeGiorgiLadder::make(2.5 * B, 3));
    REQUIRE(ladder.report.size() == 4);
    for (const auto& l : ladder.report) {
        CHECK(l.U == 0.0);
        CHECK(l.pass);
    }
    const auto low = ladder_check(rec, DeGiorgiLadder::make(B, 2));
    CHECK(low.report.back().U > 0.0);
    CHECK(low.report.front().U >= low.report.back().U);
}

TEST_CASE("tail and theta") {
    std::vector<TailObservation> obs;
    for (int k = 0; k < 40; ++k) obs.push_back({1.0 + 0.05 * k, false});
    const double c = 1.0 + 0.05 * 39;
    std::vector<double> grid;
    for (int k = 0; k <= 40; ++k) grid.push_back(0.5 + 0.1 * k);
    const auto t = tail_and_theta(obs, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (grid[k] > c) CHECK(t.survival_naive[k] == 0.0);
        if (k > 0) {
            CHECK(t.survival_naive[k] <= t.survival_naive[k - 1]);
            CHECK(t.survival_km[k] <= t.survival_km[k - 1]);
        }
    }
    CHECK(t.theta_mean <= srd::kinetics::theta(c));
    CHECK(t.theta_ci_lo <= t.theta_mean);
    CHECK(t.theta_ci_hi >= t.theta_mean);

    std::vector<TailObservation> same(30, TailObservation{2.5, false});
    const auto s = tail_and_theta(same, grid);
    CHECK(s.theta_mean == doctest::Approx(srd::kinetics::theta(2.5)).epsilon(1e-15));
    CHECK(s.theta_se < 1e-15);

    obs[3].censored = obs[7].censored = true;
    const auto cens = tail_and_theta(obs, grid);
    CHECK(cens.censored == 2);
    CHECK(cens.n == 40);
    same.resize(10);
    CHECK_THROWS(tail_and_theta(same, grid));
}

TEST_CASE("entropy trace and residual") {
    SolverConfig cfg;
    cfg.dt = 1e-3;
    cfg.T = 0.05;
    cfg.noise.nu = 0.0;
    const auto c = constant_field(TorusGrid(1, 16), {1, 1, 1, 1}, {2, 2, 2, 2});
    EntropyObserver obs;
    std::vector<TrajectoryObserver*> list{&obs};
    simulate(c, cfg, list);
    const auto& tr = obs.trace();
    CHECK(tr.E.front() == entropy_functionals(c).E);
    for (double r : entropy_residual(tr, 0.05)) CHECK(r <= 0.0);

    cfg.noise.nu = 0.05;
    cfg.keep_fields = true;
    cfg.seed = 4;
    const auto a0 = noisy_field(2, 16);
    EntropyObserver o2(3);
    std::vector<TrajectoryObserver*> l2{&o2};
    const auto rec = simulate(a0, cfg, l2);
    const auto live = o2.trace();
    const auto replay = entropy_trace(rec, 3);
    CHECK(live.times == replay.times);
    CHECK(live.E == replay.E);
    CHECK(live.D == replay.D);
    CHECK(live.intE2 == replay.intE2);
    CHECK(live.times.back() == doctest::Approx(cfg.T));
    for (std::size_t k = 1; k < live.D.size(); ++k) CHECK(live.D[k] >= live.D[k - 1]);
    for (std::size_t k = 0; k < live.U.size(); ++k) CHECK(live.U[k] >= live.E[k] + live.D[k] - 1e-12);
}
