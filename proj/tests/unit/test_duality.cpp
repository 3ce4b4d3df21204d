#include <doctest.h>

#include <cmath>

#include "srd/duality/duality.hpp"
#include "srd/kinetics/entropy.hpp"
#include "srd/spde/solver.hpp"

using namespace srd::duality;
using namespace srd::spde;

namespace {

TorusField wavy(int M, Vec4 kappa) {
    std::array<SpeciesInitial, 4> sp{};
    sp[0] = {1.0, {FourierMode{{1, 0}, 0.5, 0.0}}};
    sp[1] = {0.8, {FourierMode{{1, 0}, -0.3, 0.0}}};
    sp[2] = {1.2, {FourierMode{{2, 0}, 0.4, 0.5}}};
    sp[3] = {0.6, {}};
    return make_initial(TorusGrid(1, M), kappa, sp);
}

ForwardZ forward(const TorusField& a0, double dt, int steps, double nu, std::uint64_t seed, double C1) {
    SolverConfig cfg;
    cfg.dt = dt;
    cfg.T = dt * steps;
    cfg.noise.nu = nu;
    cfg.seed = seed;
    cfg.keep_fields = true;
    return assemble_forward(simulate(a0, cfg), cfg, C1);
}

SpaceTime constant_H(std::size_t steps, std::size_t cells, double v) { return SpaceTime(steps, std::vector<double>(cells, v)); }

SpaceTime cos_H(std::size_t steps, int M) {
    std::vector<double> h(static_cast<std::size_t>(M));
    for (int j = 0; j < M; ++j) h[static_cast<std::size_t>(j)] = 1 + 0.5 * std::cos(2 * M_PI * j / M);
    return SpaceTime(steps, h);
}

}  // namespace

TEST_CASE("forward assembly of z and K") {
    const auto eq = forward(wavy(16, {0.7, 0.7, 0.7, 0.7}), 1e-3, 10, 0.05, 1, 1.0);
    for (const auto& row : eq.K) {
        for (double k : row) CHECK(k == doctest::Approx(0.7).epsilon(1e-14));
    }
    const auto zero = forward(TorusField(TorusGrid(1, 8), {1, 2, 3, 4}), 1e-3, 5, 0.1, 2, 1.0);
    for (std::size_t n = 0; n < zero.z.size(); ++n) {
        for (std::size_t c = 0; c < 8; ++c) {
            CHECK(zero.z[n][c] == 0.0);
            CHECK(zero.K[n][c] == 1.0);
        }
    }
    for (const auto& ga : zero.g) {
        for (const auto& row : ga) {
            for (double v : row) CHECK(v == 0.0);
        }
    }
    const auto one = forward(constant_field(TorusGrid(1, 8), {1, 2, 3, 4}, {1, 1, 1, 1}), 1e-3, 5, 0.0, 3, 1.0);
    for (double k : one.K[3]) CHECK(k == doctest::Approx(2.5).epsilon(1e-14));
    CHECK(one.z[0][0] == doctest::Approx(4 * srd::kinetics::phi_bar(1.0)));

    const auto mixed = forward(wavy(16, {0.5, 1, 0.75, 0.25}), 1e-3, 20, 0.1, 4, 1.0);
    CHECK(mixed.K_min >= 0.25 - 1e-14);
    CHECK(mixed.K_max <= 1.0 + 1e-14);
}

TEST_CASE("regularized K") {
    ForwardZ fz;
    fz.z = {{1.0, 0.0, 3.0}};
    fz.K = {{2.0, 1.0, 1.5}};
    fz.Kz = {{2.0, 0.0, 4.5}};
    const auto rk = regularize_K(fz, 1.0);
    CHECK(rk.K_tilde[0][0] == doctest::Approx(1.0));
    CHECK(rk.K_tilde[0][1] == 0.0);
    // cell 2: 4.5 - (4.5 / 4) * 3
    CHECK(rk.max_deviation == doctest::Approx(1.125));
    CHECK(rk.max_deviation_ratio <= 1.0);
    double prev = 0.0;
    for (double eps : {1.0, 0.1, 0.01, 1e-4}) {
        const double kt = regularize_K(fz, eps).K_tilde[0][2];
        CHECK(kt > prev);
        CHECK(kt < 1.5);
        prev = kt;
    }
    const auto real = forward(wavy(16, {0.5, 1, 0.75, 0.25}), 1e-3, 20, 0.1, 4, 1.0);
    const auto r2 = regularize_K(real, 0.1);
    CHECK(r2.min_deviation >= 0.0);
    CHECK(r2.max_deviation_ratio <= 1.0 + 1e-12);
}

TEST_CASE("dual solve closed forms") {
    const TorusGrid g(1, 16);
    const int N = 40;
    const double dt = 1e-3, C1 = 0.8;
    const auto Kt = constant_H(N + 1, 16, 0.5);
    const auto zero = solve_dual(g, dt, N, constant_H(N, 16, 0.0), Kt, C1);
    for (const auto& row : zero.w) {
        for (double v : row) CHECK(v == 0.0);
    }
    for (const auto& qa : zero.q) {
        for (const auto& row : qa) {
            for (double v : row) CHECK(v == 0.0);
        }
    }
    const double H = 2.0;
    const auto flat = solve_dual(g, dt, N, constant_H(N, 16, H), Kt, C1);
    for (double v : flat.w[N]) CHECK(v == 0.0);
    for (int n = 0; n <= N; ++n) {
        const double discrete = H / C1 * (std::pow(1 + C1 * dt, N - n) - 1);
        const double exact = H / C1 * (std::exp(C1 * (N - n) * dt) - 1);
        for (double v : flat.w[static_cast<std::size_t>(n)]) {
            CHECK(v == doctest::Approx(discrete).epsilon(1e-12));
            CHECK(std::abs(v - exact) <= C1 * dt * exact + 1e-15);
        }
    }
    const auto pos = solve_dual(g, dt, N, cos_H(N, 16), Kt, C1);
    CHECK(pos.min_w >= -1e-10);
    CHECK_THROWS(solve_dual(g, 0.01, N, cos_H(N, 16), Kt, C1));
    CHECK(dual_gate(g, 0.01, C1, 0.5) < 0.0);
    auto neg = cos_H(N, 16);
    neg[3][2] = -1.0;
    CHECK_THROWS(solve_dual(g, dt, N, neg, Kt, C1));
}

TEST_CASE("duality identity, zero noise") {
    const double C1 = 0.06, dt = 1e-3;
    const int N = 50;
    const auto a0 = wavy(16, {0.5, 0.5, 0.5, 0.5});
    const auto fz = forward(a0, dt, N, 0.0, 0, C1);
    const auto rk = regularize_K(fz, 0.1);
    const auto H = cos_H(N, 16);
    const auto dual = solve_dual(fz.grid, dt, N, H, rk.K_tilde, C1);
    const auto t = duality_terms(fz, dual, H, rk.K_tilde);
    CHECK(std::abs(t.residual()) <= 1e-12 * std::abs(t.lhs));
    CHECK(t.noise == 0.0);
    CHECK(std::abs(t.residual_recon()) < 1e-3 * std::abs(t.lhs));
    // F <= C1 z pointwise, tested against w >= 0
    CHECK(t.slack <= 0.0);
    CHECK(t.slack_recon <= 0.0);

    const auto t0 = duality_terms(fz, solve_dual(fz.grid, dt, N, constant_H(N, 16, 0.0), rk.K_tilde, C1),
                                  constant_H(N, 16, 0.0), rk.K_tilde);
    CHECK(t0.lhs == 0.0);
    CHECK(t0.initial == 0.0);
    CHECK(t0.mismatch == 0.0);
    CHECK(t0.slack == 0.0);
    CHECK(t0.noise == 0.0);
}

TEST_CASE("duality identity holds per path with noise") {
    const double C1 = 0.06, dt = 1e-3;
    const int N = 50;
    const auto a0 = wavy(16, {0.5, 1, 0.75, 0.25});
    const auto H = cos_H(N, 16);
    const auto fz0 = forward(a0, dt, N, 0.0, 0, C1);
    const auto rk = regularize_K(fz0, 0.1);
    const auto dual = solve_dual(fz0.grid, dt, N, H, rk.K_tilde, C1);
    std::vector<DualityTerms> terms;
    for (std::uint64_t s = 1; s <= 20; ++s) {
        const auto fz = forward(a0, dt, N, 0.1, s, C1);
        terms.push_back(duality_terms(fz, dual, H, rk.K_tilde));
        // pathwise, the residual is the stochastic integral against w
        CHECK(std::abs(terms.back().residual() - terms.back().martingale) <= 1e-10 * std::abs(terms.back().lhs));
    }
    const auto r = duality_residual(terms, 5, 200);
    CHECK(r.paths == 20);
    CHECK(r.residual_se >= 0.0);
}

TEST_CASE("energy terms") {
    const TorusGrid g(1, 16);
    const int N = 30;
    const double dt = 1e-3, C1 = 0.5;
    const auto Kt = constant_H(N + 1, 16, 0.5);
    const auto z = energy_terms(solve_dual(g, dt, N, constant_H(N, 16, 0.0), Kt, C1), constant_H(N, 16, 0.0), C1);
    CHECK(z.lhs == 0.0);
    CHECK(z.rhs == 0.0);
    CHECK(z.ratio == 0.0);
    const auto f = energy_terms(solve_dual(g, dt, N, constant_H(N, 16, 1.0), Kt, C1), constant_H(N, 16, 1.0), C1);
    CHECK(std::abs(f.lhs) < 1e-20);
    CHECK(std::abs(f.ratio) < 1e-20);
    double prev = 0.0;
    for (int M : {16, 32}) {
        const TorusGrid gm(1, M);
        const int steps = M == 16 ? 50 : 200;
        const double dtm = 0.05 / steps;
        const auto e = energy_terms(solve_dual(gm, dtm, steps, cos_H(steps, M), constant_H(steps + 1, M, 0.5), C1),
                                    cos_H(steps, M), C1);
        CHECK(std::isfinite(e.ratio));
        CHECK(e.ratio > 0.0);
        if (prev > 0.0) CHECK(std::abs(e.ratio / prev - 1) < 0.2);
        prev = e.ratio;
    }
}

TEST_CASE("regression mode reproduces the deterministic dual without noise") {
    const double C1 = 0.06, dt = 1e-3;
    const int N = 20;
    const auto a0 = wavy(16, {0.5, 1, 0.75, 0.25});
    SolverConfig cfg;
    cfg.dt = dt;
    cfg.T = dt * N;
    cfg.noise.nu = 0.0;
    cfg.keep_fields = true;
    const auto rec = simulate(a0, cfg);
    const auto fz = assemble_forward(rec, cfg, C1);
    const auto rk = regularize_K(fz, 0.1);
    const auto H = cos_H(N, 16);
    const auto det = solve_dual(fz.grid, dt, N, H, rk.K_tilde, C1);
    std::vector<RegressionPath> paths(40);
    for (auto& p : paths) {
        p.H = H;
        p.K_tilde = rk.K_tilde;
        p.dB.assign(N, std::vector<double>(2, 0.0));
        for (int n = 0; n < N; ++n) p.features.push_back(field_features(rec.fields[static_cast<std::size_t>(n)]));
    }
    const auto reg = solve_dual_regression(fz.grid, dt, N, paths, C1);
    REQUIRE(reg.size() == paths.size());
    for (int n = 0; n <= N; ++n) {
        for (std::size_t c = 0; c < 16; ++c) {
            CHECK(reg[7].w[static_cast<std::size_t>(n)][c] == doctest::Approx(det.w[static_cast<std::size_t>(n)][c]).epsilon(1e-9));
        }
    }
}

TEST_CASE("grid operator summation by parts") {
    const TorusGrid g(2, 8);
    std::vector<double> u(64), v(64), Lu(64), Lv(64);
    for (std::size_t c = 0; c < 64; ++c) {
        u[c] = std::sin(0.3 * c) + 0.1 * c;
        v[c] = std::cos(0.7 * c);
    }
    apply_laplacian(g, u, Lu);
    apply_laplacian(g, v, Lv);
    CHECK(inner(g, u, Lv) == doctest::Approx(inner(g, v, Lu)).epsilon(1e-12));
    CHECK(inner(g, u, Lu) == doctest::Approx(-grad_norm_sq(g, u)).epsilon(1e-12));
}
