#include "srd/duality/duality.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "srd/diagnostics/diagnostics.hpp"
#include "srd/kinetics/entropy.hpp"
#include "srd/spde/diffusion.hpp"
#include "srd/stats.hpp"

namespace srd::duality {

using kinetics::phi_bar;

double inner(const TorusGrid& grid, std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) s += a[c] * b[c];
    return s * grid.cell_volume();
}

double grad_norm_sq(const TorusGrid& grid, std::span<const double> u) {
    const double invh = grid.M;
    double s = 0.0;
    if (grid.d == 1) {
        for (int x = 0; x < grid.M; ++x) {
            const double g = (u[grid.index(x + 1)] - u[grid.index(x)]) * invh;
            s += g * g;
        }
    } else {
        for (int y = 0; y < grid.M; ++y) {
            for (int x = 0; x < grid.M; ++x) {
                const double c = u[grid.index(x, y)];
                const double gx = (u[grid.index(x + 1, y)] - c) * invh;
                const double gy = (u[grid.index(x, y + 1)] - c) * invh;
                s += gx * gx + gy * gy;
            }
        }
    }
    return s * grid.cell_volume();
}

ForwardZ assemble_forward(const spde::TrajectoryRecord& rec, const spde::SolverConfig& cfg, double C1,
                          double slack_tol) {
    const int N = rec.steps_taken;
    if (N < 1 || rec.fields.size() != static_cast<std::size_t>(N) + 1 ||
        rec.increments.size() != static_cast<std::size_t>(N)) {
        throw std::invalid_argument("assemble_forward: record must carry every field and increment (keep_fields)");
    }
    const TorusGrid& grid = rec.fields.front().grid();
    const std::size_t cells = grid.cells();
    const Vec4 kappa = rec.fields.front().kappa();
    const double kmin = *std::min_element(kappa.begin(), kappa.end());
    const double level = cfg.effective_truncation();
    const bool noisy = cfg.noise_active();
    const double dt = cfg.dt;

    ForwardZ fz;
    fz.grid = grid;
    fz.kappa = kappa;
    fz.dt = dt;
    fz.C1 = C1;
    fz.channels = cfg.noise.channels;
    fz.dB = rec.increments;
    fz.g.assign(2, SpaceTime(static_cast<std::size_t>(N), std::vector<double>(cells, 0.0)));
    fz.F_recon.assign(static_cast<std::size_t>(N), std::vector<double>(cells, 0.0));
    fz.F_full.assign(static_cast<std::size_t>(N), std::vector<double>(cells, 0.0));
    fz.slack.assign(static_cast<std::size_t>(N), std::vector<double>(cells, 0.0));
    fz.min_slack = std::numeric_limits<double>::infinity();
    fz.K_min = std::numeric_limits<double>::infinity();
    fz.K_max = -std::numeric_limits<double>::infinity();

    for (int n = 0; n <= N; ++n) {
        const TorusField& f = rec.fields[static_cast<std::size_t>(n)];
        fz.times.push_back(n * dt);
        std::vector<double> z(cells), K(cells), Kz(cells);
        for (std::size_t c = 0; c < cells; ++c) {
            const Vec4 a = f.at(c);
            double zs = 0.0, kz = 0.0;
            for (std::size_t i = 0; i < 4; ++i) {
                const double pb = phi_bar(a[i]);
                zs += pb;
                kz += kappa[i] * pb;
            }
            z[c] = zs;
            Kz[c] = kz;
            K[c] = zs > 0.0 ? kz / zs : kmin;
            fz.K_min = std::min(fz.K_min, K[c]);
            fz.K_max = std::max(fz.K_max, K[c]);
        }
        fz.z.push_back(std::move(z));
        fz.K.push_back(std::move(K));
        fz.Kz.push_back(std::move(Kz));
    }

    std::vector<double> lap(cells);
    for (int n = 0; n < N; ++n) {
        const auto ns = static_cast<std::size_t>(n);
        const TorusField& f = rec.fields[ns];
        const auto grads = diagnostics::centered_gradients(f);
        const auto& dB = rec.increments[ns];
        spde::apply_laplacian(grid, fz.Kz[ns], lap);
        for (std::size_t c = 0; c < cells; ++c) {
            const Vec4 a = f.at(c);
            double chi = 1.0;
            if (level > 0.0) chi = kinetics::cutoff_chi(kinetics::detail::norm(a), level);
            const double r = chi * chi * (cfg.rates.lambda_fwd * a[0] * a[2] - cfg.rates.lambda_bwd * a[1] * a[3]);
            const double logs = std::log1p(a[0]) + std::log1p(a[2]) - std::log1p(a[1]) - std::log1p(a[3]);
            double F = cfg.reaction ? -r * logs : 0.0;
            Vec4 c0{}, c1{};
            if (noisy) kinetics::detail::noise_columns(a, cfg.noise, chi, c0, c1);
            double g0 = 0.0, g1 = 0.0;
            for (std::size_t i = 0; i < 4; ++i) {
                const double w = 1.0 + std::log1p(a[i]);
                g0 += w * c0[i];
                g1 += w * c1[i];
                F += 0.5 * (c0[i] * c0[i] + c1[i] * c1[i]) / (1.0 + a[i]);
                double g2 = grads.g[i][0][c] * grads.g[i][0][c];
                if (grid.d == 2) g2 += grads.g[i][1][c] * grads.g[i][1][c];
                F -= kappa[i] * g2 / (1.0 + a[i]);
            }
            fz.g[0][ns][c] = g0;
            fz.g[1][ns][c] = g1;
            fz.F_recon[ns][c] = F;
            const double zc = fz.z[ns][c];
            fz.slack[ns][c] = C1 * zc - F;
            fz.min_slack = std::min(fz.min_slack, fz.slack[ns][c]);
            if (fz.slack[ns][c] < -slack_tol * std::max(1.0, zc)) ++fz.negative_slack_cells;
            if (noisy && zc > 0.0) {
                fz.g_ratio_max = std::max(fz.g_ratio_max, (g0 * g0 + g1 * g1) / (cfg.noise.nu * zc * zc));
            }
            const double G = noisy ? g0 * dB[0] + g1 * dB[1] : 0.0;
            fz.F_full[ns][c] = (fz.z[ns + 1][c] - zc - dt * lap[c] - G) / dt;
        }
    }
    return fz;
}

RegularizedK regularize_K(const ForwardZ& fz, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("regularize_K: eps must be > 0");
    RegularizedK rk;
    rk.eps = eps;
    rk.min_deviation = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < fz.z.size(); ++n) {
        std::vector<double> kt(fz.z[n].size());
        for (std::size_t c = 0; c < kt.size(); ++c) {
            const double z = fz.z[n][c];
            kt[c] = fz.Kz[n][c] / (z + eps);
            const double dev = fz.Kz[n][c] - kt[c] * z;
            rk.max_deviation = std::max(rk.max_deviation, dev);
            rk.min_deviation = std::min(rk.min_deviation, dev);
            const double Kc = fz.K[n][c];
            if (Kc > 0.0) rk.max_deviation_ratio = std::max(rk.max_deviation_ratio, dev / (eps * Kc));
        }
        rk.K_tilde.push_back(std::move(kt));
    }
    return rk;
}

std::string to_string(DualMode m) { return m == DualMode::RegressionBSDE ? "regression_bsde" : "deterministic"; }

DualMode dual_mode_from_string(const std::string& s) {
    if (s == "deterministic") return DualMode::DeterministicDual;
    if (s == "regression_bsde") return DualMode::RegressionBSDE;
    throw std::invalid_argument("unknown dual mode '" + s + "' (expected deterministic or regression_bsde)");
}

double dual_gate(const TorusGrid& grid, double dt, double C1, double K_tilde_max) {
    return 1.0 + C1 * dt - 2.0 * grid.d * dt * K_tilde_max * grid.M * grid.M;
}

namespace {

void check_inputs(const TorusGrid& grid, int steps, const SpaceTime& X, const char* name) {
    if (X.size() < static_cast<std::size_t>(steps)) {
        throw std::invalid_argument(std::string("solve_dual: ") + name + " needs one entry per step");
    }
    for (int n = 0; n < steps; ++n) {
        if (X[static_cast<std::size_t>(n)].size() != grid.cells()) {
            throw std::invalid_argument(std::string("solve_dual: ") + name + " has the wrong number of cells");
        }
    }
}

// One explicit backward step's target: w + dt (Kt Lap w + C1 w + H).
void backward_target(const TorusGrid& grid, double dt, double C1, std::span<const double> w_next,
                     std::span<const double> Kt, std::span<const double> H, std::span<double> out,
                     std::vector<double>& lap) {
    spde::apply_laplacian(grid, w_next, lap);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = w_next[c] + dt * (Kt[c] * lap[c] + C1 * w_next[c] + H[c]);
}

}  // namespace

DualSolution solve_dual(const TorusGrid& grid, double dt, int steps, const SpaceTime& H, const SpaceTime& K_tilde,
                        double C1, int channels, bool enforce_gate, bool require_bounds, double kappa_max) {
    grid.validate();
    if (!(dt > 0.0) || steps < 1) throw std::invalid_argument("solve_dual: need dt > 0 and steps >= 1");
    check_inputs(grid, steps, H, "H");
    check_inputs(grid, steps, K_tilde, "K_tilde");
    double kt_max = 0.0;
    for (int n = 0; n < steps; ++n) {
        for (std::size_t c = 0; c < grid.cells(); ++c) {
            const double k = K_tilde[static_cast<std::size_t>(n)][c];
            const double h = H[static_cast<std::size_t>(n)][c];
            if (!std::isfinite(k) || !std::isfinite(h)) throw std::invalid_argument("solve_dual: non-finite input");
            if (require_bounds) {
                if (k < 0.0 || (kappa_max > 0.0 && k > kappa_max * (1.0 + 1e-12))) {
                    throw std::invalid_argument("solve_dual: K_tilde outside [0, max kappa]");
                }
                if (h < 0.0) throw std::invalid_argument("solve_dual: H must be >= 0");
            }
            kt_max = std::max(kt_max, k);
        }
    }
    if (enforce_gate && dual_gate(grid, dt, C1, kt_max) < 0.0) {
        throw std::invalid_argument("dual monotonicity gate violated: need 1 + C1 dt - 2 d dt max K_tilde / h^2 >= 0");
    }

    DualSolution sol;
    sol.grid = grid;
    sol.dt = dt;
    sol.mode = DualMode::DeterministicDual;
    const std::size_t cells = grid.cells();
    sol.w.assign(static_cast<std::size_t>(steps) + 1, std::vector<double>(cells, 0.0));
    sol.q.assign(static_cast<std::size_t>(channels), SpaceTime(static_cast<std::size_t>(steps), std::vector<double>(cells, 0.0)));
    for (int n = 0; n <= steps; ++n) sol.times.push_back(n * dt);
    std::vector<double> lap(cells);
    sol.min_w = 0.0;
    for (int n = steps - 1; n >= 0; --n) {
        const auto ns = static_cast<std::size_t>(n);
        backward_target(grid, dt, C1, sol.w[ns + 1], K_tilde[ns], H[ns], sol.w[ns], lap);
        for (double v : sol.w[ns]) {
            if (!std::isfinite(v)) throw std::runtime_error("solve_dual: non-finite value at step " + std::to_string(n));
            sol.min_w = std::min(sol.min_w, v);
        }
    }
    return sol;
}

std::vector<double> field_features(const TorusField& field) {
    std::vector<double> f;
    const double n = static_cast<double>(field.grid().cells());
    for (int i = 0; i < 4; ++i) {
        double s = 0.0;
        for (double v : field.species(i)) s += v;
        f.push_back(s / n);
    }
    const auto e = diagnostics::entropy_functionals(field);
    f.push_back(e.E);
    f.push_back(e.E2);
    return f;
}

std::vector<DualSolution> solve_dual_regression(const TorusGrid& grid, double dt, int steps,
                                                std::span<const RegressionPath> paths, double C1,
                                                const RegressionConfig& cfg) {
    grid.validate();
    if (paths.empty()) throw std::invalid_argument("solve_dual_regression: no paths");
    if (cfg.degree < 0 || cfg.degree > 2) throw std::invalid_argument("solve_dual_regression: degree must be 0, 1 or 2");
    const std::size_t P = paths.size();
    const std::size_t cells = grid.cells();
    const std::size_t ch = paths.front().dB.empty() ? 2 : paths.front().dB.front().size();
    for (const auto& p : paths) {
        check_inputs(grid, steps, p.H, "H");
        check_inputs(grid, steps, p.K_tilde, "K_tilde");
        if (p.features.size() < static_cast<std::size_t>(steps) || p.dB.size() < static_cast<std::size_t>(steps)) {
            throw std::invalid_argument("solve_dual_regression: features and dB need one entry per step");
        }
    }

    std::vector<DualSolution> out(P);
    for (auto& s : out) {
        s.grid = grid;
        s.dt = dt;
        s.mode = DualMode::RegressionBSDE;
        s.w.assign(static_cast<std::size_t>(steps) + 1, std::vector<double>(cells, 0.0));
        s.q.assign(ch, SpaceTime(static_cast<std::size_t>(steps), std::vector<double>(cells, 0.0)));
        for (int n = 0; n <= steps; ++n) s.times.push_back(n * dt);
    }

    std::vector<double> lap(cells), target(cells);
    const auto Pd = static_cast<double>(P);
    for (int n = steps - 1; n >= 0; --n) {
        const auto ns = static_cast<std::size_t>(n);
        // standardized features with zero-variance columns dropped
        const std::size_t nf = paths.front().features[ns].size();
        std::vector<std::size_t> keep;
        std::vector<double> mu(nf, 0.0), sd(nf, 0.0);
        for (std::size_t j = 0; j < nf; ++j) {
            for (const auto& p : paths) mu[j] += p.features[ns][j];
            mu[j] /= Pd;
            for (const auto& p : paths) sd[j] += (p.features[ns][j] - mu[j]) * (p.features[ns][j] - mu[j]);
            sd[j] = std::sqrt(sd[j] / Pd);
            if (sd[j] > 1e-12 * std::max(1.0, std::abs(mu[j]))) keep.push_back(j);
        }
        const std::size_t k1 = cfg.degree >= 1 ? keep.size() : 0;
        const std::size_t nb = 1 + k1 + (cfg.degree >= 2 ? k1 * (k1 + 1) / 2 : 0);
        Eigen::MatrixXd B(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(nb));
        for (std::size_t p = 0; p < P; ++p) {
            const auto row = static_cast<Eigen::Index>(p);
            Eigen::Index col = 0;
            B(row, col++) = 1.0;
            std::vector<double> x(k1);
            for (std::size_t j = 0; j < k1; ++j) {
                x[j] = (paths[p].features[ns][keep[j]] - mu[keep[j]]) / sd[keep[j]];
                B(row, col++) = x[j];
            }
            if (cfg.degree >= 2) {
                for (std::size_t a = 0; a < k1; ++a) {
                    for (std::size_t b = a; b < k1; ++b) B(row, col++) = x[a] * x[b];
                }
            }
        }
        const Eigen::MatrixXd G = (B.transpose() * B) / Pd;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
        const double lmin = es.eigenvalues().minCoeff();
        const double lmax = es.eigenvalues().maxCoeff();
        if (!(lmin > 0.0) || lmax / lmin > cfg.cond_limit) {
            throw std::runtime_error("solve_dual_regression: ill-conditioned basis at step " + std::to_string(n) +
                                     " (condition number " + std::to_string(lmin > 0.0 ? lmax / lmin : INFINITY) + ")");
        }
        const auto ldlt = G.ldlt();

        const auto ncols = static_cast<Eigen::Index>(cells * (1 + ch));
        Eigen::MatrixXd Y(static_cast<Eigen::Index>(P), ncols);
        for (std::size_t p = 0; p < P; ++p) {
            const auto& wn = out[p].w[ns + 1];
            backward_target(grid, dt, C1, wn, paths[p].K_tilde[ns], paths[p].H[ns], target, lap);
            for (std::size_t c = 0; c < cells; ++c) {
                Y(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(c)) = target[c];
                for (std::size_t a = 0; a < ch; ++a) {
                    Y(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(cells * (1 + a) + c)) =
                        wn[c] * paths[p].dB[ns][a] / dt;
                }
            }
        }
        const Eigen::MatrixXd beta = ldlt.solve((B.transpose() * Y) / Pd);
        const Eigen::MatrixXd fit = B * beta;
        if (!fit.allFinite()) throw std::runtime_error("solve_dual_regression: non-finite value at step " + std::to_string(n));
        for (std::size_t p = 0; p < P; ++p) {
            for (std::size_t c = 0; c < cells; ++c) {
                out[p].w[ns][c] = fit(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(c));
                for (std::size_t a = 0; a < ch; ++a) {
                    out[p].q[a][ns][c] = fit(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(cells * (1 + a) + c));
                }
            }
        }
    }
    for (auto& s : out) {
        s.min_w = 0.0;
        for (const auto& wn : s.w) {
            for (double v : wn) s.min_w = std::min(s.min_w, v);
        }
    }
    return out;
}

DualityTerms duality_terms(const ForwardZ& fz, const DualSolution& dual, const SpaceTime& H, const SpaceTime& K_tilde) {
    const std::size_t N = fz.z.size() - 1;
    if (dual.w.size() != N + 1 || !(dual.grid == fz.grid) || std::abs(dual.dt - fz.dt) > 1e-15 * fz.dt) {
        throw std::invalid_argument("duality_terms: forward and dual do not share grid and times");
    }
    const TorusGrid& grid = fz.grid;
    const std::size_t cells = grid.cells();
    const double dt = fz.dt;
    DualityTerms t;
    std::vector<double> lap(cells), tmp(cells), tmp2(cells);
    t.initial = inner(grid, fz.z[0], dual.w[0]);
    for (std::size_t n = 0; n < N; ++n) {
        const auto& z = fz.z[n];
        const auto& wn1 = dual.w[n + 1];
        t.lhs += dt * inner(grid, H[n], z);
        spde::apply_laplacian(grid, wn1, lap);
        for (std::size_t c = 0; c < cells; ++c) tmp[c] = fz.Kz[n][c] - K_tilde[n][c] * z[c];
        t.mismatch += dt * inner(grid, tmp, lap);
        for (std::size_t c = 0; c < cells; ++c) {
            tmp[c] = fz.F_full[n][c] - fz.C1 * z[c];
            tmp2[c] = fz.F_recon[n][c] - fz.C1 * z[c];
        }
        t.slack += dt * inner(grid, tmp, wn1);
        t.slack_recon += dt * inner(grid, tmp2, wn1);
        const std::size_t ch = std::min(fz.g.size(), dual.q.size());
        for (std::size_t a = 0; a < ch; ++a) {
            t.noise += dt * inner(grid, fz.g[a][n], dual.q[a][n]);
            if (a < fz.dB[n].size()) t.martingale += fz.dB[n][a] * inner(grid, fz.g[a][n], wn1);
        }
    }
    return t;
}

DualityResidual duality_residual(std::span<const DualityTerms> terms, std::uint64_t bootstrap_seed, int resamples) {
    if (terms.empty()) throw std::invalid_argument("duality_residual: no paths");
    DualityResidual r;
    r.paths = terms.size();
    std::vector<double> res(terms.size()), rec(terms.size());
    for (std::size_t p = 0; p < terms.size(); ++p) {
        const auto& t = terms[p];
        r.lhs += t.lhs;
        r.initial += t.initial;
        r.mismatch += t.mismatch;
        r.slack += t.slack;
        r.noise += t.noise;
        r.martingale += t.martingale;
        r.scale += std::abs(t.lhs);
        res[p] = t.residual();
        rec[p] = t.residual_recon();
    }
    const double n = static_cast<double>(terms.size());
    r.lhs /= n;
    r.initial /= n;
    r.mismatch /= n;
    r.slack /= n;
    r.noise /= n;
    r.martingale /= n;
    r.scale /= n;
    r.residual = stats::mean_se(res).mean;
    r.residual_recon = stats::mean_se(rec).mean;
    if (terms.size() > 1) {
        r.residual_se = stats::bootstrap_se(res, bootstrap_seed, resamples);
        r.residual_recon_se = stats::bootstrap_se(rec, bootstrap_seed ^ 0x9e3779b97f4a7c15ull, resamples);
    }
    return r;
}

EnergyBound energy_terms(const DualSolution& dual, const SpaceTime& H, double C1) {
    const TorusGrid& grid = dual.grid;
    const std::size_t N = dual.w.size() - 1;
    if (H.size() < N) throw std::invalid_argument("energy_terms: H needs one entry per step");
    EnergyBound e;
    std::vector<double> lap(grid.cells());
    e.grad_w0 = grad_norm_sq(grid, dual.w[0]);
    for (std::size_t n = 0; n < N; ++n) {
        const double wt = dual.dt * std::exp(2.0 * C1 * dual.times[n]);
        spde::apply_laplacian(grid, dual.w[n], lap);
        e.lap_w += wt * inner(grid, lap, lap);
        for (const auto& qa : dual.q) e.grad_q += wt * grad_norm_sq(grid, qa[n]);
        e.rhs += wt * inner(grid, H[n], H[n]);
    }
    e.lhs = e.grad_w0 + e.lap_w + e.grad_q;
    e.ratio = e.rhs > 0.0 ? e.lhs / e.rhs : 0.0;
    return e;
}

EnergyBound energy_bound_check(std::span<const DualSolution> duals, std::span<const SpaceTime> H, double C1) {
    if (duals.empty() || duals.size() != H.size()) throw std::invalid_argument("energy_bound_check: need one H per dual");
    EnergyBound sum;
    for (std::size_t p = 0; p < duals.size(); ++p) {
        const auto e = energy_terms(duals[p], H[p], C1);
        sum.grad_w0 += e.grad_w0;
        sum.lap_w += e.lap_w;
        sum.grad_q += e.grad_q;
        sum.rhs += e.rhs;
    }
    const double n = static_cast<double>(duals.size());
    sum.grad_w0 /= n;
    sum.lap_w /= n;
    sum.grad_q /= n;
    sum.rhs /= n;
    sum.lhs = sum.grad_w0 + sum.lap_w + sum.grad_q;
    sum.ratio = sum.rhs > 0.0 ? sum.lhs / sum.rhs : 0.0;
    return sum;
}

}  // namespace srd::duality
