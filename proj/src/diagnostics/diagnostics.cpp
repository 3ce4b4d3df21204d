#include "srd/diagnostics/diagnostics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "srd/stats.hpp"

namespace srd::diagnostics {

using kinetics::phi;
using kinetics::phi_bar;

EntropyPair entropy_functionals(const TorusField& field) {
    EntropyPair p;
    for (int i = 0; i < 4; ++i) {
        for (double v : field.species(i)) {
            const double pb = phi_bar(v);
            p.E += pb;
            p.E2 += pb * pb;
        }
    }
    const double w = field.grid().cell_volume();
    p.E *= w;
    p.E2 *= w;
    return p;
}

namespace {

void centered(const TorusGrid& g, std::span<const double> u, std::array<std::vector<double>, 2>& out) {
    const double inv2h = 0.5 * g.M;
    out[0].assign(g.cells(), 0.0);
    if (g.d == 1) {
        for (int x = 0; x < g.M; ++x) out[0][g.index(x)] = (u[g.index(x + 1)] - u[g.index(x - 1)]) * inv2h;
        out[1].clear();
        return;
    }
    out[1].assign(g.cells(), 0.0);
    for (int y = 0; y < g.M; ++y) {
        for (int x = 0; x < g.M; ++x) {
            const std::size_t c = g.index(x, y);
            out[0][c] = (u[g.index(x + 1, y)] - u[g.index(x - 1, y)]) * inv2h;
            out[1][c] = (u[g.index(x, y + 1)] - u[g.index(x, y - 1)]) * inv2h;
        }
    }
}

}  // namespace

Gradients centered_gradients(const TorusField& field) {
    Gradients gr;
    gr.d = field.grid().d;
    for (int i = 0; i < 4; ++i) centered(field.grid(), field.species(i), gr.g[static_cast<std::size_t>(i)]);
    return gr;
}

double dissipation_increment(const TorusField& field, const Gradients& grads) {
    double total = 0.0;
    for (int i = 0; i < 4; ++i) {
        const auto u = field.species(i);
        const auto& gi = grads.g[static_cast<std::size_t>(i)];
        double s = 0.0;
        for (std::size_t c = 0; c < u.size(); ++c) {
            double g2 = gi[0][c] * gi[0][c];
            if (grads.d == 2) g2 += gi[1][c] * gi[1][c];
            s += g2 / (1.0 + u[c]);
        }
        total += field.kappa()[static_cast<std::size_t>(i)] * s;
    }
    return total * field.grid().cell_volume();
}

double dissipation_increment(const TorusField& field) { return dissipation_increment(field, centered_gradients(field)); }

TruncatedPair truncated_functionals(const TorusField& field, double xi, const kinetics::PsiTable& psi) {
    if (!(xi >= 0.0)) throw std::invalid_argument("truncated_functionals: xi must be >= 0");
    const TorusGrid& g = field.grid();
    TruncatedPair p;
    std::vector<double> ex(g.cells());
    std::array<std::vector<double>, 2> grad;
    for (int i = 0; i < 4; ++i) {
        const auto u = field.species(i);
        bool any = false;
        for (std::size_t c = 0; c < u.size(); ++c) {
            ex[c] = kinetics::positive_excess(u[c], xi);
            if (ex[c] > 0.0) {
                any = true;
                p.E_xi += phi(ex[c]);
                const double ps = psi(ex[c]);
                p.psi_sq += ps * ps;
            }
        }
        if (!any) continue;
        centered(g, ex, grad);
        double s = 0.0;
        for (std::size_t c = 0; c < u.size(); ++c) {
            double g2 = grad[0][c] * grad[0][c];
            if (g.d == 2) g2 += grad[1][c] * grad[1][c];
            s += g2 / (1.0 + ex[c]);
        }
        p.D_rate += field.kappa()[static_cast<std::size_t>(i)] * s;
    }
    const double w = g.cell_volume();
    p.E_xi *= w;
    p.psi_sq *= w;
    p.D_rate *= w;
    return p;
}

std::vector<double> degiorgi_levels(double xi, int K) {
    if (!(xi > 0.0)) throw std::invalid_argument("degiorgi_levels: xi must be > 0");
    if (K < 0) throw std::invalid_argument("degiorgi_levels: K must be >= 0");
    std::vector<double> out;
    for (int k = 0; k <= K; ++k) out.push_back((1.0 - std::ldexp(1.0, -k - 1)) * xi);
    return out;
}

int default_ladder_depth(double xi) {
    if (!(xi > 0.0)) throw std::invalid_argument("default_ladder_depth: xi must be > 0");
    return std::max(0, static_cast<int>(std::lround(std::log2(xi))));
}

// ---- entropy trace ----

void EntropyAccumulator::start(const TorusField& field, double t) {
    trace_ = {};
    const auto p = entropy_functionals(field);
    t_ = t;
    E_ = p.E;
    E2_ = p.E2;
    D_ = 0.0;
    supE_ = p.E;
    intE_ = 0.0;
    intE2_ = 0.0;
    record();
    pending_ = false;
}

void EntropyAccumulator::add(int step, double t, const TorusField& field, bool force_record) {
    const auto p = entropy_functionals(field);
    const double dt = t - t_;
    intE_ += 0.5 * dt * (E_ + p.E);
    intE2_ += 0.5 * dt * (E2_ + p.E2);
    D_ += dt * dissipation_increment(field);
    t_ = t;
    E_ = p.E;
    E2_ = p.E2;
    supE_ = std::max(supE_, p.E);
    if (force_record || step % stride_ == 0) {
        record();
        pending_ = false;
    } else {
        pending_ = true;
    }
}

void EntropyAccumulator::finish() {
    if (pending_) record();
    pending_ = false;
}

void EntropyAccumulator::record() {
    trace_.times.push_back(t_);
    trace_.E.push_back(E_);
    trace_.D.push_back(D_);
    trace_.E2.push_back(E2_);
    trace_.U.push_back(supE_ + D_);
    trace_.intE.push_back(intE_);
    trace_.intE2.push_back(intE2_);
}

void EntropyObserver::on_start(const TorusField& field, const spde::SolverConfig&) { acc_.start(field); }

void EntropyObserver::on_step(int step, double t, const TorusField& field, const spde::StepResult&) {
    acc_.add(step, t, field);
}

EntropyTrace entropy_trace(const TrajectoryRecord& rec, int stride) {
    if (rec.fields.empty()) throw std::invalid_argument("entropy_trace: record carries no fields (enable keep_fields)");
    EntropyAccumulator acc(stride);
    acc.start(rec.fields.front());
    const double dt = rec.steps_taken > 0 ? rec.t_end / rec.steps_taken : 0.0;
    for (std::size_t n = 1; n < rec.fields.size(); ++n) acc.add(static_cast<int>(n), n * dt, rec.fields[n]);
    acc.finish();
    return acc.trace();
}

std::vector<double> entropy_residual(const EntropyTrace& tr, double C1) {
    std::vector<double> r(tr.times.size());
    if (r.empty()) return r;
    const double E0 = tr.E.front();
    for (std::size_t n = 0; n < r.size(); ++n) r[n] = tr.E[n] + tr.D[n] - E0 - C1 * tr.intE[n];
    return r;
}

// ---- De Giorgi ladder ----

double ladder_delta(double xi, double C6) {
    const double l = xi > 1.0 ? std::sqrt(std::log(xi)) : 0.0;
    return 1.0 / std::max(C6, l);
}

double w_alpha(int alpha, double xi, double zeta) {
    if (!(xi > zeta)) throw std::invalid_argument("w_alpha: need xi > zeta");
    const double g = xi - zeta;
    return std::pow(g, -alpha - 1) + std::pow(g, -alpha);
}

double w_k(double xi, int k) {
    const double lo = (1.0 - std::ldexp(1.0, -k - 1)) * xi;
    const double hi = (1.0 - std::ldexp(1.0, -k - 2)) * xi;
    return hi * hi * w_alpha(2, hi, lo) + hi * w_alpha(1, hi, lo);
}

DeGiorgiLadder DeGiorgiLadder::make(double xi, int K, double C6, double rho_under) {
    if (!(rho_under > 1.0 && rho_under < 1.5)) throw std::invalid_argument("rho_under must lie in (1, 3/2)");
    if (!(C6 > 0.0)) throw std::invalid_argument("C6 must be > 0");
    DeGiorgiLadder l;
    l.xi = xi;
    l.K = K < 0 ? default_ladder_depth(xi) : K;
    l.C6 = C6;
    l.rho_under = rho_under;
    l.delta = ladder_delta(xi, C6);
    l.levels = degiorgi_levels(xi, l.K);
    return l;
}

LadderAccumulator::LadderAccumulator(DeGiorgiLadder ladder) : ladder_(std::move(ladder)) {
    const std::size_t n = ladder_.levels.size();
    supE_.assign(n, 0.0);
    D_.assign(n, 0.0);
    psi_int_.assign(n, 0.0);
    last_psi_.assign(n, 0.0);
    last_D_rate_.assign(n, 0.0);
}

void LadderAccumulator::start(const TorusField& field) {
    t_ = 0.0;
    for (std::size_t k = 0; k < ladder_.levels.size(); ++k) {
        const auto p = truncated_functionals(field, ladder_.levels[k]);
        supE_[k] = p.E_xi;
        D_[k] = 0.0;
        psi_int_[k] = 0.0;
        last_psi_[k] = p.psi_sq;
    }
}

void LadderAccumulator::add(double t, const TorusField& field) {
    const double dt = t - t_;
    for (std::size_t k = 0; k < ladder_.levels.size(); ++k) {
        const auto p = truncated_functionals(field, ladder_.levels[k]);
        supE_[k] = std::max(supE_[k], p.E_xi);
        D_[k] += dt * p.D_rate;
        psi_int_[k] += 0.5 * dt * (last_psi_[k] + p.psi_sq);
        last_psi_[k] = p.psi_sq;
    }
    t_ = t;
}

DeGiorgiLadder LadderAccumulator::result() const {
    DeGiorgiLadder out = ladder_;
    out.report.clear();
    for (std::size_t k = 0; k < ladder_.levels.size(); ++k) {
        LadderLevel lv;
        lv.k = static_cast<int>(k);
        lv.xi_k = ladder_.levels[k];
        lv.sup_E = supE_[k];
        lv.D = D_[k];
        lv.U = supE_[k] + D_[k];
        lv.U_psi = std::sqrt(psi_int_[k]);
        lv.threshold = std::pow(ladder_.delta, std::pow(ladder_.rho_under, static_cast<double>(k)));
        lv.pass = lv.U <= lv.threshold;
        lv.W = w_k(ladder_.xi, lv.k);
        const double lg = std::min(1.0, std::log1p(std::ldexp(ladder_.xi, -lv.k - 2)));
        lv.W_scaled = lv.W / lg;
        lv.W_reference = std::pow(8.0, lv.k) / ladder_.xi + std::pow(4.0, lv.k);
        out.report.push_back(lv);
    }
    return out;
}

DeGiorgiLadder ladder_check(const TrajectoryRecord& rec, const DeGiorgiLadder& ladder) {
    if (rec.fields.empty()) throw std::invalid_argument("ladder_check: record carries no fields (enable keep_fields)");
    LadderAccumulator acc(ladder);
    acc.start(rec.fields.front());
    const double dt = rec.steps_taken > 0 ? rec.t_end / rec.steps_taken : 0.0;
    for (std::size_t n = 1; n < rec.fields.size(); ++n) acc.add(n * dt, rec.fields[n]);
    return acc.result();
}

// ---- tails ----

namespace {

// min ||A c - y|| over c >= 0 by enumerating active sets (three columns).
std::array<double, 3> nnls3(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, double& rms) {
    std::array<double, 3> best{};
    double best_res = (y).squaredNorm();
    for (int mask = 1; mask < 8; ++mask) {
        std::vector<int> cols;
        for (int j = 0; j < 3; ++j) {
            if (mask & (1 << j)) cols.push_back(j);
        }
        Eigen::MatrixXd S(A.rows(), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t j = 0; j < cols.size(); ++j) S.col(static_cast<Eigen::Index>(j)) = A.col(cols[j]);
        const Eigen::VectorXd c = S.colPivHouseholderQr().solve(y);
        if ((c.array() < 0.0).any() || !c.allFinite()) continue;
        const double res = (S * c - y).squaredNorm();
        if (res < best_res) {
            best_res = res;
            best = {};
            for (std::size_t j = 0; j < cols.size(); ++j) best[static_cast<std::size_t>(cols[j])] = c(static_cast<Eigen::Index>(j));
        }
    }
    rms = A.rows() > 0 ? std::sqrt(best_res / static_cast<double>(A.rows())) : 0.0;
    return best;
}

}  // namespace

TailReport tail_and_theta(std::span<const TailObservation> obs, std::span<const double> xi_grid, double C6,
                          double rho_under) {
    if (obs.size() < 30) throw std::invalid_argument("tail_and_theta: need at least 30 trajectories");
    TailReport r;
    r.n = obs.size();
    r.xi_grid.assign(xi_grid.begin(), xi_grid.end());
    std::vector<TailObservation> sorted(obs.begin(), obs.end());
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        if (a.B_T != b.B_T) return a.B_T < b.B_T;
        return !a.censored && b.censored;  // events before censorings at ties
    });

    std::vector<double> theta(obs.size()), theta_unc;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        theta[i] = kinetics::theta(obs[i].B_T);
        if (obs[i].censored) {
            ++r.censored;
        } else {
            theta_unc.push_back(theta[i]);
        }
    }
    const auto th = stats::mean_se(theta);
    r.theta_mean = th.mean;
    r.theta_se = th.se;
    r.theta_ci_lo = th.mean - 1.96 * th.se;
    r.theta_ci_hi = th.mean + 1.96 * th.se;
    if (!theta_unc.empty()) {
        r.theta_uncensored_mean = std::accumulate(theta_unc.begin(), theta_unc.end(), 0.0) / theta_unc.size();
    }

    for (double xi : xi_grid) {
        std::size_t above = 0;
        for (const auto& o : obs) above += o.B_T > xi ? 1 : 0;
        r.survival_naive.push_back(static_cast<double>(above) / obs.size());
        double S = 1.0;
        std::size_t at_risk = sorted.size();
        std::size_t i = 0;
        while (i < sorted.size() && sorted[i].B_T <= xi) {
            const double v = sorted[i].B_T;
            std::size_t events = 0, leaving = 0;
            while (i < sorted.size() && sorted[i].B_T == v) {
                events += sorted[i].censored ? 0 : 1;
                ++leaving;
                ++i;
            }
            if (events > 0) S *= 1.0 - static_cast<double>(events) / at_risk;
            at_risk -= leaving;
        }
        r.survival_km.push_back(S);
    }

    if (!xi_grid.empty()) {
        Eigen::MatrixXd A(static_cast<Eigen::Index>(xi_grid.size()), 3);
        Eigen::VectorXd y(static_cast<Eigen::Index>(xi_grid.size()));
        for (std::size_t j = 0; j < xi_grid.size(); ++j) {
            const double xi = xi_grid[j];
            const auto row = static_cast<Eigen::Index>(j);
            A(row, 0) = 1.0 / std::sqrt(std::log1p(xi));
            A(row, 1) = std::exp(-std::pow(ladder_delta(xi, C6), -(3.0 - 2.0 * rho_under)));
            A(row, 2) = std::exp(-xi * xi * xi);
            y(row) = r.survival_naive[j];
        }
        r.shape_coeffs = nnls3(A, y, r.shape_rms);
    }
    return r;
}

}  // namespace srd::diagnostics
