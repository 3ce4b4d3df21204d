#include "srd/kinetics/entropy.hpp"

#include <algorithm>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace srd::kinetics {

double phi(double s) {
    if (s < 0.0) throw std::invalid_argument("phi: argument must be >= 0");
    if (s < 1e-2) {
        // sum_{k>=2} (-1)^k s^k / (k(k-1)); the direct form cancels badly here
        double term = s * s;
        double sum = 0.0;
        for (int k = 2; k < 12; ++k) {
            sum += ((k % 2 == 0) ? 1.0 : -1.0) * term / (k * (k - 1.0));
            term *= s;
        }
        return sum;
    }
    return (1.0 + s) * std::log1p(s) - s;
}

double phi_bar(double s) {
    if (s < 0.0) throw std::invalid_argument("phi_bar: argument must be >= 0");
    return (1.0 + s) * std::log1p(s);
}

double theta(double u) {
    if (u < 0.0) throw std::invalid_argument("theta: argument must be >= 0");
    return std::log1p(std::log1p(u));
}

EntropyValues entropy_values(double s) { return {phi(s), phi_bar(s), theta(s)}; }

double psi_integrand(double s) { return std::sqrt(phi(s) / (1.0 + s)); }

EntropyKit::EntropyKit(double quadrature_tol) : tol_(quadrature_tol) {
    if (!(quadrature_tol > 0.0)) throw std::invalid_argument("EntropyKit: quadrature_tol must be > 0");
}

namespace {

// One Gauss-Kronrod panel, bisected while its error estimate exceeds target.
double panel(double lo, double hi, double tol, int depth, double& err_sum) {
    using boost::math::quadrature::gauss_kronrod;
    double err = 0.0;
    const double v = gauss_kronrod<double, 31>::integrate(psi_integrand, lo, hi, 0, 0.0, &err);
    if (err <= std::max(tol, 1e-13 * std::abs(v)) || depth == 0) {
        err_sum += err;
        return v;
    }
    const double mid = 0.5 * (lo + hi);
    return panel(lo, mid, 0.5 * tol, depth - 1, err_sum) + panel(mid, hi, 0.5 * tol, depth - 1, err_sum);
}

}  // namespace

double EntropyKit::psi_between(double lo, double hi) const {
    if (!(lo >= 0.0) || !(hi >= lo) || !std::isfinite(hi)) throw std::invalid_argument("psi: need 0 <= lo <= hi < inf");
    if (hi == lo) return 0.0;
    // panels [0, 1/64], [1/64, 2/64], [2/64, 4/64], ...: the integrand is
    // analytic with slowly varying scale on each doubling interval
    double value = 0.0, err = 0.0;
    double b0 = 0.0, b1 = 1.0 / 64.0;
    while (b0 < hi) {
        const double x0 = std::max(b0, lo), x1 = std::min(b1, hi);
        if (x1 > x0) value += panel(x0, x1, tol_, 30, err);
        b0 = b1;
        b1 *= 2.0;
    }
    const double target = std::max(tol_, 1e-13 * std::abs(value));
    if (!(err <= target) || !std::isfinite(value)) {
        throw std::runtime_error("psi: quadrature did not converge (error estimate " + std::to_string(err) + ")");
    }
    return value;
}

double EntropyKit::psi(double a) const { return psi_between(0.0, a); }

double psi(double a) {
    static const EntropyKit kit;
    return kit.psi(a);
}

PsiTable::PsiTable(double a_max) {
    if (!(a_max > 1.0)) throw std::invalid_argument("PsiTable: a_max must exceed 1");
    for (int k = 0; k <= 64; ++k) nodes_.push_back(k / 64.0);
    double s = 1.0;
    while (s < a_max) {
        s = std::min(s * 1.005, a_max);
        nodes_.push_back(s);
    }
    const EntropyKit kit;
    values_.resize(nodes_.size());
    slopes_.resize(nodes_.size());
    values_[0] = 0.0;
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
        if (k > 0) values_[k] = values_[k - 1] + kit.psi_between(nodes_[k - 1], nodes_[k]);
        slopes_[k] = psi_integrand(nodes_[k]);
    }
}

double PsiTable::operator()(double a) const {
    if (!(a >= 0.0)) throw std::invalid_argument("PsiTable: argument must be >= 0");
    if (a >= nodes_.back()) {
        static const EntropyKit kit;
        return values_.back() + kit.psi_between(nodes_.back(), a);
    }
    const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), a);
    const std::size_t k = static_cast<std::size_t>(it - nodes_.begin()) - 1;
    const double x0 = nodes_[k], x1 = nodes_[k + 1];
    const double h = x1 - x0;
    const double t = (a - x0) / h;
    const double t2 = t * t, t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    return h00 * values_[k] + h10 * h * slopes_[k] + h01 * values_[k + 1] + h11 * h * slopes_[k + 1];
}

const PsiTable& PsiTable::shared() {
    static const PsiTable table;
    return table;
}

TruncatedEntropy truncated_entropy_values(double a, double xi) {
    if (!(a >= 0.0) || !(xi >= 0.0)) throw std::invalid_argument("truncated_entropy_values: need a, xi >= 0");
    TruncatedEntropy t;
    t.a_xi = positive_excess(a, xi);
    if (t.a_xi > 0.0) {
        t.phi_xi = phi(t.a_xi);
        t.psi_xi = psi(t.a_xi);
    }
    return t;
}

}  // namespace srd::kinetics
