#pragma once

#include <cmath>
#include <vector>

namespace srd::kinetics {

// Phi(s) = (1+s)ln(1+s) - s, accurate for small s.
double phi(double s);
// Phi_bar(s) = Phi(s) + s = (1+s)ln(1+s).
double phi_bar(double s);
// Theta(u) = ln(1 + ln(1+u)).
double theta(double u);

inline double phi_bar_prime(double s) { return 1.0 + std::log1p(s); }
inline double phi_bar_second(double s) { return 1.0 / (1.0 + s); }

struct EntropyValues {
    double phi = 0.0;
    double phi_bar = 0.0;
    double theta = 0.0;
};
EntropyValues entropy_values(double s);

// Integrand of Psi: sqrt(Phi(s)/(1+s)).
double psi_integrand(double s);

class EntropyKit {
public:
    explicit EntropyKit(double quadrature_tol = 1e-10);

    double quadrature_tol() const { return tol_; }

    // Psi(a) by adaptive Gauss-Kronrod quadrature. The achieved error is
    // max(quadrature_tol, 1e-13 * Psi(a)); throws std::runtime_error if the
    // estimate does not reach it.
    double psi(double a) const;
    // Integral of the Psi integrand over [lo, hi].
    double psi_between(double lo, double hi) const;

private:
    double tol_;
};

double psi(double a);

// Cubic Hermite interpolant of Psi with exact nodal slopes. Checked against
// quadrature to 1e-8 * max(1, Psi); beyond a_max it falls back to quadrature.
class PsiTable {
public:
    explicit PsiTable(double a_max = 1.0e4);

    double operator()(double a) const;
    double a_max() const { return nodes_.back(); }

    static const PsiTable& shared();

private:
    std::vector<double> nodes_;
    std::vector<double> values_;
    std::vector<double> slopes_;
};

struct TruncatedEntropy {
    double a_xi = 0.0;    // (a - xi)^+
    double phi_xi = 0.0;  // Phi(a^xi)
    double psi_xi = 0.0;  // Psi(a^xi)
};
TruncatedEntropy truncated_entropy_values(double a, double xi);

inline double positive_excess(double a, double xi) { return a > xi ? a - xi : 0.0; }

}  // namespace srd::kinetics
