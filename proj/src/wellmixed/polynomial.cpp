#include "srd/wellmixed/polynomial.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace srd::wellmixed {

Polynomial& Polynomial::add(double coeff, std::array<int, 4> exponents) {
    Monomial m{coeff, exponents};
    for (int e : exponents) {
        if (e < 0) throw std::invalid_argument("Polynomial: negative exponent");
    }
    if (m.degree() > 4) throw std::invalid_argument("Polynomial: total degree must be <= 4");
    if (!std::isfinite(coeff)) throw std::invalid_argument("Polynomial: non-finite coefficient");
    terms_.push_back(m);
    return *this;
}

Polynomial Polynomial::monomial(double coeff, std::array<int, 4> exponents) {
    Polynomial p;
    p.add(coeff, exponents);
    return p;
}

double Polynomial::operator()(const Vec4& a) const {
    double sum = 0.0;
    for (const auto& m : terms_) {
        double v = m.coeff;
        for (std::size_t i = 0; i < 4; ++i) {
            for (int k = 0; k < m.exponents[i]; ++k) v *= a[i];
        }
        sum += v;
    }
    return sum;
}

int Polynomial::degree() const {
    int d = 0;
    for (const auto& m : terms_) d = std::max(d, m.degree());
    return d;
}

std::array<double, 5> Polynomial::shift_coefficients(const Vec4& a, const Vec4& h) const {
    static constexpr double binom[5][5] = {
        {1, 0, 0, 0, 0}, {1, 1, 0, 0, 0}, {1, 2, 1, 0, 0}, {1, 3, 3, 1, 0}, {1, 4, 6, 4, 1}};
    std::array<double, 5> total{};
    for (const auto& m : terms_) {
        // product over i of (a_i + t h_i)^{e_i} as a polynomial in t
        std::array<double, 5> prod{m.coeff, 0, 0, 0, 0};
        int deg = 0;
        for (std::size_t i = 0; i < 4; ++i) {
            const int e = m.exponents[i];
            if (e == 0) continue;
            std::array<double, 5> factor{};
            for (int k = 0; k <= e; ++k) factor[static_cast<std::size_t>(k)] = binom[e][k] * std::pow(a[i], e - k) * std::pow(h[i], k);
            std::array<double, 5> next{};
            for (int p = 0; p <= deg; ++p)
                for (int q = 0; q <= e; ++q) next[static_cast<std::size_t>(p + q)] += prod[static_cast<std::size_t>(p)] * factor[static_cast<std::size_t>(q)];
            prod = next;
            deg += e;
        }
        for (std::size_t k = 0; k < 5; ++k) total[k] += prod[k];
    }
    return total;
}

std::string Polynomial::describe() const {
    std::ostringstream os;
    os.precision(17);
    bool first = true;
    for (const auto& m : terms_) {
        if (!first) os << " + ";
        first = false;
        os << m.coeff;
        for (std::size_t i = 0; i < 4; ++i) {
            if (m.exponents[i] > 0) os << "*a" << (i + 1) << "^" << m.exponents[i];
        }
    }
    return first ? "0" : os.str();
}

}  // namespace srd::wellmixed
