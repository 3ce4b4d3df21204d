#pragma once

#include <array>
#include <string>
#include <vector>

#include "srd/kinetics/species.hpp"

namespace srd::wellmixed {

using kinetics::Vec4;

struct Monomial {
    double coeff = 0.0;
    std::array<int, 4> exponents{};
    int degree() const { return exponents[0] + exponents[1] + exponents[2] + exponents[3]; }
};

// Polynomial test function on R^4 of total degree <= 4.
class Polynomial {
public:
    Polynomial() = default;

    Polynomial& add(double coeff, std::array<int, 4> exponents);
    static Polynomial monomial(double coeff, std::array<int, 4> exponents);

    double operator()(const Vec4& a) const;
    int degree() const;
    const std::vector<Monomial>& terms() const { return terms_; }

    // c_k with phi(a + t*h) = sum_{k=0}^{4} c_k t^k.
    std::array<double, 5> shift_coefficients(const Vec4& a, const Vec4& h) const;

    std::string describe() const;

private:
    std::vector<Monomial> terms_;
};

}  // namespace srd::wellmixed
