#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "srd/kinetics/species.hpp"

namespace srd::kinetics {

// Entropy source integrand. For xi > 0 the shifted variables (a - xi)^+ are
// used and the noise part is gated by 1_{a_i > xi}; at xi = 0 no gate is
// applied. With a Truncated model the drift carries the chi_n^2 factor.
double source_term(const SpeciesVector& a, const NoiseModel& m, double xi = 0.0);

// S(a) / sum_i Phi_bar(a_i), with 0/0 := 0.
double source_ratio(const SpeciesVector& a, const NoiseModel& m);

struct SourceLemmaResult {
    double worst_ratio = 0.0;
    Vec4 argmax{};
    std::size_t samples = 0;
};

// Uniform samples in [0, box]^4.
SourceLemmaResult check_source_lemma(std::size_t samples, double box, const NoiseModel& m, std::uint64_t seed);

// Estimate of sup S / sum Phi_bar over [0, box]^4 from a tensor log-grid,
// random points and compass-search refinement of the best candidates.
SourceLemmaResult calibrate_source_constant(const NoiseModel& m, double box, std::uint64_t seed);

struct TruncationComparison {
    std::size_t samples = 0;
    double worst_ratio_base = 0.0;
    double worst_ratio_truncated = 0.0;
    // S_n > max(S, 0): would break the upper bound carried over from S.
    std::size_t violations = 0;
    // S_n > S pointwise; happens wherever S < 0 and chi_n < 1.
    std::size_t literal_exceedances = 0;
};

// Compares Truncated(level) against the Smoothed base model on shared samples.
TruncationComparison compare_truncated_source(std::size_t samples, double box, const NoiseModel& base, double level,
                                              std::uint64_t seed);

struct InequalityCheck {
    std::string name;
    std::size_t samples = 0;
    double derived_constant = 0.0;    // largest sampled lhs/rhs
    double reference_constant = 0.0;  // constant the violations are counted against
    std::size_t violations = 0;
    std::vector<double> counterexample;  // first violating sample, if any
};

struct InequalityReport {
    std::vector<InequalityCheck> checks;
    bool all_hold() const;
};

InequalityReport check_inequalities(std::size_t samples, std::uint64_t seed);

// g(a) = a^3 for a <= 1, a^2 above.
double g_weight(double a);
double ratio_g_psi(double a);    // g(a) ln(1+a) / Psi(a)^2
double ratio_psi_phi(double a);  // Psi(a)^2 ln(1+a) / Phi(a)^2

// Maximum of f over [lo, hi] from a log grid plus golden-section refinement.
double maximize_on_log_grid(const std::function<double(double)>& f, double lo, double hi, int points = 2001);

double reference_constant_g_psi();
double reference_constant_psi_phi();

}  // namespace srd::kinetics
