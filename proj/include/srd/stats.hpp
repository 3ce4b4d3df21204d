#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace srd::stats {

struct MeanEstimate {
    double mean = 0.0;
    double se = 0.0;  // standard error of the mean
    std::size_t n = 0;
};

MeanEstimate mean_se(std::span<const double> x);
double variance(std::span<const double> x);

// Standard error of the sample mean by nonparametric bootstrap.
double bootstrap_se(std::span<const double> x, std::uint64_t seed, int resamples = 1000);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);
// Slope of log(y) against log(x); entries with non-positive values are skipped.
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace srd::stats
