#include "srd/stats.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "srd/rng.hpp"

namespace srd::stats {

MeanEstimate mean_se(std::span<const double> x) {
    MeanEstimate est;
    est.n = x.size();
    if (x.empty()) return est;
    double sum = 0.0;
    for (double v : x) sum += v;
    est.mean = sum / static_cast<double>(x.size());
    if (x.size() > 1) est.se = std::sqrt(variance(x) / static_cast<double>(x.size()));
    return est;
}

double variance(std::span<const double> x) {
    if (x.size() < 2) return 0.0;
    double sum = 0.0;
    for (double v : x) sum += v;
    const double m = sum / static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return ss / static_cast<double>(x.size() - 1);
}

double bootstrap_se(std::span<const double> x, std::uint64_t seed, int resamples) {
    if (x.size() < 2 || resamples < 2) return 0.0;
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
    std::vector<double> means(static_cast<std::size_t>(resamples));
    for (auto& m : means) {
        double s = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) s += x[pick(rng)];
        m = s / static_cast<double>(x.size());
    }
    return std::sqrt(variance(means));
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line: need at least two points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("fit_line: degenerate abscissae");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    return f;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
        if (x[i] > 0 && y[i] > 0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    }
    return fit_line(lx, ly).slope;
}

}  // namespace srd::stats
