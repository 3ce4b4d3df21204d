#include "srd/kinetics/species.hpp"

#include <stdexcept>

namespace srd::kinetics {

namespace {

void check_component(double v) {
    if (!std::isfinite(v)) throw std::invalid_argument("SpeciesVector: non-finite component");
    if (v < 0.0) throw std::invalid_argument("SpeciesVector: negative component");
}

}  // namespace

SpeciesVector::SpeciesVector(double a1, double a2, double a3, double a4) : SpeciesVector(Vec4{a1, a2, a3, a4}) {}

SpeciesVector::SpeciesVector(const Vec4& a) : a_(a) {
    for (double v : a_) check_component(v);
}

SpeciesVector SpeciesVector::positive_part(const Vec4& a) {
    Vec4 p{};
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!std::isfinite(a[i])) throw std::invalid_argument("SpeciesVector: non-finite component");
        p[i] = a[i] > 0.0 ? a[i] : 0.0;
    }
    return SpeciesVector(p);
}

double SpeciesVector::norm() const { return detail::norm(a_); }

void ReactionNetwork::validate() const {
    if (!(lambda_fwd >= 0.0) || !(lambda_bwd >= 0.0) || !std::isfinite(lambda_fwd) || !std::isfinite(lambda_bwd)) {
        throw std::invalid_argument("ReactionNetwork: rate constants must be finite and non-negative");
    }
}

std::string to_string(NoiseKind k) {
    switch (k) {
        case NoiseKind::True: return "true";
        case NoiseKind::Smoothed: return "smoothed";
        case NoiseKind::Truncated: return "truncated";
    }
    return "unknown";
}

NoiseKind noise_kind_from_string(const std::string& s) {
    if (s == "true") return NoiseKind::True;
    if (s == "smoothed") return NoiseKind::Smoothed;
    if (s == "truncated") return NoiseKind::Truncated;
    throw std::invalid_argument("unknown noise kind '" + s + "' (expected true, smoothed or truncated)");
}

void NoiseModel::validate() const {
    if (!std::isfinite(nu) || nu < 0.0) throw std::invalid_argument("NoiseModel: nu must be finite and >= 0");
    if (kind != NoiseKind::True && !(eps_sigma > 0.0 && std::isfinite(eps_sigma))) {
        throw std::invalid_argument("NoiseModel: eps_sigma must be > 0 for smoothed/truncated noise");
    }
    if (kind == NoiseKind::Truncated && !(trunc_n >= 1.0 && std::isfinite(trunc_n))) {
        throw std::invalid_argument("NoiseModel: trunc_n must be >= 1 for truncated noise");
    }
    if (channels < 2 || channels > kMaxChannels) {
        throw std::invalid_argument("NoiseModel: channels must lie in [2, 8]");
    }
}

double cutoff_chi(double r, double n) {
    if (!(r >= 0.0)) throw std::invalid_argument("cutoff_chi: r must be >= 0");
    if (!(n >= 1.0)) throw std::invalid_argument("cutoff_chi: level must be >= 1");
    return 1.0 - smooth_step(r / n - 1.0);
}

Vec4 reaction_drift(const SpeciesVector& a) { return reaction_drift(a, ReactionNetwork{}); }

Vec4 reaction_drift(const SpeciesVector& a, const ReactionNetwork& rates) {
    const Vec4& v = a.values();
    const double r = rates.lambda_fwd * ReactionNetwork::eta_fwd(v) - rates.lambda_bwd * ReactionNetwork::eta_bwd(v);
    return Vec4{-r, r, -r, r};
}

Vec4 truncated_drift(const SpeciesVector& a, double n) {
    const double chi = cutoff_chi(a.norm(), n);
    Vec4 f = reaction_drift(a);
    for (double& v : f) v *= chi * chi;
    return f;
}

NoiseMatrix noise_coefficients(const SpeciesVector& a, const NoiseModel& m) {
    m.validate();
    NoiseMatrix s = NoiseMatrix::Zero(kSpecies, m.channels);
    const double factor = (m.kind == NoiseKind::Truncated) ? cutoff_chi(a.norm(), m.trunc_n) : 1.0;
    Vec4 c0, c1;
    detail::noise_columns(a.values(), m, factor, c0, c1);
    for (int i = 0; i < kSpecies; ++i) {
        s(i, 0) = c0[static_cast<std::size_t>(i)];
        s(i, 1) = c1[static_cast<std::size_t>(i)];
    }
    return s;
}

}  // namespace srd::kinetics
