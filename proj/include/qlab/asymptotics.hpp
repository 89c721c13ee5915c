#pragma once

// Closed-form asymptotics of the persistence time tau_0, the discovery time
// tau*, and the error threshold q* obtained by equating the two.

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string_view>

#include "qlab/model_params.hpp"

namespace qlab {

inline double q_big(const ModelParams &p) { return p.q_big(); }

// L_q = sigma - 1 - sigma (1-q)^ell. Always below sigma - 1.
inline double l_q(const ModelParams &p) { return p.l_q(); }

struct DegenerateRho {
    double exact = 0.0;        // (sigma s - 1 + s Q^theta) / (sigma - 1 + s Q^theta)
    double leading = 0.0;      // rho*_0 = (sigma s - 1) / (sigma - 1)
    double coefficient = 0.0;  // first-order coefficient of Q^theta
    double expansion = 0.0;    // leading + coefficient Q^theta
};

struct RhoStar {
    double value = 0.0;             // (sigma (1-q)^ell - 1) / (sigma - 1)
    bool within_hypotheses = true;  // value >= 0
    std::optional<DegenerateRho> degenerate;
};

inline RhoStar rho_star(const ModelParams &p, bool with_degenerate_expansion = false) {
    p.validate();
    const double s = p.survival();
    RhoStar r;
    r.value = (p.sigma * s - 1.0) / (p.sigma - 1.0);
    r.within_hypotheses = r.value >= 0.0;
    if (with_degenerate_expansion) {
        const double qt = p.q_big_pow_theta();
        DegenerateRho d;
        d.exact = (p.sigma * s - 1.0 + s * qt) / (p.sigma - 1.0 + s * qt);
        d.leading = r.value;
        // d/dQ^theta of the exact ratio at Q^theta = 0.
        d.coefficient = p.sigma * s * (1.0 - s) / ((p.sigma - 1.0) * (p.sigma - 1.0));
        d.expansion = d.leading + d.coefficient * qt;
        r.degenerate = d;
    }
    return r;
}

inline constexpr double kVarphiSeriesCutoff = 1e-6;

// Expansion of varphi in eps = 1 - sigma(1-x) around its removable
// singularity, through eps^3.
inline double varphi_series(double eps, double sigma) {
    const double r = 1.0 / (sigma - 1.0);
    const double r2 = r * r;
    const double c0 = std::log(sigma - 1.0) - 1.0 + r;
    const double c1 = 0.5 - 0.5 * r2;
    const double c2 = 1.0 / 6.0 + r2 * r / 3.0;
    const double c3 = 1.0 / 12.0 - r2 * r2 / 4.0;
    return c0 + eps * (c1 + eps * (c2 + eps * c3));
}

// varphi(x) = [sigma(1-x) ln(sigma(1-x)/(sigma-1)) + ln(sigma x)] / (1 - sigma(1-x)),
// the exponential rate of E(tau_0) per individual when (1-q)^ell = x.
inline double varphi(double x, double sigma) {
    if (!(sigma > 1.0)) throw DomainError("sigma", "must be > 1");
    if (!(x > 0.0) || x > 1.0) throw DomainError("x", "must lie in (0, 1]");
    const double t = sigma * (1.0 - x);
    const double eps = 1.0 - t;
    if (std::abs(eps) < kVarphiSeriesCutoff) return varphi_series(eps, sigma);
    const double first = t == 0.0 ? 0.0 : t * std::log(t / (sigma - 1.0));
    return (first + std::log(sigma * x)) / eps;
}

// Inverse of varphi restricted to [1/sigma, 1], where it increases from 0 to
// ln sigma. Plain bisection run down to adjacent doubles.
inline double varphi_inverse(double y, double sigma) {
    if (!(sigma > 1.0)) throw DomainError("sigma", "must be > 1");
    const double top = std::log(sigma);
    if (!(y >= 0.0 && y <= top)) throw DomainError("y", "must lie in [0, ln sigma]");
    double lo = 1.0 / sigma;
    double hi = 1.0;
    if (y == 0.0) return lo;
    if (y == top) return hi;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (varphi(mid, sigma) < y)
            lo = mid;
        else
            hi = mid;
    }
    return std::abs(varphi(lo, sigma) - y) <= std::abs(varphi(hi, sigma) - y) ? lo : hi;
}

inline constexpr double kDegenerateLqCutoff = 1e-3;

struct PersistenceEstimate {
    double main = 0.0;             // m varphi((1-q)^ell)
    double remainder_scale = 0.0;  // (1 + m Q^theta) ln m
    // m q / (L_q (sigma L_q + (sigma-1) q)); present when |L_q| < 1e-3.
    std::optional<double> degenerate_term;
    bool within_hypotheses = true;  // rho* >= 0
};

inline PersistenceEstimate persistence_log_estimate(const ModelParams &p) {
    p.validate();
    const double md = static_cast<double>(p.m);
    PersistenceEstimate e;
    e.main = md * varphi(p.survival(), p.sigma);
    e.remainder_scale = (1.0 + md * p.q_big_pow_theta()) * std::log(md);
    const double lq = p.l_q();
    if (std::abs(lq) < kDegenerateLqCutoff)
        e.degenerate_term = md * p.q / (lq * (p.sigma * lq + (p.sigma - 1.0) * p.q));
    e.within_hypotheses = p.sigma * p.survival() >= 1.0;
    return e;
}

// ln E(tau*) ~ ell ln kappa.
inline double discovery_log_estimate(std::int64_t ell, std::int64_t kappa) {
    if (ell < 1) throw DomainError("ell", "must be >= 1");
    if (kappa < 2) throw DomainError("kappa", "must be >= 2");
    return static_cast<double>(ell) * std::log(static_cast<double>(kappa));
}

// c* = sqrt(2 (sigma-1) ln kappa).
inline double critical_constant(double sigma, std::int64_t kappa) {
    return std::sqrt(2.0 * (sigma - 1.0) * std::log(static_cast<double>(kappa)));
}

struct ThresholdEstimate {
    double q_star = 0.0;
    double c_star = 0.0;
    // Finite-size proxy for m/ell -> inf and ell^2/(m ln m) -> inf.
    bool regime_valid = false;
};

// q* = ln sigma / ell - c* / sqrt(ell m), for m/ell -> inf.
inline ThresholdEstimate error_threshold(double sigma, std::int64_t kappa, std::int64_t ell, std::int64_t m) {
    if (!(sigma > 1.0)) throw DomainError("sigma", "must be > 1");
    if (kappa < 2) throw DomainError("kappa", "must be >= 2");
    if (ell < 1) throw DomainError("ell", "must be >= 1");
    if (m < 1) throw DomainError("m", "must be >= 1");
    const double l = static_cast<double>(ell);
    const double md = static_cast<double>(m);
    ThresholdEstimate t;
    t.c_star = critical_constant(sigma, kappa);
    t.q_star = std::log(sigma) / l - t.c_star / std::sqrt(l * md);
    t.regime_valid = md > l && l * l > md * std::log(md);
    return t;
}

// Fraction of master sequences in the quasispecies phase, c/(sigma-1) sqrt(ell/m).
inline double master_fraction(double c, double sigma, std::int64_t ell, std::int64_t m) {
    return c / (sigma - 1.0) * std::sqrt(static_cast<double>(ell) / static_cast<double>(m));
}

// Target (1-q*)^ell = varphi^{-1}(ln kappa / alpha) for m/ell -> alpha.
inline double threshold_alpha(double sigma, std::int64_t kappa, double alpha) {
    if (!(sigma > 1.0)) throw DomainError("sigma", "must be > 1");
    if (kappa < 2) throw DomainError("kappa", "must be >= 2");
    const double log_kappa = std::log(static_cast<double>(kappa));
    if (!(alpha > log_kappa / std::log(sigma)))
        throw DomainError("alpha", "no error threshold for alpha <= ln kappa / ln sigma");
    return varphi_inverse(log_kappa / alpha, sigma);
}

// q = 1 - x^(1/ell), written so large ell keeps full precision.
inline double q_from_survival(double x, std::int64_t ell) {
    return -std::expm1(std::log(x) / static_cast<double>(ell));
}

// varphi''(1/sigma) = sigma^2 / (sigma - 1).
inline double varphi_curvature_at_inverse_sigma(double sigma) { return sigma * sigma / (sigma - 1.0); }

// Quadratic approximation of varphi near its double zero at 1/sigma.
inline double varphi_expansion_near_inverse_sigma(double x, double sigma) {
    const double d = x - 1.0 / sigma;
    return 0.5 * d * d * varphi_curvature_at_inverse_sigma(sigma);
}

enum class PhaseLabel { Neutral, Quasispecies, Critical, NoThreshold };

inline std::string_view to_string(PhaseLabel p) {
    switch (p) {
        case PhaseLabel::Neutral: return "Neutral";
        case PhaseLabel::Quasispecies: return "Quasispecies";
        case PhaseLabel::Critical: return "Critical";
        case PhaseLabel::NoThreshold: return "NoThreshold";
    }
    return "?";
}

// Asymptotic regime: ell q -> a, m/ell -> alpha, and (for alpha = inf)
// q = ln sigma / ell - c / sqrt(ell m).
struct RegimeSpec {
    double a = std::numbers::ln2;
    double alpha = std::numeric_limits<double>::infinity();
    double c = 0.0;

    void validate() const {
        if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("a", "must be a finite real > 0");
        if (!(alpha >= 0.0)) throw DomainError("alpha", "must be >= 0 (inf allowed)");
        if (!(c >= 0.0) || !std::isfinite(c)) throw DomainError("c", "must be a finite real >= 0");
    }
};

struct RegimeClassification {
    PhaseLabel label = PhaseLabel::Neutral;
    // Target (1-q*)^ell for finite alpha above ln kappa / ln sigma.
    std::optional<double> survival_target;
    bool rho_condition = true;    // sigma e^{-a} - 1 >= 0
    bool nondegenerate = true;    // sigma e^{-a} - 1 != sigma - 2
};

inline constexpr double kTieTolerance = 1e-12;

inline RegimeClassification classify_regime(const RegimeSpec &spec, double sigma, std::int64_t kappa) {
    spec.validate();
    if (!(sigma > 1.0)) throw DomainError("sigma", "must be > 1");
    if (kappa < 2) throw DomainError("kappa", "must be >= 2");

    RegimeClassification out;
    const double gap = sigma * std::exp(-spec.a) - 1.0;
    out.rho_condition = gap >= 0.0;
    out.nondegenerate = std::abs(gap - (sigma - 2.0)) > kTieTolerance * std::max(1.0, std::abs(sigma - 2.0));

    auto compare = [](double value, double reference, PhaseLabel below, PhaseLabel above) {
        if (std::abs(value - reference) <= kTieTolerance * std::abs(reference)) return PhaseLabel::Critical;
        return value < reference ? below : above;
    };

    if (std::isinf(spec.alpha)) {
        out.label = compare(spec.c, critical_constant(sigma, kappa), PhaseLabel::Neutral, PhaseLabel::Quasispecies);
        return out;
    }
    const double log_kappa = std::log(static_cast<double>(kappa));
    if (spec.alpha == 0.0 || spec.alpha <= log_kappa / std::log(sigma)) {
        out.label = PhaseLabel::NoThreshold;
        return out;
    }
    // Fewer mutations than the threshold (larger e^{-a}) favour masters.
    const double target = threshold_alpha(sigma, kappa, spec.alpha);
    out.survival_target = target;
    out.label = compare(std::exp(-spec.a), target, PhaseLabel::Neutral, PhaseLabel::Quasispecies);
    return out;
}

}  // namespace qlab
