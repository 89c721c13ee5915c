#pragma once

// Term-by-term reconstruction of the Laplace-method estimate of E(tau_0).
//
// For 1 <= i <= m-1 and x = i/m the exact summand of the closed form splits as
//
//   ln(pi_i / delta_i) = ln K + m F(x) + G(x) + S(i) + 1 + Rpsi(i) - Rphi(i)
//
// where S is the Stirling defect of ln C(m, i), and Rpsi / Rphi are the
// remainders of the Riemann-sum approximations of sum ln psi(k/m) and
// sum ln phi(k/m). Every piece is computed here so the bounds used in the
// asymptotic argument can be measured at finite m.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "qlab/asymptotics.hpp"
#include "qlab/bd_chain.hpp"
#include "qlab/log_weight.hpp"
#include "qlab/model_params.hpp"

namespace qlab {

inline constexpr std::int64_t kAuditMaxStates = 100'000;
inline constexpr std::int64_t kLargeM = 64;

namespace detail {

// (1+u) ln(1+u) / u, continuous at u = 0 and u = -1.
inline double xlogx_ratio(double u) {
    if (u == 0.0) return 1.0;
    if (u == -1.0) return 0.0;
    return (1.0 + u) * std::log1p(u) / u;
}

// ((1+r) ln(1+r) - r) / r, continuous at r = 0.
inline double log_affine_mean_excess(double r) {
    if (std::abs(r) < 1e-4) return r * (0.5 + r * (-1.0 / 6.0 + r / 12.0));
    return ((1.0 + r) * std::log1p(r) - r) / r;
}

// Integral of ln(u0 + b (s - x0)) over s in [x0, x1].
inline double integral_log_affine(double u0, double b, double x0, double x1) {
    const double width = x1 - x0;
    if (width == 0.0) return 0.0;
    return width * (std::log(u0) + log_affine_mean_excess(b * width / u0));
}

inline double xlogx(double v) { return v == 0.0 ? 0.0 : v * std::log(v); }

}  // namespace detail

// Stirling defect S(i) = ln C(m,i) + (m-i) ln(1-i/m) + i ln(i/m) + 1/2 ln(i(m-i)/m).
// Symmetric in i <-> m-i bit for bit.
inline double stirling_defect(std::int64_t m, std::int64_t i) {
    if (m < 2 || i < 1 || i > m - 1) throw DomainError("i", "must lie in [1, m-1]");
    const std::int64_t a = std::min(i, m - i);
    const std::int64_t b = m - a;
    const double md = static_cast<double>(m);
    const double ad = static_cast<double>(a);
    const double bd = static_cast<double>(b);
    const double log_binom = std::lgamma(md + 1.0) - (std::lgamma(ad + 1.0) + std::lgamma(bd + 1.0));
    const double entropy = ad * std::log(ad / md) + bd * std::log(bd / md);
    return log_binom + entropy + 0.5 * std::log(ad * bd / md);
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double v) const { return v >= lo && v <= hi; }
};

// Two-sided enclosure of S(i) implied by Robbins' bounds on ln n!.
inline Interval stirling_defect_bounds(std::int64_t m, std::int64_t i) {
    const double md = static_cast<double>(m);
    const double id = static_cast<double>(i);
    const double jd = static_cast<double>(m - i);
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    return {1.0 / (12.0 * md + 1.0) - 1.0 / (12.0 * id) - 1.0 / (12.0 * jd) - half_log_2pi,
            1.0 / (12.0 * md) - 1.0 / (12.0 * id + 1.0) - 1.0 / (12.0 * jd + 1.0) - half_log_2pi};
}

// Which exponent function is used. The standard form isolates the
// Q^theta-dependence of the phi-terms into F-tilde, which is only small when
// L_q stays away from 0. The degenerate form keeps phi ln phi inside F.
enum class FForm { Standard, Degenerate };

inline FForm lumped_form(const ModelParams &p) {
    return std::abs(p.l_q()) < kDegenerateLqCutoff ? FForm::Degenerate : FForm::Standard;
}

struct FDerivatives {
    double value = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
    double d3 = 0.0;
};

// F and its first three derivatives at x. x = 1 is accepted for the value
// only (the derivatives diverge there).
inline FDerivatives f_big(double x, const ModelParams &p, FForm form) {
    const double lq = p.l_q();
    const double log_sigma_s = std::log(p.sigma) + static_cast<double>(p.ell) * std::log1p(-p.q);
    const double one_minus_x = 1.0 - x;
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("x", "must lie in [0, 1)");

    FDerivatives f;
    if (form == FForm::Standard) {
        const double lin = 1.0 + lq * x;
        if (!(lin > 0.0)) throw DomainError("x", "requires 1 + L_q x > 0");
        f.value = -detail::xlogx(one_minus_x) + x * log_sigma_s - x * detail::xlogx_ratio(lq * x);
        if (x < 1.0) {
            f.d1 = std::log(one_minus_x) + log_sigma_s - std::log1p(lq * x);
            f.d2 = -1.0 / one_minus_x - lq / lin;
            f.d3 = -1.0 / (one_minus_x * one_minus_x) + (lq * lq) / (lin * lin);
        }
    } else {
        const double slope = lq + p.conversion_prob();
        if (slope == 0.0) throw DomainError("q", "degenerate form requires L_q + (1-q)^ell Q^theta != 0");
        const double phi = loss_factor_phi(x, p);
        if (!(phi > 0.0)) throw DomainError("x", "requires phi(x) > 0");
        f.value = -detail::xlogx(one_minus_x) + x * log_sigma_s - detail::xlogx(phi) / slope;
        if (x < 1.0) {
            f.d1 = std::log(one_minus_x) + log_sigma_s - std::log(phi);
            f.d2 = -1.0 / one_minus_x - slope / phi;
            f.d3 = -1.0 / (one_minus_x * one_minus_x) + (slope * slope) / (phi * phi);
        }
    }
    if (x == 1.0) f.d1 = f.d2 = f.d3 = -std::numeric_limits<double>::infinity();
    return f;
}

inline FDerivatives f_big(double x, const ModelParams &p) { return f_big(x, p, lumped_form(p)); }

// F-tilde(x) = (1 + L_q x) ln(1 + L_q x) / L_q - phi(x) ln phi(x) / (L_q + (1-q)^ell Q^theta).
inline double f_tilde(double x, const ModelParams &p) {
    const double lq = p.l_q();
    const double slope = lq + p.conversion_prob();
    const double phi = loss_factor_phi(x, p);
    if (slope == 0.0) throw DomainError("q", "F-tilde requires L_q + (1-q)^ell Q^theta != 0");
    return x * detail::xlogx_ratio(lq * x) - detail::xlogx(phi) / slope;
}

// Maximiser of F on [0, 1]. Standard form: (sigma s - 1)/(sigma - 1). The
// degenerate form shifts it by O(Q^theta). Clamped at 0 when negative.
inline double f_maximiser(const ModelParams &p, FForm form) {
    const RhoStar r = rho_star(p, form == FForm::Degenerate);
    const double v = form == FForm::Degenerate ? r.degenerate->exact : r.value;
    return std::max(v, 0.0);
}

// G(x), the O(ln m) part of the exponent, on [1/m, 1 - 1/m]. In the
// degenerate form m F-tilde is carried by F instead of G.
inline double g_big(double x, const ModelParams &p, FForm form) {
    const double md = static_cast<double>(p.m);
    if (!(x >= 1.0 / md - 1e-15 && x <= 1.0 - 1.0 / md + 1e-15))
        throw DomainError("x", "must lie in [1/m, 1 - 1/m]");
    const double qt = p.q_big_pow_theta();
    const double sigma = p.sigma;
    const double log_sigma_s = std::log(sigma) + static_cast<double>(p.ell) * std::log1p(-p.q);

    double g = std::log1p((sigma - 1.0) * x) - log_sigma_s;
    g += (md * qt / (sigma - qt) - 0.5) * std::log(gain_factor_psi(x, p));
    g += md * x * std::log1p(qt / sigma * (1.0 / x - 1.0));
    g -= 0.5 * std::log(md * x * (1.0 - x));
    if (form == FForm::Standard) g += md * f_tilde(x, p);
    return g;
}

inline double g_big(double x, const ModelParams &p) { return g_big(x, p, lumped_form(p)); }

// Uniform bound 2 (1 + m Q^theta) ln m on |G| over [1/m, 1-1/m].
inline double g_bound(const ModelParams &p) {
    const double md = static_cast<double>(p.m);
    return 2.0 * (1.0 + md * p.q_big_pow_theta()) * std::log(md);
}

inline double g_sup(const ModelParams &p, FForm form) {
    double sup = 0.0;
    for (std::int64_t i = 1; i < p.m; ++i)
        sup = std::max(sup, std::abs(g_big(static_cast<double>(i) / static_cast<double>(p.m), p, form)));
    return sup;
}

// Smallest m0 in [2, m_max] such that sup |G| <= g_bound holds for every
// m in [m0, m_max]; the other parameters are taken from `base`.
inline std::optional<std::int64_t> smallest_m_for_g_bound(ModelParams base, std::int64_t m_max) {
    std::optional<std::int64_t> m0;
    for (std::int64_t m = m_max; m >= 2; --m) {
        base.m = m;
        if (g_sup(base, lumped_form(base)) <= g_bound(base))
            m0 = m;
        else
            break;
    }
    return m0;
}

struct FTildeBound {
    double lambda = 0.0;  // min(1 + L_q, 1/sigma)
    double eta = 0.0;     // min(|L_q|, |L_q + (1-q)^ell Q^theta|)
    double bound = 0.0;   // 8 sigma ln(1/lambda) / eta^2 * Q^theta
};

inline FTildeBound f_tilde_bound(const ModelParams &p) {
    const double lq = p.l_q();
    FTildeBound b;
    b.lambda = std::min(1.0 + lq, 1.0 / p.sigma);
    b.eta = std::min(std::abs(lq), std::abs(lq + p.conversion_prob()));
    b.bound = 8.0 * p.sigma * std::log(1.0 / b.lambda) / (b.eta * b.eta) * p.q_big_pow_theta();
    return b;
}

// ln K, the i-independent part of the exponent.
inline double k_const(const ModelParams &p) {
    p.validate();
    const double md = static_cast<double>(p.m);
    const double qt = p.q_big_pow_theta();
    const double sqt = p.conversion_prob();
    const double psi_first = gain_factor_psi(1.0 / md, p);
    double ln_k = (-md * qt / (p.sigma - qt) - 0.5) * std::log(psi_first);
    if (sqt != 0.0) {
        const double phi0 = 1.0 - sqt;
        ln_k += md * phi0 * std::log1p(-sqt) / (p.l_q() + sqt);
    }
    return ln_k;
}

// Closed-form (integral) approximations of sum_{k<=i} ln phi(k/m) and
// sum_{k<=i} ln psi(k/m), without their remainders.
inline double phi_sum_closed_form(std::int64_t i, const ModelParams &p) {
    const double md = static_cast<double>(p.m);
    const double slope = p.l_q() + p.conversion_prob();
    const double phi0 = 1.0 - p.conversion_prob();
    return md * detail::integral_log_affine(phi0, slope, 0.0, static_cast<double>(i) / md);
}

inline double psi_sum_closed_form(std::int64_t i, const ModelParams &p) {
    const double md = static_cast<double>(p.m);
    const double qt = p.q_big_pow_theta();
    const double x = static_cast<double>(i) / md;
    const double psi_first = gain_factor_psi(1.0 / md, p);
    return md * detail::integral_log_affine(psi_first, 1.0 - qt / p.sigma, 1.0 / md, x) +
           0.5 * (std::log(gain_factor_psi(x, p)) + std::log(psi_first));
}

struct TermDecomposition {
    std::int64_t i = 0;
    double log_exact = 0.0;     // ln(pi_i / delta_i)
    double exponent = 0.0;      // m F(i/m) + G(i/m)
    double stirling = 0.0;      // S(i)
    double psi_remainder = 0.0; // sum ln psi - closed form
    double phi_remainder = 0.0; // sum ln phi - closed form

    // Remainder predicted by the decomposition: S(i) + 1 + Rpsi - Rphi.
    double predicted_remainder() const { return stirling + 1.0 + psi_remainder - phi_remainder; }
};

inline std::vector<TermDecomposition> term_decomposition(const ModelParams &p, FForm form) {
    p.validate();
    if (p.m < 2) throw DomainError("m", "decomposition needs m >= 2");
    if (p.m > kAuditMaxStates) throw DomainError("m", "audit is limited to m <= 10^5");
    const BirthDeathSpec spec = transition_probs(p);
    const LogPi lp = log_pi(spec);
    const double md = static_cast<double>(p.m);

    std::vector<TermDecomposition> out;
    out.reserve(static_cast<std::size_t>(p.m - 1));
    double sum_log_psi = 0.0;
    double sum_log_phi = 0.0;
    for (std::int64_t i = 1; i < p.m; ++i) {
        const double x = static_cast<double>(i) / md;
        sum_log_psi += std::log(gain_factor_psi(x, p));
        sum_log_phi += std::log(loss_factor_phi(x, p));
        TermDecomposition t;
        t.i = i;
        t.log_exact = lp.log_pi[static_cast<std::size_t>(i - 1)] - std::log(spec.delta(i));
        t.exponent = md * f_big(x, p, form).value + g_big(x, p, form);
        t.stirling = stirling_defect(p.m, i);
        t.psi_remainder = sum_log_psi - psi_sum_closed_form(i, p);
        t.phi_remainder = sum_log_phi - phi_sum_closed_form(i, p);
        out.push_back(t);
    }
    return out;
}

struct DirectSum {
    LogWeight log_s_m;          // sum_{i<m} exp(m F(i/m) + G(i/m))
    LogWeight log_t;            // term of index m, pi_m / delta_m
    double log_k = 0.0;
    LogWeight log_reconstructed;  // K S_m + T
    double log_exact = 0.0;       // ln E(tau_0 | N_0 = 1)
    double remainder = 0.0;       // log_exact - log_reconstructed
    double max_term_remainder = 0.0;  // max_i |ln(pi_i/delta_i) - ln K - mF - G|
};

inline DirectSum direct_sum(const ModelParams &p, FForm form) {
    const auto terms = term_decomposition(p, form);
    const BirthDeathSpec spec = transition_probs(p);
    DirectSum d;
    LogSumAccumulator s_m;
    d.log_k = k_const(p);
    for (const auto &t : terms) {
        s_m.add(t.exponent);
        d.max_term_remainder = std::max(d.max_term_remainder, std::abs(t.log_exact - d.log_k - t.exponent));
    }
    d.log_s_m = s_m.result();
    d.log_t = LogWeight(log_pi(spec).log_pi_m_over_delta_m);
    d.log_reconstructed = LogWeight(d.log_k) * d.log_s_m + d.log_t;
    d.log_exact = expected_extinction_time(spec).value();
    d.remainder = d.log_exact - d.log_reconstructed.value();
    return d;
}

inline DirectSum direct_sum(const ModelParams &p) { return direct_sum(p, lumped_form(p)); }

struct TruncatedSum {
    double rho = 0.0;
    double delta = 0.0;
    std::int64_t i_minus = 0;
    std::int64_t i_plus = 0;      // clamped to m - 1
    bool i_plus_clamped = false;
    double f_second_at_rho = 0.0; // F''(rho*)
    LogWeight log_s_m_delta;      // windowed sum of exp(m F + G)
    LogWeight log_t_m_delta;      // windowed Gaussian sum
};

inline double default_window(std::int64_t m) { return std::cbrt(static_cast<double>(m) * static_cast<double>(m)); }

inline TruncatedSum truncated_sum(const ModelParams &p, FForm form, std::optional<double> delta = std::nullopt) {
    p.validate();
    if (p.m < 2) throw DomainError("m", "window sums need m >= 2");
    const double md = static_cast<double>(p.m);
    TruncatedSum t;
    t.delta = delta.value_or(default_window(p.m));
    if (!(t.delta > 0.0)) throw DomainError("delta", "window width must be positive");
    t.rho = f_maximiser(p, form);
    t.i_minus = std::max<std::int64_t>(static_cast<std::int64_t>(std::floor(md * t.rho - t.delta)), 0) + 1;
    t.i_plus = static_cast<std::int64_t>(std::floor(md * t.rho + t.delta));
    if (t.i_plus > p.m - 1) {
        t.i_plus = p.m - 1;
        t.i_plus_clamped = true;
    }
    if (t.i_minus > t.i_plus) throw DomainError("delta", "empty summation window (i- > i+)");

    t.f_second_at_rho = f_big(t.rho, p, form).d2;
    LogSumAccumulator s, gauss;
    for (std::int64_t i = t.i_minus; i <= t.i_plus; ++i) {
        const double x = static_cast<double>(i) / md;
        s.add(md * f_big(x, p, form).value + g_big(x, p, form));
        const double dx = x - t.rho;
        gauss.add(md * dx * dx * t.f_second_at_rho / 2.0);
    }
    t.log_s_m_delta = s.result();
    t.log_t_m_delta = gauss.result();
    return t;
}

// Endpoint values of F''' on [0, rho* + delta/m]; F''' is monotone there
// because F'''' < 0.
struct ThirdDerivativeCheck {
    double sup_abs = 0.0;
    double bound_lq = 0.0;      // max(sigma^2, ((sigma-1)/(1+L_q))^2)
    double bound_window = 0.0;  // same with lambda = (sigma-1)(1 - rho* - delta/m)
};

inline ThirdDerivativeCheck f_third_derivative_check(const ModelParams &p, std::optional<double> delta = std::nullopt) {
    const double md = static_cast<double>(p.m);
    const double d = delta.value_or(default_window(p.m));
    const double rho = f_maximiser(p, FForm::Standard);
    const double right = rho + d / md;
    if (!(right < 1.0)) throw DomainError("delta", "window reaches x = 1");
    ThirdDerivativeCheck c;
    c.sup_abs = std::max(std::abs(f_big(0.0, p, FForm::Standard).d3), std::abs(f_big(right, p, FForm::Standard).d3));
    const double s2 = p.sigma * p.sigma;
    const double lam = 1.0 + p.l_q();
    c.bound_lq = std::max(s2, std::pow((p.sigma - 1.0) / lam, 2));
    const double lam_window = (p.sigma - 1.0) * (1.0 - right);
    c.bound_window = std::max(s2, std::pow((p.sigma - 1.0) / lam_window, 2));
    return c;
}

struct AuditReport {
    ModelParams params;
    bool degenerate = false;          // degenerate-form F selected
    bool exact_finite = false;        // false: audit skipped (e.g. q = 0)
    bool within_hypotheses = false;   // rho* >= 0
    double ln_exact = 0.0;
    double ln_k = 0.0;
    double rho = 0.0;                 // maximiser of F on [0, 1]
    double m_f_rho = 0.0;             // m F(rho)
    double main_term = 0.0;           // m varphi((1-q)^ell)
    double residual = 0.0;            // ln_exact - main_term
    double residual_with_k = 0.0;     // ln_exact - m_f_rho - ln_k
    double remainder_scale = 0.0;     // (1 + m Q^theta) ln m
    double residual_ratio = 0.0;      // |residual| / remainder_scale
    double stirling_max = 0.0;
    double g_sup = 0.0;
    double g_bound = 0.0;
    double log_s_m = 0.0;
    double log_s_m_delta = std::numeric_limits<double>::quiet_NaN();
    double log_t_m_delta = std::numeric_limits<double>::quiet_NaN();
    double truncation_share = std::numeric_limits<double>::quiet_NaN();
    double delta = 0.0;
    std::int64_t i_minus = 0;
    std::int64_t i_plus = 0;
};

inline AuditReport audit_report(const ModelParams &p) {
    p.validate();
    if (p.m < 2) throw DomainError("m", "audit needs m >= 2");
    if (p.m > kAuditMaxStates) throw DomainError("m", "audit is limited to m <= 10^5");
    const double nan = std::numeric_limits<double>::quiet_NaN();

    AuditReport r;
    r.params = p;
    const FForm form = lumped_form(p);
    r.degenerate = form == FForm::Degenerate;
    r.within_hypotheses = rho_star(p).within_hypotheses;
    r.ln_exact = expected_extinction_time(p).value();
    r.exact_finite = std::isfinite(r.ln_exact);
    const PersistenceEstimate est = persistence_log_estimate(p);
    r.main_term = est.main;
    r.remainder_scale = est.remainder_scale;
    if (!r.exact_finite) {
        r.ln_k = r.rho = r.m_f_rho = r.residual = r.residual_with_k = r.residual_ratio = nan;
        r.stirling_max = r.g_sup = r.g_bound = r.log_s_m = nan;
        return r;
    }

    const double md = static_cast<double>(p.m);
    r.ln_k = k_const(p);
    r.rho = f_maximiser(p, form);
    r.m_f_rho = md * f_big(r.rho, p, form).value;
    r.residual = r.ln_exact - r.main_term;
    r.residual_with_k = r.ln_exact - r.m_f_rho - r.ln_k;
    r.residual_ratio = std::abs(r.residual) / r.remainder_scale;

    const DirectSum ds = direct_sum(p, form);
    r.log_s_m = ds.log_s_m.value();
    for (std::int64_t i = 1; i < p.m; ++i) {
        r.stirling_max = std::max(r.stirling_max, std::abs(stirling_defect(p.m, i)));
        r.g_sup = std::max(r.g_sup, std::abs(g_big(static_cast<double>(i) / md, p, form)));
    }
    r.g_bound = g_bound(p);

    try {
        const TruncatedSum ts = truncated_sum(p, form);
        r.log_s_m_delta = ts.log_s_m_delta.value();
        r.log_t_m_delta = ts.log_t_m_delta.value();
        r.truncation_share = -std::expm1(r.log_s_m_delta - r.log_s_m);
        r.delta = ts.delta;
        r.i_minus = ts.i_minus;
        r.i_plus = ts.i_plus;
    } catch (const DomainError &) {
        r.delta = default_window(p.m);
    }
    return r;
}

}  // namespace qlab
