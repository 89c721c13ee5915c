#pragma once

// Two-type lumped chain for the number N_t of master sequences, and the
// exact expected persistence time E(tau_0 | N_0 = 1).

#include <cstdint>
#include <limits>
#include <vector>

#include "qlab/log_weight.hpp"
#include "qlab/model_params.hpp"

namespace qlab {

// Up-jump probabilities delta_k (k = 0..m-1) and down-jump probabilities
// gamma_k (k = 1..m) of a lazy birth-death chain on {0, ..., m}. The mass
// 1 - delta_k - gamma_k is a self-loop. delta_m is taken to be 0.
class BirthDeathSpec {
public:
    BirthDeathSpec() = default;
    BirthDeathSpec(std::vector<double> delta, std::vector<double> gamma)
        : delta_(std::move(delta)), gamma_(std::move(gamma)) {
        if (gamma_.size() != delta_.size() + 1)
            throw DomainError("gamma", "expected one more entry than delta (index 0 unused)");
        if (delta_.empty()) throw DomainError("m", "state space must contain at least {0, 1}");
        for (double d : delta_)
            if (!(d >= 0.0 && d <= 1.0)) throw DomainError("delta", "probabilities must lie in [0, 1]");
        for (std::size_t k = 1; k < gamma_.size(); ++k)
            if (!(gamma_[k] >= 0.0 && gamma_[k] <= 1.0))
                throw DomainError("gamma", "probabilities must lie in [0, 1]");
    }

    std::int64_t m() const { return static_cast<std::int64_t>(delta_.size()); }

    // delta(m) is 0 by convention.
    double delta(std::int64_t k) const {
        return k == m() ? 0.0 : delta_.at(static_cast<std::size_t>(k));
    }
    double gamma(std::int64_t k) const {
        if (k == 0) return 0.0;
        return gamma_.at(static_cast<std::size_t>(k));
    }

private:
    std::vector<double> delta_;  // index k = 0..m-1
    std::vector<double> gamma_;  // index k = 0..m, entry 0 unused
};

// Affine factors of the factored jump probabilities:
//   delta_k = (1-x) sigma (1-q)^ell psi(x) / (sigma x + 1 - x)
//   gamma_k = x phi(x) / (sigma x + 1 - x),      x = k/m.
inline double gain_factor_psi(double x, const ModelParams &p) {
    const double qt = p.q_big_pow_theta();
    return qt / p.sigma + (1.0 - qt / p.sigma) * x;
}

inline double loss_factor_phi(double x, const ModelParams &p) {
    const double sqt = p.conversion_prob();
    return 1.0 - sqt + (p.l_q() + sqt) * x;
}

inline BirthDeathSpec transition_probs(const ModelParams &params) {
    params.validate();
    const auto m = params.m;
    const double md = static_cast<double>(m);
    const double s = params.survival();
    const double one_minus_s = params.mutation_prob();
    const double conv = params.conversion_prob();
    const double sigma = params.sigma;

    std::vector<double> delta(static_cast<std::size_t>(m));
    std::vector<double> gamma(static_cast<std::size_t>(m) + 1, 0.0);
    for (std::int64_t k = 0; k <= m; ++k) {
        const double x = static_cast<double>(k) / md;
        const double y = static_cast<double>(m - k) / md;  // 1 - x, exact in k
        const double den = sigma * x + y;
        if (k < m) delta[static_cast<std::size_t>(k)] = (sigma * x * y * s + y * y * conv) / den;
        if (k >= 1) gamma[static_cast<std::size_t>(k)] = (sigma * x * x * one_minus_s + x * y * (1.0 - conv)) / den;
    }
    return BirthDeathSpec(std::move(delta), std::move(gamma));
}

struct LogPi {
    // ln pi_i for i = 1..m-1 (entry i-1). pi_m itself vanishes with delta_m
    // and is only used through the ratio below.
    std::vector<double> log_pi;
    // ln(pi_m / delta_m) = sum_{k<m} ln delta_k - sum_{k<=m} ln gamma_k.
    double log_pi_m_over_delta_m = 0.0;
};

inline LogPi log_pi(const BirthDeathSpec &spec) {
    const auto m = spec.m();
    LogPi out;
    out.log_pi.reserve(static_cast<std::size_t>(m > 0 ? m - 1 : 0));
    double acc = 0.0;
    for (std::int64_t k = 1; k < m; ++k) {
        acc += std::log(spec.delta(k)) - std::log(spec.gamma(k));
        out.log_pi.push_back(acc);
    }
    out.log_pi_m_over_delta_m = acc - std::log(spec.gamma(m));
    return out;
}

// ln E(tau_0 | N_0 = 1) = ln sum_{i=1..m} pi_i / delta_i. Returns +inf when
// some gamma_k vanishes (e.g. q = 0 makes state m absorbing).
inline LogWeight expected_extinction_time(const BirthDeathSpec &spec) {
    const LogPi lp = log_pi(spec);
    LogSumAccumulator acc;
    for (std::int64_t i = 1; i < spec.m(); ++i)
        acc.add(lp.log_pi[static_cast<std::size_t>(i - 1)] - std::log(spec.delta(i)));
    acc.add(lp.log_pi_m_over_delta_m);
    return acc.result();
}

inline LogWeight expected_extinction_time(const ModelParams &params) {
    return expected_extinction_time(transition_probs(params));
}

inline constexpr std::int64_t kOracleMaxStates = 10'000;

// Independent check of the closed form: solves the first-step equations
//   h_0 = 0,  (delta_k + gamma_k) h_k - delta_k h_{k+1} - gamma_k h_{k-1} = 1
// for k = 1..m by forward elimination and back substitution. The sweep
// tracks the complement e_k = 1 + c'_k of the usual Thomas multiplier so no
// step subtracts nearly equal numbers; all quantities are positive and are
// carried as logarithms. Returns ln h_start.
inline LogWeight extinction_time_oracle(const BirthDeathSpec &spec, std::int64_t start) {
    const auto m = spec.m();
    if (m > kOracleMaxStates) throw DomainError("m", "oracle is limited to m <= 10^4");
    if (start < 0 || start > m) throw DomainError("start", "must lie in [0, m]");
    if (start == 0) return LogWeight::zero();

    const std::size_t n = static_cast<std::size_t>(m) + 1;
    std::vector<LogWeight> pivot(n), rhs(n), up(n);  // up = delta_k / pivot_k
    LogWeight e_prev = LogWeight::one();
    LogWeight rhs_prev = LogWeight::zero();
    for (std::int64_t k = 1; k <= m; ++k) {
        const auto idx = static_cast<std::size_t>(k);
        const LogWeight d = LogWeight::from_linear(spec.delta(k));
        const LogWeight g = LogWeight::from_linear(spec.gamma(k));
        const LogWeight ge = g * e_prev;
        pivot[idx] = d + ge;
        rhs[idx] = (LogWeight::one() + g * rhs_prev) / pivot[idx];
        up[idx] = d / pivot[idx];
        e_prev = pivot[idx].is_zero() ? LogWeight::zero() : ge / pivot[idx];
        rhs_prev = rhs[idx];
    }
    if (pivot[n - 1].is_zero()) rhs[n - 1] = LogWeight::infinity();

    LogWeight h = rhs[n - 1];
    for (std::int64_t k = m - 1; k >= start; --k) {
        const auto idx = static_cast<std::size_t>(k);
        h = rhs[idx] + up[idx] * h;
    }
    return h;
}

}  // namespace qlab
