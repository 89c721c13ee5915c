#pragma once

// Parameters of the Moran model on the sharp-peak landscape, reduced to the
// two-type (master / non-master) birth-death chain.
//
//   m      population size
//   ell    genome length
//   kappa  alphabet size
//   sigma  fitness of the master sequence (others have fitness 1)
//   q      per-site mutation probability
//   theta  number of mutations a non-master needs to become a master
//          (theta = 1 over-counts masters, theta = ell under-counts them)

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace qlab {

// Raised when an input violates a documented domain constraint. field()
// names the offending parameter.
class DomainError : public std::invalid_argument {
public:
    DomainError(std::string field, const std::string &what)
        : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}

    const std::string &field() const noexcept { return field_; }

private:
    std::string field_;
};

struct ModelParams {
    std::int64_t m = 1;
    std::int64_t ell = 1;
    std::int64_t kappa = 2;
    double sigma = 2.0;
    double q = 0.0;
    std::int64_t theta = 1;

    void validate() const {
        if (m < 1) throw DomainError("m", "population size must be >= 1");
        if (ell < 1) throw DomainError("ell", "genome length must be >= 1");
        if (kappa < 2) throw DomainError("kappa", "alphabet size must be >= 2");
        if (!(sigma > 1.0) || !std::isfinite(sigma))
            throw DomainError("sigma", "master fitness must be a finite real > 1");
        if (!(q >= 0.0 && q < 1.0)) throw DomainError("q", "mutation probability must lie in [0, 1)");
        if (theta < 1 || theta > ell) throw DomainError("theta", "must lie in [1, ell]");
    }

    // (1-q)^ell, the probability that a replication is error free.
    double survival() const { return std::exp(static_cast<double>(ell) * std::log1p(-q)); }

    // 1 - (1-q)^ell without cancellation for small q.
    double mutation_prob() const { return -std::expm1(static_cast<double>(ell) * std::log1p(-q)); }

    // Q = q / ((1-q)(kappa-1)).
    double q_big() const { return q / ((1.0 - q) * static_cast<double>(kappa - 1)); }

    // Q^theta, evaluated in log space; exactly 0 at q = 0.
    double q_big_pow_theta() const {
        if (q == 0.0) return 0.0;
        return std::exp(static_cast<double>(theta) *
                        (std::log(q) - std::log1p(-q) - std::log(static_cast<double>(kappa - 1))));
    }

    // Probability that a non-master offspring is a master:
    // (1-q)^(ell-theta) (q/(kappa-1))^theta = (1-q)^ell Q^theta.
    double conversion_prob() const { return survival() * q_big_pow_theta(); }

    // L_q = sigma - 1 - sigma (1-q)^ell.
    double l_q() const { return sigma - 1.0 - sigma * survival(); }
};

}  // namespace qlab
