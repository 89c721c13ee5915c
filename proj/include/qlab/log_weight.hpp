#pragma once

// Positive quantities stored as their natural logarithm. -inf encodes zero,
// +inf encodes an infinite quantity. Products add, sums use log-sum-exp.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace qlab {

class LogWeight {
public:
    constexpr LogWeight() = default;
    constexpr explicit LogWeight(double log_value) : value_(log_value) {}

    static LogWeight from_linear(double x) { return LogWeight(std::log(x)); }
    static constexpr LogWeight zero() { return LogWeight(-std::numeric_limits<double>::infinity()); }
    static constexpr LogWeight one() { return LogWeight(0.0); }
    static constexpr LogWeight infinity() { return LogWeight(std::numeric_limits<double>::infinity()); }

    constexpr double value() const { return value_; }
    double linear() const { return std::exp(value_); }

    bool is_zero() const { return value_ == -std::numeric_limits<double>::infinity(); }
    bool is_infinite() const { return value_ == std::numeric_limits<double>::infinity(); }
    bool is_finite() const { return std::isfinite(value_); }

    friend LogWeight operator*(LogWeight a, LogWeight b) {
        // 0 * inf has no meaningful value here; treat it as zero mass.
        if (a.is_zero() || b.is_zero()) return zero();
        return LogWeight(a.value_ + b.value_);
    }
    friend LogWeight operator/(LogWeight a, LogWeight b) {
        if (a.is_zero()) return zero();
        return LogWeight(a.value_ - b.value_);
    }
    friend LogWeight operator+(LogWeight a, LogWeight b) {
        const double hi = std::max(a.value_, b.value_);
        const double lo = std::min(a.value_, b.value_);
        if (lo == -std::numeric_limits<double>::infinity() || hi == std::numeric_limits<double>::infinity())
            return LogWeight(hi);
        return LogWeight(hi + std::log1p(std::exp(lo - hi)));
    }
    LogWeight &operator*=(LogWeight o) { return *this = *this * o; }
    LogWeight &operator+=(LogWeight o) { return *this = *this + o; }

    friend bool operator==(LogWeight, LogWeight) = default;
    friend auto operator<=>(LogWeight a, LogWeight b) { return a.value_ <=> b.value_; }

private:
    double value_ = -std::numeric_limits<double>::infinity();
};

// Streaming log-sum-exp. The partial sum is kept relative to the running
// maximum so terms spanning hundreds of orders of magnitude neither overflow
// nor lose the dominant contributions.
class LogSumAccumulator {
public:
    void add(double log_term) {
        if (std::isnan(log_term)) {
            nan_ = true;
            return;
        }
        if (log_term == -std::numeric_limits<double>::infinity()) return;
        if (log_term == std::numeric_limits<double>::infinity()) {
            inf_ = true;
            return;
        }
        if (count_ == 0) {
            max_ = log_term;
            scaled_ = 1.0;
        } else if (log_term <= max_) {
            scaled_ += std::exp(log_term - max_);
        } else {
            scaled_ = scaled_ * std::exp(max_ - log_term) + 1.0;
            max_ = log_term;
        }
        ++count_;
    }
    void add(LogWeight w) { add(w.value()); }

    LogWeight result() const {
        if (nan_) return LogWeight(std::numeric_limits<double>::quiet_NaN());
        if (inf_) return LogWeight::infinity();
        if (count_ == 0) return LogWeight::zero();
        return LogWeight(max_ + std::log(scaled_));
    }

private:
    double max_ = -std::numeric_limits<double>::infinity();
    double scaled_ = 0.0;
    long long count_ = 0;
    bool inf_ = false;
    bool nan_ = false;
};

inline LogWeight log_sum_exp(std::span<const double> log_terms) {
    LogSumAccumulator acc;
    for (double t : log_terms) acc.add(t);
    return acc.result();
}

}  // namespace qlab
