#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "qlab/log_weight.hpp"

namespace {

using qlab::LogSumAccumulator;
using qlab::LogWeight;

constexpr double kInf = std::numeric_limits<double>::infinity();

TEST(LogWeight, ProductAndSumMatchDirectArithmetic) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(1e-6, 1e6);
    for (int i = 0; i < 2000; ++i) {
        const double a = u(rng), b = u(rng);
        const auto la = LogWeight::from_linear(a), lb = LogWeight::from_linear(b);
        EXPECT_NEAR((la * lb).linear() / (a * b), 1.0, 1e-12);
        EXPECT_NEAR((la + lb).linear() / (a + b), 1.0, 1e-12);
        EXPECT_NEAR((la / lb).linear() / (a / b), 1.0, 1e-12);
    }
}

TEST(LogWeight, ZeroAndInfinity) {
    const auto z = LogWeight::zero();
    const auto one = LogWeight::one();
    const auto inf = LogWeight::infinity();
    EXPECT_TRUE(z.is_zero());
    EXPECT_TRUE(inf.is_infinite());
    EXPECT_EQ((z + one).value(), 0.0);
    EXPECT_TRUE((z * one).is_zero());
    EXPECT_TRUE((z * inf).is_zero());
    EXPECT_TRUE((inf + one).is_infinite());
    EXPECT_TRUE((z + z).is_zero());
    EXPECT_TRUE((z / one).is_zero());
    EXPECT_EQ(z.linear(), 0.0);
}

TEST(LogWeight, SumDoesNotOverflow) {
    const LogWeight a(1000.0), b(1000.0);
    EXPECT_NEAR((a + b).value(), 1000.0 + std::log(2.0), 1e-12);
    const LogWeight tiny(-1000.0);
    EXPECT_DOUBLE_EQ((a + tiny).value(), 1000.0);
}

TEST(LogWeight, Ordering) {
    EXPECT_LT(LogWeight(1.0), LogWeight(2.0));
    EXPECT_LT(LogWeight::zero(), LogWeight::one());
    EXPECT_EQ(LogWeight(3.0), LogWeight(3.0));
}

TEST(LogSumAccumulator, EmptyIsZero) {
    LogSumAccumulator acc;
    EXPECT_TRUE(acc.result().is_zero());
}

TEST(LogSumAccumulator, MatchesDirectSum) {
    LogSumAccumulator acc;
    double direct = 0.0;
    for (int i = 1; i <= 100; ++i) {
        acc.add(std::log(static_cast<double>(i)));
        direct += i;
    }
    EXPECT_NEAR(acc.result().value(), std::log(direct), 1e-13);
}

TEST(LogSumAccumulator, HandlesWideDynamicRange) {
    LogSumAccumulator acc;
    acc.add(-800.0);
    acc.add(800.0);
    acc.add(700.0);
    EXPECT_NEAR(acc.result().value(), 800.0 + std::log1p(std::exp(-100.0)), 1e-12);
}

TEST(LogSumAccumulator, InfiniteTermGivesInfinity) {
    LogSumAccumulator acc;
    acc.add(1.0);
    acc.add(kInf);
    acc.add(2.0);
    EXPECT_TRUE(acc.result().is_infinite());
}

TEST(LogSumAccumulator, NegativeInfinityIsIgnored) {
    LogSumAccumulator acc;
    acc.add(-kInf);
    acc.add(0.0);
    EXPECT_EQ(acc.result().value(), 0.0);
}

TEST(LogSumAccumulator, OrderInsensitive) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-300.0, 300.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> xs(500);
        for (auto &x : xs) x = u(rng);
        const double unsorted = qlab::log_sum_exp(xs).value();
        std::sort(xs.begin(), xs.end());
        const double ascending = qlab::log_sum_exp(xs).value();
        std::reverse(xs.begin(), xs.end());
        const double descending = qlab::log_sum_exp(xs).value();
        EXPECT_NEAR(unsorted, ascending, 1e-12 * std::abs(ascending));
        EXPECT_NEAR(unsorted, descending, 1e-12 * std::abs(descending));
    }
}

}  // namespace
