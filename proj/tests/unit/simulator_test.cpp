#include <gtest/gtest.h>

#include <cmath>

#include "qlab/bd_chain.hpp"
#include "qlab/simulator.hpp"

namespace {

using qlab::DomainError;
using qlab::FullInit;
using qlab::FullSimOptions;
using qlab::HittingSamples;
using qlab::ModelParams;
using qlab::SimOptions;

ModelParams make(std::int64_t m, std::int64_t ell, std::int64_t kappa, double sigma, double q, std::int64_t theta) {
    ModelParams p;
    p.m = m;
    p.ell = ell;
    p.kappa = kappa;
    p.sigma = sigma;
    p.q = q;
    p.theta = theta;
    return p;
}

SimOptions opts(std::int64_t n, std::uint64_t seed, unsigned threads = 1) {
    SimOptions o;
    o.n_runs = n;
    o.seed = seed;
    o.threads = threads;
    return o;
}

double exact(const ModelParams &p) { return qlab::expected_extinction_time(p).linear(); }

TEST(SimulateLumped, SingleIndividualMatchesGeometricMean) {
    const auto p = make(1, 1, 2, 2.0, 0.25, 1);
    const auto hs = qlab::simulate_lumped(p, 1, opts(100'000, 5));
    const auto s = qlab::summarize(hs);
    EXPECT_EQ(s.censored, 0);
    EXPECT_NEAR(s.mean, 4.0, 3.0 * s.standard_error);
}

TEST(SimulateLumped, TwoIndividualsMatchExactValue) {
    const auto p = make(2, 1, 2, 2.0, 0.25, 1);
    const auto hs = qlab::simulate_lumped(p, 1, opts(100'000, 6));
    const auto s = qlab::summarize(hs);
    EXPECT_NEAR(s.mean, 10.4, 3.0 * s.standard_error);
}

TEST(SimulateLumped, SamplesPlusCensoredIsRunCount) {
    const auto p = make(20, 5, 2, 2.0, 0.0, 1);
    auto o = opts(500, 7);
    o.step_cap = 100'000;
    const auto hs = qlab::simulate_lumped(p, 1, o);
    EXPECT_GT(hs.censored, 0);
    EXPECT_EQ(static_cast<std::int64_t>(hs.samples.size()) + hs.censored, hs.n_runs);
    EXPECT_EQ(hs.seed, 7u);
}

TEST(SimulateLumped, StepCapCensorsLongRuns) {
    const auto p = make(30, 5, 2, 3.0, 0.01, 1);
    auto o = opts(200, 8);
    o.step_cap = 50;
    const auto hs = qlab::simulate_lumped(p, 1, o);
    for (auto t : hs.samples) EXPECT_LE(t, 50u);
    EXPECT_GT(hs.censored, 0);
}

TEST(SimulateLumped, StartAtZeroWarns) {
    const auto hs = qlab::simulate_lumped(make(5, 2, 2, 2.0, 0.1, 1), 0, opts(10, 1));
    EXPECT_FALSE(hs.warning.empty());
    ASSERT_EQ(hs.samples.size(), 10u);
    for (auto t : hs.samples) EXPECT_EQ(t, 0u);
}

TEST(SimulateLumped, RejectsBadOptions) {
    const auto p = make(5, 2, 2, 2.0, 0.1, 1);
    auto o = opts(10, 1);
    o.step_cap = 0;
    EXPECT_THROW(qlab::simulate_lumped(p, 1, o), DomainError);
    EXPECT_THROW(qlab::simulate_lumped(p, 1, opts(0, 1)), DomainError);
    EXPECT_THROW(qlab::simulate_lumped(p, 6, opts(10, 1)), DomainError);
    EXPECT_THROW(qlab::simulate_lumped(p, -1, opts(10, 1)), DomainError);
}

TEST(SimulateLumped, IndependentOfThreadCount) {
    const auto p = make(10, 3, 2, 2.0, 0.1, 1);
    const auto a = qlab::simulate_lumped(p, 1, opts(2000, 42, 1));
    const auto b = qlab::simulate_lumped(p, 1, opts(2000, 42, 4));
    EXPECT_EQ(a.samples, b.samples);
    EXPECT_EQ(a.censored, b.censored);
    const auto c = qlab::simulate_lumped(p, 1, opts(2000, 43, 1));
    EXPECT_NE(a.samples, c.samples);
}

TEST(SimulateLumped, MatchesExactOnSmallGrid) {
    int hits = 0, total = 0;
    for (std::int64_t m : {3, 8})
        for (double q : {0.05, 0.2})
            for (std::int64_t theta : {1, 3}) {
                const auto p = make(m, 3, 2, 2.0, q, theta);
                const auto s = qlab::summarize(qlab::simulate_lumped(p, 1, opts(4000, 100 + total)));
                ++total;
                if (std::abs(s.mean - exact(p)) <= 3.0 * s.standard_error) ++hits;
            }
    EXPECT_GE(hits, total - 1);
}

TEST(SimulateFull, SandwichedByLumpedBounds) {
    const auto p = make(10, 3, 2, 3.0, 0.05, 1);
    FullSimOptions o;
    o.n_runs = 2000;
    o.seed = 9;
    o.threads = 1;
    const auto s = qlab::summarize(qlab::simulate_full(p, o));
    auto lower = p;
    lower.theta = 3;
    EXPECT_EQ(s.censored, 0);
    EXPECT_GE(s.mean + 3.0 * s.standard_error, exact(lower));
    EXPECT_LE(s.mean - 3.0 * s.standard_error, exact(p));
}

TEST(SimulateFull, WithoutMutationMatchesLumpedChain) {
    const auto p = make(10, 4, 2, 2.0, 0.0, 1);
    FullSimOptions o;
    o.n_runs = 3000;
    o.seed = 10;
    o.threads = 1;
    o.step_cap = 20'000;
    const auto full = qlab::simulate_full(p, o);
    const auto lumped = qlab::simulate_lumped(p, 1, o);
    const auto sf = qlab::summarize(full);
    const auto sl = qlab::summarize(lumped);
    EXPECT_NEAR(sf.mean, sl.mean, 4.0 * std::hypot(sf.standard_error, sl.standard_error));
    // Censoring is fixation of the master; compare the two binomial fractions.
    const double pf = sf.censored_fraction, pl = sl.censored_fraction;
    const double se = std::sqrt(pf * (1 - pf) / o.n_runs + pl * (1 - pl) / o.n_runs);
    EXPECT_NEAR(pf, pl, 4.0 * se);
    EXPECT_GT(pf, 0.3);
}

TEST(SimulateFull, DiscoveryTimeScalesWithAlphabet) {
    const auto p = make(5, 2, 2, 2.0, 0.2, 1);
    FullSimOptions o;
    o.n_runs = 4000;
    o.seed = 11;
    o.threads = 1;
    o.init = FullInit::NoMaster;
    const auto s = qlab::summarize(qlab::simulate_full(p, o));
    const double rate = std::log(s.mean) / 2.0;
    EXPECT_GE(rate, 0.5 * std::log(2.0));
    EXPECT_LE(rate, 2.0 * std::log(2.0));
}

TEST(SimulateFull, MasterCacheStaysInSync) {
    for (bool exclude : {false, true}) {
        FullSimOptions o;
        o.n_runs = 50;
        o.seed = 12;
        o.threads = 1;
        o.verify_master_cache = true;
        o.exclude_parent = exclude;
        EXPECT_NO_THROW(qlab::simulate_full(make(12, 3, 3, 2.5, 0.1, 1), o));
    }
}

TEST(SimulateFull, ExcludingParentLengthensPersistence) {
    const auto p = make(10, 3, 2, 3.0, 0.05, 1);
    FullSimOptions o;
    o.n_runs = 2000;
    o.seed = 13;
    o.threads = 1;
    const auto a = qlab::summarize(qlab::simulate_full(p, o));
    o.exclude_parent = true;
    const auto b = qlab::summarize(qlab::simulate_full(p, o));
    // A master can no longer be overwritten by its own mutated offspring, so
    // tau_0 gets longer.
    EXPECT_GT(b.mean - a.mean, 3.0 * std::hypot(a.standard_error, b.standard_error));
    EXPECT_LT(b.mean, 2.0 * a.mean);
}

TEST(SimulateFull, IndependentOfThreadCount) {
    const auto p = make(8, 3, 2, 2.0, 0.1, 1);
    FullSimOptions o;
    o.n_runs = 300;
    o.seed = 14;
    o.threads = 1;
    const auto a = qlab::simulate_full(p, o);
    o.threads = 3;
    const auto b = qlab::simulate_full(p, o);
    EXPECT_EQ(a.samples, b.samples);
}

TEST(SimulateFull, InitialPopulationShape) {
    auto rng = qlab::replica_engine(1, 0);
    const auto p = make(20, 6, 4, 2.0, 0.1, 1);
    const auto one = qlab::initial_population(p, FullInit::OneMaster, rng);
    EXPECT_EQ(one.master_count(), 1);
    EXPECT_EQ(one.recount_masters(), 1);
    const auto none = qlab::initial_population(p, FullInit::NoMaster, rng);
    EXPECT_EQ(none.master_count(), 0);
    for (std::int64_t j = 0; j < p.m; ++j)
        for (std::int64_t s = 0; s < p.ell; ++s) EXPECT_LT(none.genome(j)[s], 4);
}

TEST(SimulateFull, RejectsInfeasibleSizes) {
    FullSimOptions o;
    o.n_runs = 1;
    EXPECT_THROW(qlab::simulate_full(make(100'000, 10'000, 2, 2.0, 0.01, 1), o), DomainError);
    EXPECT_THROW(qlab::simulate_full(make(10, 3, 300, 2.0, 0.01, 1), o), DomainError);
}

TEST(Summarize, ConstantSamples) {
    HittingSamples hs;
    hs.samples = {5, 5, 5, 5};
    hs.n_runs = 4;
    const auto s = qlab::summarize(hs);
    EXPECT_EQ(s.mean, 5.0);
    EXPECT_EQ(s.variance, 0.0);
    EXPECT_EQ(s.ci95_lo, 5.0);
    EXPECT_EQ(s.ci95_hi, 5.0);
}

TEST(Summarize, TwoSamples) {
    HittingSamples hs;
    hs.samples = {2, 4};
    hs.censored = 2;
    hs.n_runs = 4;
    const auto s = qlab::summarize(hs);
    EXPECT_EQ(s.n, 2);
    EXPECT_DOUBLE_EQ(s.mean, 3.0);
    EXPECT_DOUBLE_EQ(s.variance, 2.0);
    EXPECT_DOUBLE_EQ(s.standard_error, 1.0);
    EXPECT_DOUBLE_EQ(s.censored_fraction, 0.5);
    EXPECT_NEAR(s.ci95_hi - s.ci95_lo, 2 * 1.959963984540054, 1e-12);
}

TEST(Summarize, RejectsTooFewSamples) {
    HittingSamples hs;
    hs.samples = {3};
    hs.censored = 5;
    EXPECT_THROW(qlab::summarize(hs), DomainError);
    hs.samples.clear();
    EXPECT_THROW(qlab::summarize(hs), DomainError);
}

}  // namespace
