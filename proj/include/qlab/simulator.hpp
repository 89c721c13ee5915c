#pragma once

// Seeded Monte Carlo estimates of the persistence time tau_0 and the
// discovery time tau*, for the lumped chain and for the sequence-level
// Moran process. One time step is one replacement event.
//
// Replica r draws from its own engine seeded with (seed, r), so results
// depend only on (seed, n_runs, parameters) and never on thread count.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qlab/bd_chain.hpp"
#include "qlab/model_params.hpp"
#include "qlab/parallel.hpp"

namespace qlab {

inline constexpr std::uint64_t kDefaultStepCap = 1'000'000'000ULL;
inline constexpr std::int64_t kMaxFullModelSites = 100'000'000;

struct HittingSamples {
    std::vector<std::uint64_t> samples;  // uncensored hitting times, replica order
    std::uint64_t seed = 0;
    std::int64_t n_runs = 0;
    std::int64_t censored = 0;           // runs that reached the step cap
    std::string warning;
};

struct SimOptions {
    std::int64_t n_runs = 1000;
    std::uint64_t seed = 1;
    std::uint64_t step_cap = kDefaultStepCap;
    unsigned threads = thread_count();
};

using Engine = std::mt19937_64;

inline Engine replica_engine(std::uint64_t seed, std::uint64_t replica) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replica), static_cast<std::uint32_t>(replica >> 32),
                      0x71a6u};
    return Engine(seq);
}

namespace detail {

inline void check_options(const SimOptions &opt) {
    if (opt.n_runs < 1) throw DomainError("n_runs", "must be >= 1");
    if (opt.step_cap == 0) throw DomainError("step_cap", "must be >= 1");
}

inline HittingSamples collect(const std::vector<std::optional<std::uint64_t>> &runs, const SimOptions &opt) {
    HittingSamples out;
    out.seed = opt.seed;
    out.n_runs = opt.n_runs;
    for (const auto &r : runs) {
        if (r)
            out.samples.push_back(*r);
        else
            ++out.censored;
    }
    return out;
}

}  // namespace detail

// tau_0 for the lumped chain from N_0 = start. Self-loop runs are drawn in
// one go as a geometric holding time, which has the same law as stepping
// through them one at a time.
inline HittingSamples simulate_lumped(const BirthDeathSpec &spec, std::int64_t start, const SimOptions &opt) {
    detail::check_options(opt);
    const auto m = spec.m();
    if (start < 0 || start > m) throw DomainError("start", "must lie in [0, m]");
    if (start == 0) {
        HittingSamples out;
        out.samples.assign(static_cast<std::size_t>(opt.n_runs), 0);
        out.seed = opt.seed;
        out.n_runs = opt.n_runs;
        out.warning = "start = 0 is already absorbed; all samples are 0";
        return out;
    }

    std::vector<double> leave(static_cast<std::size_t>(m) + 1), up_share(static_cast<std::size_t>(m) + 1);
    for (std::int64_t k = 1; k <= m; ++k) {
        const double d = spec.delta(k);
        const double g = spec.gamma(k);
        leave[static_cast<std::size_t>(k)] = std::min(1.0, d + g);
        up_share[static_cast<std::size_t>(k)] = d + g > 0.0 ? d / (d + g) : 0.0;
    }

    std::vector<std::optional<std::uint64_t>> runs(static_cast<std::size_t>(opt.n_runs));
    parallel_for(opt.n_runs, opt.threads, [&](std::int64_t r) {
        Engine rng = replica_engine(opt.seed, static_cast<std::uint64_t>(r));
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::int64_t state = start;
        std::uint64_t t = 0;
        while (state > 0) {
            const double p = leave[static_cast<std::size_t>(state)];
            if (p <= 0.0) return;  // absorbing: censored
            std::uint64_t hold = 0;
            if (p < 1.0) hold = std::geometric_distribution<std::uint64_t>(p)(rng);
            if (hold >= opt.step_cap - t) return;
            t += hold + 1;
            state += unif(rng) < up_share[static_cast<std::size_t>(state)] ? 1 : -1;
            if (state > 0 && t >= opt.step_cap) return;
        }
        runs[static_cast<std::size_t>(r)] = t;
    });
    return detail::collect(runs, opt);
}

inline HittingSamples simulate_lumped(const ModelParams &params, std::int64_t start, const SimOptions &opt) {
    return simulate_lumped(transition_probs(params), start, opt);
}

enum class FullInit { OneMaster, NoMaster };

struct FullSimOptions : SimOptions {
    FullInit init = FullInit::OneMaster;
    // When set, the replaced individual is never the parent.
    bool exclude_parent = false;
    // Recount masters after every step and throw on a cache mismatch.
    bool verify_master_cache = false;
};

// Population of m genomes of length ell over {0, ..., kappa-1}. The master
// sequence is the all-zero genome. Masters and non-masters are kept in two
// index lists for O(1) sampling and updates.
class FullModelState {
public:
    FullModelState(std::int64_t m, std::int64_t ell, std::int64_t kappa)
        : m_(m), ell_(ell), kappa_(kappa),
          genomes_(static_cast<std::size_t>(m * ell), 0),
          is_master_(static_cast<std::size_t>(m), 1),
          list_pos_(static_cast<std::size_t>(m)) {
        masters_.reserve(static_cast<std::size_t>(m));
        others_.reserve(static_cast<std::size_t>(m));
        for (std::int64_t j = 0; j < m; ++j) {
            list_pos_[static_cast<std::size_t>(j)] = masters_.size();
            masters_.push_back(j);
        }
    }

    std::int64_t m() const { return m_; }
    std::int64_t ell() const { return ell_; }
    std::int64_t master_count() const { return static_cast<std::int64_t>(masters_.size()); }
    bool is_master(std::int64_t j) const { return is_master_[static_cast<std::size_t>(j)] != 0; }
    const std::vector<std::int64_t> &masters() const { return masters_; }
    const std::vector<std::int64_t> &others() const { return others_; }

    const std::uint8_t *genome(std::int64_t j) const { return genomes_.data() + j * ell_; }

    void assign(std::int64_t j, const std::uint8_t *src) {
        std::uint8_t *dst = genomes_.data() + j * ell_;
        bool master = true;
        for (std::int64_t s = 0; s < ell_; ++s) {
            dst[s] = src[s];
            master = master && src[s] == 0;
        }
        set_status(j, master);
    }

    std::int64_t recount_masters() const {
        std::int64_t n = 0;
        for (std::int64_t j = 0; j < m_; ++j) {
            const std::uint8_t *g = genome(j);
            bool master = true;
            for (std::int64_t s = 0; s < ell_; ++s) master = master && g[s] == 0;
            n += master ? 1 : 0;
        }
        return n;
    }

private:
    void set_status(std::int64_t j, bool master) {
        const auto uj = static_cast<std::size_t>(j);
        if ((is_master_[uj] != 0) == master) return;
        auto &from = master ? others_ : masters_;
        auto &to = master ? masters_ : others_;
        const std::size_t pos = list_pos_[uj];
        const std::int64_t moved = from.back();
        from[pos] = moved;
        list_pos_[static_cast<std::size_t>(moved)] = pos;
        from.pop_back();
        list_pos_[uj] = to.size();
        to.push_back(j);
        is_master_[uj] = master ? 1 : 0;
    }

    std::int64_t m_, ell_, kappa_;
    std::vector<std::uint8_t> genomes_;
    std::vector<std::uint8_t> is_master_;
    std::vector<std::size_t> list_pos_;
    std::vector<std::int64_t> masters_;
    std::vector<std::int64_t> others_;
};

namespace detail {

inline void random_non_master(std::uint8_t *dst, std::int64_t ell, std::int64_t kappa, Engine &rng) {
    std::uniform_int_distribution<int> letter(0, static_cast<int>(kappa) - 1);
    bool master = true;
    while (master) {
        master = true;
        for (std::int64_t s = 0; s < ell; ++s) {
            dst[s] = static_cast<std::uint8_t>(letter(rng));
            master = master && dst[s] == 0;
        }
    }
}

}  // namespace detail

// Initial population: one master plus m-1 uniform non-masters (OneMaster),
// or m uniform non-masters (NoMaster).
inline FullModelState initial_population(const ModelParams &p, FullInit init, Engine &rng) {
    FullModelState state(p.m, p.ell, p.kappa);
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(p.ell));
    for (std::int64_t j = init == FullInit::OneMaster ? 1 : 0; j < p.m; ++j) {
        detail::random_non_master(buf.data(), p.ell, p.kappa, rng);
        state.assign(j, buf.data());
    }
    return state;
}

// One replacement event: pick a parent (masters weighted sigma), copy it with
// per-site mutation q to a uniformly chosen other letter, overwrite a
// uniformly chosen individual.
inline void moran_step(FullModelState &state, const ModelParams &p, bool exclude_parent, Engine &rng,
                       std::vector<std::uint8_t> &offspring) {
    const std::int64_t m = state.m();
    const std::int64_t k = state.master_count();
    const double master_weight = p.sigma * static_cast<double>(k);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::int64_t parent;
    if (unif(rng) * (master_weight + static_cast<double>(m - k)) < master_weight) {
        parent = state.masters()[std::uniform_int_distribution<std::size_t>(0, static_cast<std::size_t>(k - 1))(rng)];
    } else {
        parent = state.others()[std::uniform_int_distribution<std::size_t>(0, static_cast<std::size_t>(m - k - 1))(rng)];
    }

    const std::uint8_t *src = state.genome(parent);
    std::copy(src, src + p.ell, offspring.begin());
    if (p.q > 0.0) {
        std::geometric_distribution<std::int64_t> gap(p.q);
        std::uniform_int_distribution<int> shift(1, static_cast<int>(p.kappa) - 1);
        for (std::int64_t s = gap(rng); s < p.ell; s += 1 + gap(rng))
            offspring[static_cast<std::size_t>(s)] = static_cast<std::uint8_t>(
                (offspring[static_cast<std::size_t>(s)] + shift(rng)) % p.kappa);
    }

    std::int64_t target;
    if (exclude_parent && m > 1) {
        target = std::uniform_int_distribution<std::int64_t>(0, m - 2)(rng);
        if (target >= parent) ++target;
    } else {
        target = std::uniform_int_distribution<std::int64_t>(0, m - 1)(rng);
    }
    state.assign(target, offspring.data());
}

// tau_0 (OneMaster) or tau* (NoMaster) for the sequence-level process.
// theta in `params` is ignored.
inline HittingSamples simulate_full(ModelParams params, const FullSimOptions &opt) {
    params.theta = 1;
    params.validate();
    detail::check_options(opt);
    if (params.m * params.ell > kMaxFullModelSites) throw DomainError("m", "m * ell must be <= 10^8");
    if (params.kappa > 256) throw DomainError("kappa", "full model stores letters in one byte (kappa <= 256)");

    std::vector<std::optional<std::uint64_t>> runs(static_cast<std::size_t>(opt.n_runs));
    parallel_for(opt.n_runs, opt.threads, [&](std::int64_t r) {
        Engine rng = replica_engine(opt.seed, static_cast<std::uint64_t>(r));
        FullModelState state = initial_population(params, opt.init, rng);
        std::vector<std::uint8_t> offspring(static_cast<std::size_t>(params.ell));
        auto done = [&] {
            return opt.init == FullInit::OneMaster ? state.master_count() == 0 : state.master_count() >= 1;
        };
        std::uint64_t t = 0;
        while (!done()) {
            if (t >= opt.step_cap) return;
            moran_step(state, params, opt.exclude_parent, rng, offspring);
            ++t;
            if (opt.verify_master_cache && state.recount_masters() != state.master_count())
                throw std::logic_error("master count cache out of sync");
        }
        runs[static_cast<std::size_t>(r)] = t;
    });
    return detail::collect(runs, opt);
}

struct SampleSummary {
    std::int64_t n = 0;  // uncensored samples
    std::int64_t censored = 0;
    double censored_fraction = 0.0;
    double mean = 0.0;
    double variance = 0.0;  // unbiased
    double standard_error = 0.0;
    double ci95_lo = 0.0;
    double ci95_hi = 0.0;
};

inline SampleSummary summarize(const HittingSamples &hs) {
    const auto n = static_cast<std::int64_t>(hs.samples.size());
    if (n < 2) throw DomainError("samples", "need at least 2 uncensored samples");
    SampleSummary s;
    s.n = n;
    s.censored = hs.censored;
    s.censored_fraction = static_cast<double>(hs.censored) / static_cast<double>(n + hs.censored);
    double mean = 0.0, m2 = 0.0;
    std::int64_t count = 0;
    for (std::uint64_t v : hs.samples) {
        ++count;
        const double x = static_cast<double>(v);
        const double d = x - mean;
        mean += d / static_cast<double>(count);
        m2 += d * (x - mean);
    }
    s.mean = mean;
    s.variance = m2 / static_cast<double>(n - 1);
    s.standard_error = std::sqrt(s.variance / static_cast<double>(n));
    s.ci95_lo = s.mean - 1.959963984540054 * s.standard_error;
    s.ci95_hi = s.mean + 1.959963984540054 * s.standard_error;
    return s;
}

}  // namespace qlab
