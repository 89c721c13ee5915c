#pragma once

// Parameter sweeps: a flat key=value config expands into a Cartesian grid
// of model parameters, each point is evaluated independently, and rows are
// emitted in grid order as CSV or JSON lines.
//
// Config keys (repeat a key to build a list):
//   m, ell, kappa, sigma, q, theta   values, or linspace(a, b, n) / logspace(a, b, n)
//   alpha                            couples m = round(alpha * ell); excludes m
//   c                                couples q = ln sigma / ell - c / sqrt(ell m); excludes q
//   seed, simulate_runs, step_cap    lumped-chain Monte Carlo per point (off when runs = 0)
//   format (csv | json), output
// theta also accepts the word `ell`. logspace endpoints are values, not
// exponents. Lines starting with # are comments.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "qlab/asymptotics.hpp"
#include "qlab/bd_chain.hpp"
#include "qlab/model_params.hpp"
#include "qlab/parallel.hpp"
#include "qlab/records.hpp"
#include "qlab/simulator.hpp"

namespace qlab {

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::size_t line, std::string field, const std::string &what)
        : std::runtime_error(line == 0 ? field + ": " + what
                                       : "line " + std::to_string(line) + ": " + field + ": " + what),
          line_(line), field_(std::move(field)) {}

    std::size_t line() const noexcept { return line_; }
    const std::string &field() const noexcept { return field_; }

private:
    std::size_t line_;
    std::string field_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.push_back(trim(s.substr(start, i - start)));
            start = i + 1;
        }
    }
    return out;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

// Expands one config value: a number, or linspace(a, b, n) / logspace(a, b, n).
inline std::vector<double> parse_value_spec(std::string_view raw, std::size_t line, const std::string &key) {
    const std::string_view v = detail::trim(raw);
    if (v.empty()) return {};
    for (std::string_view fn : {std::string_view("linspace"), std::string_view("logspace")}) {
        if (v.substr(0, fn.size()) != fn) continue;
        const std::string_view rest = detail::trim(v.substr(fn.size()));
        if (rest.size() < 2 || rest.front() != '(' || rest.back() != ')')
            throw ConfigError(line, key, "expected " + std::string(fn) + "(a, b, n)");
        const auto args = detail::split(rest.substr(1, rest.size() - 2), ',');
        if (args.size() != 3) throw ConfigError(line, key, std::string(fn) + " takes three arguments");
        const auto a = parse_double(args[0]);
        const auto b = parse_double(args[1]);
        const auto n = parse_int(args[2]);
        if (!a || !b || !std::isfinite(*a) || !std::isfinite(*b))
            throw ConfigError(line, key, "range endpoints must be finite numbers");
        if (!n || *n < 0) throw ConfigError(line, key, "point count must be a non-negative integer");
        const bool log = fn == "logspace";
        if (log && !(*a > 0.0 && *b > 0.0)) throw ConfigError(line, key, "logspace endpoints must be > 0");
        std::vector<double> out;
        for (std::int64_t i = 0; i < *n; ++i) {
            const double t = *n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(*n - 1);
            if (i == *n - 1 && *n > 1)
                out.push_back(*b);
            else if (log)
                out.push_back(std::exp(std::log(*a) + t * (std::log(*b) - std::log(*a))));
            else
                out.push_back(*a + t * (*b - *a));
        }
        return out;
    }
    const auto x = parse_double(v);
    if (!x) throw ConfigError(line, key, "not a number: '" + std::string(v) + "'");
    return {*x};
}

struct SweepConfig {
    std::vector<std::int64_t> m, ell, kappa{2};
    std::vector<double> sigma, q, c, alpha;
    std::vector<std::int64_t> theta{1};  // 0 stands for theta = ell
    bool theta_given = false;
    bool kappa_given = false;
    std::uint64_t seed = 1;
    std::int64_t simulate_runs = 0;
    std::uint64_t step_cap = kDefaultStepCap;
    OutputFormat format = OutputFormat::Csv;
    std::string output;
};

inline constexpr std::int64_t kThetaEll = 0;

inline SweepConfig parse_sweep_config(std::istream &in) {
    SweepConfig cfg;
    std::map<std::string, std::size_t> seen;
    std::string raw;
    std::size_t line_no = 0;

    auto ints = [](const std::vector<double> &xs, std::size_t line, const std::string &key, bool spaced) {
        std::vector<std::int64_t> out;
        for (double x : xs) {
            const double r = std::round(x);
            if (!spaced && r != x) throw ConfigError(line, key, "must be an integer");
            if (!(std::abs(r) < 9e15)) throw ConfigError(line, key, "integer out of range");
            const auto v = static_cast<std::int64_t>(r);
            if (out.empty() || out.back() != v) out.push_back(v);
        }
        return out;
    };

    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = detail::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError(line_no, std::string(line), "expected key = value");
        const std::string key(detail::trim(line.substr(0, eq)));
        const std::string_view value = detail::trim(line.substr(eq + 1));
        const bool spaced = value.find('(') != std::string_view::npos;
        const bool repeat = seen.count(key) > 0;
        seen[key] = line_no;

        if (key == "m" || key == "ell") {
            auto &dst = key == "m" ? cfg.m : cfg.ell;
            auto vals = ints(parse_value_spec(value, line_no, key), line_no, key, spaced);
            dst.insert(dst.end(), vals.begin(), vals.end());
        } else if (key == "kappa") {
            if (!cfg.kappa_given) cfg.kappa.clear();
            cfg.kappa_given = true;
            auto vals = ints(parse_value_spec(value, line_no, key), line_no, key, spaced);
            cfg.kappa.insert(cfg.kappa.end(), vals.begin(), vals.end());
        } else if (key == "theta") {
            if (!cfg.theta_given) cfg.theta.clear();
            cfg.theta_given = true;
            if (value == "ell") {
                cfg.theta.push_back(kThetaEll);
            } else {
                auto vals = ints(parse_value_spec(value, line_no, key), line_no, key, spaced);
                for (auto t : vals)
                    if (t < 1) throw ConfigError(line_no, key, "must be >= 1 or 'ell'");
                cfg.theta.insert(cfg.theta.end(), vals.begin(), vals.end());
            }
        } else if (key == "sigma" || key == "q" || key == "c" || key == "alpha") {
            auto &dst = key == "sigma" ? cfg.sigma : key == "q" ? cfg.q : key == "c" ? cfg.c : cfg.alpha;
            auto vals = parse_value_spec(value, line_no, key);
            dst.insert(dst.end(), vals.begin(), vals.end());
        } else if (key == "seed" || key == "simulate_runs" || key == "step_cap") {
            if (repeat) throw ConfigError(line_no, key, "may only be given once");
            const auto v = parse_int(value);
            if (!v || *v < 0) throw ConfigError(line_no, key, "must be a non-negative integer");
            if (key == "seed") cfg.seed = static_cast<std::uint64_t>(*v);
            if (key == "simulate_runs") cfg.simulate_runs = *v;
            if (key == "step_cap") {
                if (*v == 0) throw ConfigError(line_no, key, "must be >= 1");
                cfg.step_cap = static_cast<std::uint64_t>(*v);
            }
        } else if (key == "format") {
            if (repeat) throw ConfigError(line_no, key, "may only be given once");
            const auto f = parse_format(value);
            if (!f) throw ConfigError(line_no, key, "expected csv or json");
            cfg.format = *f;
        } else if (key == "output") {
            if (repeat) throw ConfigError(line_no, key, "may only be given once");
            cfg.output = std::string(value);
        } else {
            throw ConfigError(line_no, key, "unknown key");
        }
    }

    if (seen.count("m") && seen.count("alpha"))
        throw ConfigError(seen["alpha"], "alpha", "m and alpha are mutually exclusive");
    if (seen.count("q") && seen.count("c")) throw ConfigError(seen["c"], "c", "q and c are mutually exclusive");
    for (const char *k : {"ell", "sigma"})
        if (!seen.count(k)) throw ConfigError(0, k, "required key missing");
    if (!seen.count("m") && !seen.count("alpha")) throw ConfigError(0, "m", "one of m or alpha is required");
    if (!seen.count("q") && !seen.count("c")) throw ConfigError(0, "q", "one of q or c is required");
    return cfg;
}

inline SweepConfig parse_sweep_config(const std::string &text) {
    std::istringstream in(text);
    return parse_sweep_config(in);
}

struct SweepPoint {
    std::int64_t index = 0;  // position in the full grid, skipped points included
    ModelParams params;
    std::optional<double> alpha;
    std::optional<double> c;
};

struct SkippedPoint {
    std::int64_t index = 0;
    std::string reason;
};

struct SweepGrid {
    std::vector<SweepPoint> points;
    std::vector<SkippedPoint> skipped;
};

// Grid order: ell, m (or alpha), kappa, sigma, q (or c), theta.
inline SweepGrid expand_grid(const SweepConfig &cfg) {
    SweepGrid grid;
    std::int64_t index = 0;
    const bool by_alpha = !cfg.alpha.empty() || cfg.m.empty();
    const bool by_c = !cfg.c.empty() || cfg.q.empty();
    const std::size_t n_m = by_alpha ? cfg.alpha.size() : cfg.m.size();
    const std::size_t n_q = by_c ? cfg.c.size() : cfg.q.size();

    for (std::int64_t ell : cfg.ell)
        for (std::size_t im = 0; im < n_m; ++im)
            for (std::int64_t kappa : cfg.kappa)
                for (double sigma : cfg.sigma)
                    for (std::size_t iq = 0; iq < n_q; ++iq)
                        for (std::int64_t theta : cfg.theta) {
                            SweepPoint pt;
                            pt.index = index++;
                            ModelParams &p = pt.params;
                            p.ell = ell;
                            p.kappa = kappa;
                            p.sigma = sigma;
                            p.theta = theta == kThetaEll ? ell : theta;
                            if (by_alpha) {
                                pt.alpha = cfg.alpha[im];
                                const double mm = std::round(cfg.alpha[im] * static_cast<double>(ell));
                                p.m = std::abs(mm) < 9e15 ? static_cast<std::int64_t>(mm) : 0;
                            } else {
                                p.m = cfg.m[im];
                            }
                            if (by_c) {
                                pt.c = cfg.c[iq];
                                const double l = static_cast<double>(ell);
                                p.q = std::log(sigma) / l - cfg.c[iq] / std::sqrt(l * static_cast<double>(p.m));
                            } else {
                                p.q = cfg.q[iq];
                            }
                            try {
                                if (pt.alpha && p.m < 1) throw DomainError("m", "alpha * ell rounds below 1");
                                p.validate();
                                grid.points.push_back(pt);
                            } catch (const DomainError &e) {
                                grid.skipped.push_back({pt.index, e.what()});
                            }
                        }
    return grid;
}

struct SweepRow {
    std::int64_t point = 0;
    std::int64_t m = 0, ell = 0, kappa = 0;
    double sigma = 0.0, q = 0.0;
    std::int64_t theta = 0;
    double alpha = std::numeric_limits<double>::quiet_NaN();
    double c = std::numeric_limits<double>::quiet_NaN();
    double log_e_tau0 = 0.0;
    double main_term = 0.0;
    double remainder_scale = 0.0;
    double discovery = 0.0;
    double rho_star = 0.0;
    double q_star = 0.0;
    double c_star = 0.0;
    std::string phase;
    std::int64_t sim_runs = 0;
    std::int64_t sim_censored = 0;
    double sim_mean = std::numeric_limits<double>::quiet_NaN();
    double sim_se = std::numeric_limits<double>::quiet_NaN();

    friend bool operator==(const SweepRow &, const SweepRow &) = default;
};

inline constexpr std::string_view kSweepCsvHeader =
    "point,m,ell,kappa,sigma,q,theta,alpha,c,log_e_tau0,main_term,remainder_scale,discovery,"
    "rho_star,q_star,c_star,phase,sim_runs,sim_censored,sim_mean,sim_se";

inline constexpr std::int64_t kSweepExactMaxStates = 10'000'000;

// Phase prediction: with q coupled through c, the c-versus-c* rule; otherwise
// the larger of the two leading terms m varphi((1-q)^ell) and ell ln kappa.
inline PhaseLabel predicted_phase(const SweepPoint &pt, double main_term, double discovery) {
    const ModelParams &p = pt.params;
    if (pt.c) {
        RegimeSpec spec;
        spec.a = std::log(p.sigma);
        spec.c = std::max(0.0, *pt.c);
        return classify_regime(spec, p.sigma, p.kappa).label;
    }
    if (std::abs(main_term - discovery) <= kTieTolerance * std::abs(discovery)) return PhaseLabel::Critical;
    return main_term > discovery ? PhaseLabel::Quasispecies : PhaseLabel::Neutral;
}

inline SweepRow evaluate_point(const SweepPoint &pt, const SweepConfig &cfg) {
    const ModelParams &p = pt.params;
    SweepRow r;
    r.point = pt.index;
    r.m = p.m;
    r.ell = p.ell;
    r.kappa = p.kappa;
    r.sigma = p.sigma;
    r.q = p.q;
    r.theta = p.theta;
    if (pt.alpha) r.alpha = *pt.alpha;
    if (pt.c) r.c = *pt.c;
    r.log_e_tau0 = p.m <= kSweepExactMaxStates ? expected_extinction_time(p).value()
                                               : std::numeric_limits<double>::quiet_NaN();
    const PersistenceEstimate est = persistence_log_estimate(p);
    r.main_term = est.main;
    r.remainder_scale = est.remainder_scale;
    r.discovery = discovery_log_estimate(p.ell, p.kappa);
    r.rho_star = rho_star(p).value;
    const ThresholdEstimate th = error_threshold(p.sigma, p.kappa, p.ell, p.m);
    r.q_star = th.q_star;
    r.c_star = th.c_star;
    r.phase = std::string(to_string(predicted_phase(pt, r.main_term, r.discovery)));
    if (cfg.simulate_runs > 0) {
        SimOptions opt;
        opt.n_runs = cfg.simulate_runs;
        opt.seed = detail::splitmix64(cfg.seed ^ detail::splitmix64(static_cast<std::uint64_t>(pt.index)));
        opt.step_cap = cfg.step_cap;
        opt.threads = 1;
        const HittingSamples hs = simulate_lumped(p, 1, opt);
        r.sim_runs = hs.n_runs;
        r.sim_censored = hs.censored;
        if (hs.samples.size() >= 2) {
            const SampleSummary s = summarize(hs);
            r.sim_mean = s.mean;
            r.sim_se = s.standard_error;
        }
    }
    return r;
}

inline std::vector<SweepRow> run_sweep(const SweepGrid &grid, const SweepConfig &cfg,
                                       unsigned threads = thread_count()) {
    std::vector<SweepRow> rows(grid.points.size());
    parallel_for(static_cast<std::int64_t>(grid.points.size()), threads,
                 [&](std::int64_t i) { rows[static_cast<std::size_t>(i)] = evaluate_point(grid.points[static_cast<std::size_t>(i)], cfg); });
    return rows;
}

inline std::string to_csv(const SweepRow &r) {
    const auto n = format_number;
    return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}", r.point, r.m, r.ell,
                       r.kappa, n(r.sigma), n(r.q), r.theta, n(r.alpha), n(r.c), n(r.log_e_tau0),
                       n(r.main_term), n(r.remainder_scale), n(r.discovery), n(r.rho_star), n(r.q_star),
                       n(r.c_star), r.phase, r.sim_runs, r.sim_censored, n(r.sim_mean), n(r.sim_se));
}

inline SweepRow sweep_row_from_csv(std::string_view line) {
    const auto f = detail::split(line, ',');
    if (f.size() != 21) throw ConfigError(0, "row", "expected 21 fields, got " + std::to_string(f.size()));
    auto i = [&](std::size_t k, const char *name) {
        const auto v = parse_int(f[k]);
        if (!v) throw ConfigError(0, name, "not an integer");
        return *v;
    };
    auto d = [&](std::size_t k, const char *name) {
        const auto v = parse_double(f[k]);
        if (!v) throw ConfigError(0, name, "not a number");
        return *v;
    };
    SweepRow r;
    r.point = i(0, "point");
    r.m = i(1, "m");
    r.ell = i(2, "ell");
    r.kappa = i(3, "kappa");
    r.sigma = d(4, "sigma");
    r.q = d(5, "q");
    r.theta = i(6, "theta");
    r.alpha = d(7, "alpha");
    r.c = d(8, "c");
    r.log_e_tau0 = d(9, "log_e_tau0");
    r.main_term = d(10, "main_term");
    r.remainder_scale = d(11, "remainder_scale");
    r.discovery = d(12, "discovery");
    r.rho_star = d(13, "rho_star");
    r.q_star = d(14, "q_star");
    r.c_star = d(15, "c_star");
    r.phase = std::string(f[16]);
    r.sim_runs = i(17, "sim_runs");
    r.sim_censored = i(18, "sim_censored");
    r.sim_mean = d(19, "sim_mean");
    r.sim_se = d(20, "sim_se");
    return r;
}

inline nlohmann::ordered_json to_json(const SweepRow &r) {
    nlohmann::ordered_json j;
    j["point"] = r.point;
    j["m"] = r.m;
    j["ell"] = r.ell;
    j["kappa"] = r.kappa;
    j["sigma"] = r.sigma;
    j["q"] = r.q;
    j["theta"] = r.theta;
    j["alpha"] = json_number(r.alpha);
    j["c"] = json_number(r.c);
    j["log_e_tau0"] = json_number(r.log_e_tau0);
    j["main_term"] = json_number(r.main_term);
    j["remainder_scale"] = json_number(r.remainder_scale);
    j["discovery"] = r.discovery;
    j["rho_star"] = r.rho_star;
    j["q_star"] = r.q_star;
    j["c_star"] = r.c_star;
    j["phase"] = r.phase;
    j["sim_runs"] = r.sim_runs;
    j["sim_censored"] = r.sim_censored;
    j["sim_mean"] = json_number(r.sim_mean);
    j["sim_se"] = json_number(r.sim_se);
    return j;
}

inline void write_rows(std::ostream &out, const std::vector<SweepRow> &rows, OutputFormat format) {
    if (format == OutputFormat::Csv) {
        out << kSweepCsvHeader << '\n';
        for (const auto &r : rows) out << to_csv(r) << '\n';
    } else {
        for (const auto &r : rows) out << to_json(r).dump() << '\n';
    }
}

}  // namespace qlab
