// qlab: command-line front end for the persistence-time and error-threshold
// computations. Exit codes: 0 success, 2 usage, 3 numeric domain, 4 no
// error threshold exists for the requested regime.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "qlab/qlab.hpp"

namespace {

using nlohmann::ordered_json;
using qlab::ModelParams;
using qlab::OutputFormat;

constexpr int kExitUsage = 2;
constexpr int kExitDomain = 3;
constexpr int kExitNoThreshold = 4;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OutputOptions {
    std::string format;
    std::string path;
};

void add_output_options(CLI::App *cmd, OutputOptions &out, const std::string &default_format) {
    out.format = default_format;
    cmd->add_option("--format", out.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--output,-o", out.path, "Write to this file instead of stdout");
}

void add_model_options(CLI::App *cmd, ModelParams &p, bool with_theta = true) {
    cmd->add_option("--m", p.m, "Population size")->required();
    cmd->add_option("--ell", p.ell, "Genome length")->required();
    cmd->add_option("--kappa", p.kappa, "Alphabet size")->capture_default_str();
    cmd->add_option("--sigma", p.sigma, "Fitness of the master sequence")->required();
    cmd->add_option("--q", p.q, "Per-site mutation probability")->required();
    if (with_theta) cmd->add_option("--theta", p.theta, "Mutations needed to become a master")->capture_default_str();
}

void write_text(const std::string &path, const std::string &text) {
    if (path.empty()) {
        std::cout << text << std::flush;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw UsageError("cannot open output file " + path);
    f << text;
}

std::string csv_cell(const ordered_json &v) {
    if (v.is_number_float()) return qlab::format_number(v.get<double>());
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
    return v.dump();
}

// Flattens nested objects one level and emits a header plus one row.
std::string object_to_csv(const ordered_json &obj) {
    std::string header, row;
    auto add = [&](const std::string &key, const ordered_json &v) {
        if (!header.empty()) {
            header += ',';
            row += ',';
        }
        header += key;
        row += csv_cell(v);
    };
    for (const auto &[key, v] : obj.items()) {
        if (v.is_object())
            for (const auto &[k2, v2] : v.items()) add(k2, v2);
        else if (!v.is_array())
            add(key, v);
    }
    return header + '\n' + row + '\n';
}

std::string render(const ordered_json &obj, const std::string &format) {
    return format == "json" ? obj.dump() + '\n' : object_to_csv(obj);
}

// exact ---------------------------------------------------------------------

int cmd_exact(const ModelParams &p, const OutputOptions &out) {
    const qlab::LogWeight e = qlab::expected_extinction_time(p);
    ordered_json j;
    j["params"] = qlab::params_json(p);
    j["log_e_tau0"] = qlab::json_number(e.value());
    if (e.value() < std::log(std::numeric_limits<double>::max())) j["e_tau0"] = e.linear();
    write_text(out.path, render(j, out.format));
    return 0;
}

// threshold -----------------------------------------------------------------

struct ThresholdArgs {
    double sigma = 2.0;
    std::int64_t kappa = 2;
    std::int64_t ell = 0;
    std::int64_t m = 0;
    double alpha = 0.0;
};

int cmd_threshold(const ThresholdArgs &a, bool has_ell, bool has_m, bool has_alpha, const OutputOptions &out) {
    if (has_alpha ? has_m : !(has_ell && has_m))
        throw UsageError("give either --ell and --m, or --alpha (optionally with --ell)");
    ordered_json j;
    j["sigma"] = a.sigma;
    j["kappa"] = a.kappa;
    if (!has_alpha) {
        const qlab::ThresholdEstimate t = qlab::error_threshold(a.sigma, a.kappa, a.ell, a.m);
        j["ell"] = a.ell;
        j["m"] = a.m;
        j["q_star"] = t.q_star;
        j["c_star"] = t.c_star;
        j["regime_valid"] = t.regime_valid;
        write_text(out.path, render(j, out.format));
        return 0;
    }
    if (!(a.sigma > 1.0)) throw qlab::DomainError("sigma", "must be > 1");
    if (a.kappa < 2) throw qlab::DomainError("kappa", "must be >= 2");
    if (!(a.alpha >= 0.0)) throw qlab::DomainError("alpha", "must be >= 0");
    j["alpha"] = qlab::json_number(a.alpha);
    const double limit = std::log(static_cast<double>(a.kappa)) / std::log(a.sigma);
    j["alpha_min"] = limit;
    if (!(a.alpha > limit)) {
        j["phase"] = "NoThreshold";
        write_text(out.path, render(j, out.format));
        return kExitNoThreshold;
    }
    const double x = qlab::threshold_alpha(a.sigma, a.kappa, a.alpha);
    j["phase"] = "Threshold";
    j["survival_target"] = x;
    if (has_ell) {
        j["ell"] = a.ell;
        j["q_star"] = qlab::q_from_survival(x, a.ell);
    }
    write_text(out.path, render(j, out.format));
    return 0;
}

// simulate ------------------------------------------------------------------

struct SimulateArgs {
    std::string model = "lumped";
    std::string init = "one-master";
    std::int64_t runs = 1000;
    std::uint64_t seed = 1;
    std::int64_t start = 1;
    std::uint64_t step_cap = qlab::kDefaultStepCap;
    bool exclude_parent = false;
    bool verify_cache = false;
    bool samples = false;
};

int cmd_simulate(const ModelParams &p, const SimulateArgs &a, const OutputOptions &out) {
    qlab::HittingSamples hs;
    ordered_json j;
    if (a.model == "lumped") {
        qlab::SimOptions opt;
        opt.n_runs = a.runs;
        opt.seed = a.seed;
        opt.step_cap = a.step_cap;
        hs = qlab::simulate_lumped(p, a.start, opt);
        j["params"] = qlab::params_json(p);
        j["model"] = "lumped";
        j["start"] = a.start;
    } else {
        qlab::FullSimOptions opt;
        opt.n_runs = a.runs;
        opt.seed = a.seed;
        opt.step_cap = a.step_cap;
        opt.init = a.init == "one-master" ? qlab::FullInit::OneMaster : qlab::FullInit::NoMaster;
        opt.exclude_parent = a.exclude_parent;
        opt.verify_master_cache = a.verify_cache;
        hs = qlab::simulate_full(p, opt);
        ordered_json pj = qlab::params_json(p);
        pj.erase("theta");
        j["params"] = pj;
        j["model"] = "full";
        j["init"] = a.init;
        j["exclude_parent"] = a.exclude_parent;
    }
    if (!hs.warning.empty()) std::cerr << "warning: " << hs.warning << '\n';
    j["seed"] = hs.seed;
    j["n_runs"] = hs.n_runs;
    j["step_cap"] = a.step_cap;
    j["censored"] = hs.censored;
    j["n"] = hs.samples.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    qlab::SampleSummary s;
    s.mean = s.variance = s.standard_error = s.ci95_lo = s.ci95_hi = nan;
    if (hs.samples.size() >= 2) s = qlab::summarize(hs);
    j["mean"] = qlab::json_number(s.mean);
    j["variance"] = qlab::json_number(s.variance);
    j["standard_error"] = qlab::json_number(s.standard_error);
    j["ci95_lo"] = qlab::json_number(s.ci95_lo);
    j["ci95_hi"] = qlab::json_number(s.ci95_hi);
    if (a.samples) j["samples"] = hs.samples;
    write_text(out.path, render(j, out.format));
    return 0;
}

// audit ---------------------------------------------------------------------

int cmd_audit(const ModelParams &p, const OutputOptions &out) {
    const qlab::AuditReport r = qlab::audit_report(p);
    if (out.format == "json")
        write_text(out.path, qlab::to_json(r).dump() + '\n');
    else
        write_text(out.path, std::string(qlab::kAuditCsvHeader) + '\n' + qlab::to_csv(r) + '\n');
    return 0;
}

// sweep / phase-diagram -----------------------------------------------------

int run_sweep(const qlab::SweepConfig &cfg) {
    const qlab::SweepGrid grid = qlab::expand_grid(cfg);
    for (const auto &s : grid.skipped) std::cerr << "skipped point " << s.index << ": " << s.reason << '\n';
    const auto rows = qlab::run_sweep(grid, cfg);
    std::ostringstream os;
    qlab::write_rows(os, rows, cfg.format);
    write_text(cfg.output, os.str());
    return 0;
}

int cmd_sweep(const std::string &config_path, const OutputOptions &out, bool format_given, bool output_given) {
    std::ifstream in(config_path);
    if (!in) throw UsageError("cannot open config file " + config_path);
    qlab::SweepConfig cfg = qlab::parse_sweep_config(in);
    if (format_given) cfg.format = *qlab::parse_format(out.format);
    if (output_given) cfg.output = out.path;
    return run_sweep(cfg);
}

struct PhaseArgs {
    double sigma = 2.0;
    std::int64_t kappa = 2;
    std::int64_t ell = 0;
    std::int64_t m = 0;
    double alpha = 0.0;
    std::string theta = "1";
    double c_min = 0.0;
    double c_max = 2.0;
    std::int64_t points = 21;
};

// Threshold-crossing preset: q = ln sigma / ell - c / sqrt(ell m) with c on
// an evenly spaced grid.
int cmd_phase_diagram(const PhaseArgs &a, bool has_m, bool has_alpha, const OutputOptions &out) {
    if (has_m == has_alpha) throw UsageError("give exactly one of --m or --alpha");
    std::ostringstream text;
    text << "ell = " << a.ell << '\n';
    if (has_m)
        text << "m = " << a.m << '\n';
    else
        text << "alpha = " << qlab::format_number(a.alpha) << '\n';
    text << "kappa = " << a.kappa << '\n';
    text << "sigma = " << qlab::format_number(a.sigma) << '\n';
    text << "theta = " << a.theta << '\n';
    text << "c = linspace(" << qlab::format_number(a.c_min) << ", " << qlab::format_number(a.c_max) << ", "
         << a.points << ")\n";
    qlab::SweepConfig cfg = qlab::parse_sweep_config(text.str());
    cfg.format = *qlab::parse_format(out.format);
    cfg.output = out.path;
    return run_sweep(cfg);
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Persistence time of master sequences and the error threshold of the Moran model"};
    app.require_subcommand(1);

    ModelParams params;
    OutputOptions exact_out, threshold_out, simulate_out, audit_out, sweep_out, phase_out;

    auto *exact = app.add_subcommand("exact", "Exact ln E(tau_0) from one master");
    add_model_options(exact, params);
    add_output_options(exact, exact_out, "json");

    ThresholdArgs th;
    auto *threshold = app.add_subcommand("threshold", "Error threshold q* (ell and m) or (1-q*)^ell target (alpha)");
    threshold->add_option("--sigma", th.sigma, "Fitness of the master sequence")->required();
    threshold->add_option("--kappa", th.kappa, "Alphabet size")->capture_default_str();
    auto *th_ell = threshold->add_option("--ell", th.ell, "Genome length");
    auto *th_m = threshold->add_option("--m", th.m, "Population size");
    auto *th_alpha = threshold->add_option("--alpha", th.alpha, "Limit of m / ell");
    add_output_options(threshold, threshold_out, "json");

    SimulateArgs sim;
    auto *simulate = app.add_subcommand("simulate", "Monte Carlo hitting times (lumped chain or full model)");
    add_model_options(simulate, params);
    simulate->add_option("--model", sim.model, "lumped or full")->check(CLI::IsMember({"lumped", "full"}))->capture_default_str();
    simulate->add_option("--runs", sim.runs, "Number of replicas")->capture_default_str();
    simulate->add_option("--seed", sim.seed, "Root seed")->capture_default_str();
    simulate->add_option("--start", sim.start, "Initial master count (lumped)")->capture_default_str();
    simulate->add_option("--init", sim.init, "one-master (tau_0) or no-master (tau*), full model")
        ->check(CLI::IsMember({"one-master", "no-master"}))
        ->capture_default_str();
    simulate->add_option("--step-cap", sim.step_cap, "Censor runs after this many steps")->capture_default_str();
    simulate->add_flag("--exclude-parent", sim.exclude_parent, "Never replace the parent (full model)");
    simulate->add_flag("--verify-cache", sim.verify_cache, "Recount masters after every step (full model)");
    simulate->add_flag("--samples", sim.samples, "Include the raw samples in JSON output");
    add_output_options(simulate, simulate_out, "json");

    auto *audit = app.add_subcommand("audit", "Decomposition of ln E(tau_0) into main term and remainders");
    add_model_options(audit, params);
    add_output_options(audit, audit_out, "csv");

    std::string config_path;
    auto *sweep = app.add_subcommand("sweep", "Evaluate a parameter grid described by a key=value file");
    sweep->add_option("config", config_path, "Config file")->required();
    add_output_options(sweep, sweep_out, "csv");
    auto *sweep_format = sweep->get_option("--format");
    auto *sweep_output = sweep->get_option("--output");

    PhaseArgs ph;
    auto *phase = app.add_subcommand("phase-diagram", "Sweep c across the threshold window at fixed ell and m");
    phase->add_option("--sigma", ph.sigma, "Fitness of the master sequence")->capture_default_str();
    phase->add_option("--kappa", ph.kappa, "Alphabet size")->capture_default_str();
    phase->add_option("--ell", ph.ell, "Genome length")->required();
    auto *ph_m = phase->add_option("--m", ph.m, "Population size");
    auto *ph_alpha = phase->add_option("--alpha", ph.alpha, "m = round(alpha * ell)");
    phase->add_option("--theta", ph.theta, "Integer or 'ell'")->capture_default_str();
    phase->add_option("--c-min", ph.c_min, "Smallest c")->capture_default_str();
    phase->add_option("--c-max", ph.c_max, "Largest c")->capture_default_str();
    phase->add_option("--points", ph.points, "Number of c values")->capture_default_str();
    add_output_options(phase, phase_out, "csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e) == 0 ? 0 : kExitUsage;
    }

    try {
        if (*exact) return cmd_exact(params, exact_out);
        if (*threshold) return cmd_threshold(th, th_ell->count() > 0, th_m->count() > 0, th_alpha->count() > 0, threshold_out);
        if (*simulate) return cmd_simulate(params, sim, simulate_out);
        if (*audit) return cmd_audit(params, audit_out);
        if (*sweep) return cmd_sweep(config_path, sweep_out, sweep_format->count() > 0, sweep_output->count() > 0);
        if (*phase) return cmd_phase_diagram(ph, ph_m->count() > 0, ph_alpha->count() > 0, phase_out);
    } catch (const qlab::DomainError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitDomain;
    } catch (const qlab::ConfigError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const UsageError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}
