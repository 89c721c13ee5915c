#pragma once

// Text serialization shared by the sweep tables, audit rows and CLI reports.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "qlab/laplace_audit.hpp"

namespace qlab {

enum class OutputFormat { Csv, Json };

inline std::optional<OutputFormat> parse_format(std::string_view s) {
    if (s == "csv") return OutputFormat::Csv;
    if (s == "json") return OutputFormat::Json;
    return std::nullopt;
}

// Shortest representation that parses back to the same double.
inline std::string format_number(double x) { return fmt::format("{}", x); }

inline std::optional<double> parse_double(std::string_view s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const char *end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return v;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
    std::int64_t v = 0;
    const char *end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return v;
}

// Non-finite numbers become the strings "inf", "-inf" and "nan".
inline nlohmann::ordered_json json_number(double x) {
    if (std::isfinite(x)) return x;
    return format_number(x);
}

inline nlohmann::ordered_json params_json(const ModelParams &p) {
    nlohmann::ordered_json j;
    j["m"] = p.m;
    j["ell"] = p.ell;
    j["kappa"] = p.kappa;
    j["sigma"] = p.sigma;
    j["q"] = p.q;
    j["theta"] = p.theta;
    return j;
}

inline constexpr std::string_view kAuditCsvHeader =
    "m,ell,kappa,sigma,q,theta,degenerate,exact_finite,within_hypotheses,ln_exact,ln_k,rho,m_f_rho,"
    "main_term,residual,residual_with_k,remainder_scale,residual_ratio,stirling_max,g_sup,g_bound,"
    "log_s_m,log_s_m_delta,log_t_m_delta,truncation_share,delta,i_minus,i_plus";

inline std::string to_csv(const AuditReport &r) {
    const auto n = format_number;
    const ModelParams &p = r.params;
    return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}", p.m,
                       p.ell, p.kappa, n(p.sigma), n(p.q), p.theta, int(r.degenerate), int(r.exact_finite),
                       int(r.within_hypotheses), n(r.ln_exact), n(r.ln_k), n(r.rho), n(r.m_f_rho),
                       n(r.main_term), n(r.residual), n(r.residual_with_k), n(r.remainder_scale),
                       n(r.residual_ratio), n(r.stirling_max), n(r.g_sup), n(r.g_bound), n(r.log_s_m),
                       n(r.log_s_m_delta), n(r.log_t_m_delta), n(r.truncation_share), n(r.delta), r.i_minus,
                       r.i_plus);
}

inline nlohmann::ordered_json to_json(const AuditReport &r) {
    nlohmann::ordered_json j;
    j["params"] = params_json(r.params);
    j["degenerate"] = r.degenerate;
    j["exact_finite"] = r.exact_finite;
    j["within_hypotheses"] = r.within_hypotheses;
    j["ln_exact"] = json_number(r.ln_exact);
    j["ln_k"] = json_number(r.ln_k);
    j["rho"] = json_number(r.rho);
    j["m_f_rho"] = json_number(r.m_f_rho);
    j["main_term"] = json_number(r.main_term);
    j["residual"] = json_number(r.residual);
    j["residual_with_k"] = json_number(r.residual_with_k);
    j["remainder_scale"] = json_number(r.remainder_scale);
    j["residual_ratio"] = json_number(r.residual_ratio);
    j["stirling_max"] = json_number(r.stirling_max);
    j["g_sup"] = json_number(r.g_sup);
    j["g_bound"] = json_number(r.g_bound);
    j["log_s_m"] = json_number(r.log_s_m);
    j["log_s_m_delta"] = json_number(r.log_s_m_delta);
    j["log_t_m_delta"] = json_number(r.log_t_m_delta);
    j["truncation_share"] = json_number(r.truncation_share);
    j["window"] = {{"i_minus", r.i_minus}, {"i_plus", r.i_plus}, {"delta", json_number(r.delta)}};
    return j;
}

}  // namespace qlab
