#pragma once

#include "gradnewton/diagnostics.hpp"
#include "gradnewton/solver.hpp"

#include "json.hpp"

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace gradnewton {

namespace detail {

/// Shortest-safe round-trip formatting for doubles.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline double parse_double(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw std::runtime_error("trace CSV line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

inline nlohmann::json finite_or_null(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

}  // namespace detail

inline constexpr const char* kTraceCsvHeader = "k,grad_norm,lambda_sq,step,halvings,exit_condition,energy";

/// One row per iteration; the energy column is empty unless the trace was
/// audited against an oracle with energy.
inline void write_trace_csv(std::ostream& out, const std::vector<IterationRecord>& trace) {
  out << kTraceCsvHeader << '\n';
  for (const auto& r : trace) {
    out << r.k << ',' << detail::format_double(r.grad_norm) << ',' << detail::format_double(r.newton_decrement_sq)
        << ',' << detail::format_double(r.step) << ',' << r.halvings << ',' << to_string(r.exit_condition) << ',';
    if (r.energy) out << detail::format_double(*r.energy);
    out << '\n';
  }
}

inline std::vector<IterationRecord> parse_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTraceCsvHeader) throw std::runtime_error("trace CSV: missing header");
  std::vector<IterationRecord> trace;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    if (!line.empty() && line.back() == ',') cols.emplace_back();
    if (cols.size() != 7) throw std::runtime_error("trace CSV line " + std::to_string(lineno) + ": expected 7 columns");
    IterationRecord r;
    r.k = static_cast<std::size_t>(std::stoull(cols[0]));
    r.grad_norm = detail::parse_double(cols[1], lineno);
    r.newton_decrement_sq = detail::parse_double(cols[2], lineno);
    r.step = detail::parse_double(cols[3], lineno);
    r.halvings = std::stoi(cols[4]);
    const auto ec = parse_exit_condition(cols[5]);
    if (!ec) throw std::runtime_error("trace CSV line " + std::to_string(lineno) + ": unknown exit condition");
    r.exit_condition = *ec;
    if (!cols[6].empty()) r.energy = detail::parse_double(cols[6], lineno);
    trace.push_back(r);
  }
  return trace;
}

inline nlohmann::json to_json(const EvalCounters& c) {
  return {{"energy_evals", c.energy_evals}, {"gradient_evals", c.gradient_evals}, {"hessian_evals", c.hessian_evals}};
}

inline nlohmann::json to_json(const BoundEstimates& b) {
  return {{"m", b.m}, {"M", b.M}, {"L", b.L}};
}

/// Report fields: m, M, L, k0, C, violations[] plus the fit details.
inline nlohmann::json to_json(const ConvergenceReport& r, const BoundEstimates& b) {
  nlohmann::json j = to_json(b);
  j["k0"] = r.k0 ? nlohmann::json(*r.k0) : nlohmann::json(nullptr);
  j["C"] = r.C ? detail::finite_or_null(*r.C) : nlohmann::json(nullptr);
  j["exponent"] = r.exponent ? detail::finite_or_null(*r.exponent) : nlohmann::json(nullptr);
  j["quadratic_fit"] = r.quadratic_fit_sufficient ? "ok" : "insufficient data";
  j["linear_rate"] = r.linear_rate ? detail::finite_or_null(*r.linear_rate) : nlohmann::json(nullptr);
  j["damped_iterations"] = r.damped_iterations;
  j["eta_threshold"] = detail::finite_or_null(r.eta_threshold);
  j["violations"] = nlohmann::json::array();
  for (const auto& v : r.violations) j["violations"].push_back({{"k", v.k}, {"decrease", v.decrease}, {"bound", v.bound}});
  j["full_step_violations"] = r.full_step_violations;
  return j;
}

inline nlohmann::json summary_json(const SolveResult& result) {
  nlohmann::json j;
  j["status"] = std::string(to_string(result.status));
  j["iterations"] = result.trace.size();
  j["final_grad_norm"] = result.final_grad_norm;
  j["final_point"] = std::vector<double>(result.final_point.data(), result.final_point.data() + result.final_point.size());
  j["counters"] = to_json(result.counters);
  if (result.failed_iteration) j["failed_iteration"] = *result.failed_iteration;
  if (!result.message.empty()) j["message"] = result.message;
  return j;
}

}  // namespace gradnewton
