#pragma once

// Experiment reports and the CSV / JSON / plot-data writers.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdv/config.hpp"
#include "kdv/core.hpp"
#include "kdv/errors.hpp"
#include "kdv/hum.hpp"
#include "kdv/nonlinear.hpp"

#ifndef KDV_CODE_VERSION
#define KDV_CODE_VERSION "0.1.0"
#endif

namespace kdv {

inline const char* code_version() { return KDV_CODE_VERSION; }

enum class Comparator { LessEqual, Less, GreaterEqual, Equal, Finite };

inline const char* comparator_symbol(Comparator c) {
  switch (c) {
    case Comparator::LessEqual: return "<=";
    case Comparator::Less: return "<";
    case Comparator::GreaterEqual: return ">=";
    case Comparator::Equal: return "==";
    case Comparator::Finite: return "finite";
  }
  return "?";
}

struct Assertion {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  Comparator comparator = Comparator::LessEqual;
  std::string tolerance_key;  // config key the tolerance came from; empty for exact or finiteness checks
  bool pass = false;
};

struct ExperimentReport {
  std::string scenario;
  std::string config_hash;
  std::string code_version = kdv::code_version();
  std::int64_t seed = 0;
  std::vector<Assertion> assertions;
  std::map<std::string, double> values;
  std::map<std::string, std::string> notes;
  std::map<std::string, double> runtimes;  // seconds; excluded from the hash
  std::string error;                       // set when the scenario threw

  bool pass() const {
    if (!error.empty()) return false;
    for (const auto& a : assertions)
      if (!a.pass) return false;
    return true;
  }
  const Assertion* find(const std::string& name) const {
    for (const auto& a : assertions)
      if (a.name == name) return &a;
    return nullptr;
  }
};

/// Collects assertions, reading every tolerance from the `tol.` namespace of the config.
class AssertionSink {
 public:
  AssertionSink(ExperimentReport& report, const Config& cfg) : report_(report), cfg_(cfg) {}

  void check(const std::string& name, double measured, Comparator cmp, const std::string& tol_key) {
    Assertion a;
    a.name = name;
    a.measured = measured;
    a.comparator = cmp;
    if (cmp != Comparator::Finite && cmp != Comparator::Equal) {
      a.tolerance_key = "tol." + tol_key;
      a.tolerance = cfg_.real(a.tolerance_key);
    }
    switch (cmp) {
      case Comparator::LessEqual: a.pass = measured <= a.tolerance; break;
      case Comparator::Less: a.pass = measured < a.tolerance; break;
      case Comparator::GreaterEqual: a.pass = measured >= a.tolerance; break;
      case Comparator::Equal: a.pass = measured == 0.0; break;
      case Comparator::Finite: a.pass = std::isfinite(measured); break;
    }
    for (const auto& prev : report_.assertions)
      if (prev.name == name) throw ConsistencyError("duplicate assertion '" + name + "'");
    report_.assertions.push_back(a);
  }
  void le(const std::string& name, double measured, const std::string& tol_key) {
    check(name, measured, Comparator::LessEqual, tol_key);
  }
  void lt(const std::string& name, double measured, const std::string& tol_key) {
    check(name, measured, Comparator::Less, tol_key);
  }
  void ge(const std::string& name, double measured, const std::string& tol_key) {
    check(name, measured, Comparator::GreaterEqual, tol_key);
  }
  /// Passes iff measured (a difference) is exactly zero.
  void exact(const std::string& name, double measured) { check(name, measured, Comparator::Equal, ""); }
  void finite(const std::string& name, double measured) { check(name, measured, Comparator::Finite, ""); }

 private:
  ExperimentReport& report_;
  const Config& cfg_;
};

// ---------------------------------------------------------------------------
// Number formatting and writers

inline std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  return fmt17(v);  // JSON has no inf / nan
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace detail

/// Writes a CSV with a header row; every value with 17 significant digits.
inline void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  auto out = detail::open_output(path);
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (const auto& r : rows) {
    if (r.size() != header.size()) throw InvalidArgument("write_csv: row width does not match the header");
    for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << fmt17(r[j]);
    out << '\n';
  }
}

/// Whitespace-separated columns with a `#` header line, readable by gnuplot.
inline void write_plot_data(const std::filesystem::path& path, const std::vector<std::string>& header,
                            const std::vector<std::vector<double>>& rows) {
  auto out = detail::open_output(path);
  out << '#';
  for (const auto& h : header) out << ' ' << h;
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < r.size(); ++j) out << (j ? " " : "") << fmt17(r[j]);
    out << '\n';
  }
}

/// Solution CSV (x, t, u), subsampled to at most max_x by max_t points.
inline void write_solution_csv(const std::filesystem::path& path, const SpaceTimeField& u, std::size_t max_x = 101,
                               std::size_t max_t = 51) {
  const std::size_t sx = std::max<std::size_t>(1, (u.grid.n + max_x - 2) / std::max<std::size_t>(1, max_x - 1));
  const std::size_t st = std::max<std::size_t>(1, (u.tgrid.size() + max_t - 2) / std::max<std::size_t>(1, max_t - 1));
  std::vector<std::vector<double>> rows;
  auto add_level = [&](std::size_t k) {
    for (std::size_t i = 0; i < u.grid.n; i += sx) rows.push_back({u.grid.node(i), u.tgrid.t(k), u.at(k, i)});
    if ((u.grid.n - 1) % sx) rows.push_back({u.grid.x_hi, u.tgrid.t(k), u.at(k, u.grid.n - 1)});
  };
  for (std::size_t k = 0; k <= u.tgrid.m; k += st) add_level(k);
  if (u.tgrid.m % st) add_level(u.tgrid.m);
  write_csv(path, {"x", "t", "u"}, rows);
}

inline void write_trace_csv(const std::filesystem::path& path, const TimeSeries& f) {
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < f.size(); ++k) rows.push_back({f.tgrid.t(k), f[k]});
  write_csv(path, {"t", "value"}, rows);
}

inline void write_iteration_csv(const std::filesystem::path& path, const GammaIterationTrace& trace) {
  std::vector<std::vector<double>> rows;
  for (const auto& r : trace.records)
    rows.push_back({static_cast<double>(r.iteration), r.diff_norm, r.target_miss, r.control_norm});
  write_csv(path, {"iteration", "diff_norm", "target_miss", "control_norm"}, rows);
}

inline nlohmann::json to_json(const ControlResult& r) {
  nlohmann::json j;
  j["status"] = r.status;
  j["converged"] = r.converged;
  j["target_miss"] = detail::json_number(r.target_miss);
  j["cg_iterations"] = r.cg_iterations;
  j["duality_residual"] = detail::json_number(r.duality_residual);
  j["functional_value"] = detail::json_number(r.functional_value);
  std::vector<double> t(r.control.size());
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = r.control.tgrid.t(k);
  j["control"] = {{"t", t}, {"value", r.control.values}};
  j["achieved_final"] = {{"x", r.achieved_final.grid.nodes()}, {"value", r.achieved_final.values}};
  j["residual_history"] = r.residual_history;
  return j;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  auto out = detail::open_output(path);
  out << j.dump(2) << '\n';
}

inline nlohmann::json to_json(const ExperimentReport& r) {
  nlohmann::json j;
  j["scenario"] = r.scenario;
  j["pass"] = r.pass();
  j["provenance"] = {{"config_hash", r.config_hash}, {"code_version", r.code_version}, {"seed", r.seed}};
  nlohmann::json asserts = nlohmann::json::array();
  for (const auto& a : r.assertions) {
    nlohmann::json e;
    e["name"] = a.name;
    e["pass"] = a.pass;
    e["measured"] = detail::json_number(a.measured);
    e["comparator"] = comparator_symbol(a.comparator);
    if (!a.tolerance_key.empty()) {
      e["tolerance"] = detail::json_number(a.tolerance);
      e["tolerance_key"] = a.tolerance_key;
    }
    asserts.push_back(e);
  }
  j["assertions"] = asserts;
  nlohmann::json values = nlohmann::json::object();
  for (const auto& [k, v] : r.values) values[k] = detail::json_number(v);
  j["values"] = values;
  j["notes"] = r.notes;
  nlohmann::json rt = nlohmann::json::object();
  for (const auto& [k, v] : r.runtimes) rt[k] = v;
  j["runtimes"] = rt;
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

}  // namespace kdv
