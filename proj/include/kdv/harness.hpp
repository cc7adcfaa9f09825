#pragma once

// run_experiment: config -> report (+ files). run_suite: a list of configs -> summary.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdv/config.hpp"
#include "kdv/report.hpp"
#include "kdv/scenarios.hpp"

namespace kdv {

struct RunOptions {
  std::optional<std::int64_t> seed;
  std::optional<std::string> output_dir;
  std::map<std::string, double> tolerance_overrides;  // keys without the `tol.` prefix
};

/// Applies overrides and scenario defaults, then checks required and unknown fields.
inline Config resolve_config(Config cfg, const RunOptions& opts = {}) {
  if (opts.seed) cfg.set("seed", *opts.seed);
  if (opts.output_dir) cfg.set("output_dir", *opts.output_dir);
  for (const auto& [k, v] : opts.tolerance_overrides) cfg.set("tol." + k, v);

  const ScenarioSpec& spec = find_scenario(cfg.string("scenario"));
  Config defaults = parse_config(spec.defaults, "defaults(" + spec.name + ")");
  defaults.set("seed", std::int64_t{0});
  cfg.merge_defaults(defaults);

  std::set<std::string> known = {"scenario", "seed", "output_dir"};
  for (const auto& [k, v] : defaults.entries()) known.insert(k);
  for (const auto& t : spec.tolerances) {
    const std::string key = "tol." + t;
    known.insert(key);
    if (!cfg.has(key)) throw UsageError(key, "missing required tolerance for " + spec.name);
  }
  for (const auto& [k, v] : cfg.entries()) {
    if (!known.count(k)) throw UsageError(k, "unknown field for scenario " + spec.name);
    if (k.rfind("tol.", 0) == 0 && !(cfg.real(k) > 0.0)) throw UsageError(k, "tolerances must be positive");
  }
  (void)cfg.integer("seed");
  if (cfg.has("output_dir")) (void)cfg.string("output_dir");
  return cfg;
}

/// Runs one scenario. Usage errors propagate; any other failure is recorded in the report,
/// which is still written.
inline ExperimentReport run_experiment(const Config& raw, const RunOptions& opts = {}) {
  const Config cfg = resolve_config(raw, opts);
  const ScenarioSpec& spec = find_scenario(cfg.string("scenario"));
  ExperimentReport report;
  report.scenario = spec.name;
  report.config_hash = cfg.hash();
  report.seed = cfg.integer("seed");
  const std::filesystem::path out = cfg.has("output_dir") ? std::filesystem::path(cfg.string("output_dir")) : "";

  AssertionSink sink(report, cfg);
  ScenarioContext ctx{cfg, report, sink, out};
  const auto start = std::chrono::steady_clock::now();
  try {
    spec.body(ctx);
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    report.error = e.what();
  }
  report.runtimes["total"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!out.empty()) write_json(out / "report.json", to_json(report));
  return report;
}

inline ExperimentReport run_experiment_file(const std::string& path, const RunOptions& opts = {}) {
  return run_experiment(load_config(path), opts);
}

struct SuiteEntry {
  std::string config_path;
  std::string scenario;
  bool pass = false;
  std::size_t passed = 0;
  std::size_t total = 0;
  double runtime = 0.0;
  std::string error;
  ExperimentReport report;
};

struct SuiteSummary {
  std::vector<SuiteEntry> entries;
  bool pass() const {
    for (const auto& e : entries)
      if (!e.pass) return false;
    return true;
  }
};

/// Config paths listed in a suite file, one per line, relative to the suite file's directory.
inline std::vector<std::string> read_suite(const std::string& suite_file) {
  std::ifstream in(suite_file);
  if (!in) throw UsageError(suite_file, "cannot open suite file");
  const auto base = std::filesystem::path(suite_file).parent_path();
  std::vector<std::string> paths;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::filesystem::path p(line);
    paths.push_back((p.is_absolute() ? p : base / p).string());
  }
  return paths;
}

inline void write_summary(const std::filesystem::path& dir, const SuiteSummary& s) {
  nlohmann::json j = nlohmann::json::array();
  std::vector<std::vector<std::string>> rows;
  for (const auto& e : s.entries) {
    j.push_back({{"config", e.config_path},
                 {"scenario", e.scenario},
                 {"pass", e.pass},
                 {"passed", e.passed},
                 {"total", e.total},
                 {"runtime", e.runtime},
                 {"error", e.error}});
  }
  write_json(dir / "summary.json", {{"pass", s.pass()}, {"entries", j}});
  auto out = detail::open_output(dir / "summary.csv");
  out << "config,scenario,pass,passed,total,runtime\n";
  for (const auto& e : s.entries)
    out << e.config_path << ',' << e.scenario << ',' << (e.pass ? 1 : 0) << ',' << e.passed << ',' << e.total << ','
        << fmt17(e.runtime) << '\n';
}

/// Runs every config of the suite in order; a failing or malformed config does not stop the others.
/// With opts.output_dir set, config `name.cfg` writes to `<output_dir>/name`.
inline SuiteSummary run_suite(const std::string& suite_file, const RunOptions& opts = {}) {
  const auto paths = read_suite(suite_file);
  SuiteSummary summary;
  for (const auto& path : paths) {
    SuiteEntry e;
    e.config_path = path;
    RunOptions o = opts;
    if (opts.output_dir) o.output_dir = (std::filesystem::path(*opts.output_dir) / std::filesystem::path(path).stem()).string();
    const auto start = std::chrono::steady_clock::now();
    try {
      e.report = run_experiment_file(path, o);
      e.scenario = e.report.scenario;
      e.pass = e.report.pass();
      e.error = e.report.error;
      e.total = e.report.assertions.size();
      for (const auto& a : e.report.assertions) e.passed += a.pass ? 1 : 0;
    } catch (const std::exception& ex) {
      e.error = std::string("usage error: ") + ex.what();
    }
    e.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    summary.entries.push_back(std::move(e));
  }
  if (opts.output_dir) write_summary(*opts.output_dir, summary);
  return summary;
}

}  // namespace kdv
