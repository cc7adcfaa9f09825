// kdvctl run <config> | suite <file> [--seed N] [--out DIR] [--tol key=value ...]
// Exit codes: 0 pass, 1 assertion failure, 2 usage error.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kdv/harness.hpp"

namespace {

void print_report(const kdv::ExperimentReport& r) {
  std::printf("%s  [config %s, code %s]\n", r.scenario.c_str(), r.config_hash.c_str(), r.code_version.c_str());
  for (const auto& a : r.assertions) {
    std::printf("  %-4s %-40s %-24s %s", a.pass ? "PASS" : "FAIL", a.name.c_str(), kdv::fmt17(a.measured).c_str(),
                kdv::comparator_symbol(a.comparator));
    if (!a.tolerance_key.empty()) std::printf(" %s (%s)", kdv::fmt17(a.tolerance).c_str(), a.tolerance_key.c_str());
    std::printf("\n");
  }
  if (!r.error.empty()) std::printf("  ERROR %s\n", r.error.c_str());
}

kdv::RunOptions make_options(const std::optional<std::int64_t>& seed, const std::string& out,
                             const std::vector<std::string>& tols) {
  kdv::RunOptions o;
  o.seed = seed;
  if (!out.empty()) o.output_dir = out;
  for (const auto& kv : tols) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw kdv::UsageError("--tol", "expected key=value, got '" + kv + "'");
    const std::string key = kdv::detail::trim(kv.substr(0, eq));
    o.tolerance_overrides[key.rfind("tol.", 0) == 0 ? key.substr(4) : key] =
        kdv::detail::parse_real(kv.substr(eq + 1), "--tol " + key);
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boundary control experiments for the linear and nonlinear KdV equation"};
  app.require_subcommand(1);
  std::optional<std::int64_t> seed;
  std::string out;
  std::vector<std::string> tols;
  app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--out", out, "Output directory");
  app.add_option("--tol", tols, "Tolerance override key=value (repeatable)")->take_all();

  std::string config_path, suite_path;
  auto* run = app.add_subcommand("run", "Run one experiment config");
  run->add_option("config", config_path, "Config file")->required();
  auto* suite = app.add_subcommand("suite", "Run every config listed in a suite file");
  suite->add_option("file", suite_path, "Suite file")->required();
  for (auto* sub : {run, suite}) {
    sub->add_option("--seed", seed, "Override the config seed");
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--tol", tols, "Tolerance override key=value (repeatable)")->take_all();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const auto opts = make_options(seed, out, tols);
    if (*run) {
      const auto report = kdv::run_experiment_file(config_path, opts);
      print_report(report);
      return report.pass() ? 0 : 1;
    }
    const auto summary = kdv::run_suite(suite_path, opts);
    for (const auto& e : summary.entries) {
      if (e.scenario.empty())
        std::printf("FAIL %-28s %s\n", e.config_path.c_str(), e.error.c_str());
      else
        print_report(e.report);
    }
    std::printf("\n%-48s %-24s %-6s %s\n", "config", "scenario", "result", "assertions");
    for (const auto& e : summary.entries)
      std::printf("%-48s %-24s %-6s %zu/%zu  %.1fs\n", e.config_path.c_str(), e.scenario.c_str(), e.pass ? "PASS" : "FAIL",
                  e.passed, e.total, e.runtime);
    return summary.pass() ? 0 : 1;
  } catch (const kdv::UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
