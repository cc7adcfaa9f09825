// Runs the shipped acceptance suite and prints one PASS/FAIL line per acceptance criterion.
// usage: acceptance <suite file> [output dir]

#include <cstdio>
#include <string>
#include <vector>

#include "kdv/harness.hpp"

namespace {

struct Criterion {
  const char* label;
  std::vector<std::string> scenarios;  // scenarios whose reports feed the criterion
  std::vector<std::string> prefixes;   // assertion-name prefixes; empty means every assertion
};

bool selected(const Criterion& c, const std::string& name) {
  if (c.prefixes.empty()) return true;
  for (const auto& p : c.prefixes)
    if (name.rfind(p, 0) == 0) return true;
  return false;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <suite file> [output dir]\n");
    return 2;
  }
  kdv::RunOptions opts;
  if (argc > 2) opts.output_dir = argv[2];

  kdv::SuiteSummary summary;
  try {
    summary = kdv::run_suite(argv[1], opts);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  }

  const std::vector<std::string> control = {"RightDirichletControl", "LeftNeumannControl", "LeftDirichletControl"};
  const std::vector<Criterion> criteria = {
      {"Airy kernel closed forms at zero and unit integral", {"OperationalIdentities"}, {"airy_"}},
      {"Fractional integral semigroup", {"OperationalIdentities"}, {"semigroup_"}},
      {"Free group plane-wave phase and L2 conservation", {"OperationalIdentities"}, {"group_"}},
      {"Driftless forcing trace identity and its order", {"OperationalIdentities"}, {"l0_trace_"}},
      {"Representation formula against the solver", {"OperationalIdentities"}, {"representation_"}},
      {"Contour and W_b representations against solver and each other", {"CrossRepresentation"}, {}},
      {"Adjoint energy conservation on both half-lines", {"AdjointConservation"}, {}},
      {"Mass identities under time refinement", {"MassIdentities"}, {"mass_"}},
      {"Linear HUM reachability and duality", control, {"target_miss", "cg_iterations", "duality_", "runtime_"}},
      {"Gram operator symmetry and positivity", control, {"gram_"}},
      {"Nonlinear fixed-point control", {"NonlinearControl"}, {}},
      {"Energy decay and H1 bound, homogeneous nonlinear problem", {"EnergyDecay"}, {}},
      {"Observability ratio stability and critical length", {"ObservabilitySampling", "CriticalLengthProbe"}, {}},
      {"Manufactured-solution convergence order", {"MassIdentities"}, {"mms_"}},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    std::size_t checks = 0;
    std::string why;
    bool found = false;
    for (const auto& e : summary.entries) {
      bool relevant = false;
      for (const auto& s : c.scenarios) relevant = relevant || e.scenario == s;
      if (!relevant) continue;
      found = true;
      if (!e.error.empty()) why += " [" + e.scenario + " error: " + e.error + "]";
      for (const auto& a : e.report.assertions) {
        if (!selected(c, a.name)) continue;
        ++checks;
        if (!a.pass) why += " [" + e.scenario + "." + a.name + " = " + kdv::fmt17(a.measured) + "]";
      }
    }
    if (!found || checks == 0) why += " [no assertions ran]";
    const bool pass = why.empty();
    if (!pass) ++failed;
    std::printf("%s  %s (%zu checks)%s\n", pass ? "PASS" : "FAIL", c.label, checks, why.c_str());
  }
  for (const auto& e : summary.entries)
    if (e.scenario.empty()) std::printf("note: %s not run: %s\n", e.config_path.c_str(), e.error.c_str());
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
