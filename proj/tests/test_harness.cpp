#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "kdv/harness.hpp"

using namespace kdv;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("kdv_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kEnergyZero = R"(
scenario:string = EnergyDecay
nx:int = 201
m:int = 50
data.initial:profile = zero
tol.energy_growth:real = 1e-10
)";

const char* kSmallControl = R"(
scenario:string = RightDirichletControl
x_length:real = 20
nx:int = 201
m:int = 100
gram.pairs:int = 3
tol.target_miss:real = 1e-2
tol.cg_iterations:real = 200
tol.duality_residual:real = 1e-8
tol.runtime_seconds:real = 300
tol.gram_symmetry:real = 1e-8
tol.gram_psd:real = 1e-8
)";

}  // namespace

TEST(Config, ParsesEveryType) {
  const auto c = parse_config(R"(
    # comment line
    a:int = 3
    b:real = 2.5e-1   # trailing comment
    c:bool = true
    d:string = hello
    e:list = [1, 2.5, -3]
    f:profile = gaussian(center=2, width=0.5, amplitude=3)
    g:profile = bump(a=0.1, b=0.9, amplitude=2)
    h:profile = zero
  )");
  EXPECT_EQ(c.integer("a"), 3);
  EXPECT_EQ(c.real("b"), 0.25);
  EXPECT_EQ(c.real("a"), 3.0);
  EXPECT_TRUE(c.boolean("c"));
  EXPECT_EQ(c.string("d"), "hello");
  EXPECT_EQ(c.list("e"), (std::vector<double>{1.0, 2.5, -3.0}));
  EXPECT_NEAR(c.profile("f")(2.0), 3.0, 1e-15);
  EXPECT_NEAR(c.profile("g")(0.5), 2.0, 1e-15);
  EXPECT_EQ(c.profile("h")(1.0), 0.0);
}

TEST(Config, ErrorsCarryFieldPath) {
  auto field_of = [](const std::string& text) {
    try {
      (void)parse_config(text);
    } catch (const UsageError& e) {
      return e.field();
    }
    return std::string("no error");
  };
  EXPECT_EQ(field_of("alpha:int = 1.5"), "alpha");
  EXPECT_EQ(field_of("beta:real = abc"), "beta");
  EXPECT_EQ(field_of("gamma:widget = 1"), "gamma");
  EXPECT_EQ(field_of("delta:profile = spline(a=1)"), "delta");
  EXPECT_EQ(field_of("x:int = 1\nx:int = 2"), "x");
  EXPECT_EQ(field_of("novalue"), "config:1");
  EXPECT_EQ(field_of("k = 1"), "config:1");
  const auto c = parse_config("n:int = -2\ns:string = x");
  EXPECT_THROW(c.count("n"), UsageError);
  EXPECT_THROW(c.real("s"), UsageError);
  EXPECT_THROW(c.real("missing"), UsageError);
}

TEST(Config, HashIgnoresPresentation) {
  const auto a = parse_config("b:real = 0.01\na:int = 3\noutput_dir:string = /tmp/x");
  const auto b = parse_config("  a:int=3   # three\n\nb:real = 1e-2\noutput_dir:string = /elsewhere");
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 16u);
  const auto c = parse_config("a:int = 3\nb:real = 0.010000000000000002");
  EXPECT_NE(a.hash(), c.hash());
  const auto d = parse_config("a:int = 4\nb:real = 0.01");
  EXPECT_NE(a.hash(), d.hash());
}

TEST(Output, SeventeenDigitsAndHeader) {
  EXPECT_EQ(fmt17(0.1), "0.10000000000000001");
  const auto dir = scratch("csv");
  write_csv(dir / "t.csv", {"x", "y"}, {{0.1, 1.0}, {2.0, 1.0 / 3.0}});
  std::istringstream in(read_text(dir / "t.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "x,y");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, line.find(',')), "0.10000000000000001");
  std::getline(in, line);
  EXPECT_NE(line.find("0.33333333333333331"), std::string::npos);
}

TEST(Output, IterationCsvColumns) {
  const auto dir = scratch("iter");
  GammaIterationTrace t;
  t.records.push_back({0, 0.0, 0.5, 1.0, 2.0});
  t.records.push_back({1, 0.25, 0.1, 1.0, 2.0});
  write_iteration_csv(dir / "it.csv", t);
  std::istringstream in(read_text(dir / "it.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "iteration,diff_norm,target_miss,control_norm");
}

TEST(Resolve, ToleranceRules) {
  EXPECT_THROW(resolve_config(parse_config("scenario:string = EnergyDecay")), UsageError);
  const auto ok = resolve_config(parse_config(kEnergyZero));
  EXPECT_EQ(ok.integer("seed"), 0);
  EXPECT_EQ(ok.integer("nx"), 201);
  EXPECT_EQ(ok.real("x_length"), 40.0);

  auto field_of = [](const std::string& text, const RunOptions& o = {}) {
    try {
      (void)resolve_config(parse_config(text), o);
    } catch (const UsageError& e) {
      return e.field();
    }
    return std::string("no error");
  };
  EXPECT_EQ(field_of("scenario:string = EnergyDecay"), "tol.energy_growth");
  EXPECT_EQ(field_of(std::string(kEnergyZero) + "bogus:int = 1"), "bogus");
  EXPECT_EQ(field_of(std::string(kEnergyZero) + "tol.extra:real = 1"), "tol.extra");
  RunOptions neg;
  neg.tolerance_overrides["energy_growth"] = -1.0;
  EXPECT_EQ(field_of(kEnergyZero, neg), "tol.energy_growth");
  EXPECT_EQ(field_of("scenario:string = Nope"), "scenario");
}

TEST(Resolve, OverridesApplyBeforeHashing) {
  RunOptions o;
  o.seed = 17;
  const auto a = resolve_config(parse_config(kEnergyZero), o);
  EXPECT_EQ(a.integer("seed"), 17);
  EXPECT_NE(a.hash(), resolve_config(parse_config(kEnergyZero)).hash());
}

TEST(Experiment, EnergyZeroDataPassesAndWritesReport) {
  const auto dir = scratch("energy");
  RunOptions o;
  o.output_dir = dir.string();
  const auto r = run_experiment(parse_config(kEnergyZero), o);
  EXPECT_TRUE(r.pass()) << r.error;
  EXPECT_EQ(r.scenario, "EnergyDecay");
  ASSERT_TRUE(fs::exists(dir / "report.json"));
  const auto j = nlohmann::json::parse(read_text(dir / "report.json"));
  EXPECT_EQ(j.at("scenario"), "EnergyDecay");
  EXPECT_EQ(j.at("provenance").at("config_hash"), r.config_hash);
  EXPECT_TRUE(j.contains("assertions"));

  const auto again = run_experiment(parse_config(kEnergyZero));
  ASSERT_EQ(again.assertions.size(), r.assertions.size());
  for (std::size_t i = 0; i < r.assertions.size(); ++i) EXPECT_EQ(again.assertions[i].measured, r.assertions[i].measured);
  EXPECT_EQ(again.config_hash, r.config_hash);
}

TEST(Experiment, SmallControlProblem) {
  const auto r = run_experiment(parse_config(kSmallControl));
  ASSERT_TRUE(r.error.empty()) << r.error;
  const auto* miss = r.find("target_miss");
  ASSERT_NE(miss, nullptr);
  EXPECT_LE(miss->measured, 1e-2);
  EXPECT_TRUE(r.pass());
}

TEST(Suite, EmptyMissingAndIsolation) {
  const auto dir = scratch("suite");
  write_text(dir / "empty.suite", "# nothing here\n\n");
  const auto empty = run_suite((dir / "empty.suite").string());
  EXPECT_TRUE(empty.entries.empty());
  EXPECT_TRUE(empty.pass());
  EXPECT_THROW(run_suite((dir / "absent.suite").string()), UsageError);

  write_text(dir / "good.cfg", kEnergyZero);
  write_text(dir / "bad.cfg", "scenario:string = EnergyDecay\nnonsense:int = 1\n");
  write_text(dir / "mixed.suite", "bad.cfg\ngood.cfg\nmissing.cfg\n");
  RunOptions o;
  o.output_dir = (dir / "out").string();
  const auto s = run_suite((dir / "mixed.suite").string(), o);
  ASSERT_EQ(s.entries.size(), 3u);
  EXPECT_FALSE(s.entries[0].pass);
  EXPECT_FALSE(s.entries[0].error.empty());
  EXPECT_TRUE(s.entries[1].pass);
  EXPECT_FALSE(s.entries[2].pass);
  EXPECT_FALSE(s.pass());
  EXPECT_TRUE(fs::exists(dir / "out" / "summary.json"));
  EXPECT_TRUE(fs::exists(dir / "out" / "summary.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "good" / "report.json"));
}

#ifdef KDV_CLI_PATH
TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  write_text(dir / "energy.cfg", kEnergyZero);
  write_text(dir / "adjoint.cfg",
             "scenario:string = AdjointConservation\ntol.adjoint_right:real = 1e-3\ntol.adjoint_left:real = 1e-3\n");
  write_text(dir / "bad.cfg", "scenario:string = EnergyDecay\n");
  const std::string cli = KDV_CLI_PATH;
  const std::string quiet = " > " + (dir / "log.txt").string() + " 2>&1";
  auto status = [&](const std::string& args) {
    const int raw = std::system((cli + " " + args + quiet).c_str());
    return WEXITSTATUS(raw);
  };
  EXPECT_EQ(status("run " + (dir / "energy.cfg").string() + " --out " + (dir / "o").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "o" / "report.json"));
  EXPECT_EQ(status("run " + (dir / "adjoint.cfg").string() + " --tol adjoint_right=1e-12"), 1);
  EXPECT_EQ(status("run " + (dir / "bad.cfg").string()), 2);
  EXPECT_EQ(status("run " + (dir / "nope.cfg").string()), 2);
  EXPECT_EQ(status("frobnicate"), 2);
  EXPECT_EQ(status("run " + (dir / "energy.cfg").string() + " --tol energy_growth"), 2);
  EXPECT_EQ(status("run " + (dir / "energy.cfg").string() + " --seed 5"), 0);
}
#endif
