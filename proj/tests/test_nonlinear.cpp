#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "kdv/nonlinear.hpp"

using namespace kdv;

namespace {

const TimeGrid kTime(1.0, 100);

// Small Gaussian initial state; the target is the nonlinear final state under a bump control.
ControlProblem small_problem(double amplitude) {
  const Grid1D g(0.0, 20.0, 201);
  const Field phi = Field::sample(g, [&](double x) { return amplitude * std::exp(-(x - 3.0) * (x - 3.0)); });
  BoundaryConfig bc;
  bc.dirichlet = TimeSeries::sample(kTime, [&](double t) { return 2.0 * amplitude * smooth_bump(t, 0.1, 0.8); });
  const auto u = solve_forward_nonlinear(phi, bc, kTime);
  return ControlProblem::make(BoundaryRole::RightDirichlet, phi, u.slice(kTime.m), kTime);
}

}  // namespace

TEST(Gamma, ZeroCoefficientReproducesLinearControl) {
  const auto p = small_problem(0.1);
  GammaOptions opts;
  opts.nonlinear_coeff = 0.0;
  opts.hum_tol = 1e-6;
  const auto out = gamma_fixed_point(p, 10.0, 1e-6, 5, opts);
  const auto lin = hum_solve(p, 1e-6, opts.hum_max_iter);
  ASSERT_EQ(out.result.control.size(), lin.control.size());
  for (std::size_t k = 0; k < lin.control.size(); ++k) EXPECT_EQ(out.result.control[k], lin.control[k]);
  EXPECT_TRUE(out.converged);
}

TEST(Gamma, SmallDataConverges) {
  const auto p = small_problem(0.02);
  const auto out = gamma_fixed_point(p, 10.0, 1e-3, 20);
  EXPECT_TRUE(out.converged) << out.status;
  EXPECT_EQ(out.status, "converged");
  EXPECT_LE(out.result.target_miss, 1e-2);
  ASSERT_EQ(out.trace.records.size(), static_cast<std::size_t>(out.outer_iterations + 1));
  EXPECT_EQ(out.trace.records.front().diff_norm, 0.0);
  for (std::size_t i = 0; i < out.trace.records.size(); ++i) {
    const auto& r = out.trace.records[i];
    EXPECT_EQ(r.iteration, static_cast<int>(i));
    EXPECT_TRUE(std::isfinite(r.target_miss));
    EXPECT_GE(r.control_norm, 0.0);
    EXPECT_GT(r.solution_norm, 0.0);
  }
  EXPECT_LE(out.trace.records.back().diff_norm, 1e-3);
}

TEST(Gamma, GuardRejectsLargeData) {
  const auto p = small_problem(1.0);
  EXPECT_THROW(gamma_fixed_point(p, 0.1, 1e-3, 5), PreconditionError);
  EXPECT_THROW(gamma_fixed_point(p, 10.0, 0.0, 5), InvalidArgument);
  EXPECT_THROW(gamma_fixed_point(p, 10.0, 1e-3, 0), InvalidArgument);
}

TEST(Delta, ArgumentChecks) {
  const auto p = small_problem(0.1);
  EXPECT_THROW(delta_calibration(p, {}), InvalidArgument);
  EXPECT_THROW(delta_calibration(p, {2.0, 1.0}), InvalidArgument);
  EXPECT_THROW(delta_calibration(small_problem(0.0), {1.0}), InvalidArgument);
}

TEST(Delta, SmallGridCalibration) {
  const auto p = small_problem(0.02);
  const auto cal = delta_calibration(p, {0.5, 1.0}, 1e-2, 10, 0);
  EXPECT_EQ(cal.scale, 1.0) << cal.diagnostic;
  EXPECT_NEAR(cal.delta, l2_norm(p.phi) + l2_norm(p.phi_T), 1e-14);
  EXPECT_TRUE(cal.monotone);
  EXPECT_EQ(cal.diagnostic, "every scale converged; delta is a lower bound");
}
