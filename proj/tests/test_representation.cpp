#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "kdv/representation.hpp"
#include "kdv/solver.hpp"

using namespace kdv;

namespace {

// Relative L2 residual of u_t + kappa u_x + u_xxx over nodes with x in [a, b] and interior times,
// with centered differences independent of the representation code.
double pde_residual(const SpaceTimeField& u, double kappa, double a, double b) {
  const double h = u.grid.dx(), dt = u.tgrid.dt();
  double num = 0.0, den = 0.0;
  for (std::size_t k = 1; k + 1 < u.tgrid.size(); ++k)
    for (std::size_t i = 3; i + 3 < u.grid.n; ++i) {
      const double x = u.grid.node(i);
      if (x < a || x > b) continue;
      const double ut = (u.at(k + 1, i) - u.at(k - 1, i)) / (2 * dt);
      const double ux = (-u.at(k, i + 2) + 8 * u.at(k, i + 1) - 8 * u.at(k, i - 1) + u.at(k, i - 2)) / (12 * h);
      const double uxxx = (-u.at(k, i + 3) + 8 * u.at(k, i + 2) - 13 * u.at(k, i + 1) + 13 * u.at(k, i - 1) -
                           8 * u.at(k, i - 2) + u.at(k, i - 3)) /
                          (8 * h * h * h);
      const double r = ut + kappa * ux + uxxx;
      num += r * r;
      den += ut * ut + uxxx * uxxx;
    }
  return std::sqrt(num / den);
}

TimeSeries input(const TimeGrid& tg, double amplitude = 1.0) {
  return TimeSeries::sample(tg, [&](double t) { return amplitude * smooth_bump(t, 0.05, 0.7); });
}

}  // namespace

TEST(MatrixM, ClosedFormAtZeroAndHalf) {
  const auto m = matrix_M({0.0, 0.5});
  const double c = 1.0 / (2.0 * std::sqrt(3.0));
  EXPECT_NEAR(m(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(m(0, 1), -0.5, 1e-15);
  EXPECT_NEAR(m(1, 0), c, 1e-15);
  EXPECT_NEAR(m(1, 1), c, 1e-15);
}

TEST(MatrixM, SwappingLambdasSwapsRows) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ud(-0.95, 0.95);
  for (int trial = 0; trial < 5; ++trial) {
    const double a = ud(rng), b = ud(rng);
    const auto m = matrix_M({a, b});
    const auto s = matrix_M({b, a});
    for (int j = 0; j < 2; ++j) {
      EXPECT_NEAR(m(0, j), s(1, j), 1e-12);
      EXPECT_NEAR(m(1, j), s(0, j), 1e-12);
    }
  }
  EXPECT_THROW(LambdaPair({0.3, 0.3}).validate(), DomainError);
  EXPECT_THROW(LambdaPair({-1.0, 0.3}).validate(), DomainError);
}

TEST(Group, ConservesL2) {
  const Grid1D g(-40.0, 40.0, 1024);
  const Field pulse = Field::sample(g, [](double x) { return std::exp(-x * x) * (1.0 + 0.3 * std::sin(3.0 * x)); });
  const Field moved = group_propagate(pulse, 3.7);
  // plain sums: the fast components wrap around the period and reach the endpoints
  double s0 = 0.0, s1 = 0.0;
  for (std::size_t i = 0; i < g.n; ++i) {
    s0 += pulse[i] * pulse[i];
    s1 += moved[i] * moved[i];
  }
  EXPECT_NEAR(std::sqrt(s1 / s0), 1.0, 1e-12);
}

TEST(Group, PlaneWaveAtUnitFrequencyIsStationary) {
  // xi^3 - xi vanishes at xi = 1
  const std::size_t n = 512;
  const double period = 8.0 * std::numbers::pi;
  const Grid1D g(0.0, period * (n - 1) / n, n);
  const Field wave = Field::sample(g, [](double x) { return std::cos(x); });
  const Field moved = group_propagate_periodic(wave, 2.3);
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(moved[i], wave[i], 1e-12);
}

TEST(Group, RejectsEdgeSupport) {
  const Grid1D g(0.0, 10.0, 101);
  const Field edge = Field::sample(g, [](double x) { return std::exp(-x * x); });
  EXPECT_ANY_THROW(group_propagate(edge, 1.0));
}

TEST(Duhamel, ShortTimeAndZero) {
  const Grid1D g(-20.0, 20.0, 512);
  const TimeGrid tg(1e-3, 10);
  SpaceTimeField w(g, tg);
  for (std::size_t k = 0; k < tg.size(); ++k)
    for (std::size_t i = 0; i < g.n; ++i) w.at(k, i) = std::exp(-g.node(i) * g.node(i));
  const Field d = duhamel_inhomogeneous(w, 1e-3);
  for (std::size_t i = 0; i < g.n; ++i) EXPECT_NEAR(d[i], 1e-3 * w.at(0, i), 1e-5);
  EXPECT_EQ(max_abs(duhamel_inhomogeneous(w, 0.0).values), 0.0);
  EXPECT_THROW(duhamel_inhomogeneous(w, 1.0), InvalidArgument);
}

TEST(Forcing, DriftlessTraceRecoversInput) {
  std::vector<double> errs;
  for (std::size_t m : {256u, 512u}) {
    const TimeGrid tg(1.0, m);
    const auto f = TimeSeries::sample(tg, [](double t) { return smooth_bump(t, 0.1, 0.9); });
    const auto u = forcing_L0(f, Grid1D(0.0, 1.0, 11), ForcingKernelMode::Driftless);
    double e = 0.0;
    for (std::size_t k = 0; k <= m; ++k) e = std::max(e, std::abs(u.at(k, 0) - f[k]));
    errs.push_back(e);
  }
  EXPECT_LT(errs[1], 1e-4);
  EXPECT_GE(std::log2(errs[0] / errs[1]), 1.8);
}

TEST(Forcing, SolvesThePde) {
  const TimeGrid tg(1.0, 400);
  const auto f = input(tg);
  ForcingOptions direct;
  direct.path = ForcingPath::Direct;
  for (auto mode : {ForcingKernelMode::Driftless, ForcingKernelMode::DriftShifted}) {
    const double kappa = drift_of(mode);
    for (double lambda : {-0.5, 0.0, 0.5}) {
      const auto minus = forcing_L_lambda(f, lambda, ForcingSide::Minus, mode, Grid1D(-10.0, 0.0, 501), direct);
      EXPECT_LE(pde_residual(minus, kappa, -10.0, -0.25), 5e-3) << "minus " << lambda << " " << kappa;
      const auto plus = forcing_L_lambda(f, lambda, ForcingSide::Plus, mode, Grid1D(0.0, 8.0, 401), direct);
      EXPECT_LE(pde_residual(plus, kappa, 0.25, 8.0), 5e-3) << "plus " << lambda << " " << kappa;
    }
  }
  const auto l0 = forcing_L0(f, Grid1D(-8.0, 8.0, 801), ForcingKernelMode::Driftless);
  EXPECT_LE(pde_residual(l0, 0.0, -8.0, -0.25), 5e-3);
  EXPECT_LE(pde_residual(l0, 0.0, 0.25, 8.0), 5e-3);
}

TEST(Forcing, RegularizedPlusPathConverges) {
  // The regularized form needs a finer time grid than the direct one for the same residual.
  std::vector<double> res;
  for (std::size_t m : {400u, 800u}) {
    const TimeGrid tg(1.0, m);
    ForcingOptions reg;
    reg.path = ForcingPath::Regularized;
    const auto u = forcing_L_lambda(input(tg), 0.5, ForcingSide::Plus, ForcingKernelMode::DriftShifted,
                                    Grid1D(0.0, 8.0, 401), reg);
    res.push_back(pde_residual(u, 1.0, 0.25, 8.0));
  }
  EXPECT_LE(res[1], 5e-3);
  EXPECT_LT(res[1], 0.25 * res[0]);
}

TEST(Forcing, ArgumentChecks) {
  const TimeGrid tg(1.0, 50);
  const TimeSeries one(tg, std::vector<double>(tg.size(), 1.0));
  EXPECT_THROW(forcing_L0(one, Grid1D(0.0, 1.0, 11)), PreconditionError);
  EXPECT_THROW(forcing_L_lambda(input(tg), 1.0, ForcingSide::Plus, ForcingKernelMode::Driftless, Grid1D(0.0, 1.0, 11)),
               DomainError);
}

TEST(Solution, RightHalfLineTraces) {
  const Grid1D g(0.0, 8.0, 401);
  const TimeGrid tg(1.0, 400);
  const auto f = input(tg, 0.5);
  const auto res = linear_right_solution_detailed(Field(g), f, 0.0);
  for (std::size_t i = 0; i < g.n; ++i) EXPECT_LE(std::abs(res.u.at(0, i)), 1e-6);
  double err = 0.0;
  for (std::size_t k = 0; k < tg.size(); ++k) err = std::max(err, std::abs(res.u.at(k, 0) - f[k]));
  EXPECT_LE(err, 5e-3);
  EXPECT_LE(pde_residual(res.u, 1.0, 0.25, 8.0), 5e-3);
}

TEST(Solution, LeftHalfLineTraces) {
  const Grid1D g(-10.0, 0.0, 501);
  const TimeGrid tg(1.0, 400);
  const auto g1 = input(tg, 0.5);
  const auto g2 = TimeSeries::sample(tg, [](double t) { return 0.3 * smooth_bump(t, 0.1, 0.8); });
  const auto u = linear_left_solution(Field(g), g1, g2, LambdaPair{0.0, 0.5});
  const auto v = extract_traces(u, 0, Side::LeftHalfLine);
  const auto s = extract_traces(u, 1, Side::LeftHalfLine);
  double ev = 0.0, es = 0.0;
  for (std::size_t k = 0; k < tg.size(); ++k) {
    ev = std::max(ev, std::abs(v[k] - g1[k]));
    es = std::max(es, std::abs(s[k] - g2[k]));
  }
  EXPECT_LE(ev, 5e-3);
  EXPECT_LE(es, 2e-2);
  EXPECT_LE(pde_residual(u, 1.0, -10.0, -0.25), 5e-3);
}

TEST(Solution, IncompatibleDataRejected) {
  const Grid1D g(0.0, 8.0, 81);
  const TimeGrid tg(1.0, 50);
  const TimeSeries one(tg, std::vector<double>(tg.size(), 1.0));
  EXPECT_THROW(linear_right_solution(Field(g), one, 0.0), PreconditionError);
  EXPECT_THROW(linear_right_solution(Field(Grid1D(1.0, 8.0, 81)), input(tg), 0.0), InvalidArgument);
}

TEST(Operational, ZeroInputs) {
  const TimeGrid tg(1.0, 100);
  const Grid1D g(0.0, 8.0, 81);
  EXPECT_EQ(operational_relation_residual(TimeSeries(tg), 0.5, Field(g)), 0.0);
  const Field bump = Field::sample(g, [](double x) { return std::exp(-(x - 3.0) * (x - 3.0)); });
  EXPECT_NEAR(operational_relation_residual(TimeSeries(tg), 0.5, bump), 1.0, 1e-14);
  EXPECT_THROW(operational_relation_residual(TimeSeries(tg), 0.0, bump), DomainError);
  EXPECT_THROW(operational_relation_residual(TimeSeries(tg), -0.5, bump), DomainError);
}

TEST(Operational, RegularizedMatchesDirect) {
  const TimeGrid tg(1.0, 200);
  const Grid1D g(0.0, 8.0, 161);
  const auto f = input(tg, 0.5);
  ForcingOptions reg;
  reg.path = ForcingPath::Regularized;
  const auto u = forcing_L_lambda(f, 0.5, ForcingSide::Plus, ForcingKernelMode::Driftless, g, reg);
  EXPECT_LE(operational_relation_residual(f, 0.5, u.slice(tg.m)), 5e-2);
}
