#include <gtest/gtest.h>

#include <cmath>

#include "kdv/solver.hpp"
#include "kdv/spectral.hpp"

using namespace kdv;

namespace {

TimeSeries input(const TimeGrid& tg, double a = 0.05, double b = 0.7, double amplitude = 0.5) {
  return TimeSeries::sample(tg, [&](double t) { return amplitude * smooth_bump(t, a, b); });
}

cplx contour_end(double truncation) {
  const double b = std::sqrt((3.0 * truncation * truncation - 1.0) / 4.0);
  return {std::sqrt((b * b + 1.0) / 3.0), b};
}

}  // namespace

TEST(Contour, NodesSatisfyBoundaryRelation) {
  const Contour c = build_utm_contour(0.0, 40.0, 1536);
  ASSERT_GE(c.size(), 1000u);
  for (std::size_t j = 0; j < c.size(); ++j) EXPECT_LE(std::abs(utm_boundary_relation(c.nodes[j])), 1e-10) << j;
}

TEST(Contour, WeightsIntegratePolynomials) {
  for (double R : {0.0, 1.0}) {
    const Contour c = build_utm_contour(R, 40.0, 1536);
    const cplx end = contour_end(40.0), start = -std::conj(end);
    cplx s0 = 0.0, s2 = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
      s0 += c.weights[j];
      s2 += c.weights[j] * c.nodes[j] * c.nodes[j];
    }
    EXPECT_LT(std::abs(s0 - (end - start)), 1e-10 * std::abs(end));
    EXPECT_LT(std::abs(s2 - (end * end * end - start * start * start) / 3.0), 1e-10 * std::norm(end) * std::abs(end));
  }
}

TEST(Contour, ArgumentChecks) {
  EXPECT_THROW(build_utm_contour(-1.0, 40.0, 1536), DomainError);
  EXPECT_THROW(build_utm_contour(0.0, 1.5, 1536), DomainError);
  EXPECT_THROW(build_utm_contour(0.0, 40.0, 10), DomainError);
}

TEST(Utm, Linear) {
  const TimeGrid tg(1.0, 200);
  const auto f = input(tg);
  const auto g = input(tg, 0.2, 0.9, 1.0);
  TimeSeries h(tg);
  for (std::size_t k = 0; k < tg.size(); ++k) h[k] = 2.0 * f[k] - 3.0 * g[k];
  const Contour c = build_utm_contour(0.0, 40.0, 1536);
  for (double x : {0.0, 0.5, 2.0}) {
    const double lhs = utm_evaluate(h, c, x, 0.8);
    const double rhs = 2.0 * utm_evaluate(f, c, x, 0.8) - 3.0 * utm_evaluate(g, c, x, 0.8);
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(Utm, TruncationConverged) {
  const TimeGrid tg(1.0, 200);
  const auto f = input(tg);
  const Contour c1 = build_utm_contour(0.0, 40.0, 1536);
  const Contour c2 = build_utm_contour(0.0, 60.0, 2304);
  for (double x : {0.5, 1.0, 3.0})
    for (double t : {0.3, 0.6, 1.0}) EXPECT_LE(std::abs(utm_evaluate(f, c1, x, t) - utm_evaluate(f, c2, x, t)), 1e-4);
}

TEST(Utm, ArgumentChecks) {
  const TimeGrid tg(1.0, 50);
  const Contour c = build_utm_contour(0.0, 40.0, 256);
  const TimeSeries one(tg, std::vector<double>(tg.size(), 1.0));
  EXPECT_THROW(utm_evaluate(one, c, 1.0, 0.5), PreconditionError);
  EXPECT_THROW(utm_evaluate(input(tg), c, -1.0, 0.5), DomainError);
  EXPECT_THROW(utm_evaluate(input(tg), c, 1.0, 2.0), DomainError);
}

TEST(Bona, TailBoundWarnsAtBoundary) {
  const TimeGrid tg(1.0, 200);
  const auto f = input(tg);
  const auto at0 = bona_Wb_evaluate_detailed(f, 0.0, 0.5, 20.0);
  EXPECT_TRUE(at0.accuracy_warning);
  const auto inside = bona_Wb_evaluate_detailed(f, 2.0, 0.5, 20.0);
  EXPECT_TRUE(std::isfinite(inside.tail_bound));
  EXPECT_THROW(bona_Wb_evaluate(f, 1.0, 0.5, 5.0), DomainError);
  EXPECT_THROW(bona_Wb_evaluate(f, -1.0, 0.5, 20.0), DomainError);
}

TEST(Representations, AgreeWithSolver) {
  const TimeGrid tg(1.0, 400);
  const auto f = input(tg);
  BoundaryConfig bc;
  bc.dirichlet = f;
  const Grid1D wide(0.0, 30.0, 1201);
  const auto ref = solve_forward_linear(Field(wide), bc, tg);
  const Contour c = build_utm_contour(0.0, 40.0, 1536);
  double du = 0.0, db = 0.0, den = 0.0;
  for (std::size_t k = 40; k <= tg.m; k += 40)
    for (std::size_t i = 0; i <= 160; i += 20) {
      const double x = wide.node(i), t = tg.t(k);
      const double r = ref.at(k, i);
      du += std::pow(utm_evaluate(f, c, x, t) - r, 2);
      db += std::pow(bona_Wb_evaluate(f, x, t, 20.0) - r, 2);
      den += r * r;
    }
  EXPECT_LE(std::sqrt(du / den), 1e-2);
  EXPECT_LE(std::sqrt(db / den), 1e-2);
}

TEST(Representations, CausalBranchMatters) {
  const TimeGrid tg(1.0, 200);
  const auto f = input(tg);
  const double causal = bona_Wb_evaluate(f, 1.0, 0.8, 20.0, BonaBranch::Causal);
  const double principal = bona_Wb_evaluate(f, 1.0, 0.8, 20.0, BonaBranch::Principal);
  EXPECT_GT(std::abs(causal - principal), 1e-3 * std::abs(causal));
}

TEST(Representations, ZeroDataGivesZeroResiduals) {
  const TimeGrid tg(1.0, 100);
  const auto r = cross_representation_residuals(TimeSeries(tg), Grid1D(0.0, 4.0, 9), TimeGrid(1.0, 10), 0.02);
  EXPECT_EQ(r.forcing_vs_utm, 0.0);
  EXPECT_EQ(r.forcing_vs_bona, 0.0);
  EXPECT_EQ(r.bona_vs_utm, 0.0);
  EXPECT_THROW(cross_representation_residuals(TimeSeries(tg), Grid1D(-1.0, 4.0, 9), TimeGrid(1.0, 10), 0.02),
               DomainError);
}
