#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "kdv/core.hpp"

using namespace kdv;

TEST(Quadrature, L2NormOfIdentity) {
  const Grid1D g(0.0, 1.0, 2001);
  const auto f = Field::sample(g, [](double x) { return x; });
  EXPECT_NEAR(l2_norm(f), 1.0 / std::sqrt(3.0), 1e-6);
}

TEST(Quadrature, ConstantAndZero) {
  const Grid1D g(0.0, 1.0, 11);
  EXPECT_NEAR(l2_norm(Field::sample(g, [](double) { return 1.0; })), 1.0, 1e-14);
  EXPECT_EQ(l2_norm(Field(g)), 0.0);
}

TEST(Quadrature, TrapezoidExactForLinear) {
  const Grid1D g(-2.0, 3.0, 7);
  const auto f = Field::sample(g, [](double x) { return 2.0 * x - 1.0; });
  // int_{-2}^{3} (2x - 1) dx = (9 - 3) - (4 + 2) = 0
  EXPECT_NEAR(trapezoid(f.values, g.dx()), 0.0, 1e-13);
  const auto h = Field::sample(g, [](double x) { return x + 4.0; });
  EXPECT_NEAR(trapezoid(h.values, g.dx()), 0.5 * (9.0 - 4.0) + 20.0, 1e-13);
}

TEST(Grids, DegenerateGridsThrow) {
  EXPECT_THROW(Grid1D(1.0, 1.0, 10), InvalidArgument);
  EXPECT_THROW(Grid1D(0.0, 1.0, 2), InvalidArgument);
  EXPECT_THROW(Grid1D(0.0, INFINITY, 10), InvalidArgument);
  EXPECT_THROW(TimeGrid(0.0, 10), InvalidArgument);
  EXPECT_THROW(TimeGrid(1.0, 1), InvalidArgument);
  EXPECT_THROW(Field(Grid1D(0.0, 1.0, 5), std::vector<double>(4)), InvalidArgument);
  EXPECT_THROW(TimeSeries(TimeGrid(1.0, 4), std::vector<double>(4)), InvalidArgument);
}

TEST(Grids, EndpointsExact) {
  const Grid1D g(0.1, 0.7, 7);
  EXPECT_EQ(g.node(6), 0.7);
  const TimeGrid tg(0.3, 7);
  EXPECT_EQ(tg.t(7), 0.3);
}

TEST(Sobolev, ZeroOrderMatchesL2) {
  const TimeGrid tg(2.0, 400);
  const auto f = TimeSeries::sample(tg, [](double t) { return std::sin(3.0 * t) + t; });
  const double a = sobolev_norm_time(f, 0.0);
  const double b = l2_norm(f);
  EXPECT_NEAR(a / b, 1.0, 0.02);
}

TEST(Sobolev, NegativeOrderDampsOscillation) {
  const TimeGrid tg(1.0, 1024);
  auto ratio = [&](double k) {
    const auto f = TimeSeries::sample(tg, [&](double t) {
      return smooth_bump(t, 0.0, 1.0) * std::sin(2.0 * std::numbers::pi * k * t);
    });
    return sobolev_norm_time(f, -1.0 / 3.0) / sobolev_norm_time(f, 0.0);
  };
  EXPECT_LT(ratio(16.0), ratio(2.0));
  EXPECT_LT(ratio(16.0), 1.0);
}

TEST(Sobolev, StableUnderPaddingDoubling) {
  const TimeGrid tg(1.0, 256);
  const auto f = TimeSeries::sample(tg, [](double t) { return smooth_bump(t, 0.1, 0.9) * std::cos(20.0 * t); });
  const double n4 = sobolev_norm_time(f, 1.0 / 3.0, 4);
  const double n8 = sobolev_norm_time(f, 1.0 / 3.0, 8);
  EXPECT_NEAR(n8 / n4, 1.0, 0.05);
}

TEST(Sobolev, RejectsNonFinite) {
  TimeSeries f(TimeGrid(1.0, 8));
  f.values[3] = NAN;
  EXPECT_THROW(sobolev_norm_time(f, 0.0), InvalidArgument);
}

TEST(Riesz, IdentityWhenOrdersMatch) {
  const TimeGrid tg(1.0, 64);
  const auto f = TimeSeries::sample(tg, [](double t) { return t * t; });
  EXPECT_EQ(riesz_map_time(f, 0.5, 0.5).values, f.values);
}

TEST(Riesz, RoundTrip) {
  const TimeGrid tg(2.0, 300);
  const auto f = TimeSeries::sample(tg, [](double t) { return smooth_bump(t, 0.2, 1.7) * std::sin(7.0 * t); });
  const auto g = riesz_map_time(riesz_map_time(f, 1.0 / 3.0, -1.0 / 3.0), -1.0 / 3.0, 1.0 / 3.0);
  double err = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) err = std::max(err, std::abs(g[k] - f[k]));
  EXPECT_LT(err, 1e-6 * max_abs(f.values));
}

TEST(Riesz, ConstantStaysConstant) {
  const TimeGrid tg(1.0, 128);
  const TimeSeries c(tg, std::vector<double>(tg.size(), 2.5));
  const auto r = riesz_map_time(c, -1.0 / 3.0, 1.0 / 3.0);
  EXPECT_LT(total_variation(r.values), 1e-12);
  EXPECT_NEAR(r[0], 2.5, 1e-12);
}

TEST(Multiplier, PowerZeroIsIdentity) {
  const TimeGrid tg(1.0, 50);
  const auto f = TimeSeries::sample(tg, [](double t) { return std::exp(-t) * t; });
  const auto g = apply_time_multiplier(f.values, tg.dt(), 0.0);
  for (std::size_t k = 0; k < f.size(); ++k) EXPECT_NEAR(g[k], f[k], 1e-14);
}

TEST(Cutoff, BoundsAndMonotone) {
  const TimeGrid tg(1.0, 1000);
  const auto th = make_cutoff_theta(tg, 0.4);
  for (std::size_t k = 0; k < th.size(); ++k) {
    EXPECT_GE(th[k], 0.0);
    EXPECT_LE(th[k], 1.0);
    if (k > 0) EXPECT_LE(th[k], th[k - 1]);
    if (tg.t(k) <= 0.4) EXPECT_EQ(th[k], 1.0);
    if (tg.t(k) >= 0.8) EXPECT_EQ(th[k], 0.0);
  }
  EXPECT_THROW(make_cutoff_theta(tg, 0.0), InvalidArgument);
  EXPECT_THROW(make_cutoff_theta(tg, 1.5), InvalidArgument);
}

TEST(Convolution, ExponentialAgainstClosedForm) {
  const std::size_t m = 200;
  const double dt = 0.01;
  std::vector<double> g(m + 1);
  for (std::size_t k = 0; k <= m; ++k) g[k] = k * dt;
  for (cplx a : {cplx{-1.0, 0.0}, cplx{-0.3, 4.0}, cplx{0.0, 1e-3}}) {
    const auto c = causal_exponential_convolution(g, dt, a);
    for (std::size_t k = 0; k <= m; k += 20) {
      const double t = k * dt;
      // (e^{at} - 1 - at) / a^2 summed as a series to avoid cancellation for small a
      cplx exact = 0.0, term = 0.5 * t * t;
      for (int j = 0; j < 80; ++j) {
        exact += term;
        term *= a * t / static_cast<double>(j + 3);
      }
      EXPECT_LT(std::abs(c[k] - exact), 1e-12 * std::max(1.0, std::abs(exact))) << "a=" << a << " t=" << t;
    }
  }
}

TEST(Pairing, MatchesRectangleSum) {
  const TimeGrid tg(1.0, 4);
  const TimeSeries a(tg, {1, 2, 3, 4, 5});
  const TimeSeries b(tg, {1, 1, 1, 1, 1});
  EXPECT_DOUBLE_EQ(time_pairing(a, b), 15.0 * 0.25);
}
