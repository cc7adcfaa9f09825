#include <gtest/gtest.h>

#include <boost/math/special_functions/airy.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <numbers>

#include "kdv/special.hpp"

using namespace kdv;

TEST(Gamma, AgreesWithBoost) {
  for (double z : {0.1, 0.5, 1.0, 1.0 / 3.0, 2.0 / 3.0, 2.5, 7.25, -0.5, -2.3}) {
    const double ref = boost::math::tgamma(z);
    EXPECT_NEAR(gamma_fn(z), ref, 1e-13 * std::abs(ref)) << z;
  }
  EXPECT_NEAR(gamma_fn(0.5), std::sqrt(std::numbers::pi), 1e-12);
}

TEST(Gamma, PolesThrow) {
  EXPECT_THROW(gamma_fn(0.0), DomainError);
  EXPECT_THROW(gamma_fn(-3.0), DomainError);
  EXPECT_THROW(gamma_fn(NAN), DomainError);
}

TEST(Airy, KernelAgainstBoost) {
  const double c = std::cbrt(3.0);
  for (double x = -20.0; x <= 10.0; x += 0.173) {
    const double ref = boost::math::airy_ai(x / c) / c;
    EXPECT_NEAR(airy_A(x), ref, 1e-10) << x;
    const double refp = boost::math::airy_ai_prime(x / c) / (c * c);
    EXPECT_NEAR(airy_A_prime(x), refp, 1e-9) << x;
  }
}

TEST(Airy, SatisfiesAiryEquation) {
  const double c = std::cbrt(3.0);
  const double h = 1e-3;
  auto g = [&](double y) { return c * airy_A(c * y); };
  for (double y = -6.0; y <= 4.0; y += 0.5) {
    const double g2 = (-g(y + 2 * h) + 16.0 * g(y + h) - 30.0 * g(y) + 16.0 * g(y - h) - g(y - 2 * h)) / (12.0 * h * h);
    EXPECT_NEAR(g2, y * g(y), 1e-6) << y;
  }
}

TEST(Airy, ClosedFormsAtZero) {
  const double a0 = 1.0 / (3.0 * std::tgamma(2.0 / 3.0));
  const double a1 = -1.0 / (3.0 * std::tgamma(1.0 / 3.0));
  EXPECT_NEAR(airy_A(0.0), a0, 1e-14);
  const double h = 1e-5;
  EXPECT_NEAR((airy_A(h) - airy_A(-h)) / (2.0 * h), a1, 1e-8);
  EXPECT_NEAR(airy_A_prime(0.0), a1, 1e-14);
}

TEST(Airy, HalfLineIntegral) {
  const std::size_t n = 4001;
  const double h = 20.0 / (n - 1);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = airy_A(i * h);
  EXPECT_NEAR(trapezoid(v, h), 1.0 / 3.0, 1e-6);
}

TEST(Airy, RangeChecked) {
  EXPECT_THROW(airy_A(51.0), DomainError);
  EXPECT_THROW(airy_A_prime(-60.0), DomainError);
  EXPECT_THROW(airy_A(NAN), DomainError);
}

namespace {
TimeSeries ones(const TimeGrid& tg) { return TimeSeries(tg, std::vector<double>(tg.size(), 1.0)); }
}  // namespace

TEST(FractionalIntegral, OrderOneOfConstant) {
  const TimeGrid tg(1.0, 100);
  const auto r = fractional_integral(ones(tg), 1.0);
  for (std::size_t k = 0; k < r.size(); ++k) EXPECT_NEAR(r[k], tg.t(k), 1e-13);
}

TEST(FractionalIntegral, OrderHalfOfConstant) {
  const TimeGrid tg(1.0, 100);
  const auto r = fractional_integral(ones(tg), 0.5);
  for (std::size_t k = 0; k < r.size(); ++k)
    EXPECT_NEAR(r[k], 2.0 * std::sqrt(tg.t(k) / std::numbers::pi), 1e-12);
}

TEST(FractionalIntegral, OrderZeroIsIdentity) {
  const TimeGrid tg(1.0, 10);
  const auto f = TimeSeries::sample(tg, [](double t) { return std::cos(t); });
  EXPECT_EQ(fractional_integral(f, 0.0).values, f.values);
}

TEST(FractionalIntegral, Semigroup) {
  const TimeGrid tg(1.0, 2048);
  const auto f = TimeSeries::sample(tg, [](double t) { return std::sin(3.0 * t) + t; });
  const auto lhs = fractional_integral(fractional_integral(f, 1.0 / 3.0), 2.0 / 3.0);
  const auto rhs = fractional_integral(f, 1.0);
  double err = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) err = std::max(err, std::abs(lhs[k] - rhs[k]));
  EXPECT_LT(err, 1e-5);
}

TEST(FractionalIntegral, MinusOneDifferentiates) {
  const TimeGrid tg(1.0, 400);
  const auto f = TimeSeries::sample(tg, [](double t) { return std::sin(2.0 * t); });
  const auto d = fractional_integral(f, -1.0);
  for (std::size_t k = 0; k < d.size(); ++k) EXPECT_NEAR(d[k], 2.0 * std::cos(2.0 * tg.t(k)), 1e-4);
}

TEST(FractionalIntegral, ArgumentErrors) {
  const TimeGrid tg(1.0, 50);
  EXPECT_THROW(fractional_integral(ones(tg), -0.5), PreconditionError);
  EXPECT_THROW(fractional_integral(ones(tg), 2.5), DomainError);
  auto bad = ones(tg);
  bad.values[5] = INFINITY;
  EXPECT_THROW(fractional_integral(bad, 0.5), InvalidArgument);
}

TEST(FiniteDifference, FornbergCentralWeights) {
  const auto w = fornberg_weights(0.0, {-1.0, 0.0, 1.0}, 2);
  EXPECT_NEAR(w[1][0], -0.5, 1e-15);
  EXPECT_NEAR(w[1][1], 0.0, 1e-15);
  EXPECT_NEAR(w[1][2], 0.5, 1e-15);
  EXPECT_NEAR(w[2][0], 1.0, 1e-15);
  EXPECT_NEAR(w[2][1], -2.0, 1e-15);
  EXPECT_NEAR(w[2][2], 1.0, 1e-15);
}

TEST(FiniteDifference, ExactForQuartics) {
  const double h = 0.1;
  std::vector<double> v(20);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = i * h;
    v[i] = x * x * x * x - x;
  }
  const auto d1 = fd_derivative(v, h, 1);
  const auto d2 = fd_derivative(v, h, 2);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = i * h;
    EXPECT_NEAR(d1[i], 4.0 * x * x * x - 1.0, 1e-9);
    EXPECT_NEAR(d2[i], 12.0 * x * x, 1e-7);
  }
  EXPECT_THROW(fd_derivative(v, h, 3), InvalidArgument);
  EXPECT_THROW(fd_derivative({1.0, 2.0}, h, 1), InvalidArgument);
}

TEST(Quadrature, GaussLegendreExactness) {
  const auto [x, w] = gauss_legendre(5);
  double s0 = 0.0, s8 = 0.0, s9 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    s0 += w[i];
    s8 += w[i] * std::pow(x[i], 8);
    s9 += w[i] * std::pow(x[i], 9);
  }
  EXPECT_NEAR(s0, 2.0, 1e-14);
  EXPECT_NEAR(s8, 2.0 / 9.0, 1e-14);
  EXPECT_NEAR(s9, 0.0, 1e-14);
  EXPECT_THROW(gauss_legendre(0), InvalidArgument);
}
