#pragma once

// Gamma function, the Airy kernel A(x) = (1/2pi) int e^{i x xi + i xi^3} d xi and
// Riemann-Liouville fractional integrals on uniform time grids.

#include <array>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "kdv/core.hpp"
#include "kdv/errors.hpp"

namespace kdv {

/// Gamma function. Throws DomainError at the poles 0, -1, -2, ...
inline double gamma_fn(double z) {
  if (!std::isfinite(z)) throw DomainError("gamma_fn: non-finite argument");
  if (z <= 0.0 && std::abs(z - std::round(z)) < 1e-14) throw DomainError("gamma_fn: pole");
  return std::tgamma(z);
}

/// Value and derivative of the standard Airy function Ai.
struct AiryPair {
  double ai = 0.0;
  double aip = 0.0;
};

namespace detail {

inline AiryPair airy_series(double z) {
  const double c1 = 1.0 / (std::pow(3.0, 2.0 / 3.0) * std::tgamma(2.0 / 3.0));
  const double c2 = 1.0 / (std::pow(3.0, 1.0 / 3.0) * std::tgamma(1.0 / 3.0));
  const double z3 = z * z * z;
  // f = sum a_k z^{3k}, g = sum b_k z^{3k+1}
  double a = 1.0, b = z;
  double f = 1.0, g = z, fp = 0.0, gp = 1.0;
  for (int k = 0; k < 200; ++k) {
    const double kk = static_cast<double>(k);
    const double a_next = a * z3 / ((3 * kk + 2) * (3 * kk + 3));
    const double b_next = b * z3 / ((3 * kk + 3) * (3 * kk + 4));
    f += a_next;
    g += b_next;
    // derivative terms: d/dz z^{3k+3} = (3k+3) z^{3k+2}
    if (z != 0.0) {
      fp += a_next * (3 * kk + 3) / z;
      gp += b_next * (3 * kk + 4) / z;
    }
    a = a_next;
    b = b_next;
    if (std::abs(a) + std::abs(b) < 1e-18 * (std::abs(f) + std::abs(g)) && k > 3) break;
  }
  return {c1 * f - c2 * g, c1 * fp - c2 * gp};
}

// Coefficients u_k, v_k of the large-argument expansions.
inline const std::array<std::array<double, 40>, 2>& airy_asymptotic_coeffs() {
  static const auto table = [] {
    std::array<std::array<double, 40>, 2> uv{};
    uv[0][0] = 1.0;
    uv[1][0] = 1.0;
    for (int k = 1; k < 40; ++k) {
      const double kk = k;
      uv[0][k] = uv[0][k - 1] * (6 * kk - 5) * (6 * kk - 3) * (6 * kk - 1) /
                 ((2 * kk - 1) * 216.0 * kk);
      uv[1][k] = -(6 * kk + 1) / (6 * kk - 1) * uv[0][k];
    }
    return uv;
  }();
  return table;
}

// Sums sum_k (-1)^k c_k / zeta^k with optimal truncation.
inline double asymptotic_sum(const std::array<double, 40>& c, double zeta, bool alternate) {
  double sum = 0.0, prev = INFINITY, zp = 1.0;
  for (int k = 0; k < 40; ++k) {
    const double term = c[k] / zp * ((alternate && (k % 2)) ? -1.0 : 1.0);
    if (std::abs(term) > prev) break;
    sum += term;
    prev = std::abs(term);
    if (prev < 1e-17 * std::abs(sum)) break;
    zp *= zeta;
  }
  return sum;
}

// Even/odd split sums used on the oscillatory side: sum (-1)^k c_{2k+off}/zeta^{2k+off}.
inline double asymptotic_sum_parity(const std::array<double, 40>& c, double zeta, int off) {
  double sum = 0.0, prev = INFINITY;
  for (int k = 0; 2 * k + off < 40; ++k) {
    const int idx = 2 * k + off;
    const double term = ((k % 2) ? -1.0 : 1.0) * c[idx] / std::pow(zeta, idx);
    if (std::abs(term) > prev) break;
    sum += term;
    prev = std::abs(term);
    if (prev < 1e-17 * std::max(std::abs(sum), 1e-300)) break;
  }
  return sum;
}

inline AiryPair airy_asymptotic_positive(double z) {
  const auto& uv = airy_asymptotic_coeffs();
  const double zeta = 2.0 / 3.0 * z * std::sqrt(z);
  const double pre = std::exp(-zeta) / (2.0 * std::sqrt(std::numbers::pi));
  const double q = std::pow(z, 0.25);
  return {pre / q * asymptotic_sum(uv[0], zeta, true), -pre * q * asymptotic_sum(uv[1], zeta, true)};
}

inline AiryPair airy_asymptotic_negative(double z) {
  const auto& uv = airy_asymptotic_coeffs();
  const double x = -z;
  const double zeta = 2.0 / 3.0 * x * std::sqrt(x);
  const double q = std::pow(x, 0.25);
  const double rp = 1.0 / std::sqrt(std::numbers::pi);
  const double ph = zeta + 0.25 * std::numbers::pi;
  const double s = std::sin(ph), c = std::cos(ph);
  const double P = asymptotic_sum_parity(uv[0], zeta, 0);
  const double Q = asymptotic_sum_parity(uv[0], zeta, 1);
  const double R = asymptotic_sum_parity(uv[1], zeta, 0);
  const double S = asymptotic_sum_parity(uv[1], zeta, 1);
  return {rp / q * (s * P - c * Q), -rp * q * (c * R + s * S)};
}

}  // namespace detail

/// Standard Airy function Ai and its derivative.
inline AiryPair airy_ai(double z) {
  if (std::isnan(z)) throw DomainError("airy_ai: NaN argument");
  if (z > 5.0) return detail::airy_asymptotic_positive(z);
  if (z < -7.0) return detail::airy_asymptotic_negative(z);
  return detail::airy_series(z);
}

namespace detail {
inline const double kCbrt3 = std::cbrt(3.0);

/// A(x) without the range check; used inside quadratures.
inline double airy_kernel(double x) { return airy_ai(x / kCbrt3).ai / kCbrt3; }
inline double airy_kernel_prime(double x) {
  return airy_ai(x / kCbrt3).aip / (kCbrt3 * kCbrt3);
}
}  // namespace detail

/// A(x) = 3^{-1/3} Ai(3^{-1/3} x), the kernel with symbol e^{i xi^3}. Requires |x| <= 50.
inline double airy_A(double x) {
  if (!(std::abs(x) <= 50.0)) throw DomainError("airy_A: |x| must not exceed 50");
  return detail::airy_kernel(x);
}

/// A'(x).
inline double airy_A_prime(double x) {
  if (!(std::abs(x) <= 50.0)) throw DomainError("airy_A_prime: |x| must not exceed 50");
  return detail::airy_kernel_prime(x);
}

// ---------------------------------------------------------------------------
// Finite-difference weights

/// Fornberg weights for the derivatives 0..max_order at x0 using nodes xs.
/// Returns w[order][j].
inline std::vector<std::vector<double>> fornberg_weights(double x0, const std::vector<double>& xs,
                                                         int max_order) {
  const int n = static_cast<int>(xs.size());
  std::vector<std::vector<double>> c(max_order + 1, std::vector<double>(n, 0.0));
  double c1 = 1.0, c4 = xs[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, max_order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = xs[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = xs[i] - xs[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c;
}

/// Fourth-order finite-difference derivative (order 1 or 2) of uniformly spaced samples.
/// Centered five-point stencils in the interior, one-sided stencils at the ends.
inline std::vector<double> fd_derivative(const std::vector<double>& v, double h, int order) {
  const int n = static_cast<int>(v.size());
  if (order < 1 || order > 2) throw InvalidArgument("fd_derivative: order must be 1 or 2");
  const int width = order == 1 ? 5 : 6;
  if (n < width) throw InvalidArgument("fd_derivative: too few samples");
  std::vector<double> out(n);
  std::vector<std::vector<double>> cache_w;
  for (int k = 0; k < n; ++k) {
    int lo, w;
    if (k >= 2 && k + 2 < n) {
      lo = k - 2;
      w = 5;
    } else {
      w = width;
      lo = k < 2 ? 0 : n - w;
    }
    std::vector<double> xs(w);
    for (int j = 0; j < w; ++j) xs[j] = static_cast<double>(lo + j);
    const auto c = fornberg_weights(static_cast<double>(k), xs, order);
    double s = 0.0;
    for (int j = 0; j < w; ++j) s += c[order][j] * v[lo + j];
    out[k] = s / std::pow(h, order);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fractional integral

namespace detail {

// Product-trapezoid quadrature of I_beta for beta > 0 (piecewise-linear f, exact kernel moments).
inline std::vector<double> fractional_integral_positive(const std::vector<double>& f, double h,
                                                        double beta) {
  const std::size_t m = f.size() - 1;
  std::vector<double> pw(m + 2);
  for (std::size_t j = 0; j < pw.size(); ++j) pw[j] = std::pow(static_cast<double>(j), beta + 1.0);
  // w[j] multiplies f_{n-j} for 1 <= j <= n-1
  std::vector<double> w(m + 1, 0.0);
  for (std::size_t j = 1; j <= m; ++j) w[j] = pw[j + 1] - 2.0 * pw[j] + pw[j - 1];
  const double scale = std::pow(h, beta) / std::tgamma(beta + 2.0);
  std::vector<double> out(m + 1, 0.0);
  for (std::size_t n = 1; n <= m; ++n) {
    const double dn = static_cast<double>(n);
    double s = (pw[n - 1] - (dn - beta - 1.0) * std::pow(dn, beta)) * f[0] + f[n];
    for (std::size_t k = 1; k < n; ++k) s += w[n - k] * f[k];
    out[n] = scale * s;
  }
  return out;
}

}  // namespace detail

/// Riemann-Liouville integral of order alpha in [-2, 2]; negative orders differentiate
/// I_{alpha+1} or I_{alpha+2}. Negative orders require f(0) = 0.
inline TimeSeries fractional_integral(const TimeSeries& f, double alpha) {
  if (!(alpha >= -2.0 && alpha <= 2.0)) throw DomainError("fractional_integral: alpha outside [-2, 2]");
  if (!all_finite(f.values)) throw InvalidArgument("fractional_integral: non-finite input");
  const double h = f.tgrid.dt();
  if (alpha == 0.0) return f;
  if (alpha > 0.0) return TimeSeries(f.tgrid, detail::fractional_integral_positive(f.values, h, alpha));
  const double scale = max_abs(f.values);
  if (std::abs(f.values[0]) > 1e-8 * scale)
    throw PreconditionError("fractional_integral: negative order needs f(0) = 0");
  const int ders = alpha > -1.0 ? 1 : 2;
  const double beta = alpha + ders;
  std::vector<double> base = beta == 0.0 ? f.values : detail::fractional_integral_positive(f.values, h, beta);
  return TimeSeries(f.tgrid, fd_derivative(base, h, ders));
}

/// Gauss-Legendre nodes and weights on [-1, 1].
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(std::size_t n) {
  if (n == 0) throw InvalidArgument("gauss_legendre: need at least one node");
  std::vector<double> x(n), w(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (std::size_t k = 2; k <= n; ++k) {
        const double kk = static_cast<double>(k);
        const double p2 = ((2 * kk - 1) * z * p1 - (kk - 1) * p0) / kk;
        p0 = p1;
        p1 = p2;
      }
      dp = static_cast<double>(n) * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

}  // namespace kdv
