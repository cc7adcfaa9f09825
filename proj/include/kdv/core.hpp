#pragma once

// Grids, sampled functions, trapezoid quadrature, padded-DFT Sobolev norms and
// the smooth time cutoff shared by every other header.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kdv/errors.hpp"

namespace kdv {

using cplx = std::complex<double>;

/// Uniform spatial grid with n nodes on [x_lo, x_hi].
struct Grid1D {
  double x_lo = 0.0;
  double x_hi = 1.0;
  std::size_t n = 3;

  Grid1D() = default;
  Grid1D(double lo, double hi, std::size_t nodes) : x_lo(lo), x_hi(hi), n(nodes) { validate(); }

  void validate() const {
    if (!(x_lo < x_hi) || !std::isfinite(x_lo) || !std::isfinite(x_hi))
      throw InvalidArgument("Grid1D: require finite x_lo < x_hi");
    if (n < 3) throw InvalidArgument("Grid1D: need at least 3 nodes");
  }
  double dx() const { return (x_hi - x_lo) / static_cast<double>(n - 1); }
  double node(std::size_t i) const {
    if (i + 1 == n) return x_hi;
    return x_lo + static_cast<double>(i) * dx();
  }
  std::vector<double> nodes() const {
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i) xs[i] = node(i);
    return xs;
  }
  bool operator==(const Grid1D&) const = default;
};

/// Uniform time grid t_k = k T / m, k = 0..m.
struct TimeGrid {
  double T = 1.0;
  std::size_t m = 2;

  TimeGrid() = default;
  TimeGrid(double horizon, std::size_t steps) : T(horizon), m(steps) { validate(); }

  void validate() const {
    if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("TimeGrid: T must be positive");
    if (m < 2) throw InvalidArgument("TimeGrid: need at least 2 steps");
  }
  double dt() const { return T / static_cast<double>(m); }
  double t(std::size_t k) const { return k == m ? T : static_cast<double>(k) * dt(); }
  std::size_t size() const { return m + 1; }
  bool operator==(const TimeGrid&) const = default;
};

/// Real function sampled on a Grid1D.
struct Field {
  Grid1D grid;
  std::vector<double> values;

  Field() = default;
  explicit Field(const Grid1D& g) : grid(g), values(g.n, 0.0) {}
  Field(const Grid1D& g, std::vector<double> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.n) throw InvalidArgument("Field: value count does not match grid");
  }
  template <class F>
  static Field sample(const Grid1D& g, F&& fn) {
    Field out(g);
    for (std::size_t i = 0; i < g.n; ++i) out.values[i] = fn(g.node(i));
    return out;
  }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  std::size_t size() const { return values.size(); }
};

/// Real function sampled on a TimeGrid (m+1 values).
struct TimeSeries {
  TimeGrid tgrid;
  std::vector<double> values;

  TimeSeries() = default;
  explicit TimeSeries(const TimeGrid& g) : tgrid(g), values(g.size(), 0.0) {}
  TimeSeries(const TimeGrid& g, std::vector<double> v) : tgrid(g), values(std::move(v)) {
    if (values.size() != tgrid.size())
      throw InvalidArgument("TimeSeries: value count does not match time grid");
  }
  template <class F>
  static TimeSeries sample(const TimeGrid& g, F&& fn) {
    TimeSeries out(g);
    for (std::size_t k = 0; k < g.size(); ++k) out.values[k] = fn(g.t(k));
    return out;
  }
  double operator[](std::size_t k) const { return values[k]; }
  double& operator[](std::size_t k) { return values[k]; }
  std::size_t size() const { return values.size(); }
};

/// u(x_i, t_k) stored row-major by time level.
struct SpaceTimeField {
  Grid1D grid;
  TimeGrid tgrid;
  std::vector<double> values;

  SpaceTimeField() = default;
  SpaceTimeField(const Grid1D& g, const TimeGrid& tg)
      : grid(g), tgrid(tg), values(g.n * tg.size(), 0.0) {}

  double& at(std::size_t k, std::size_t i) { return values[k * grid.n + i]; }
  double at(std::size_t k, std::size_t i) const { return values[k * grid.n + i]; }
  std::span<double> row(std::size_t k) { return {values.data() + k * grid.n, grid.n}; }
  std::span<const double> row(std::size_t k) const { return {values.data() + k * grid.n, grid.n}; }
  Field slice(std::size_t k) const {
    auto r = row(k);
    return Field(grid, std::vector<double>(r.begin(), r.end()));
  }
  void set_row(std::size_t k, std::span<const double> v) {
    std::copy(v.begin(), v.end(), row(k).begin());
  }
  TimeSeries column(std::size_t i) const {
    TimeSeries out(tgrid);
    for (std::size_t k = 0; k < tgrid.size(); ++k) out.values[k] = at(k, i);
    return out;
  }
};

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

/// Composite trapezoid rule for samples at spacing h.
inline double trapezoid(std::span<const double> v, double h) {
  if (v.empty()) return 0.0;
  double s = 0.5 * (v.front() + v.back());
  for (std::size_t i = 1; i + 1 < v.size(); ++i) s += v[i];
  return v.size() == 1 ? 0.0 : s * h;
}

inline double l2_norm_samples(std::span<const double> v, double h) {
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = v[i] * v[i];
  return std::sqrt(std::max(0.0, trapezoid(sq, h)));
}

inline double l2_norm(const Field& f) { return l2_norm_samples(f.values, f.grid.dx()); }
inline double l2_norm(const TimeSeries& f) { return l2_norm_samples(f.values, f.tgrid.dt()); }

/// Space-time L2 norm (trapezoid in both directions).
inline double l2_norm(const SpaceTimeField& u) {
  std::vector<double> per_t(u.tgrid.size());
  for (std::size_t k = 0; k < u.tgrid.size(); ++k) {
    double n = l2_norm_samples(u.row(k), u.grid.dx());
    per_t[k] = n * n;
  }
  return std::sqrt(trapezoid(per_t, u.tgrid.dt()));
}

// ---------------------------------------------------------------------------
// Smooth cutoff

namespace detail {
inline double smooth_glue(double y) { return y > 0.0 ? std::exp(-1.0 / y) : 0.0; }
}  // namespace detail

/// psi(s): 1 for s <= 1, 0 for s >= 2, C-infinity and monotone in between.
inline double cutoff_profile(double s) {
  s = std::abs(s);
  if (s <= 1.0) return 1.0;
  if (s >= 2.0) return 0.0;
  const double a = detail::smooth_glue(2.0 - s);
  const double b = detail::smooth_glue(s - 1.0);
  return a / (a + b);
}

/// theta(t) = psi(t / plateau_end) sampled on the time grid.
inline TimeSeries make_cutoff_theta(const TimeGrid& tgrid, double plateau_end) {
  if (!(plateau_end > 0.0) || plateau_end > tgrid.T)
    throw InvalidArgument("make_cutoff_theta: plateau_end must lie in (0, T]");
  return TimeSeries::sample(tgrid, [&](double t) { return cutoff_profile(t / plateau_end); });
}

// ---------------------------------------------------------------------------
// FFT (FFTW backend)

/// In-place complex DFT. sign = FFTW_FORWARD or FFTW_BACKWARD; unnormalized.
inline void fft_inplace(std::vector<cplx>& data, int sign) {
  if (data.empty()) return;
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan =
      fftw_plan_dft_1d(static_cast<int>(data.size()), ptr, ptr, sign, FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);
}

/// Angular frequency of DFT bin j for a periodic sample of length n at spacing h.
inline double dft_frequency(std::size_t j, std::size_t n, double h) {
  const auto sj = static_cast<long long>(j);
  const auto sn = static_cast<long long>(n);
  const long long signed_j = (2 * sj < sn) ? sj : sj - sn;
  return 2.0 * std::numbers::pi * static_cast<double>(signed_j) / (static_cast<double>(n) * h);
}

/// Padding factor used by the time-domain Sobolev machinery.
inline constexpr std::size_t kSobolevPadding = 4;

namespace detail {
inline double japanese_bracket_pow(double tau, double power) {
  return std::pow(1.0 + tau * tau, 0.5 * power);
}
}  // namespace detail

/// Applies the Fourier multiplier <tau>^power to f zero-extended to [0, 4T],
/// and restricts the result to the original samples.
inline std::vector<double> apply_time_multiplier(std::span<const double> f, double dt,
                                                 double power,
                                                 std::size_t padding = kSobolevPadding) {
  const std::size_t m = f.size() - 1;
  const std::size_t np = padding * m;
  std::vector<cplx> buf(np, cplx{0.0, 0.0});
  for (std::size_t k = 0; k < f.size() && k < np; ++k) buf[k] = f[k];
  fft_inplace(buf, FFTW_FORWARD);
  for (std::size_t j = 0; j < np; ++j)
    buf[j] *= detail::japanese_bracket_pow(dft_frequency(j, np, dt), power);
  fft_inplace(buf, FFTW_BACKWARD);
  std::vector<double> out(f.size());
  for (std::size_t k = 0; k < f.size(); ++k) out[k] = buf[k].real() / static_cast<double>(np);
  return out;
}

/// Discrete H^s(0,T) norm: zero extension to a 4x padded period, weights <tau>^{2s}.
inline double sobolev_norm_time(const TimeSeries& f, double s,
                                std::size_t padding = kSobolevPadding) {
  if (!all_finite(f.values)) throw InvalidArgument("sobolev_norm_time: non-finite input");
  const std::size_t m = f.tgrid.m;
  const double dt = f.tgrid.dt();
  const std::size_t np = padding * m;
  std::vector<cplx> buf(np, cplx{0.0, 0.0});
  for (std::size_t k = 0; k <= m && k < np; ++k) buf[k] = f.values[k];
  fft_inplace(buf, FFTW_FORWARD);
  double acc = 0.0;
  for (std::size_t j = 0; j < np; ++j)
    acc += detail::japanese_bracket_pow(dft_frequency(j, np, dt), 2.0 * s) * std::norm(buf[j]);
  // Parseval: (dt / np) * sum |F_j|^2 equals dt * sum |f_k|^2 when s = 0.
  return std::sqrt(acc * dt / static_cast<double>(np));
}

/// Multiplies the DFT by <tau>^{s_to - s_from}. With padding = 1 the samples on [0, T) are one
/// period, so swapped exponents invert the map exactly and constants stay constant; padding > 1
/// zero-extends and restricts back to [0, T] like apply_time_multiplier, which is not invertible.
inline TimeSeries riesz_map_time(const TimeSeries& f, double s_from, double s_to, std::size_t padding = 1) {
  if (padding < 1) throw InvalidArgument("riesz_map_time: padding must be at least 1");
  if (s_from == s_to) return f;
  if (padding > 1) return TimeSeries(f.tgrid, apply_time_multiplier(f.values, f.tgrid.dt(), s_to - s_from, padding));
  const std::size_t m = f.tgrid.m;
  std::vector<cplx> buf(f.values.begin(), f.values.begin() + static_cast<std::ptrdiff_t>(m));
  fft_inplace(buf, FFTW_FORWARD);
  for (std::size_t j = 0; j < m; ++j)
    buf[j] *= detail::japanese_bracket_pow(dft_frequency(j, m, f.tgrid.dt()), s_to - s_from);
  fft_inplace(buf, FFTW_BACKWARD);
  TimeSeries out(f.tgrid);
  for (std::size_t k = 0; k < m; ++k) out.values[k] = buf[k].real() / static_cast<double>(m);
  out.values[m] = out.values[0];
  return out;
}

/// Discrete time pairing used by the control machinery: dt * sum_k a_k b_k.
inline double time_pairing(const TimeSeries& a, const TimeSeries& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a.values[k] * b.values[k];
  return s * a.tgrid.dt();
}

inline double total_variation(std::span<const double> v) {
  double tv = 0.0;
  for (std::size_t i = 1; i < v.size(); ++i) tv += std::abs(v[i] - v[i - 1]);
  return tv;
}

/// Smooth bump supported in (a, b): exp(1 - 1/(1 - s^2)) with s the rescaled coordinate.
inline double smooth_bump(double t, double a, double b) {
  const double c = 0.5 * (a + b);
  const double r = 0.5 * (b - a);
  const double s = (t - c) / r;
  if (std::abs(s) >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - s * s));
}

}  // namespace kdv

namespace kdv {

namespace detail {
// Weights (w_old, w_new) such that int_0^dt e^{a (dt - tau)} g(tau) dtau equals
// w_old g(0) + w_new g(dt) exactly for linear g. z = a dt.
inline std::pair<cplx, cplx> exponential_linear_weights(cplx z, double dt) {
  if (std::abs(z) < 0.5) {
    // w_old/dt = sum z^k / (k! (k+2)), w_new/dt = sum z^k / (k+2)!
    cplx so = 0.0, sn = 0.0, zk = 1.0;
    double fact = 1.0;
    for (int k = 0; k < 20; ++k) {
      if (k > 0) fact *= k;
      so += zk / (fact * (k + 2));
      sn += zk / (fact * (k + 1) * (k + 2));
      zk *= z;
    }
    return {so * dt, sn * dt};
  }
  const cplx ez = std::exp(z);
  return {dt * (ez * (z - 1.0) + 1.0) / (z * z), dt * (ez - 1.0 - z) / (z * z)};
}
}  // namespace detail

/// C_n = int_0^{t_n} e^{a (t_n - t')} g(t') dt' for piecewise-linear g on a uniform grid.
/// Exact for the interpolant; stable for Re a <= 0.
inline std::vector<cplx> causal_exponential_convolution(std::span<const double> g, double dt, cplx a) {
  std::vector<cplx> out(g.size(), cplx{0.0, 0.0});
  const cplx e = std::exp(a * dt);
  const auto [w_old, w_new] = detail::exponential_linear_weights(a * dt, dt);
  for (std::size_t n = 1; n < g.size(); ++n) out[n] = e * out[n - 1] + w_old * g[n - 1] + w_new * g[n];
  return out;
}

}  // namespace kdv
