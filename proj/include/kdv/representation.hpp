#pragma once

// Free group, inhomogeneous Duhamel operator, boundary forcing operators L0 and L^lambda,
// the 2x2 matrix M and the assembled linear half-line solutions.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "kdv/core.hpp"
#include "kdv/errors.hpp"
#include "kdv/special.hpp"

namespace kdv {

enum class ForcingKernelMode { Driftless, DriftShifted };
enum class ForcingSide { Plus, Minus };
enum class ForcingPath { Regularized, Direct };

inline double drift_of(ForcingKernelMode mode) { return mode == ForcingKernelMode::DriftShifted ? 1.0 : 0.0; }

struct LambdaPair {
  double lambda1 = 0.0;
  double lambda2 = 0.5;

  void validate() const {
    for (double l : {lambda1, lambda2})
      if (!(l > -1.0 && l < 1.0)) throw DomainError("LambdaPair: lambda outside (-1, 1)");
    if (lambda1 == lambda2) throw DomainError("LambdaPair: lambdas must differ");
  }
};

struct MatrixM {
  std::array<std::array<double, 2>, 2> entries{};

  double operator()(int i, int j) const { return entries[i][j]; }
};

/// Closed form of M for a pair of distinct lambdas.
inline MatrixM matrix_M(const LambdaPair& lp) {
  const double pi = std::numbers::pi;
  const double s = std::sin(pi / 3.0 * (lp.lambda2 - lp.lambda1));
  if (!std::isfinite(s) || std::abs(s) < 1e-14) throw DomainError("matrix_M: singular prefactor");
  const double pre = 1.0 / (2.0 * std::sqrt(3.0) * s);
  const double a1 = pi * lp.lambda1 / 3.0, a2 = pi * lp.lambda2 / 3.0;
  MatrixM m;
  m.entries[0] = {pre * std::sin(a2 - pi / 6.0), -pre * std::sin(a2 + pi / 6.0)};
  m.entries[1] = {-pre * std::sin(a1 - pi / 6.0), pre * std::sin(a1 + pi / 6.0)};
  return m;
}

/// Discretization knobs of the forcing operators.
struct ForcingOptions {
  ForcingPath path = ForcingPath::Regularized;
  std::size_t sigma_nodes = 0;  // radial nodes of the kernel quadrature; 0 picks max(400, 2m)
  double left_reach = 0.0;      // periodic extension left of the grid; 0 picks 40 + 60 T
  double right_reach = 0.0;     // extension right of the grid; 0 picks 15 + 2 T
  int max_trace_iterations = 40;
  double trace_tolerance = 1e-9;

  double left(double T) const { return left_reach > 0.0 ? left_reach : 40.0 + 60.0 * T; }
  double right(double T) const { return right_reach > 0.0 ? right_reach : 15.0 + 2.0 * T; }
};

// ---------------------------------------------------------------------------
// Free group and Duhamel operator

namespace detail {

inline double dispersion(double xi, double kappa) { return xi * xi * xi - kappa * xi; }

inline std::size_t fft_friendly(std::size_t n) {
  for (;; ++n) {
    std::size_t r = n;
    for (std::size_t p : {2u, 3u, 5u})
      while (r % p == 0) r /= p;
    if (r == 1) return n;
  }
}

inline void check_edge_support(std::span<const double> v, const char* who) {
  const double peak = max_abs(v);
  if (peak == 0.0) return;
  const std::size_t band = std::max<std::size_t>(1, v.size() / 10);
  for (std::size_t i = 0; i < band; ++i)
    if (std::abs(v[i]) >= 1e-10 * peak || std::abs(v[v.size() - 1 - i]) >= 1e-10 * peak)
      throw PreconditionError(std::string(who) + ": data not negligible near the grid edges");
}

// Samples treated as one period of length n*dx.
inline std::vector<double> propagate_periodic(std::span<const double> v, double dx, double t, double kappa = 1.0) {
  const std::size_t n = v.size();
  std::vector<cplx> buf(v.begin(), v.end());
  fft_inplace(buf, FFTW_FORWARD);
  for (std::size_t j = 0; j < n; ++j)
    buf[j] *= std::exp(cplx(0.0, t * dispersion(dft_frequency(j, n, dx), kappa)));
  fft_inplace(buf, FFTW_BACKWARD);
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = buf[j].real() / static_cast<double>(n);
  return out;
}

}  // namespace detail

/// e^{-t(d_x + d_x^3)} phi through the Fourier multiplier e^{it(xi^3 - xi)}.
/// phi must be negligible within 10% of each edge.
inline Field group_propagate(const Field& phi, double t) {
  if (!std::isfinite(t)) throw InvalidArgument("group_propagate: non-finite time");
  if (!all_finite(phi.values)) throw InvalidArgument("group_propagate: non-finite data");
  detail::check_edge_support(phi.values, "group_propagate");
  if (t == 0.0) return phi;
  return Field(phi.grid, detail::propagate_periodic(phi.values, phi.grid.dx(), t));
}

/// Same multiplier with the samples taken as one period of length n*dx; no support check.
inline Field group_propagate_periodic(const Field& phi, double t) {
  if (!all_finite(phi.values)) throw InvalidArgument("group_propagate_periodic: non-finite data");
  if (t == 0.0) return phi;
  return Field(phi.grid, detail::propagate_periodic(phi.values, phi.grid.dx(), t));
}

/// int_0^t e^{-(t-t')(d_x+d_x^3)} w(t') dt' by the trapezoid rule in t' (w linear between levels).
inline Field duhamel_inhomogeneous(const SpaceTimeField& w, double t) {
  const TimeGrid& tg = w.tgrid;
  if (!(t >= 0.0 && t <= tg.T * (1.0 + 1e-12))) throw InvalidArgument("duhamel_inhomogeneous: t outside [0, T]");
  if (!all_finite(w.values)) throw InvalidArgument("duhamel_inhomogeneous: non-finite data");
  const std::size_t n = w.grid.n;
  const double dx = w.grid.dx(), dt = tg.dt();
  Field out(w.grid);
  if (t == 0.0) return out;
  std::size_t last = std::min<std::size_t>(tg.m, static_cast<std::size_t>(std::floor(t / dt * (1.0 + 1e-13))));
  const double rest = t - tg.t(last);

  std::vector<double> omega(n);
  for (std::size_t j = 0; j < n; ++j) omega[j] = detail::dispersion(dft_frequency(j, n, dx), 1.0);
  std::vector<cplx> acc(n, cplx{0.0, 0.0}), buf(n);
  auto transform = [&](std::size_t k) {
    detail::check_edge_support(w.row(k), "duhamel_inhomogeneous");
    auto r = w.row(k);
    std::copy(r.begin(), r.end(), buf.begin());
    fft_inplace(buf, FFTW_FORWARD);
  };
  auto add = [&](std::size_t k, double weight, double lag) {
    if (weight == 0.0) return;
    transform(k);
    for (std::size_t j = 0; j < n; ++j) acc[j] += weight * std::exp(cplx(0.0, lag * omega[j])) * buf[j];
  };
  for (std::size_t k = 0; k <= last; ++k) {
    double weight = (k == 0 || k == last) ? 0.5 * dt : dt;
    if (last == 0) weight = 0.0;
    add(k, weight, t - tg.t(k));
  }
  if (rest > 1e-14 * dt && last < tg.m) {
    // partial cell [t_last, t] with w interpolated linearly
    const double a = rest / dt;
    add(last, 0.5 * rest, rest);
    add(last, 0.5 * rest * (1.0 - a), 0.0);
    add(last + 1, 0.5 * rest * a, 0.0);
  }
  fft_inplace(acc, FFTW_BACKWARD);
  for (std::size_t j = 0; j < n; ++j) out.values[j] = acc[j].real() / static_cast<double>(n);
  return out;
}

// ---------------------------------------------------------------------------
// Quadrature building blocks for the forcing operators

namespace detail {

using Rows = std::vector<std::vector<double>>;

// Riemann-Liouville integral of order beta > 0 anchored at index 0 of a uniform grid,
// product trapezoid rule (exact kernel moments against the piecewise-linear interpolant).
class ProductTrapezoid {
 public:
  ProductTrapezoid(double beta, double h, std::size_t n) : n_(n), c_(n, 0.0), a0_(n, 0.0) {
    if (!(beta > 0.0)) throw InvalidArgument("ProductTrapezoid: order must be positive");
    const double p = beta + 1.0;
    scale_ = std::pow(h, beta) / std::tgamma(beta + 2.0);
    if (n == 0) return;
    c_[0] = 1.0;
    for (std::size_t j = 1; j < n; ++j) {
      const double dj = static_cast<double>(j);
      c_[j] = j == 1 ? std::pow(2.0, p) - 2.0
                     : std::pow(dj, p) * (std::expm1(p * std::log1p(1.0 / dj)) + std::expm1(p * std::log1p(-1.0 / dj)));
    }
    for (std::size_t j = 1; j < n; ++j) {
      const double dj = static_cast<double>(j);
      a0_[j] = j == 1 ? beta : std::pow(dj, p) * (std::expm1(p * std::log1p(-1.0 / dj)) + p / dj);
    }
    len_ = fft_friendly(2 * n);
    chat_.assign(len_, cplx{0.0, 0.0});
    for (std::size_t j = 0; j < n; ++j) chat_[j] = c_[j];
    fft_inplace(chat_, FFTW_FORWARD);
  }

  std::vector<double> apply(std::span<const double> v) const {
    std::vector<cplx> buf(len_, cplx{0.0, 0.0});
    for (std::size_t k = 1; k < n_; ++k) buf[k] = v[k];
    fft_inplace(buf, FFTW_FORWARD);
    for (std::size_t j = 0; j < len_; ++j) buf[j] *= chat_[j];
    fft_inplace(buf, FFTW_BACKWARD);
    std::vector<double> out(n_, 0.0);
    for (std::size_t i = 1; i < n_; ++i)
      out[i] = scale_ * (buf[i].real() / static_cast<double>(len_) + a0_[i] * v[0]);
    return out;
  }

  double at(std::span<const double> v, std::size_t i) const {
    if (i == 0) return 0.0;
    double s = a0_[i] * v[0];
    for (std::size_t k = 1; k <= i; ++k) s += c_[i - k] * v[k];
    return scale_ * s;
  }

 private:
  std::size_t n_ = 0, len_ = 0;
  double scale_ = 1.0;
  std::vector<double> c_, a0_;
  std::vector<cplx> chat_;
};

// Cubic Lagrange interpolation of samples on [0, T]; zero for negative arguments.
inline double causal_cubic(std::span<const double> g, double dt, double tau) {
  if (tau < 0.0) return 0.0;
  const long m = static_cast<long>(g.size()) - 1;
  const double p = tau / dt;
  long i = static_cast<long>(std::floor(p));
  if (i >= m) return g[m];
  const long lo = std::clamp(i - 1, 0L, std::max(0L, m - 3));
  double s = 0.0;
  for (long a = lo; a < lo + 4 && a <= m; ++a) {
    double w = 1.0;
    for (long b = lo; b < lo + 4 && b <= m; ++b)
      if (b != a) w *= (p - static_cast<double>(b)) / static_cast<double>(a - b);
    s += w * g[a];
  }
  return s;
}

// int_0^inf w^{beta-1} A(w - a) dw by composite Gauss-Legendre, geometric panels near 0.
inline double mellin_airy(double beta, double a) {
  static const auto rule = gauss_legendre(12);
  const auto& [gx, gw] = rule;
  auto panel = [&](double lo, double hi) {
    double s = 0.0;
    for (std::size_t q = 0; q < gx.size(); ++q) {
      const double w = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gx[q];
      s += gw[q] * std::pow(w, beta - 1.0) * airy_kernel(w - a);
    }
    return 0.5 * (hi - lo) * s;
  };
  double total = 0.0, lo = 0.0;
  for (int e = -14; e <= 0; ++e) {
    const double hi = std::pow(10.0, e);
    total += panel(lo, hi);
    lo = hi;
  }
  const double upper = a + 40.0;
  const int panels = static_cast<int>(std::ceil((upper - 1.0) / 0.5));
  for (int k = 0; k < panels; ++k) total += panel(1.0 + 0.5 * k, 1.0 + 0.5 * (k + 1));
  return total;
}

// Radial quadrature of int_0^t s^{-1/3} k(s) G(t - s) ds after s = sigma^3: uniform sigma nodes,
// trapezoid weights and a partial last cell (the endpoint term carries G(0) = 0).
class RadialQuadrature {
 public:
  RadialQuadrature(const TimeGrid& tg, std::size_t nodes) : tg_(tg), n_(nodes) {
    if (n_ < 8) throw InvalidArgument("RadialQuadrature: too few nodes");
    ds_ = std::cbrt(tg.T) / static_cast<double>(n_);
    sigma_.resize(n_ + 1);
    for (std::size_t j = 0; j <= n_; ++j) sigma_[j] = ds_ * static_cast<double>(j);
  }

  const std::vector<double>& sigma() const { return sigma_; }

  // Weighted samples omega_j G(t_k - sigma_j^3); returns the number of active nodes.
  std::size_t weighted_samples(std::size_t k, std::span<const double> G, std::vector<double>& out) const {
    out.assign(n_ + 1, 0.0);
    const double t = tg_.t(k);
    if (t <= 0.0) return 0;
    const double smax = std::cbrt(t);
    const std::size_t last = std::min(n_, static_cast<std::size_t>(std::floor(smax / ds_ * (1.0 + 1e-14))));
    const double dt = tg_.dt();
    for (std::size_t j = 0; j <= last; ++j) {
      double w = (j == 0 || j == last) ? 0.5 * ds_ : ds_;
      if (last == 0) w = 0.0;
      if (j == last) w += 0.5 * (smax - sigma_[last]);
      out[j] = w * causal_cubic(G, dt, t - sigma_[j] * sigma_[j] * sigma_[j]);
    }
    return last + 1;
  }

  // sum_j profile_j omega_j G(t_k - sigma_j^3) for every level.
  std::vector<double> apply_profile(const std::vector<double>& profile, std::span<const double> G) const {
    std::vector<double> out(tg_.size(), 0.0), gw;
    for (std::size_t k = 1; k < tg_.size(); ++k) {
      const std::size_t cnt = weighted_samples(k, G, gw);
      double s = 0.0;
      for (std::size_t j = 0; j < cnt; ++j) s += profile[j] * gw[j];
      out[k] = s;
    }
    return out;
  }

 private:
  TimeGrid tg_;
  std::size_t n_;
  double ds_ = 0.0;
  std::vector<double> sigma_;
};

inline std::size_t default_sigma_nodes(const TimeGrid& tg, const ForcingOptions& opts) {
  return opts.sigma_nodes > 0 ? opts.sigma_nodes : std::max<std::size_t>(400, 2 * tg.m);
}

// L0 kernel field 3 int s^{-1/3} A((x - kappa s)/s^{1/3}) G(t - s) ds on x = x0 + i dx, i < count.
// Nodes with x >= 0 use the radial quadrature; nodes with x < 0 use a periodic Fourier synthesis
// whose time factor int e^{i(t-t')(xi^3 - kappa xi)} G(t') dt' is integrated exactly for linear G.
class L0Sampler {
 public:
  using Sink = std::function<void(std::size_t, const Rows&)>;

  // spectral_only: use the Fourier synthesis on every node (keeps one-sided differences at x = 0
  // within a single discretization).
  L0Sampler(double x0, double dx, std::size_t count, const TimeGrid& tg, double kappa,
            const ForcingOptions& opts, bool spectral_only = false)
      : x0_(x0), dx_(dx), count_(count), tg_(tg), kappa_(kappa),
        radial_(tg, default_sigma_nodes(tg, opts)) {
    split_ = 0;
    if (spectral_only) split_ = count_;
    while (split_ < count_ && x0_ + dx_ * static_cast<double>(split_) < -1e-9 * dx_) ++split_;
    const auto& sig = radial_.sigma();
    const std::size_t npos = count_ - split_;
    table_.assign(npos * sig.size(), 0.0);
    for (std::size_t i = 0; i < npos; ++i) {
      const double x = std::max(0.0, x0_ + dx_ * static_cast<double>(split_ + i));
      for (std::size_t j = 1; j < sig.size(); ++j) {
        const double s = sig[j];
        const double arg = (x - kappa_ * s * s * s) / s;
        table_[i * sig.size() + j] = arg > 80.0 ? 0.0 : 9.0 * s * airy_kernel(arg);
      }
    }
    if (split_ > 0) {
      // periodic grid containing [x0 - left reach, top + pad] with x0 on a node; the left margin
      // keeps waves that leave through it from wrapping back during [0, T]
      const double pad = 20.0;
      const std::size_t lead = static_cast<std::size_t>(std::ceil(opts.left(tg.T) / dx_));
      const double top = std::max(0.0, x0_ + dx_ * static_cast<double>(split_ - 1));
      const std::size_t body = static_cast<std::size_t>(std::ceil((top - x0_ + pad) / dx_)) + 1;
      nw_ = fft_friendly(lead + body);
      lead_ = lead;
      xw0_ = x0_ - dx_ * static_cast<double>(lead_);
      decay_.resize(nw_);
      w_old_.resize(nw_);
      w_new_.resize(nw_);
      shift_.resize(nw_);
      const double dt = tg_.dt();
      for (std::size_t j = 0; j < nw_; ++j) {
        const double xi = dft_frequency(j, nw_, dx_);
        const cplx a(0.0, dispersion(xi, kappa_));
        decay_[j] = std::exp(a * dt);
        const auto [wo, wn] = exponential_linear_weights(a * dt, dt);
        w_old_[j] = wo;
        w_new_[j] = wn;
        shift_[j] = 3.0 * std::exp(cplx(0.0, xi * xw0_)) / (static_cast<double>(nw_) * dx_);
      }
    }
  }

  std::size_t split() const { return split_; }
  const RadialQuadrature& radial() const { return radial_; }

  void sweep(const std::vector<std::vector<double>>& inputs, const Sink& sink) const {
    const std::size_t q = inputs.size();
    Rows rows(q, std::vector<double>(count_, 0.0));
    sink(0, rows);
    std::vector<std::vector<cplx>> state(split_ > 0 ? q : 0, std::vector<cplx>(nw_, cplx{0.0, 0.0}));
    std::vector<cplx> buf(nw_);
    std::vector<double> gw;
    const std::size_t ns = radial_.sigma().size();
    for (std::size_t k = 1; k < tg_.size(); ++k) {
      for (std::size_t p = 0; p < q; ++p) {
        const auto& g = inputs[p];
        auto& row = rows[p];
        if (split_ > 0) {
          auto& st = state[p];
          for (std::size_t j = 0; j < nw_; ++j) {
            st[j] = decay_[j] * st[j] + w_old_[j] * g[k - 1] + w_new_[j] * g[k];
            buf[j] = st[j] * shift_[j];
          }
          fft_inplace(buf, FFTW_BACKWARD);
          for (std::size_t i = 0; i < split_; ++i) row[i] = buf[lead_ + i].real();
        }
        const std::size_t cnt = radial_.weighted_samples(k, g, gw);
        for (std::size_t i = split_; i < count_; ++i) {
          const double* tr = table_.data() + (i - split_) * ns;
          double s = 0.0;
          for (std::size_t j = 0; j < cnt; ++j) s += tr[j] * gw[j];
          row[i] = s;
        }
      }
      sink(k, rows);
    }
  }

 private:
  double x0_, dx_;
  std::size_t count_;
  TimeGrid tg_;
  double kappa_;
  RadialQuadrature radial_;
  std::size_t split_ = 0;
  std::vector<double> table_;
  std::size_t nw_ = 0, lead_ = 0;
  double xw0_ = 0.0;
  std::vector<cplx> decay_, w_old_, w_new_, shift_;
};

// Profile p_j such that apply_profile gives the x = 0 trace of J_+^beta K[G]; beta = 0 is K[G](0, t).
inline std::vector<double> plus_trace_profile(const RadialQuadrature& rq, double beta, double kappa) {
  const auto& sig = rq.sigma();
  std::vector<double> p(sig.size(), 0.0);
  for (std::size_t j = 1; j < sig.size(); ++j) {
    const double s = sig[j];
    p[j] = beta == 0.0 ? 9.0 * s * airy_kernel(-kappa * s * s)
                       : 9.0 / std::tgamma(beta) * std::pow(s, beta + 1.0) * mellin_airy(beta, kappa * s * s);
  }
  return p;
}

// How J^lambda L0 I_{-lambda/3} is evaluated: the kernel inputs and their recombination.
struct ForcingPlan {
  double lambda = 0.0;
  ForcingSide side = ForcingSide::Plus;
  ForcingPath path = ForcingPath::Regularized;
  double kappa = 1.0;

  bool trivial() const { return lambda == 0.0 && path == ForcingPath::Direct; }
  bool regularized() const { return !trivial() && path == ForcingPath::Regularized; }

  // G = I_{-2/3-lambda/3} d and, for the regularized form, G' first.
  std::vector<std::vector<double>> inputs(const TimeSeries& d) const {
    const TimeSeries G = fractional_integral(d, -2.0 / 3.0 - lambda / 3.0);
    if (!regularized()) return {G.values};
    return {fd_derivative(G.values, d.tgrid.dt(), 1), G.values};
  }
};

// Streams rows of J_side^lambda K[...] on x0 + i dx, i < count, computing the kernel field on an
// extended range so the one-sided x-integrals see the far field.
class ForcingEvaluator {
 public:
  ForcingEvaluator(const ForcingPlan& plan, double x0, double dx, std::size_t count, const TimeGrid& tg,
                   const ForcingOptions& opts)
      : plan_(plan), dx_(dx), count_(count) {
    if (plan.trivial()) {
      ext0_ = x0;
      next_ = count;
      offset_ = 0;
    } else if (plan.side == ForcingSide::Plus) {
      const double last = std::max(x0 + dx * static_cast<double>(count - 1), 0.0);
      const std::size_t extra = static_cast<std::size_t>(std::ceil((last + opts.right(tg.T) - x0) / dx)) + 1;
      ext0_ = x0;
      next_ = std::max(count, extra);
      offset_ = 0;
    } else {
      offset_ = static_cast<std::size_t>(std::ceil(opts.left(tg.T) / dx));
      ext0_ = x0 - dx * static_cast<double>(offset_);
      next_ = offset_ + count;
    }
    sampler_ = std::make_unique<L0Sampler>(ext0_, dx, next_, tg, plan.kappa, opts, plan.side == ForcingSide::Minus);
    if (!plan.trivial()) {
      if (plan.regularized()) {
        j_hi_ = std::make_unique<ProductTrapezoid>(plan.lambda + 3.0, dx, next_);
        j_lo_ = std::make_unique<ProductTrapezoid>(plan.lambda + 2.0, dx, next_);
      } else {
        // negative orders: J^lambda = d/dx J^{lambda+1} (Minus), -d/dx J^{lambda+1} (Plus)
        j_hi_ = std::make_unique<ProductTrapezoid>(derivative_form() ? plan.lambda + 1.0 : plan.lambda, dx, next_);
      }
    }
  }

  double node(std::size_t i) const { return ext0_ + dx_ * static_cast<double>(offset_ + i); }

  // Full rows on the requested nodes.
  void sweep_rows(const TimeSeries& d, const std::function<void(std::size_t, std::span<const double>)>& sink) const {
    const auto inputs = plan_.inputs(d);
    const auto& G = plan_.regularized() ? inputs[1] : inputs[0];
    std::vector<double> out(count_);
    sampler_->sweep(inputs, [&](std::size_t k, const Rows& rows) {
      if (plan_.trivial()) {
        std::copy(rows[0].begin(), rows[0].end(), out.begin());
      } else {
        const auto a = integrate_direct(rows[0]);
        const auto b = plan_.regularized() ? integrate(*j_lo_, rows[1]) : std::vector<double>();
        for (std::size_t i = 0; i < count_; ++i) out[i] = combine(a[offset_ + i], b.empty() ? 0.0 : b[offset_ + i], node(i), G[k]);
      }
      sink(k, out);
    });
  }

  // Values at selected node indices only (direct sums instead of full convolutions).
  void sweep_points(const TimeSeries& d, const std::vector<std::size_t>& idx,
                    const std::function<void(std::size_t, const std::vector<double>&)>& sink) const {
    const auto inputs = plan_.inputs(d);
    const auto& G = plan_.regularized() ? inputs[1] : inputs[0];
    std::vector<double> out(idx.size());
    sampler_->sweep(inputs, [&](std::size_t k, const Rows& rows) {
      for (std::size_t p = 0; p < idx.size(); ++p) {
        const std::size_t i = idx[p];
        if (plan_.trivial()) {
          out[p] = rows[0][i];
          continue;
        }
        const double a = derivative_form() ? integrate_direct(rows[0])[offset_ + i] : integrate_at(*j_hi_, rows[0], offset_ + i);
        const double b = plan_.regularized() ? integrate_at(*j_lo_, rows[1], offset_ + i) : 0.0;
        out[p] = combine(a, b, node(i), G[k]);
      }
      sink(k, out);
    });
  }

 private:
  bool derivative_form() const { return !plan_.regularized() && plan_.lambda < 0.0; }

  std::vector<double> integrate_direct(const std::vector<double>& row) const {
    auto a = integrate(*j_hi_, row);
    if (!derivative_form()) return a;
    auto d = fd_derivative(a, dx_, 1);
    if (plan_.side == ForcingSide::Plus)
      for (auto& v : d) v = -v;
    return d;
  }

  std::vector<double> integrate(const ProductTrapezoid& j, const std::vector<double>& row) const {
    if (plan_.side == ForcingSide::Minus) return j.apply(row);
    std::vector<double> rev(row.rbegin(), row.rend());
    auto out = j.apply(rev);
    std::reverse(out.begin(), out.end());
    return out;
  }
  double integrate_at(const ProductTrapezoid& j, const std::vector<double>& row, std::size_t i) const {
    if (plan_.side == ForcingSide::Minus) return j.at(row, i);
    std::vector<double> rev(row.rbegin(), row.rend());
    return j.at(rev, row.size() - 1 - i);
  }
  double combine(double a, double b, double x, double g) const {
    if (!plan_.regularized()) return a;
    const double lam = plan_.lambda;
    const double c = 3.0 / std::tgamma(lam + 3.0);
    if (plan_.side == ForcingSide::Plus) {
      const double tail = x < 0.0 ? c * std::pow(-x, lam + 2.0) * g : 0.0;
      return a - plan_.kappa * b - tail;
    }
    const double tail = x > 0.0 ? c * std::pow(x, lam + 2.0) * g : 0.0;
    return tail - a - plan_.kappa * b;
  }

  ForcingPlan plan_;
  double dx_;
  std::size_t count_;
  double ext0_ = 0.0;
  std::size_t next_ = 0, offset_ = 0;
  std::unique_ptr<L0Sampler> sampler_;
  std::unique_ptr<ProductTrapezoid> j_hi_, j_lo_;
};

inline void check_forcing_input(const TimeSeries& f, const char* who) {
  if (!all_finite(f.values)) throw InvalidArgument(std::string(who) + ": non-finite input");
  if (std::abs(f.values[0]) > 1e-8 * std::max(max_abs(f.values), 1e-300))
    throw PreconditionError(std::string(who) + ": f(0) must vanish");
}

}  // namespace detail

/// L0 f on the grid: 3 int A((x - kappa(t-t'))/(t-t')^{1/3}) (t-t')^{-1/3} I_{-2/3} f(t') dt'.
inline SpaceTimeField forcing_L0(const TimeSeries& f, const Grid1D& grid,
                                 ForcingKernelMode mode = ForcingKernelMode::DriftShifted,
                                 const ForcingOptions& opts = {}) {
  detail::check_forcing_input(f, "forcing_L0");
  SpaceTimeField u(grid, f.tgrid);
  detail::ForcingPlan plan{0.0, ForcingSide::Plus, ForcingPath::Direct, drift_of(mode)};
  detail::ForcingEvaluator ev(plan, grid.x_lo, grid.dx(), grid.n, f.tgrid, opts);
  ev.sweep_rows(f, [&](std::size_t k, std::span<const double> r) { u.set_row(k, r); });
  return u;
}

/// J_+^lambda L0 I_{-lambda/3} f (Plus, integration over (x, inf)) or J_-^lambda L0 I_{-lambda/3} f
/// (Minus, over (-inf, x)). Real operator; the complex phases of the solution formulas are applied
/// by the callers.
inline SpaceTimeField forcing_L_lambda(const TimeSeries& f, double lambda, ForcingSide side,
                                       ForcingKernelMode mode, const Grid1D& grid,
                                       const ForcingOptions& opts = {}) {
  if (!(lambda > -1.0 && lambda < 1.0)) throw DomainError("forcing_L_lambda: lambda outside (-1, 1)");
  detail::check_forcing_input(f, "forcing_L_lambda");
  SpaceTimeField u(grid, f.tgrid);
  detail::ForcingPlan plan{lambda, side, opts.path, drift_of(mode)};
  detail::ForcingEvaluator ev(plan, grid.x_lo, grid.dx(), grid.n, f.tgrid, opts);
  ev.sweep_rows(f, [&](std::size_t k, std::span<const double> r) { u.set_row(k, r); });
  return u;
}

// ---------------------------------------------------------------------------
// Assembled linear solutions

namespace detail {

struct FreeWave {
  SpaceTimeField u;
  TimeSeries value;  // u at the boundary node
  TimeSeries slope;  // u_x at the boundary node
};

// e^{-t(d_x+d_x^3)} of phi zero-extended to a wide periodic grid, sampled back on phi's grid.
inline FreeWave free_wave(const Field& phi, const TimeGrid& tg, std::size_t boundary, double left, double right) {
  const Grid1D& g = phi.grid;
  const double dx = g.dx();
  const std::size_t lead = static_cast<std::size_t>(std::ceil(left / dx));
  const std::size_t n = fft_friendly(lead + g.n + static_cast<std::size_t>(std::ceil(right / dx)));
  std::vector<cplx> hat(n, cplx{0.0, 0.0}), buf(n);
  for (std::size_t i = 0; i < g.n; ++i) hat[lead + i] = phi.values[i];
  fft_inplace(hat, FFTW_FORWARD);
  std::vector<double> xi(n);
  for (std::size_t j = 0; j < n; ++j) xi[j] = dft_frequency(j, n, dx);
  FreeWave fw{SpaceTimeField(g, tg), TimeSeries(tg), TimeSeries(tg)};
  const std::size_t b = lead + boundary;
  const double theta_b = 2.0 * std::numbers::pi * static_cast<double>(b) / static_cast<double>(n);
  for (std::size_t k = 0; k < tg.size(); ++k) {
    const double t = tg.t(k);
    cplx slope = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      buf[j] = hat[j] * std::exp(cplx(0.0, t * dispersion(xi[j], 1.0)));
      const double jj = static_cast<double>(j);
      slope += cplx(0.0, xi[j]) * buf[j] * std::exp(cplx(0.0, theta_b * jj));
    }
    fft_inplace(buf, FFTW_BACKWARD);
    for (std::size_t i = 0; i < g.n; ++i) fw.u.at(k, i) = buf[lead + i].real() / static_cast<double>(n);
    fw.value[k] = fw.u.at(k, boundary);
    fw.slope[k] = slope.real() / static_cast<double>(n);
  }
  return fw;
}

inline void check_boundary_node(double x, const Grid1D& g, const char* who) {
  if (std::abs(x) > 1e-12 * (g.x_hi - g.x_lo)) throw InvalidArgument(std::string(who) + ": the boundary must sit at x = 0");
}

// Moves a compatibility defect of round-off size at t = 0 out of the way of the negative-order integrals.
inline void clear_initial_defect(std::vector<double>& d, double data_scale, const char* who) {
  const double scale = std::max(max_abs(d), data_scale);
  if (std::abs(d[0]) > 1e-6 * scale && std::abs(d[0]) > 1e-12)
    throw PreconditionError(std::string(who) + ": boundary data incompatible with phi at t = 0");
  d[0] = 0.0;
}

// Keeps the real part of phase * z after checking the imaginary residue.
inline double real_after_phase(cplx phase, double z, double scale) {
  const cplx w = phase * z;
  if (std::abs(w.imag()) > 1e-8 * std::max(scale, 1e-300))
    throw ConsistencyError("solution formula: imaginary residue above 1e-8");
  return w.real();
}

// The Plus class is evaluated on x >= 0 where the regularized form is accurate; on the Minus side the
// (x-y)^{lambda+2} weights amplify the slowly decaying far field, so the direct form is used there.
inline ForcingPath solution_path(double lambda, ForcingSide side) {
  if (side == ForcingSide::Minus) return ForcingPath::Direct;
  return lambda >= 0.0 ? ForcingPath::Direct : ForcingPath::Regularized;
}

}  // namespace detail

struct RepresentationResult {
  SpaceTimeField u;
  int trace_iterations = 0;
  double trace_defect = 0.0;  // sup of the remaining boundary-data defect
};

/// Right half-line solution (x >= 0, boundary at x = 0): free wave plus the Plus forcing term
/// whose density is corrected until the Dirichlet trace matches f.
inline RepresentationResult linear_right_solution_detailed(const Field& phi, const TimeSeries& f, double lambda,
                                                           ForcingKernelMode mode = ForcingKernelMode::DriftShifted,
                                                           ForcingOptions opts = {}) {
  if (!(lambda > -1.0 && lambda < 1.0)) throw DomainError("linear_right_solution: lambda outside (-1, 1)");
  if (!all_finite(phi.values) || !all_finite(f.values)) throw InvalidArgument("linear_right_solution: non-finite data");
  const Grid1D& g = phi.grid;
  detail::check_boundary_node(g.x_lo, g, "linear_right_solution");
  const TimeGrid& tg = f.tgrid;
  const TimeSeries theta = make_cutoff_theta(tg, tg.T);
  auto fw = detail::free_wave(phi, tg, 0, opts.left(tg.T), opts.right(tg.T));

  std::vector<double> target(tg.size());
  for (std::size_t k = 0; k < tg.size(); ++k) target[k] = f[k] - theta[k] * fw.value[k];
  detail::clear_initial_defect(target, max_abs(phi.values), "linear_right_solution");

  opts.path = detail::solution_path(lambda, ForcingSide::Plus);
  const double kappa = drift_of(mode);
  detail::ForcingPlan plan{lambda, ForcingSide::Plus, opts.path, kappa};
  detail::RadialQuadrature rq(tg, detail::default_sigma_nodes(tg, opts));
  std::vector<std::vector<double>> profiles;
  if (plan.trivial()) profiles.push_back(detail::plus_trace_profile(rq, 0.0, kappa));
  else if (plan.regularized()) {
    profiles.push_back(detail::plus_trace_profile(rq, lambda + 3.0, kappa));
    profiles.push_back(detail::plus_trace_profile(rq, lambda + 2.0, kappa));
  } else {
    profiles.push_back(detail::plus_trace_profile(rq, lambda, kappa));
  }
  auto trace_of = [&](const TimeSeries& d) {
    const auto in = plan.inputs(d);
    auto tr = rq.apply_profile(profiles[0], in[0]);
    if (plan.regularized()) {
      const auto b = rq.apply_profile(profiles[1], in[1]);
      for (std::size_t k = 0; k < tr.size(); ++k) tr[k] -= kappa * b[k];
    }
    return tr;
  };

  RepresentationResult res;
  TimeSeries d(tg, target);
  const double scale = std::max(max_abs(target), 1e-300);
  double best = INFINITY;
  int stalled = 0;
  TimeSeries best_d = d;
  for (int it = 0; it < opts.max_trace_iterations; ++it) {
    const auto tr = trace_of(d);
    double defect = 0.0;
    std::vector<double> r(tg.size());
    for (std::size_t k = 0; k < tg.size(); ++k) {
      r[k] = target[k] - tr[k];
      defect = std::max(defect, std::abs(r[k]));
    }
    res.trace_iterations = it;
    if (defect < best) {
      best_d = d;
      res.trace_defect = defect;
    }
    if (defect <= opts.trace_tolerance * scale) break;
    // stagnation: the defect left is discretization noise the correction cannot remove
    stalled = defect > 0.9 * best ? stalled + 1 : 0;
    best = std::min(best, defect);
    if (stalled >= 3) break;
    r[0] = 0.0;
    for (std::size_t k = 0; k < tg.size(); ++k) d[k] += r[k];
  }

  // The density enters as e^{-i pi lambda} d and the Plus class carries e^{i pi lambda}.
  const double pi = std::numbers::pi;
  const cplx phase = std::exp(cplx(0.0, pi * lambda)) * std::exp(cplx(0.0, -pi * lambda));
  res.u = fw.u;
  detail::ForcingEvaluator ev(plan, g.x_lo, g.dx(), g.n, tg, opts);
  ev.sweep_rows(best_d, [&](std::size_t k, std::span<const double> r) {
    const double sc = max_abs(r);
    for (std::size_t i = 0; i < g.n; ++i) res.u.at(k, i) += theta[k] * detail::real_after_phase(phase, r[i], sc);
  });
  return res;
}

inline SpaceTimeField linear_right_solution(const Field& phi, const TimeSeries& f, double lambda,
                                            ForcingKernelMode mode = ForcingKernelMode::DriftShifted,
                                            const ForcingOptions& opts = {}) {
  return linear_right_solution_detailed(phi, f, lambda, mode, opts).u;
}

/// Left half-line solution (x <= 0, boundary at x = 0): free wave plus two Minus forcing terms.
/// The densities start from 2M applied to (Dirichlet defect, I_{1/3} Neumann defect) and are
/// corrected with the same map until both traces match.
inline RepresentationResult linear_left_solution_detailed(const Field& phi, const TimeSeries& g1, const TimeSeries& g2,
                                                          const LambdaPair& lp,
                                                          ForcingKernelMode mode = ForcingKernelMode::DriftShifted,
                                                          ForcingOptions opts = {}) {
  lp.validate();
  if (!all_finite(phi.values) || !all_finite(g1.values) || !all_finite(g2.values))
    throw InvalidArgument("linear_left_solution: non-finite data");
  if (!(g1.tgrid == g2.tgrid)) throw InvalidArgument("linear_left_solution: time grids differ");
  const Grid1D& g = phi.grid;
  detail::check_boundary_node(g.x_hi, g, "linear_left_solution");
  const TimeGrid& tg = g1.tgrid;
  const double dx = g.dx();
  const TimeSeries theta = make_cutoff_theta(tg, tg.T);
  auto fw = detail::free_wave(phi, tg, g.n - 1, opts.left(tg.T), opts.right(tg.T));

  std::vector<double> d1(tg.size()), d2(tg.size());
  for (std::size_t k = 0; k < tg.size(); ++k) {
    d1[k] = g1[k] - theta[k] * fw.value[k];
    d2[k] = g2[k] - theta[k] * fw.slope[k];
  }
  detail::clear_initial_defect(d1, max_abs(phi.values), "linear_left_solution");
  const MatrixM M = matrix_M(lp);
  const double kappa = drift_of(mode);
  const std::array<double, 2> lams{lp.lambda1, lp.lambda2};
  std::array<std::unique_ptr<detail::ForcingEvaluator>, 2> ev;
  for (int j = 0; j < 2; ++j) {
    ForcingOptions o = opts;
    o.path = detail::solution_path(lams[j], ForcingSide::Minus);
    ev[j] = std::make_unique<detail::ForcingEvaluator>(
        detail::ForcingPlan{lams[j], ForcingSide::Minus, o.path, kappa}, g.x_lo, dx, g.n, tg, o);
  }
  // one-sided stencil at x = 0 from the left
  const std::size_t width = std::min<std::size_t>(6, g.n);
  std::vector<std::size_t> idx(width);
  std::vector<double> xs(width);
  for (std::size_t s = 0; s < width; ++s) {
    idx[s] = g.n - 1 - s;
    xs[s] = -static_cast<double>(s);
  }
  const auto fw_w = fornberg_weights(0.0, xs, 1);

  std::array<TimeSeries, 2> h{TimeSeries(tg), TimeSeries(tg)};
  auto correct = [&](const std::vector<double>& e1, const std::vector<double>& e2) {
    const auto ie2 = fractional_integral(TimeSeries(tg, e2), 1.0 / 3.0);
    for (std::size_t k = 0; k < tg.size(); ++k) {
      h[0][k] += 2.0 * (M(0, 0) * e1[k] + M(0, 1) * ie2[k]);
      h[1][k] += 2.0 * (M(1, 0) * e1[k] + M(1, 1) * ie2[k]);
    }
  };
  correct(d1, d2);

  RepresentationResult res;
  const double scale = std::max({max_abs(d1), max_abs(d2), 1e-300});
  double best = INFINITY;
  int stalled = 0;
  auto best_h = h;
  for (int it = 0; it < opts.max_trace_iterations; ++it) {
    std::vector<double> v(tg.size(), 0.0), s(tg.size(), 0.0);
    for (int j = 0; j < 2; ++j) {
      h[j][0] = 0.0;
      ev[j]->sweep_points(h[j], idx, [&](std::size_t k, const std::vector<double>& vals) {
        v[k] += vals[0];
        for (std::size_t q = 0; q < width; ++q) s[k] += fw_w[1][q] * vals[q] / dx;
      });
    }
    std::vector<double> e1(tg.size()), e2(tg.size());
    double defect = 0.0;
    for (std::size_t k = 0; k < tg.size(); ++k) {
      e1[k] = d1[k] - v[k];
      e2[k] = d2[k] - s[k];
      defect = std::max({defect, std::abs(e1[k]), std::abs(e2[k])});
    }
    res.trace_iterations = it;
    if (defect < best) {
      best_h = h;
      res.trace_defect = defect;
    }
    if (defect <= opts.trace_tolerance * scale) break;
    // stagnation: the defect left is discretization noise the correction cannot remove
    stalled = defect > 0.9 * best ? stalled + 1 : 0;
    best = std::min(best, defect);
    if (stalled >= 2) break;
    e1[0] = 0.0;
    correct(e1, e2);
  }

  res.u = fw.u;
  for (int j = 0; j < 2; ++j) {
    ev[j]->sweep_rows(best_h[j], [&](std::size_t k, std::span<const double> r) {
      for (std::size_t i = 0; i < g.n; ++i) res.u.at(k, i) += theta[k] * r[i];
    });
  }
  return res;
}

inline SpaceTimeField linear_left_solution(const Field& phi, const TimeSeries& g1, const TimeSeries& g2,
                                           const LambdaPair& lp,
                                           ForcingKernelMode mode = ForcingKernelMode::DriftShifted,
                                           const ForcingOptions& opts = {}) {
  return linear_left_solution_detailed(phi, g1, g2, lp, mode, opts).u;
}

/// Relative L2 residual of the operational relation at time T:
/// J_+^lambda L0 I_{-lambda/3} f (x, T) (driftless kernel, direct x-integral) against phi_T.
/// Returns the absolute norm when phi_T vanishes.
inline double operational_relation_residual(const TimeSeries& f, double lambda, const Field& phi_T,
                                            ForcingOptions opts = {}) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw DomainError("operational_relation_residual: lambda must lie in (0, 1)");
  detail::check_forcing_input(f, "operational_relation_residual");
  const Grid1D& g = phi_T.grid;
  opts.path = ForcingPath::Direct;
  detail::ForcingPlan plan{lambda, ForcingSide::Plus, ForcingPath::Direct, 0.0};
  detail::ForcingEvaluator ev(plan, g.x_lo, g.dx(), g.n, f.tgrid, opts);
  std::vector<double> lhs(g.n, 0.0);
  const std::size_t last = f.tgrid.m;
  ev.sweep_rows(f, [&](std::size_t k, std::span<const double> r) {
    if (k == last) std::copy(r.begin(), r.end(), lhs.begin());
  });
  std::vector<double> diff(g.n);
  for (std::size_t i = 0; i < g.n; ++i) diff[i] = lhs[i] - phi_T.values[i];
  const double den = l2_norm(phi_T);
  const double num = l2_norm_samples(diff, g.dx());
  return den > 0.0 ? num / den : num;
}

}  // namespace kdv
