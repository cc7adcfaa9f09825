#pragma once

// Contour-integral (unified transform) and Bona-type boundary integral solutions of the
// zero-initial-data Dirichlet problem on the right half-line, u_t + u_x + u_xxx = 0.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "kdv/core.hpp"
#include "kdv/errors.hpp"
#include "kdv/representation.hpp"
#include "kdv/special.hpp"

namespace kdv {

/// w(k) = k - k^3; the time symbol of the linear operator.
inline cplx utm_symbol(cplx k) { return k - k * k * k; }

/// Im k (3 (Re k)^2 - (Im k)^2 - 1); zero on the boundary of D.
inline double utm_boundary_relation(cplx k) {
  const double a = k.real(), b = k.imag();
  return b * (3.0 * a * a - b * b - 1.0);
}

enum class ContourOrientation { RegionOnLeft };

/// Quadrature on the positively oriented boundary of D_R^+.
/// piece: 0 left arc, 1 real segment or excision curve, 2 right arc.
struct Contour {
  std::vector<cplx> nodes;
  std::vector<cplx> weights;
  std::vector<int> piece;
  ContourOrientation orientation = ContourOrientation::RegionOnLeft;
  double R = 0.0;
  double truncation = 0.0;

  std::size_t size() const { return nodes.size(); }
};

namespace detail {

inline const double kInvSqrt3 = 1.0 / std::sqrt(3.0);

// Right arc point with imaginary part b.
inline cplx right_arc(double b) { return {std::sqrt((b * b + 1.0) / 3.0), b}; }
inline cplx right_arc_tangent(double b) { return {b / (3.0 * std::sqrt((b * b + 1.0) / 3.0)), 1.0}; }

// Imaginary part on the arc where |k| equals r.
inline double arc_height(double r) { return std::sqrt(std::max(0.0, (3.0 * r * r - 1.0) / 4.0)); }

// Appends a graded Gauss-Legendre rule for int_{b0}^{b1} g(k(b)) k'(b) db on the right arc,
// with nodes clustered toward b0 through b = b0 + (b1 - b0) s^2.
inline void append_right_arc(Contour& c, double b0, double b1, std::size_t panels,
                             const std::pair<std::vector<double>, std::vector<double>>& gl) {
  const auto& [gx, gw] = gl;
  for (std::size_t p = 0; p < panels; ++p) {
    const double s0 = static_cast<double>(p) / panels, s1 = static_cast<double>(p + 1) / panels;
    for (std::size_t j = 0; j < gx.size(); ++j) {
      const double s = 0.5 * (s0 + s1) + 0.5 * (s1 - s0) * gx[j];
      const double b = b0 + (b1 - b0) * s * s;
      const double db = (b1 - b0) * 2.0 * s * 0.5 * (s1 - s0) * gw[j];
      c.nodes.push_back(right_arc(b));
      c.weights.push_back(right_arc_tangent(b) * db);
      c.piece.push_back(2);
    }
  }
}

// Solves k - k^3 = w by Newton from the guess k.
inline cplx invert_symbol(cplx w, cplx k) {
  for (int it = 0; it < 60; ++it) {
    const cplx step = (utm_symbol(k) - w) / (1.0 - 3.0 * k * k);
    k -= step;
    if (std::abs(step) < 1e-15 * (1.0 + std::abs(k))) break;
  }
  return k;
}

}  // namespace detail

/// Boundary of D_R^+ truncated at |k| = truncation.
/// R = 0 keeps the full boundary; R > 0 replaces the part with |w(k)| <= R by the level curve |w| = R.
inline Contour build_utm_contour(double R, double truncation, std::size_t n_nodes) {
  if (!(R >= 0.0) || !std::isfinite(R)) throw DomainError("build_utm_contour: R must be >= 0");
  if (!(truncation > std::max(2.0, R)) || !std::isfinite(truncation))
    throw DomainError("build_utm_contour: truncation must exceed max(2, R)");
  if (n_nodes < 64) throw DomainError("build_utm_contour: need at least 64 nodes");

  constexpr std::size_t kOrder = 16;
  const auto gl = gauss_legendre(kOrder);
  const std::size_t per_piece = std::max<std::size_t>(1, n_nodes / (3 * kOrder));

  Contour c;
  c.R = R;
  c.truncation = truncation;
  const double b_top = detail::arc_height(truncation);
  const double w_junction = std::abs(utm_symbol(detail::kInvSqrt3));

  // Start of the right arc: the junction, or the point where w(k) = R once R passes the junction value.
  double b_start = 0.0;
  if (R > w_junction) {
    double lo = 0.0, hi = b_top;
    if (std::abs(utm_symbol(detail::right_arc(hi))) <= R)
      throw DomainError("build_utm_contour: truncation lies inside the excised disc");
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (std::abs(utm_symbol(detail::right_arc(mid))) > R ? hi : lo) = mid;
    }
    b_start = hi;
  }

  Contour right;
  detail::append_right_arc(right, b_start, b_top, per_piece, gl);

  // Left arc is the mirror k -> -conj(k), traversed downward.
  for (std::size_t j = right.size(); j-- > 0;) {
    c.nodes.push_back(-std::conj(right.nodes[j]));
    c.weights.push_back(std::conj(right.weights[j]));
    c.piece.push_back(0);
  }

  const auto& [gx, gw] = gl;
  if (R == 0.0) {
    // Real segment, graded toward both junctions.
    for (std::size_t p = 0; p < per_piece; ++p) {
      const double s0 = static_cast<double>(p) / per_piece, s1 = static_cast<double>(p + 1) / per_piece;
      for (std::size_t j = 0; j < kOrder; ++j) {
        const double s = 0.5 * (s0 + s1) + 0.5 * (s1 - s0) * gx[j];
        const double u = 2.0 * s - 1.0;
        const double k = detail::kInvSqrt3 * std::sin(0.5 * std::numbers::pi * u);
        const double dk = detail::kInvSqrt3 * 0.5 * std::numbers::pi * std::cos(0.5 * std::numbers::pi * u) * 2.0 *
                          0.5 * (s1 - s0) * gw[j];
        c.nodes.emplace_back(k, 0.0);
        c.weights.emplace_back(dk, 0.0);
        c.piece.push_back(1);
      }
    }
  } else {
    // Level curve w = R e^{i theta}, theta from pi down to 0, continued from the right start point.
    const cplx k_start = R > w_junction ? detail::right_arc(b_start)
                                        : detail::invert_symbol(cplx(R, 0.0), cplx(0.5 * detail::kInvSqrt3, 0.0));
    const std::size_t panels = per_piece;
    std::vector<cplx> ks, ws;
    std::vector<double> thetas;
    cplx guess = k_start;
    for (std::size_t p = 0; p < panels; ++p) {
      const double t0 = std::numbers::pi * p / panels, t1 = std::numbers::pi * (p + 1) / panels;
      for (std::size_t j = 0; j < kOrder; ++j) {
        const double th = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * gx[j];
        // march the Newton guess along theta in small steps
        const double th_prev = thetas.empty() ? 0.0 : thetas.back();
        for (int s = 1; s <= 8; ++s)
          guess = detail::invert_symbol(R * std::exp(cplx(0.0, th_prev + (th - th_prev) * s / 8.0)), guess);
        const cplx w = R * std::exp(cplx(0.0, th));
        ks.push_back(guess);
        // dk = w'(theta) / (1 - 3k^2) dtheta; sign flipped below for the reversed traversal
        ws.push_back(cplx(0.0, 1.0) * w / (1.0 - 3.0 * guess * guess) * (0.5 * (t1 - t0) * gw[j]));
        thetas.push_back(th);
      }
    }
    for (std::size_t j = ks.size(); j-- > 0;) {
      c.nodes.push_back(ks[j]);
      c.weights.push_back(-ws[j]);
      c.piece.push_back(1);
    }
  }

  for (std::size_t j = 0; j < right.size(); ++j) {
    c.nodes.push_back(right.nodes[j]);
    c.weights.push_back(right.weights[j]);
    c.piece.push_back(2);
  }
  return c;
}

namespace detail {

inline void check_utm_input(const TimeSeries& f, const char* who) {
  const double scale = std::max(1.0, max_abs(f.values));
  if (std::abs(f.values.front()) > 1e-8 * scale) throw PreconditionError(std::string(who) + ": f(0) must vanish");
}

// Per-node time transforms F(k, t_n) = int_0^{t_n} e^{-i w(k) (t_n - t')} f(t') dt' on the time grid.
class UtmTransforms {
 public:
  UtmTransforms(const TimeSeries& f, const Contour& c) : f_(f), c_(c), table_(c.size()) {
    for (std::size_t j = 0; j < c.size(); ++j)
      table_[j] = causal_exponential_convolution(f.values, f.tgrid.dt(), cplx(0.0, -1.0) * utm_symbol(c.nodes[j]));
  }

  // Transform at an arbitrary t in [0, T], finishing the last partial step on the linear interpolant.
  cplx at(std::size_t j, double t) const {
    const auto& tg = f_.tgrid;
    const double dt = tg.dt();
    std::size_t n = static_cast<std::size_t>(std::floor(t / dt + 1e-12));
    if (n >= tg.m) return table_[j][tg.m];
    const double tau = t - tg.t(n);
    if (tau <= 1e-14 * dt) return table_[j][n];
    const cplx a = cplx(0.0, -1.0) * utm_symbol(c_.nodes[j]);
    const double theta = tau / dt;
    const double f_end = (1.0 - theta) * f_.values[n] + theta * f_.values[n + 1];
    const auto [w_old, w_new] = exponential_linear_weights(a * tau, tau);
    return std::exp(a * tau) * table_[j][n] + w_old * f_.values[n] + w_new * f_end;
  }
  const std::vector<cplx>& at_nodes(std::size_t j) const { return table_[j]; }

 private:
  const TimeSeries& f_;
  const Contour& c_;
  std::vector<std::vector<cplx>> table_;
};

inline double utm_real_part(cplx z, double scale, const char* who) {
  if (std::abs(z.imag()) > 1e-6 * std::max({std::abs(z.real()), scale, 1e-300}))
    throw ConsistencyError(std::string(who) + ": imaginary residue " + std::to_string(z.imag()) + " exceeds tolerance");
  return z.real();
}

inline double linear_sample(const TimeSeries& f, double t) {
  const double dt = f.tgrid.dt();
  const std::size_t n = std::min(f.tgrid.m - 1, static_cast<std::size_t>(std::floor(t / dt)));
  const double theta = std::clamp(t / dt - static_cast<double>(n), 0.0, 1.0);
  return (1.0 - theta) * f.values[n] + theta * f.values[n + 1];
}

// At x = 0 the arcs beyond the truncation contribute f(t)/2 to leading order (the integrand is ~3i f(t)/k there);
// for x > 0 the same tail is O(e^{-x Im k}) at the truncation and is dropped.
inline double utm_boundary_tail(const TimeSeries& f, double x, double t) {
  return x == 0.0 ? 0.5 * linear_sample(f, t) : 0.0;
}

inline cplx utm_sum(const Contour& c, const UtmTransforms& tr, double x, double t) {
  // Symmetric pairs are summed in a fixed order so the result is reproducible.
  cplx s = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) {
    const cplx k = c.nodes[j];
    s += std::exp(cplx(0.0, 1.0) * k * x) * (3.0 * k * k - 1.0) * tr.at(j, t) * c.weights[j];
  }
  return -s / (2.0 * std::numbers::pi);
}

}  // namespace detail

/// Contour-integral solution at (x, t); t' integrated on the piecewise-linear interpolant of f.
inline double utm_evaluate(const TimeSeries& f, const Contour& contour, double x, double t) {
  if (!(x >= 0.0)) throw DomainError("utm_evaluate: x must be >= 0");
  if (t < 0.0 || t > f.tgrid.T * (1.0 + 1e-12)) throw DomainError("utm_evaluate: t outside [0, T]");
  detail::check_utm_input(f, "utm_evaluate");
  const detail::UtmTransforms tr(f, contour);
  return detail::utm_real_part(detail::utm_sum(contour, tr, x, t), max_abs(f.values), "utm_evaluate") +
         detail::utm_boundary_tail(f, x, t);
}

/// Same as utm_evaluate on grid x times; the time transforms are computed once.
inline SpaceTimeField utm_evaluate_grid(const TimeSeries& f, const Contour& contour, const Grid1D& grid,
                                        const TimeGrid& times) {
  if (grid.x_lo < 0.0) throw DomainError("utm_evaluate_grid: grid must lie in x >= 0");
  if (times.T > f.tgrid.T * (1.0 + 1e-12)) throw DomainError("utm_evaluate_grid: times exceed the horizon of f");
  detail::check_utm_input(f, "utm_evaluate_grid");
  const detail::UtmTransforms tr(f, contour);
  const double scale = max_abs(f.values);
  SpaceTimeField u(grid, times);
  const std::size_t nk = contour.size();
  std::vector<std::vector<cplx>> ft(times.size(), std::vector<cplx>(nk));
  for (std::size_t n = 0; n < times.size(); ++n)
    for (std::size_t j = 0; j < nk; ++j) ft[n][j] = tr.at(j, times.t(n));
  std::vector<cplx> kern(nk);
  for (std::size_t i = 0; i < grid.n; ++i) {
    const double x = grid.node(i);
    for (std::size_t j = 0; j < nk; ++j) {
      const cplx k = contour.nodes[j];
      kern[j] = std::exp(cplx(0.0, 1.0) * k * x) * (3.0 * k * k - 1.0) * contour.weights[j];
    }
    for (std::size_t n = 0; n < times.size(); ++n) {
      cplx s = 0.0;
      for (std::size_t j = 0; j < nk; ++j) s += kern[j] * ft[n][j];
      u.at(n, i) = detail::utm_real_part(-s / (2.0 * std::numbers::pi), scale, "utm_evaluate_grid") +
                   detail::utm_boundary_tail(f, x, times.t(n));
    }
  }
  return u;
}

/// Square root of 3 mu^2 - 4 below the turning point 2/sqrt(3).
/// Causal takes -i sqrt(4 - 3 mu^2), the limit of the decaying root as the time frequency gains a negative
/// imaginary part; Principal takes +i sqrt(4 - 3 mu^2).
enum class BonaBranch { Causal, Principal };

struct BonaResult {
  double value = 0.0;
  double tail_bound = 0.0;  // bound on the discarded mu > mu_max contribution
  bool accuracy_warning = false;
};

namespace detail {

inline const double kTurningPoint = 2.0 / std::sqrt(3.0);

// Bona quadrature in mu with the half-transforms fhat(mu) = int_0^T e^{-i w(mu) xi} f(xi) dxi, w = mu^3 - mu.
class BonaQuadrature {
 public:
  BonaQuadrature(const TimeSeries& f, double mu_max, BonaBranch branch) : mu_max_(mu_max), branch_(branch) {
    constexpr std::size_t kOrder = 16;
    const auto [gx, gw] = gauss_legendre(kOrder);
    const double T = f.tgrid.T;
    auto add = [&](double mu, double wt) {
      mu_.push_back(mu);
      w_.push_back(wt);
    };
    // Square-root grading on both sides of the turning point.
    const double tp = kTurningPoint;
    const double side_lo = std::sqrt(tp - 1.0);
    const double tp_hi = tp + 0.5;
    const double side_hi = std::sqrt(tp_hi - tp);
    for (std::size_t p = 0; p < 8; ++p) {
      const double s0 = side_lo * p / 8, s1 = side_lo * (p + 1) / 8;
      for (std::size_t j = 0; j < kOrder; ++j) {
        const double s = 0.5 * (s0 + s1) + 0.5 * (s1 - s0) * gx[j];
        add(tp - s * s, 2.0 * s * 0.5 * (s1 - s0) * gw[j]);
      }
    }
    for (std::size_t p = 0; p < 8; ++p) {
      const double s0 = side_hi * p / 8, s1 = side_hi * (p + 1) / 8;
      for (std::size_t j = 0; j < kOrder; ++j) {
        const double s = 0.5 * (s0 + s1) + 0.5 * (s1 - s0) * gx[j];
        add(tp + s * s, 2.0 * s * 0.5 * (s1 - s0) * gw[j]);
      }
    }
    // Beyond: panels uniform in w(mu) so each covers at most half an oscillation of e^{i w (t - xi)}.
    const double w0 = symbol(tp_hi), w1 = symbol(mu_max);
    const double width = std::numbers::pi / std::max(T, 1.0);
    const std::size_t panels = static_cast<std::size_t>(std::ceil((w1 - w0) / width));
    for (std::size_t p = 0; p < panels; ++p) {
      const double a0 = w0 + (w1 - w0) * p / panels, a1 = w0 + (w1 - w0) * (p + 1) / panels;
      for (std::size_t j = 0; j < kOrder; ++j) {
        const double w = 0.5 * (a0 + a1) + 0.5 * (a1 - a0) * gx[j];
        const double mu = invert(w);
        add(mu, 0.5 * (a1 - a0) * gw[j] / (3.0 * mu * mu - 1.0));
      }
    }
    fhat_.resize(mu_.size());
    const double dt = f.tgrid.dt();
    for (std::size_t j = 0; j < mu_.size(); ++j) {
      const double w = symbol(mu_[j]);
      // int_0^T e^{i w (T - xi)} f dxi, then shift by e^{-i w T}
      const auto conv = causal_exponential_convolution(f.values, dt, cplx(0.0, w));
      fhat_[j] = std::exp(cplx(0.0, -w * T)) * conv.back();
    }
    tail_scale_ = std::abs(f.values.back()) + total_variation(f.values);
  }

  static double symbol(double mu) { return mu * mu * mu - mu; }
  static double invert(double w) {
    double mu = std::max(1.0, std::cbrt(w) + 0.5);
    for (int it = 0; it < 60; ++it) {
      const double step = (symbol(mu) - w) / (3.0 * mu * mu - 1.0);
      mu -= step;
      if (std::abs(step) < 1e-15 * mu) break;
    }
    return mu;
  }
  // Spatial rate (sqrt(3 mu^2 - 4) + i mu) / 2; both branches vanish continuously at the turning point.
  cplx rate(double mu) const {
    const double d = 3.0 * mu * mu - 4.0;
    const double below = branch_ == BonaBranch::Causal ? -1.0 : 1.0;
    const cplx root = d >= 0.0 ? cplx(std::sqrt(d), 0.0) : cplx(0.0, below * std::sqrt(-d));
    return 0.5 * (root + cplx(0.0, mu));
  }

  double evaluate(double x, double t) const {
    cplx s = 0.0;
    for (std::size_t j = 0; j < mu_.size(); ++j) {
      const double mu = mu_[j];
      s += std::exp(cplx(0.0, symbol(mu) * t) - rate(mu) * x) * (3.0 * mu * mu - 1.0) * fhat_[j] * w_[j];
    }
    return 2.0 * (s / (2.0 * std::numbers::pi)).real();
  }

  // Bound on 2 Re (1/2pi) int_{mu_max}^inf ... using |fhat| <= (|f(T)| + TV f) / w(mu) and sqrt(3mu^2-4) >= 1.7 mu.
  double tail_bound(double x) const {
    if (x <= 0.0) return std::numeric_limits<double>::infinity();
    const double mu = mu_max_;
    const double density = (3.0 * mu * mu - 1.0) / symbol(mu);
    return tail_scale_ / std::numbers::pi * density * std::exp(-0.85 * mu * x) / (0.85 * x);
  }
  std::size_t size() const { return mu_.size(); }

 private:
  double mu_max_;
  BonaBranch branch_;
  std::vector<double> mu_, w_;
  std::vector<cplx> fhat_;
  double tail_scale_ = 0.0;
};

inline void check_bona_args(const TimeSeries& f, double mu_max, const char* who) {
  if (!(mu_max >= 10.0) || !std::isfinite(mu_max)) throw DomainError(std::string(who) + ": mu_max must be >= 10");
  check_utm_input(f, who);
}

}  // namespace detail

/// W_b f (x, t) = 2 Re U_b f; the mu integral is truncated at mu_max and the truncation bound is reported.
inline BonaResult bona_Wb_evaluate_detailed(const TimeSeries& f, double x, double t, double mu_max,
                                            BonaBranch branch = BonaBranch::Causal) {
  if (!(x >= 0.0)) throw DomainError("bona_Wb_evaluate: x must be >= 0");
  detail::check_bona_args(f, mu_max, "bona_Wb_evaluate");
  const detail::BonaQuadrature q(f, mu_max, branch);
  BonaResult r;
  r.value = q.evaluate(x, t);
  r.tail_bound = q.tail_bound(x);
  r.accuracy_warning = !(r.tail_bound <= 1e-6 * std::max(1.0, max_abs(f.values)));
  return r;
}

inline double bona_Wb_evaluate(const TimeSeries& f, double x, double t, double mu_max,
                               BonaBranch branch = BonaBranch::Causal) {
  return bona_Wb_evaluate_detailed(f, x, t, mu_max, branch).value;
}

/// W_b f on grid x times; max tail bound over the grid in *tail if given.
inline SpaceTimeField bona_Wb_evaluate_grid(const TimeSeries& f, const Grid1D& grid, const TimeGrid& times,
                                            double mu_max, double* tail = nullptr,
                                            BonaBranch branch = BonaBranch::Causal) {
  if (grid.x_lo < 0.0) throw DomainError("bona_Wb_evaluate_grid: grid must lie in x >= 0");
  detail::check_bona_args(f, mu_max, "bona_Wb_evaluate_grid");
  const detail::BonaQuadrature q(f, mu_max, branch);
  SpaceTimeField u(grid, times);
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.n; ++i) {
    worst = std::max(worst, q.tail_bound(grid.node(i)));
    for (std::size_t n = 0; n < times.size(); ++n) u.at(n, i) = q.evaluate(grid.node(i), times.t(n));
  }
  if (tail) *tail = worst;
  return u;
}

struct CrossResiduals {
  double forcing_vs_utm = 0.0;
  double forcing_vs_bona = 0.0;
  double bona_vs_utm = 0.0;
};

struct CrossOptions {
  double contour_truncation = 40.0;
  std::size_t contour_nodes = 1536;
  double mu_max = 20.0;
  double lambda = 0.0;
  ForcingOptions forcing;
};

namespace detail {

// Relative L2 difference over the sampled grid, normalized by the larger of the two.
inline double relative_difference(const SpaceTimeField& a, const SpaceTimeField& b) {
  double d = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t j = 0; j < a.values.size(); ++j) {
    d += (a.values[j] - b.values[j]) * (a.values[j] - b.values[j]);
    na += a.values[j] * a.values[j];
    nb += b.values[j] * b.values[j];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale > 0.0 ? std::sqrt(d) / scale : std::sqrt(d);
}

// Samples u on the coarse evaluation grid by nearest-node lookup; grids are chosen to nest.
inline SpaceTimeField restrict_to(const SpaceTimeField& u, const Grid1D& g, const TimeGrid& tg) {
  SpaceTimeField out(g, tg);
  for (std::size_t n = 0; n < tg.size(); ++n) {
    const std::size_t kn = static_cast<std::size_t>(std::lround(tg.t(n) / u.tgrid.dt()));
    for (std::size_t i = 0; i < g.n; ++i) {
      const std::size_t ki = static_cast<std::size_t>(std::lround((g.node(i) - u.grid.x_lo) / u.grid.dx()));
      if (std::abs(u.tgrid.t(kn) - tg.t(n)) > 1e-9 * tg.T || std::abs(u.grid.node(ki) - g.node(i)) > 1e-9 * (1.0 + std::abs(g.node(i))))
        throw InvalidArgument("cross_representation_residuals: evaluation grid does not nest in the solution grid");
      out.at(n, i) = u.at(kn, ki);
    }
  }
  return out;
}

}  // namespace detail

/// Pairwise relative L2 differences of the forcing-operator, contour and W_b solutions for boundary data f,
/// compared on eval_grid x eval_times. The forcing solution uses f's own time grid and a spatial step dx.
inline CrossResiduals cross_representation_residuals(const TimeSeries& f, const Grid1D& eval_grid,
                                                     const TimeGrid& eval_times, double dx,
                                                     const CrossOptions& opts = {}) {
  if (eval_grid.x_lo < 0.0) throw DomainError("cross_representation_residuals: evaluation grid must lie in x >= 0");
  if (!(dx > 0.0)) throw InvalidArgument("cross_representation_residuals: dx must be positive");
  if (max_abs(f.values) == 0.0) return {};

  const auto nx = static_cast<std::size_t>(std::lround(eval_grid.x_hi / dx));
  const Grid1D fine(0.0, nx * dx, nx + 1);
  const Field zero(fine);
  const auto forcing = detail::restrict_to(linear_right_solution(zero, f, opts.lambda, ForcingKernelMode::DriftShifted, opts.forcing),
                                           eval_grid, eval_times);

  const Contour c = build_utm_contour(0.0, opts.contour_truncation, opts.contour_nodes);
  const auto utm = utm_evaluate_grid(f, c, eval_grid, eval_times);
  const auto bona = bona_Wb_evaluate_grid(f, eval_grid, eval_times, opts.mu_max);

  CrossResiduals r;
  r.forcing_vs_utm = detail::relative_difference(forcing, utm);
  r.forcing_vs_bona = detail::relative_difference(forcing, bona);
  r.bona_vs_utm = detail::relative_difference(bona, utm);
  return r;
}

}  // namespace kdv
