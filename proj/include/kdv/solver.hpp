#pragma once

// Crank-Nicolson solvers for u_t + u_x + u_xxx + c u u_x = 0 on truncated half-lines.
//
// Space is discretized with C1 cubic Hermite elements (dofs u and u_x at every node,
// interleaved), which makes the discrete energy identity exact: with homogeneous data,
// d/dt |u|^2 = -u_x(boundary)^2 for the right problem and -u_x(far end)^2 for the left one.
// A quadratic sponge damps outgoing radiation near the far end.

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kdv/banded.hpp"
#include "kdv/core.hpp"
#include "kdv/special.hpp"

namespace kdv {

enum class Side { RightHalfLine, LeftHalfLine };

inline const char* side_name(Side s) { return s == Side::RightHalfLine ? "right" : "left"; }

struct SpongeConfig {
  double width_fraction = 0.2;
  double strength = 20.0;

  void validate() const {
    if (!(width_fraction >= 0.05 && width_fraction <= 0.4))
      throw InvalidArgument("SpongeConfig: width must lie in [0.05, 0.4] of the domain");
    if (!(strength >= 0.0)) throw InvalidArgument("SpongeConfig: damping must be non-negative");
  }
};

/// Boundary data at the physical boundary (x_lo for the right problem, x_hi for the left).
/// An empty series means homogeneous data.
struct BoundaryConfig {
  Side side = Side::RightHalfLine;
  std::optional<TimeSeries> dirichlet;
  std::optional<TimeSeries> neumann;  // left problem only
  SpongeConfig sponge;
};

namespace detail {

struct HermiteBasis {
  std::array<double, 4> v, d1, d2;
};

inline HermiteBasis hermite_basis(double xi, double h) {
  HermiteBasis b;
  const double x2 = xi * xi, x3 = x2 * xi;
  b.v = {1 - 3 * x2 + 2 * x3, h * (xi - 2 * x2 + x3), 3 * x2 - 2 * x3, h * (-x2 + x3)};
  b.d1 = {(-6 * xi + 6 * x2) / h, 1 - 4 * xi + 3 * x2, (6 * xi - 6 * x2) / h, -2 * xi + 3 * x2};
  b.d2 = {(-6 + 12 * xi) / (h * h), (-4 + 6 * xi) / h, (6 - 12 * xi) / (h * h), (-2 + 6 * xi) / h};
  return b;
}

// Higher-precision Gauss-Legendre data for the 5-point rule.
inline const std::array<double, 5>& gauss_nodes() {
  static const std::array<double, 5> x = [] {
    const double a = std::sqrt(5.0 - 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
    const double b = std::sqrt(5.0 + 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
    return std::array<double, 5>{0.5 * (1 - b), 0.5 * (1 - a), 0.5, 0.5 * (1 + a), 0.5 * (1 + b)};
  }();
  return x;
}
inline const std::array<double, 5>& gauss_weights() {
  static const std::array<double, 5> w = [] {
    const double wa = (322.0 + 13.0 * std::sqrt(70.0)) / 900.0;
    const double wb = (322.0 - 13.0 * std::sqrt(70.0)) / 900.0;
    return std::array<double, 5>{0.5 * wb, 0.5 * wa, 0.5 * 128.0 / 225.0, 0.5 * wa, 0.5 * wb};
  }();
  return w;
}

}  // namespace detail

/// Nodal values plus fourth-order finite-difference slopes, interleaved (u_0, ux_0, u_1, ...).
inline std::vector<double> hermite_dofs_from_nodal(const std::vector<double>& u, double dx) {
  const auto ux = fd_derivative(u, dx, 1);
  std::vector<double> out(2 * u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    out[2 * i] = u[i];
    out[2 * i + 1] = ux[i];
  }
  return out;
}

/// Linear/nonlinear Crank-Nicolson stepper on a fixed grid.
///
/// Constrained dofs: u at both ends, and u_x at the physical boundary (left problem) or at the
/// far end (right problem). The remaining dofs are "free" and ordered contiguously so the
/// system matrix keeps half-bandwidth 3. Constrained dofs carrying data are "channels":
/// channel 0 is the Dirichlet value at the boundary, channel 1 (left problem) the Neumann value.
class HermiteKdV {
 public:
  HermiteKdV(const Grid1D& grid, const TimeGrid& tgrid, Side side, SpongeConfig sponge = {},
             double nonlinear_coeff = 1.0)
      : grid_(grid), tgrid_(tgrid), side_(side), sponge_(sponge), nl_coeff_(nonlinear_coeff) {
    grid_.validate();
    tgrid_.validate();
    sponge_.validate();
    if (grid_.n < 6) throw InvalidArgument("HermiteKdV: need at least 6 nodes");
    assemble();
  }

  const Grid1D& grid() const { return grid_; }
  const TimeGrid& tgrid() const { return tgrid_; }
  Side side() const { return side_; }
  std::size_t num_dofs() const { return 2 * grid_.n; }
  std::size_t num_free() const { return free_.size(); }
  std::size_t num_channels() const { return channels_.size(); }
  /// Global dof index carrying channel c.
  std::size_t channel_dof(std::size_t c) const { return channels_.at(c); }
  double nonlinear_coeff() const { return nl_coeff_; }

  double sigma(double x) const {
    const double len = grid_.x_hi - grid_.x_lo;
    const double w = sponge_.width_fraction * len;
    const double depth = side_ == Side::RightHalfLine ? x - (grid_.x_hi - w) : (grid_.x_lo + w) - x;
    if (depth <= 0.0) return 0.0;
    const double r = depth / w;
    return sponge_.strength * r * r;
  }

  /// Exact L2 norm of the piecewise cubic with dofs U.
  double l2_norm_dofs(const std::vector<double>& U) const {
    const auto MU = mass_full_.multiply(U);
    double s = 0.0;
    for (std::size_t i = 0; i < U.size(); ++i) s += U[i] * MU[i];
    return std::sqrt(std::max(0.0, s));
  }
  /// Mass-matrix inner product of two full dof vectors.
  double mass_inner(const std::vector<double>& a, const std::vector<double>& b) const {
    const auto Mb = mass_full_.multiply(b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * Mb[i];
    return s;
  }
  std::vector<double> mass_apply(const std::vector<double>& U) const { return mass_full_.multiply(U); }
  /// L2 norm over the sponge layer (approximate, from the cubic interpolant on each element).
  double sponge_l2(const std::vector<double>& U) const {
    double s = 0.0;
    const double h = grid_.dx();
    const auto& gx = detail::gauss_nodes();
    const auto& gw = detail::gauss_weights();
    for (std::size_t e = 0; e + 1 < grid_.n; ++e) {
      const double x0 = grid_.node(e);
      if (sigma(x0) == 0.0 && sigma(x0 + h) == 0.0) continue;
      for (int q = 0; q < 5; ++q) {
        const auto b = detail::hermite_basis(gx[q], h);
        double u = 0.0;
        for (int a = 0; a < 4; ++a) u += b.v[a] * U[2 * e + a];
        s += gw[q] * h * u * u;
      }
    }
    return std::sqrt(s);
  }

  std::vector<double> dofs_from_field(const Field& f) const {
    if (!(f.grid == grid_)) throw InvalidArgument("HermiteKdV: field grid mismatch");
    if (!all_finite(f.values)) throw InvalidArgument("HermiteKdV: non-finite initial data");
    return hermite_dofs_from_nodal(f.values, grid_.dx());
  }

  /// Load vector (s(., t), phi_i) over all dofs.
  std::vector<double> load_vector(const std::function<double(double)>& s) const {
    std::vector<double> F(num_dofs(), 0.0);
    const double h = grid_.dx();
    const auto& gx = detail::gauss_nodes();
    const auto& gw = detail::gauss_weights();
    for (std::size_t e = 0; e + 1 < grid_.n; ++e) {
      const double x0 = grid_.node(e);
      for (int q = 0; q < 5; ++q) {
        const auto b = detail::hermite_basis(gx[q], h);
        const double sv = s(x0 + gx[q] * h) * gw[q] * h;
        for (int a = 0; a < 4; ++a) F[2 * e + a] += sv * b.v[a];
      }
    }
    return F;
  }

  /// Skew-symmetric form of c u u_x: (c/3)[((w v)_x, phi_i) + (w v_x, phi_i)].
  std::vector<double> nonlinear_vector(const std::vector<double>& W, const std::vector<double>& V) const {
    std::vector<double> out(num_dofs(), 0.0);
    if (nl_coeff_ == 0.0) return out;
    const double h = grid_.dx();
    const auto& gx = detail::gauss_nodes();
    const auto& gw = detail::gauss_weights();
    for (std::size_t e = 0; e + 1 < grid_.n; ++e) {
      for (int q = 0; q < 5; ++q) {
        const auto b = detail::hermite_basis(gx[q], h);
        double w = 0, wx = 0, v = 0, vx = 0;
        for (int a = 0; a < 4; ++a) {
          w += b.v[a] * W[2 * e + a];
          wx += b.d1[a] * W[2 * e + a];
          v += b.v[a] * V[2 * e + a];
          vx += b.d1[a] * V[2 * e + a];
        }
        const double val = nl_coeff_ / 3.0 * (wx * v + 2.0 * w * vx) * gw[q] * h;
        for (int a = 0; a < 4; ++a) out[2 * e + a] += val * b.v[a];
      }
    }
    return out;
  }

  struct Run {
    SpaceTimeField u;
    std::vector<double> l2;            // exact L2 norm of the discrete solution per level
    std::vector<double> sponge_l2;     // L2 norm inside the sponge per level
    std::vector<double> final_dofs;
    std::vector<double> ux_boundary;   // u_x dof at the physical boundary per level
    std::vector<double> ux_far;        // u_x dof at the far end per level
    int max_picard = 0;
  };

  using Source = std::function<double(double, double)>;

  /// Runs from initial dofs U0 with channel data (one series per channel, empty = zero).
  Run run(const std::vector<double>& U0, const std::vector<std::optional<TimeSeries>>& data,
          const Source& source = nullptr, bool nonlinear = false) const {
    if (U0.size() != num_dofs()) throw InvalidArgument("HermiteKdV: initial dof count mismatch");
    const std::size_t m = tgrid_.m;
    const double dt = tgrid_.dt();
    auto channel_value = [&](std::size_t c, std::size_t k) {
      if (c >= data.size() || !data[c]) return 0.0;
      return data[c]->values.at(k);
    };
    for (const auto& d : data)
      if (d && (d->tgrid.m != m || !all_finite(d->values)))
        throw InvalidArgument("HermiteKdV: boundary data must be finite and match the time grid");

    std::vector<double> U = U0;
    for (std::size_t idx : fixed_) U[idx] = 0.0;
    for (std::size_t c = 0; c < channels_.size(); ++c) U[channels_[c]] = channel_value(c, 0);

    Run out;
    out.u = SpaceTimeField(grid_, tgrid_);
    out.l2.resize(m + 1);
    out.sponge_l2.resize(m + 1);
    out.ux_boundary.resize(m + 1);
    out.ux_far.resize(m + 1);
    record(out, 0, U);

    std::vector<double> F_old, F_new;
    if (source) F_old = load_vector([&](double x) { return source(x, tgrid_.t(0)); });

    std::vector<double> Uf(num_free());
    for (std::size_t k = 0; k < num_free(); ++k) Uf[k] = U[free_[k]];

    for (std::size_t n = 0; n < m; ++n) {
      std::vector<double> rhs = step_matrix_T_.multiply(Uf);
      for (std::size_t c = 0; c < channels_.size(); ++c) {
        const double dn1 = channel_value(c, n + 1), dn = channel_value(c, n);
        for (std::size_t k = 0; k < num_free(); ++k) rhs[k] += b1_[c][k] * dn1 + b0_[c][k] * dn;
      }
      if (source) {
        F_new = load_vector([&](double x) { return source(x, tgrid_.t(n + 1)); });
        for (std::size_t k = 0; k < num_free(); ++k)
          rhs[k] += 0.5 * dt * (F_new[free_[k]] + F_old[free_[k]]);
        F_old = F_new;
      }
      std::vector<double> Unew = U;
      for (std::size_t c = 0; c < channels_.size(); ++c) Unew[channels_[c]] = channel_value(c, n + 1);

      if (!nonlinear || nl_coeff_ == 0.0) {
        auto sol = lu_.solve(rhs);
        for (std::size_t k = 0; k < num_free(); ++k) Unew[free_[k]] = sol[k];
      } else {
        // Picard on the midpoint: every iterate uses the same factorization.
        for (std::size_t k = 0; k < num_free(); ++k) Unew[free_[k]] = Uf[k];
        bool converged = false;
        int it = 0;
        for (; it < kMaxPicard; ++it) {
          std::vector<double> mid(num_dofs());
          for (std::size_t i = 0; i < num_dofs(); ++i) mid[i] = 0.5 * (U[i] + Unew[i]);
          const auto N = nonlinear_vector(mid, mid);
          std::vector<double> r = rhs;
          for (std::size_t k = 0; k < num_free(); ++k) r[k] -= dt * N[free_[k]];
          lu_.solve_inplace(r);
          double diff = 0.0, norm = 0.0;
          for (std::size_t k = 0; k < num_free(); ++k) {
            diff = std::max(diff, std::abs(r[k] - Unew[free_[k]]));
            norm = std::max(norm, std::abs(r[k]));
            Unew[free_[k]] = r[k];
          }
          if (!std::isfinite(diff)) break;
          if (diff <= kPicardTol * std::max(norm, 1e-300) || norm == 0.0) {
            converged = true;
            ++it;
            break;
          }
        }
        out.max_picard = std::max(out.max_picard, it);
        if (!converged)
          throw SolverError("HermiteKdV: Picard iteration did not converge at step " +
                            std::to_string(n + 1) + " (t = " + std::to_string(tgrid_.t(n + 1)) + ")");
      }
      U = std::move(Unew);
      for (std::size_t k = 0; k < num_free(); ++k) Uf[k] = U[free_[k]];
      if (!all_finite(Uf)) throw SolverError("HermiteKdV: non-finite state");
      record(out, n + 1, U);
    }
    out.final_dofs = U;
    return out;
  }

  /// Final full dof vector for zero initial data driven by a single channel series c (c_0 ignored).
  std::vector<double> control_to_final(std::size_t channel, const std::vector<double>& c) const {
    const std::size_t m = tgrid_.m;
    if (c.size() != m + 1) throw InvalidArgument("control_to_final: series length mismatch");
    std::vector<double> Uf(num_free(), 0.0);
    for (std::size_t n = 0; n < m; ++n) {
      std::vector<double> rhs = step_matrix_T_.multiply(Uf);
      const double dn1 = c[n + 1], dn = n == 0 ? 0.0 : c[n];
      for (std::size_t k = 0; k < num_free(); ++k) rhs[k] += b1_[channel][k] * dn1 + b0_[channel][k] * dn;
      lu_.solve_inplace(rhs);
      Uf = std::move(rhs);
    }
    std::vector<double> U(num_dofs(), 0.0);
    for (std::size_t k = 0; k < num_free(); ++k) U[free_[k]] = Uf[k];
    U[channels_.at(channel)] = c[m];
    return U;
  }

  /// Final full dofs of the homogeneous-data linear evolution of U0.
  std::vector<double> free_evolution_final(const std::vector<double>& U0) const {
    std::vector<double> Uf(num_free());
    for (std::size_t k = 0; k < num_free(); ++k) Uf[k] = U0[free_[k]];
    for (std::size_t n = 0; n < tgrid_.m; ++n) {
      Uf = step_matrix_T_.multiply(Uf);
      lu_.solve_inplace(Uf);
    }
    std::vector<double> U(num_dofs(), 0.0);
    for (std::size_t k = 0; k < num_free(); ++k) U[free_[k]] = Uf[k];
    return U;
  }

  struct Transposed {
    std::vector<std::vector<double>> channel_grad;  // per channel, length m+1
    std::vector<double> initial_dual;               // full dof vector, pairs with U0
  };

  /// Reverse-mode transpose of the linear recursion: given a dual weight y on the final full
  /// state, returns d<y, U_m>/d(channel data) and d<y, U_m>/dU0.
  Transposed transpose_from_final(const std::vector<double>& y) const {
    const std::size_t m = tgrid_.m;
    Transposed out;
    out.channel_grad.assign(channels_.size(), std::vector<double>(m + 1, 0.0));
    std::vector<double> mu(num_free());
    for (std::size_t k = 0; k < num_free(); ++k) mu[k] = y[free_[k]];
    for (std::size_t c = 0; c < channels_.size(); ++c) out.channel_grad[c][m] += y[channels_[c]];
    for (std::size_t n = m; n-- > 0;) {
      std::vector<double> nu = lu_.solve(mu, true);
      for (std::size_t c = 0; c < channels_.size(); ++c) {
        double g1 = 0.0, g0 = 0.0;
        for (std::size_t k = 0; k < num_free(); ++k) {
          g1 += b1_[c][k] * nu[k];
          g0 += b0_[c][k] * nu[k];
        }
        out.channel_grad[c][n + 1] += g1;
        out.channel_grad[c][n] += g0;
      }
      mu = step_matrix_T_.multiply_transpose(nu);
    }
    out.initial_dual.assign(num_dofs(), 0.0);
    for (std::size_t k = 0; k < num_free(); ++k) out.initial_dual[free_[k]] = mu[k];
    return out;
  }

  /// Nodal values of a full dof vector.
  Field nodal(const std::vector<double>& U) const {
    Field f(grid_);
    for (std::size_t i = 0; i < grid_.n; ++i) f.values[i] = U[2 * i];
    return f;
  }

 private:
  static constexpr int kMaxPicard = 25;
  static constexpr double kPicardTol = 1e-10;

  void record(Run& out, std::size_t k, const std::vector<double>& U) const {
    for (std::size_t i = 0; i < grid_.n; ++i) out.u.at(k, i) = U[2 * i];
    out.l2[k] = l2_norm_dofs(U);
    out.sponge_l2[k] = sponge_l2(U);
    const std::size_t lo = 1, hi = 2 * grid_.n - 1;
    out.ux_boundary[k] = side_ == Side::RightHalfLine ? U[lo] : U[hi];
    out.ux_far[k] = side_ == Side::RightHalfLine ? U[hi] : U[lo];
  }

  void assemble() {
    const std::size_t nd = num_dofs();
    const double h = grid_.dx();
    mass_full_ = BandMatrix(nd, 3, 3);
    BandMatrix K(nd, 3, 3);
    const auto& gx = detail::gauss_nodes();
    const auto& gw = detail::gauss_weights();
    for (std::size_t e = 0; e + 1 < grid_.n; ++e) {
      const double x0 = grid_.node(e);
      for (int q = 0; q < 5; ++q) {
        const auto b = detail::hermite_basis(gx[q], h);
        const double w = gw[q] * h;
        const double sg = sigma(x0 + gx[q] * h);
        for (int i = 0; i < 4; ++i)
          for (int j = 0; j < 4; ++j) {
            mass_full_.at(2 * e + i, 2 * e + j) += w * b.v[j] * b.v[i];
            K.at(2 * e + i, 2 * e + j) +=
                w * (b.d1[j] * b.v[i] - b.d2[j] * b.d1[i] + sg * b.v[j] * b.v[i]);
          }
      }
    }
    const std::size_t u_lo = 0, ux_lo = 1, u_hi = nd - 2, ux_hi = nd - 1;
    std::vector<bool> fixed(nd, false);
    if (side_ == Side::RightHalfLine) {
      channels_ = {u_lo};
      fixed_ = {u_hi, ux_hi};
    } else {
      channels_ = {u_hi, ux_hi};
      fixed_ = {u_lo};
    }
    for (auto i : channels_) fixed[i] = true;
    for (auto i : fixed_) fixed[i] = true;
    free_.clear();
    for (std::size_t i = 0; i < nd; ++i)
      if (!fixed[i]) free_.push_back(i);

    const double dt = tgrid_.dt();
    const std::size_t nf = free_.size();
    BandMatrix S(nf, 3, 3);
    step_matrix_T_ = BandMatrix(nf, 3, 3);
    for (std::size_t a = 0; a < nf; ++a)
      for (std::size_t b = (a >= 3 ? a - 3 : 0); b < std::min(nf, a + 4); ++b) {
        const double mv = mass_full_.get(free_[a], free_[b]);
        const double kv = K.get(free_[a], free_[b]);
        if (mv == 0.0 && kv == 0.0) continue;
        S.at(a, b) = mv + 0.5 * dt * kv;
        step_matrix_T_.at(a, b) = mv - 0.5 * dt * kv;
      }
    b1_.assign(channels_.size(), std::vector<double>(nf, 0.0));
    b0_.assign(channels_.size(), std::vector<double>(nf, 0.0));
    for (std::size_t c = 0; c < channels_.size(); ++c)
      for (std::size_t a = 0; a < nf; ++a) {
        const double mv = mass_full_.get(free_[a], channels_[c]);
        const double kv = K.get(free_[a], channels_[c]);
        b1_[c][a] = -(mv + 0.5 * dt * kv);
        b0_[c][a] = mv - 0.5 * dt * kv;
      }
    lu_ = BandedLU(S);
  }

  Grid1D grid_;
  TimeGrid tgrid_;
  Side side_;
  SpongeConfig sponge_;
  double nl_coeff_;
  BandMatrix mass_full_;
  BandMatrix step_matrix_T_;
  BandedLU lu_;
  std::vector<std::size_t> free_, fixed_, channels_;
  std::vector<std::vector<double>> b1_, b0_;
};

// ---------------------------------------------------------------------------
// Free functions

namespace detail {
inline void check_side_grid(const Field& phi, const BoundaryConfig& bc) {
  (void)phi;
  bc.sponge.validate();
  if (bc.side == Side::RightHalfLine && bc.neumann)
    throw InvalidArgument("BoundaryConfig: the right half-line problem takes one boundary datum");
}
inline std::vector<std::optional<TimeSeries>> channel_data(const BoundaryConfig& bc) {
  if (bc.side == Side::RightHalfLine) return {bc.dirichlet};
  return {bc.dirichlet, bc.neumann};
}
}  // namespace detail

/// Full solver output for diagnostics.
inline HermiteKdV::Run solve_forward_run(const Field& phi, const BoundaryConfig& bc,
                                         const TimeGrid& tgrid, bool nonlinear,
                                         const HermiteKdV::Source& source = nullptr,
                                         double nonlinear_coeff = 1.0) {
  detail::check_side_grid(phi, bc);
  HermiteKdV solver(phi.grid, tgrid, bc.side, bc.sponge, nonlinear_coeff);
  return solver.run(solver.dofs_from_field(phi), detail::channel_data(bc), source, nonlinear);
}

inline SpaceTimeField solve_forward_linear(const Field& phi, const BoundaryConfig& bc,
                                           const TimeGrid& tgrid) {
  return solve_forward_run(phi, bc, tgrid, false).u;
}

inline SpaceTimeField solve_forward_nonlinear(const Field& phi, const BoundaryConfig& bc,
                                              const TimeGrid& tgrid) {
  return solve_forward_run(phi, bc, tgrid, true).u;
}

namespace detail {
inline Grid1D reflect(const Grid1D& g) { return Grid1D(-g.x_hi, -g.x_lo, g.n); }
inline Field reflect(const Field& f) {
  Field out(reflect(f.grid));
  for (std::size_t i = 0; i < f.size(); ++i) out.values[i] = f.values[f.size() - 1 - i];
  return out;
}
}  // namespace detail

/// Backward adjoint phi_t + phi_x + phi_xxx = 0, phi(T) = phi_T, by the reflection
/// x -> -x, t -> T - t. side = RightHalfLine imposes phi = phi_x = 0 at x = 0 (domain [0, X]);
/// side = LeftHalfLine imposes phi = 0 only (domain [-X, 0]).
inline SpaceTimeField solve_backward_adjoint(const Field& phi_T, Side side, const TimeGrid& tgrid,
                                             SpongeConfig sponge = {}) {
  const Field refl = detail::reflect(phi_T);
  BoundaryConfig bc;
  bc.side = side == Side::RightHalfLine ? Side::LeftHalfLine : Side::RightHalfLine;
  bc.sponge = sponge;
  const SpaceTimeField w = solve_forward_linear(refl, bc, tgrid);
  SpaceTimeField out(phi_T.grid, tgrid);
  const std::size_t n = phi_T.grid.n, m = tgrid.m;
  for (std::size_t k = 0; k <= m; ++k)
    for (std::size_t i = 0; i < n; ++i) out.at(k, i) = w.at(m - k, n - 1 - i);
  return out;
}

/// One-sided fourth-order trace of d^order u / dx^order at the physical boundary
/// (x_lo for the right half-line, x_hi for the left).
inline TimeSeries extract_traces(const SpaceTimeField& u, int order, Side side = Side::RightHalfLine) {
  if (order < 0 || order > 2) throw DomainError("extract_traces: order must be 0, 1 or 2");
  const std::size_t width = order == 2 ? 6 : 5;
  if (u.grid.n < width) throw DomainError("extract_traces: grid too narrow for the stencil");
  const double h = u.grid.dx();
  std::vector<double> xs(width);
  for (std::size_t j = 0; j < width; ++j)
    xs[j] = side == Side::RightHalfLine ? static_cast<double>(j) : -static_cast<double>(j);
  const auto w = fornberg_weights(0.0, xs, order);
  TimeSeries out(u.tgrid);
  const std::size_t n = u.grid.n;
  for (std::size_t k = 0; k < u.tgrid.size(); ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      const std::size_t i = side == Side::RightHalfLine ? j : n - 1 - j;
      s += w[order][j] * u.at(k, i);
    }
    out.values[k] = s / std::pow(h, order);
  }
  return out;
}

/// Relative residual of the mass identity
///   |u(t)|^2 = |u(0)|^2 +/- int_0^t [kappa u(0)^2 + 2 u(0) u_xx(0) - u_x(0)^2] dt'
/// (+ on the right half-line, - on the left). kappa = 1 accounts for the u_x drift term;
/// kappa = 0 gives the drift-free form.
inline double mass_identity_residual(const SpaceTimeField& u, Side side, double kappa = 1.0) {
  const auto u0 = extract_traces(u, 0, side);
  const auto u1 = extract_traces(u, 1, side);
  const auto u2 = extract_traces(u, 2, side);
  const double sgn = side == Side::RightHalfLine ? 1.0 : -1.0;
  const double dt = u.tgrid.dt();
  const std::size_t m = u.tgrid.m;
  std::vector<double> flux(m + 1), scale_flux(m + 1);
  for (std::size_t k = 0; k <= m; ++k) {
    flux[k] = kappa * u0[k] * u0[k] + 2.0 * u0[k] * u2[k] - u1[k] * u1[k];
    scale_flux[k] = kappa * u0[k] * u0[k] + 2.0 * std::abs(u0[k] * u2[k]) + u1[k] * u1[k];
  }
  const double e0 = std::pow(l2_norm_samples(u.row(0), u.grid.dx()), 2);
  const double scale = e0 + trapezoid(scale_flux, dt);
  if (scale == 0.0) return 0.0;
  double worst = 0.0, integral = 0.0;
  for (std::size_t k = 1; k <= m; ++k) {
    integral += 0.5 * dt * (flux[k - 1] + flux[k]);
    const double ek = std::pow(l2_norm_samples(u.row(k), u.grid.dx()), 2);
    worst = std::max(worst, std::abs(ek - e0 - sgn * integral));
  }
  return worst / scale;
}

/// int_0^T int_{x0}^{x0+1} u_x^2 dx dt with fourth-order differences and trapezoid sums.
inline double weighted_regularity_check(const SpaceTimeField& u, double x0) {
  const double h = u.grid.dx();
  std::vector<double> per_t(u.tgrid.size());
  for (std::size_t k = 0; k < u.tgrid.size(); ++k) {
    auto row = u.row(k);
    const auto ux = fd_derivative(std::vector<double>(row.begin(), row.end()), h, 1);
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < u.grid.n; ++i) {
      const double xa = u.grid.node(i), xb = u.grid.node(i + 1);
      const double a = std::max(xa, x0), b = std::min(xb, x0 + 1.0);
      if (b <= a) continue;
      s += (b - a) / h * 0.5 * (ux[i] * ux[i] + ux[i + 1] * ux[i + 1]) * h;
    }
    per_t[k] = s;
  }
  return trapezoid(per_t, u.tgrid.dt());
}

/// sup_t of the discrete H1 norm (trapezoid, fourth-order slopes).
inline double h1_sup_norm(const SpaceTimeField& u) {
  double best = 0.0;
  const double h = u.grid.dx();
  for (std::size_t k = 0; k < u.tgrid.size(); ++k) {
    auto row = u.row(k);
    std::vector<double> v(row.begin(), row.end());
    const auto ux = fd_derivative(v, h, 1);
    const double a = l2_norm_samples(v, h), b = l2_norm_samples(ux, h);
    best = std::max(best, std::sqrt(a * a + b * b));
  }
  return best;
}

}  // namespace kdv
