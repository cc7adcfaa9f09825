#pragma once

// Exact boundary control of the linear equation by the Hilbert uniqueness method: the Gram
// operator is assembled from the discrete transpose of the Crank-Nicolson recursion and
// inverted with conjugate gradients in the mass-matrix inner product.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "kdv/core.hpp"
#include "kdv/errors.hpp"
#include "kdv/solver.hpp"

namespace kdv {

enum class BoundaryRole { RightDirichlet, LeftNeumann, LeftDirichlet };

inline const char* role_name(BoundaryRole r) {
  switch (r) {
    case BoundaryRole::RightDirichlet: return "right_dirichlet";
    case BoundaryRole::LeftNeumann: return "left_neumann";
    case BoundaryRole::LeftDirichlet: return "left_dirichlet";
  }
  return "?";
}

inline Side side_of(BoundaryRole r) { return r == BoundaryRole::RightDirichlet ? Side::RightHalfLine : Side::LeftHalfLine; }

/// -1/3 for the Dirichlet roles, 0 for the Neumann role.
inline double default_trace_order(BoundaryRole r) { return r == BoundaryRole::LeftNeumann ? 0.0 : -1.0 / 3.0; }

struct ControlProblem {
  Side side = Side::RightHalfLine;
  BoundaryRole boundary_role = BoundaryRole::RightDirichlet;
  Field phi;
  Field phi_T;
  TimeGrid tgrid;
  double trace_norm_order = -1.0 / 3.0;
  SpongeConfig sponge;

  static ControlProblem make(BoundaryRole role, Field phi, Field phi_T, const TimeGrid& tg) {
    ControlProblem p;
    p.side = side_of(role);
    p.boundary_role = role;
    p.phi = std::move(phi);
    p.phi_T = std::move(phi_T);
    p.tgrid = tg;
    p.trace_norm_order = default_trace_order(role);
    p.validate();
    return p;
  }

  void validate() const {
    if (side != side_of(boundary_role)) throw InvalidArgument("ControlProblem: boundary role does not match the side");
    if (!(phi.grid == phi_T.grid)) throw InvalidArgument("ControlProblem: phi and phi_T must share a grid");
    if (phi.size() != phi.grid.n || phi_T.size() != phi_T.grid.n) throw InvalidArgument("ControlProblem: field size mismatch");
    if (!all_finite(phi.values) || !all_finite(phi_T.values)) throw InvalidArgument("ControlProblem: non-finite data");
    if (side == Side::RightHalfLine && phi.grid.x_lo != 0.0)
      throw InvalidArgument("ControlProblem: the right problem needs a grid starting at x = 0");
    if (side == Side::LeftHalfLine && phi.grid.x_hi != 0.0)
      throw InvalidArgument("ControlProblem: the left problem needs a grid ending at x = 0");
    if (!std::isfinite(trace_norm_order)) throw InvalidArgument("ControlProblem: trace norm order must be finite");
    tgrid.validate();
  }
};

struct ControlResult {
  TimeSeries control;
  Field achieved_final;
  double target_miss = 0.0;
  int cg_iterations = 0;
  double duality_residual = 0.0;
  double functional_value = 0.0;
  bool converged = true;
  std::string status = "success";
  std::vector<double> residual_history;  // relative CG residual after each iteration
};

/// The control-to-final map L, its transpose and the Gram operator G = L R L^T in dof space.
class HumOperator {
 public:
  explicit HumOperator(const ControlProblem& p)
      : problem_(p),
        solver_(p.phi.grid, p.tgrid, p.side, p.sponge, 0.0),
        channel_(p.boundary_role == BoundaryRole::LeftNeumann ? 1 : 0) {
    p.validate();
  }

  const HermiteKdV& solver() const { return solver_; }
  std::size_t channel() const { return channel_; }
  std::size_t num_dofs() const { return solver_.num_dofs(); }

  std::vector<double> dofs(const Field& f) const { return solver_.dofs_from_field(f); }
  double inner(const std::vector<double>& a, const std::vector<double>& b) const { return solver_.mass_inner(a, b); }
  double norm(const std::vector<double>& a) const { return solver_.l2_norm_dofs(a); }

  /// Boundary observation of the adjoint state with final data psi: (1/dt) L^T M psi, first sample masked.
  TimeSeries trace(const std::vector<double>& psi) const {
    const auto tr = solver_.transpose_from_final(solver_.mass_apply(psi));
    TimeSeries out(problem_.tgrid, tr.channel_grad[channel_]);
    const double inv_dt = 1.0 / problem_.tgrid.dt();
    for (auto& v : out.values) v *= inv_dt;
    out.values[0] = 0.0;
    return out;
  }

  /// Riesz representative of the trace in the control space.
  TimeSeries control_from_trace(const TimeSeries& tr) const {
    TimeSeries c(tr.tgrid, apply_time_multiplier(tr.values, tr.tgrid.dt(), 2.0 * problem_.trace_norm_order));
    c.values[0] = 0.0;
    return c;
  }

  std::vector<double> final_from_control(const TimeSeries& c) const { return solver_.control_to_final(channel_, c.values); }

  std::vector<double> gram(const std::vector<double>& psi) const { return final_from_control(control_from_trace(trace(psi))); }

  double trace_norm_sq(const TimeSeries& tr) const {
    const double n = sobolev_norm_time(tr, problem_.trace_norm_order);
    return n * n;
  }

  /// Full forward run from phi with control c on this role's channel; returns final dofs.
  std::vector<double> simulate(const TimeSeries& c) const {
    std::vector<std::optional<TimeSeries>> data(solver_.num_channels());
    data[channel_] = c;
    return solver_.run(dofs(problem_.phi), data).final_dofs;
  }

  std::vector<double> dofs_of_initial() const { return dofs(problem_.phi); }

  /// <U0, adjoint initial state> for final data psi.
  double initial_pairing(const std::vector<double>& psi) const {
    const auto tr = solver_.transpose_from_final(solver_.mass_apply(psi));
    const auto u0 = dofs_of_initial();
    double s = 0.0;
    for (std::size_t i = 0; i < u0.size(); ++i) s += u0[i] * tr.initial_dual[i];
    return s;
  }

 private:
  ControlProblem problem_;
  HermiteKdV solver_;
  std::size_t channel_;
};

/// J(psi) = 1/2 |trace psi|^2_{H^s} - <phi_T, psi> + <phi, psi(0)>.
inline double functional_J(const Field& psi_T, const ControlProblem& problem) {
  if (!all_finite(psi_T.values)) throw InvalidArgument("functional_J: non-finite psi_T");
  const HumOperator op(problem);
  const auto psi = op.dofs(psi_T);
  const double quad = 0.5 * op.trace_norm_sq(op.trace(psi));
  return quad - op.inner(op.dofs(problem.phi_T), psi) + op.initial_pairing(psi);
}

inline Field gram_apply(const Field& psi_T, const ControlProblem& problem) {
  if (!all_finite(psi_T.values)) throw InvalidArgument("gram_apply: non-finite psi_T");
  const HumOperator op(problem);
  return op.solver().nodal(op.gram(op.dofs(psi_T)));
}

struct HumOptions {
  int stagnation_window = 20;
  double psd_tolerance = 1e-8;
};

namespace detail {

struct CgOutcome {
  std::vector<double> psi;
  int iterations = 0;
  double relative_residual = 0.0;
  bool stagnated = false;
  std::vector<double> history;
};

// Conjugate gradients on G psi = rhs in the mass inner product, optionally warm-started.
// The best iterate (smallest residual) is returned.
inline CgOutcome hum_cg(const HumOperator& op, const std::vector<double>& rhs, double tol, int max_iter,
                        const HumOptions& opts, const std::vector<double>* guess = nullptr) {
  const std::size_t nd = rhs.size();
  CgOutcome out;
  out.psi.assign(nd, 0.0);
  std::vector<double> x(nd, 0.0), r = rhs;
  const double b_norm = op.norm(rhs);
  if (b_norm == 0.0) return out;
  bool check_psd = true;
  if (guess && op.norm(*guess) > 0.0) {
    x = *guess;
    const auto tr = op.trace(x);
    const auto Gx = op.final_from_control(op.control_from_trace(tr));
    for (std::size_t i = 0; i < nd; ++i) r[i] = rhs[i] - Gx[i];
  }
  std::vector<double> p = r;
  double rr = op.inner(r, r);
  double best = std::sqrt(std::max(rr, 0.0)) / b_norm;
  out.psi = x;
  int since_best = 0;
  int it = 0;
  for (; it < max_iter; ++it) {
    if (std::sqrt(std::max(rr, 0.0)) <= tol * b_norm) break;
    const auto tr = op.trace(p);
    const auto Gp = op.final_from_control(op.control_from_trace(tr));
    const double pGp = op.inner(p, Gp);
    if (check_psd) {
      const double expect = op.trace_norm_sq(tr);
      if (pGp < -opts.psd_tolerance * std::abs(expect) ||
          std::abs(pGp - expect) > opts.psd_tolerance * std::max(std::abs(expect), 1e-300))
        throw ConsistencyError("hum_solve: Gram operator failed the positivity check");
      check_psd = false;
    }
    if (!(pGp > 0.0)) break;
    const double alpha = rr / pGp;
    for (std::size_t i = 0; i < nd; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * Gp[i];
    }
    const double rr_new = op.inner(r, r);
    const double rel = std::sqrt(std::max(rr_new, 0.0)) / b_norm;
    out.history.push_back(rel);
    if (rel < best) {
      best = rel;
      out.psi = x;
      since_best = 0;
    } else if (++since_best >= opts.stagnation_window) {
      out.stagnated = true;
      ++it;
      break;
    }
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < nd; ++i) p[i] = r[i] + beta * p[i];
  }
  out.iterations = it;
  out.relative_residual = best;
  return out;
}

// Control from the minimizer, re-simulation, miss, duality and functional value.
inline ControlResult hum_result(const HumOperator& op, const std::vector<double>& target, const CgOutcome& cg,
                                double tol) {
  ControlResult res;
  res.cg_iterations = cg.iterations;
  res.residual_history = cg.history;
  const auto tr = op.trace(cg.psi);
  res.control = op.control_from_trace(tr);
  const auto final_dofs = op.simulate(res.control);
  res.achieved_final = op.solver().nodal(final_dofs);

  std::vector<double> miss(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) miss[i] = final_dofs[i] - target[i];
  const auto free_final = op.solver().free_evolution_final(op.dofs_of_initial());
  std::vector<double> reach(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) reach[i] = target[i] - free_final[i];
  const double scale = std::max(op.norm(target), op.norm(reach));
  res.target_miss = scale > 0.0 ? op.norm(miss) / scale : op.norm(miss);

  // dt <c, trace psi> = <u(T), psi>_M - <U0, psi(0)>
  const double lhs = time_pairing(res.control, tr);
  const double rhs_pair = op.inner(final_dofs, cg.psi) - op.initial_pairing(cg.psi);
  const double pair_scale = std::max({std::abs(lhs), std::abs(rhs_pair), 1e-300});
  res.duality_residual = (lhs == 0.0 && rhs_pair == 0.0) ? 0.0 : std::abs(lhs - rhs_pair) / pair_scale;

  res.functional_value = 0.5 * op.trace_norm_sq(tr) - op.inner(target, cg.psi) + op.initial_pairing(cg.psi);
  res.converged = cg.relative_residual <= tol;
  if (!res.converged) res.status = cg.stagnated ? "stagnated" : "max_iterations";
  return res;
}

inline std::vector<double> reachable_part(const HumOperator& op, const std::vector<double>& target) {
  const auto free_final = op.solver().free_evolution_final(op.dofs_of_initial());
  std::vector<double> rhs(target.size());
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = target[i] - free_final[i];
  return rhs;
}

}  // namespace detail

/// Conjugate gradients on G psi = phi_T - free(phi)(T) in the mass inner product.
inline ControlResult hum_solve(const ControlProblem& problem, double tol, int max_iter, const HumOptions& opts = {}) {
  if (!(tol > 0.0)) throw InvalidArgument("hum_solve: tol must be positive");
  if (max_iter < 1) throw InvalidArgument("hum_solve: max_iter must be positive");
  const HumOperator op(problem);
  const auto target = op.dofs(problem.phi_T);
  const auto cg = detail::hum_cg(op, detail::reachable_part(op, target), tol, max_iter, opts);
  return detail::hum_result(op, target, cg, tol);
}

// ---------------------------------------------------------------------------
// Observability sampling

struct ObservabilitySetup {
  double T = 1.0;
  std::size_t m = 200;
  double domain_length = 20.0;
  std::size_t nodes = 401;
  double support = 4.0;  // random states live within this distance of the boundary
  std::size_t modes = 6;
};

struct RatioStats {
  double max = 0.0;
  double median = 0.0;
  double min = 0.0;
  std::size_t samples = 0;
};

namespace detail {

inline Grid1D observation_grid(Side side, const ObservabilitySetup& s) {
  return side == Side::RightHalfLine ? Grid1D(0.0, s.domain_length, s.nodes) : Grid1D(-s.domain_length, 0.0, s.nodes);
}

// Distance from the boundary scaled to [0, 1] over the support.
inline double support_coordinate(Side side, double x, double support) {
  return (side == Side::RightHalfLine ? x : -x) / support;
}

inline double observability_ratio(const HumOperator& op, const Field& psi_T) {
  const auto psi = op.dofs(psi_T);
  const double num = op.inner(psi, psi);
  const double den = op.trace_norm_sq(op.trace(psi));
  if (num == 0.0) throw InvalidArgument("observability_ratio: zero state");
  return den > 0.0 ? num / den : std::numeric_limits<double>::infinity();
}

inline RatioStats ratio_stats(std::vector<double> r) {
  RatioStats s;
  s.samples = r.size();
  if (r.empty()) return s;
  std::sort(r.begin(), r.end());
  s.min = r.front();
  s.max = r.back();
  const std::size_t n = r.size();
  s.median = n % 2 ? r[n / 2] : 0.5 * (r[n / 2 - 1] + r[n / 2]);
  return s;
}

inline ControlProblem observation_problem(Side side, const Grid1D& g, const ObservabilitySetup& s) {
  const BoundaryRole role = side == Side::RightHalfLine ? BoundaryRole::RightDirichlet : BoundaryRole::LeftNeumann;
  return ControlProblem::make(role, Field(g), Field(g), TimeGrid(s.T, s.m));
}

}  // namespace detail

/// Ratios |phi_T|^2 / |trace|^2_{H^s} over random smooth final states
/// phi_T = bump(y) sum_j a_j sin(j pi y), a_j ~ N(0, 1/j^2), y the scaled distance to the boundary.
inline RatioStats observability_ratio_sample(Side side, std::size_t ensemble_size, std::uint64_t seed,
                                             const ObservabilitySetup& setup = {}) {
  if (ensemble_size < 10) throw InvalidArgument("observability_ratio_sample: ensemble_size must be >= 10");
  if (setup.modes < 1) throw InvalidArgument("observability_ratio_sample: need at least one mode");
  const Grid1D g = detail::observation_grid(side, setup);
  const HumOperator op(detail::observation_problem(side, g, setup));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> ratios;
  while (ratios.size() < ensemble_size) {
    std::vector<double> a(setup.modes);
    double energy = 0.0;
    for (std::size_t j = 0; j < setup.modes; ++j) {
      a[j] = normal(rng) / static_cast<double>(j + 1);
      energy += a[j] * a[j];
    }
    if (energy == 0.0) continue;  // the zero state has no ratio
    const Field psi = Field::sample(g, [&](double x) {
      const double y = detail::support_coordinate(side, x, setup.support);
      double v = 0.0;
      for (std::size_t j = 0; j < setup.modes; ++j) v += a[j] * std::sin((j + 1) * std::numbers::pi * y);
      return smooth_bump(y, 0.0, 1.0) * v;
    });
    ratios.push_back(detail::observability_ratio(op, psi));
  }
  return detail::ratio_stats(std::move(ratios));
}

struct CriticalLengthRow {
  double L = 0.0;
  double min_ratio = 0.0;  // minimum over the modulation grid
  double max_ratio = 0.0;  // maximum over the modulation grid
  bool finite = true;
};

/// For each L the final states bump(x/L) cos(lambda x) with lambda on a fixed grid are observed on the right
/// half-line; a vanishing trace would show up as an infinite ratio.
inline std::vector<CriticalLengthRow> critical_length_probe(const std::vector<double>& L_values,
                                                            const ObservabilitySetup& setup = {}) {
  std::vector<CriticalLengthRow> table;
  if (L_values.empty()) return table;
  const double L_max = *std::max_element(L_values.begin(), L_values.end());
  if (!(L_max > 0.0)) throw InvalidArgument("critical_length_probe: lengths must be positive");
  ObservabilitySetup s = setup;
  s.domain_length = std::max(setup.domain_length, 3.0 * L_max + 10.0);
  const double dx = setup.domain_length / static_cast<double>(setup.nodes - 1);
  s.nodes = static_cast<std::size_t>(std::ceil(s.domain_length / dx)) + 1;
  const Grid1D g = detail::observation_grid(Side::RightHalfLine, s);
  const HumOperator op(detail::observation_problem(Side::RightHalfLine, g, s));
  const std::vector<double> lambdas = {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
  for (double L : L_values) {
    if (!(L > 0.0)) throw InvalidArgument("critical_length_probe: lengths must be positive");
    CriticalLengthRow row;
    row.L = L;
    row.min_ratio = std::numeric_limits<double>::infinity();
    for (double lam : lambdas) {
      const Field psi = Field::sample(g, [&](double x) { return smooth_bump(x / L, 0.0, 1.0) * std::cos(lam * x); });
      const double r = detail::observability_ratio(op, psi);
      row.min_ratio = std::min(row.min_ratio, r);
      row.max_ratio = std::max(row.max_ratio, r);
    }
    row.finite = std::isfinite(row.max_ratio);
    table.push_back(row);
  }
  return table;
}

}  // namespace kdv
