#pragma once

// Control of u_t + u_x + u_xxx + c u u_x = 0 by iterating the linear control map on a target
// corrected for the nonlinear drift: f_n = Lambda(phi, phi_T + [lin(f_{n-1}) - nonlin(f_{n-1})](T)).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "kdv/core.hpp"
#include "kdv/errors.hpp"
#include "kdv/hum.hpp"
#include "kdv/solver.hpp"

namespace kdv {

struct GammaIterationRecord {
  int iteration = 0;
  double diff_norm = 0.0;       // |f_n - f_{n-1}| / |f_n|, 0 at the first record
  double target_miss = 0.0;     // nonlinear final state against phi_T
  double control_norm = 0.0;    // L2(0, T)
  double solution_norm = 0.0;   // max_t |u(t)|_{L2}
};

struct GammaIterationTrace {
  std::vector<GammaIterationRecord> records;
};

struct GammaOptions {
  double nonlinear_coeff = 1.0;
  double hum_tol = 1e-4;
  int hum_max_iter = 200;
  int divergence_window = 3;  // consecutive increases of diff_norm that end the run
  HumOptions hum;
};

struct GammaOutcome {
  ControlResult result;
  GammaIterationTrace trace;
  int outer_iterations = 0;
  bool converged = false;
  std::string status;
};

namespace detail {

inline double l2_time(const TimeSeries& f) { return l2_norm(f); }

inline std::vector<std::optional<TimeSeries>> role_data(const HermiteKdV& s, std::size_t channel, const TimeSeries& c) {
  std::vector<std::optional<TimeSeries>> data(s.num_channels());
  data[channel] = c;
  return data;
}

inline double relative_dof_miss(const HumOperator& op, const std::vector<double>& got, const std::vector<double>& want,
                                double scale) {
  std::vector<double> d(got.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = got[i] - want[i];
  return scale > 0.0 ? op.norm(d) / scale : op.norm(d);
}

}  // namespace detail

/// Outer loop around hum_solve. Fails fast when |phi| + |phi_T| exceeds delta_guard.
inline GammaOutcome gamma_fixed_point(const ControlProblem& problem, double delta_guard, double tol, int max_outer,
                                      const GammaOptions& opts = {}) {
  if (!(tol > 0.0)) throw InvalidArgument("gamma_fixed_point: tol must be positive");
  if (max_outer < 1) throw InvalidArgument("gamma_fixed_point: max_outer must be positive");
  problem.validate();
  const double data_norm = l2_norm(problem.phi) + l2_norm(problem.phi_T);
  if (!(data_norm <= delta_guard))
    throw PreconditionError("gamma_fixed_point: data norm " + std::to_string(data_norm) + " exceeds the guard " +
                            std::to_string(delta_guard));

  const HumOperator op(problem);
  const HermiteKdV nl(problem.phi.grid, problem.tgrid, problem.side, problem.sponge, opts.nonlinear_coeff);
  const auto U0 = nl.dofs_from_field(problem.phi);
  const auto target = op.dofs(problem.phi_T);
  const double target_scale = std::max(op.norm(target), op.norm(detail::reachable_part(op, target)));

  GammaOutcome out;
  auto nonlinear_run = [&](const TimeSeries& c) { return nl.run(U0, detail::role_data(nl, op.channel(), c), nullptr, true); };
  auto linear_final = [&](const TimeSeries& c) { return nl.run(U0, detail::role_data(nl, op.channel(), c)).final_dofs; };
  auto record = [&](int n, double diff, const TimeSeries& c, const HermiteKdV::Run& run) {
    GammaIterationRecord r;
    r.iteration = n;
    r.diff_norm = diff;
    r.target_miss = detail::relative_dof_miss(op, run.final_dofs, target, target_scale);
    r.control_norm = detail::l2_time(c);
    r.solution_norm = *std::max_element(run.l2.begin(), run.l2.end());
    out.trace.records.push_back(r);
    return r;
  };

  std::vector<double> adjusted = target;
  auto cg = detail::hum_cg(op, detail::reachable_part(op, adjusted), opts.hum_tol, opts.hum_max_iter, opts.hum);
  ControlResult current = detail::hum_result(op, adjusted, cg, opts.hum_tol);
  auto run = nonlinear_run(current.control);
  record(0, 0.0, current.control, run);

  int increases = 0;
  double last_diff = std::numeric_limits<double>::infinity();
  out.status = "max_outer";
  for (int n = 1; n <= max_outer; ++n) {
    const auto lin = linear_final(current.control);
    std::vector<double> next(target.size());
    for (std::size_t i = 0; i < next.size(); ++i) next[i] = target[i] + (lin[i] - run.final_dofs[i]);

    ControlResult candidate;
    if (next == adjusted) {
      candidate = current;  // same target, same control
    } else {
      adjusted = std::move(next);
      cg = detail::hum_cg(op, detail::reachable_part(op, adjusted), opts.hum_tol, opts.hum_max_iter, opts.hum, &cg.psi);
      candidate = detail::hum_result(op, adjusted, cg, opts.hum_tol);
    }

    std::vector<double> delta(current.control.size());
    for (std::size_t k = 0; k < delta.size(); ++k) delta[k] = candidate.control[k] - current.control[k];
    const double cn = detail::l2_time(candidate.control);
    const double dn = l2_norm_samples(delta, problem.tgrid.dt());
    const double diff = cn > 0.0 ? dn / cn : dn;

    current = std::move(candidate);
    run = nonlinear_run(current.control);
    record(n, diff, current.control, run);
    out.outer_iterations = n;

    if (diff <= tol) {
      out.converged = true;
      out.status = "converged";
      break;
    }
    increases = diff > last_diff ? increases + 1 : 0;
    last_diff = diff;
    if (increases >= opts.divergence_window) {
      out.status = "contraction_failure";
      break;
    }
  }

  // Independent re-simulation with a fresh solver instance.
  const HermiteKdV fresh(problem.phi.grid, problem.tgrid, problem.side, problem.sponge, opts.nonlinear_coeff);
  const auto check = fresh.run(fresh.dofs_from_field(problem.phi), detail::role_data(fresh, op.channel(), current.control),
                               nullptr, true);
  current.achieved_final = fresh.nodal(check.final_dofs);
  current.target_miss = detail::relative_dof_miss(op, check.final_dofs, target, target_scale);
  current.converged = out.converged;
  current.status = out.status;
  out.result = std::move(current);
  return out;
}

struct DeltaCalibration {
  double delta = 0.0;       // data norm |phi| + |phi_T| at the largest convergent scale
  double scale = 0.0;       // that scale
  bool monotone = true;     // no convergent scale above a divergent one on the grid
  std::string diagnostic;
};

/// Empirical smallness threshold: sweeps the scale grid, then bisects between the last convergent
/// and the first failing scale. The value depends on the discretization and the template.
inline DeltaCalibration delta_calibration(const ControlProblem& problem_template, const std::vector<double>& scale_grid,
                                          double tol = 1e-2, int max_outer = 20, int bisections = 4,
                                          const GammaOptions& opts = {}) {
  if (scale_grid.empty()) throw InvalidArgument("delta_calibration: empty scale grid");
  for (std::size_t i = 1; i < scale_grid.size(); ++i)
    if (!(scale_grid[i] > scale_grid[i - 1])) throw InvalidArgument("delta_calibration: scale grid must increase");
  const double unit = l2_norm(problem_template.phi) + l2_norm(problem_template.phi_T);
  if (!(unit > 0.0)) throw InvalidArgument("delta_calibration: template data must be nonzero");

  auto converges = [&](double s) {
    ControlProblem p = problem_template;
    for (auto& v : p.phi.values) v *= s;
    for (auto& v : p.phi_T.values) v *= s;
    try {
      return gamma_fixed_point(p, std::numeric_limits<double>::infinity(), tol, max_outer, opts).converged;
    } catch (const SolverError&) {
      return false;
    }
  };

  DeltaCalibration cal;
  std::vector<bool> ok(scale_grid.size());
  for (std::size_t i = 0; i < scale_grid.size(); ++i) ok[i] = converges(scale_grid[i]);
  std::size_t first_fail = scale_grid.size();
  for (std::size_t i = 0; i < ok.size(); ++i)
    if (!ok[i]) {
      first_fail = i;
      break;
    }
  for (std::size_t i = first_fail; i < ok.size(); ++i)
    if (ok[i]) cal.monotone = false;
  if (first_fail == 0) {
    cal.diagnostic = "no scale on the grid converged";
    return cal;
  }
  double lo = scale_grid[first_fail - 1];
  if (first_fail == scale_grid.size()) {
    cal.diagnostic = "every scale converged; delta is a lower bound";
  } else {
    double hi = scale_grid[first_fail];
    for (int b = 0; b < bisections; ++b) {
      const double mid = 0.5 * (lo + hi);
      (converges(mid) ? lo : hi) = mid;
    }
    cal.diagnostic = cal.monotone ? "bisected" : "convergence set is not an interval on the grid";
  }
  cal.scale = lo;
  cal.delta = lo * unit;
  return cal;
}

}  // namespace kdv
