#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "chainflow/cost.hpp"
#include "chainflow/grid.hpp"
#include "chainflow/tangent.hpp"
#include "chainflow/upwind_euler.hpp"
#include "chainflow/wft.hpp"

namespace chainflow {

enum class Backend { Upwind, FrontTracking };

// Piecewise-constant reading of a sampled density row, in local coordinates.
inline StepFunction project_cells(const std::vector<double>& row, double dx) {
  StepFunction f;
  f.knots.reserve(row.size());
  f.values = row;
  for (std::size_t i = 0; i < row.size(); ++i) f.knots.push_back(static_cast<double>(i) * dx);
  return f;
}

// L1 distance of two step functions over [lo, hi].
inline double l1_distance(const StepFunction& a, const StepFunction& b, double lo, double hi) {
  std::vector<double> cuts = clip_knots(merge_knots(a.knots, b.knots), lo, hi);
  double d = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double mid = 0.5 * (cuts[i] + cuts[i + 1]);
    d += std::abs(a(mid) - b(mid)) * (cuts[i + 1] - cuts[i]);
  }
  return d;
}

struct SolverDistance {
  double density = 0.0;  // sum over processors of the L1 density gap
  double queue = 0.0;    // sum over queues of the load gap
  double total = 0.0;
};

// L1 gap between the discrete and the front-tracking state at time t.
inline SolverDistance solver_distance(const UETrajectory& ue, const WftSolution& wft, double t) {
  if (ue.chain.size() != wft.chain.size())
    throw std::invalid_argument("solver_distance: chain size mismatch");
  SolverDistance d;
  for (std::size_t j = 0; j < ue.chain.size(); ++j) {
    StepFunction coarse = project_cells(ue.row_at(j, ue.step_at(j, t)), ue.grid.dx);
    StepFunction fine = wft.profile_at(j, t);
    d.density += l1_distance(coarse, fine, 0.0, ue.chain.processors[j].length);
  }
  for (std::size_t i = 0; i + 1 < ue.chain.size(); ++i)
    d.queue += std::abs(ue.queue_at(i, t) - wft.queue_at(i, t));
  d.total = d.density + d.queue;
  return d;
}

struct ConvergenceRow {
  int refinement = 0;
  double dx = 0.0;
  double distance = 0.0;   // solver_distance total at the snapshot time
  double ratio = 0.0;      // previous distance / this distance
  bool has_ratio = false;
  double mass_error = 0.0;       // UE absolute mass defect
  std::size_t emptying_events = 0;  // queue-emptying windows flagged by UE
};

// Refinement study of the discrete solver against the exact one.  The control
// is re-quantized to each refinement's step (coarse lattices embed in finer
// ones, so breakpoints are preserved).
inline std::vector<ConvergenceRow> convergence_study(const SupplyChain& chain,
                                                     const InflowControl& control,
                                                     const CostSpec& spec, double base_dx,
                                                     const std::vector<int>& refinements,
                                                     double snapshot_time) {
  if (refinements.empty())
    throw std::invalid_argument("convergence_study: need at least one refinement");
  WftSolution exact = wft_solve(chain, control, spec);
  std::vector<ConvergenceRow> rows;
  for (int nu : refinements) {
    Grid grid = build_grid(chain, base_dx, nu, control.horizon);
    InflowControl quantized(control.horizon, grid.dt_control(), control.breakpoints,
                            control.levels);
    UETrajectory traj = ue_simulate(chain, quantized, grid);
    ConvergenceRow row;
    row.refinement = nu;
    row.dx = grid.dx;
    row.distance = solver_distance(traj, exact, snapshot_time).total;
    row.mass_error = traj.mass_balance_error();
    for (const auto& windows : traj.emptying_steps) row.emptying_events += windows.size();
    if (!rows.empty() && row.distance > 0.0) {
      row.ratio = rows.back().distance / row.distance;
      row.has_ratio = true;
    }
    rows.push_back(row);
  }
  return rows;
}

inline CostBreakdown evaluate_cost(const SupplyChain& chain, const InflowControl& control,
                                   const CostSpec& spec, Backend backend, const Grid* grid) {
  if (backend == Backend::Upwind) {
    if (grid == nullptr) throw std::invalid_argument("evaluate_cost: upwind backend needs a grid");
    return cost_ue(ue_simulate(chain, control, *grid), spec);
  }
  return wft_solve(chain, control, spec).cost;
}

struct FdGradient {
  std::vector<double> values;
  std::vector<bool> valid;  // false: a probe collapsed the control, no estimate
  double step = 0.0;        // offset used per side (one control quantum)
};

// Central finite differences with one-quantum offsets.  A component whose
// probe merges, crosses, or expels a breakpoint carries no valid estimate.
inline FdGradient fd_gradient(const SupplyChain& chain, const InflowControl& control,
                              const CostSpec& spec, Backend backend, const Grid* grid) {
  const std::size_t K = control.breakpoints.size();
  FdGradient fd;
  fd.step = control.quantum;
  fd.values.assign(K, 0.0);
  fd.valid.assign(K, false);
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<double> offsets(K, 0.0);
    offsets[k] = fd.step;
    InflowControl up = shift_control(control, offsets);
    offsets[k] = -fd.step;
    InflowControl down = shift_control(control, offsets);
    if (up.breakpoints.size() != K || down.breakpoints.size() != K) continue;
    const double j_up = evaluate_cost(chain, up, spec, backend, grid).total;
    const double j_down = evaluate_cost(chain, down, spec, backend, grid).total;
    fd.values[k] = (j_up - j_down) / (2.0 * fd.step);
    fd.valid[k] = true;
  }
  return fd;
}

// Stationarity threshold under which tangent and difference gradients are
// both treated as zero when compared.
inline double gradient_noise_floor(double quantum, double cost_total) {
  return 10.0 * quantum * (1.0 + std::abs(cost_total));
}

}  // namespace chainflow
