#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "chainflow/chain.hpp"
#include "chainflow/control.hpp"
#include "chainflow/grid.hpp"

namespace chainflow {

/*
 * First-order upwind / explicit Euler discretization.
 *
 * With dt_j = dx / v_j the upwind update of the linear flux v_j rho is an
 * exact transport step: every cell takes its left neighbour's value and the
 * boundary cell takes f_inc / v_j. Densities are therefore never stored as a
 * full (j, n, i) tensor; any row can be reconstructed from the boundary intake
 * history and the initial samples (see row_at).
 *
 * Queues advance by explicit Euler on their own processor's clock. The intake
 * rate is mu_j while the queue is loaded and min(upstream flux, mu_j) when it
 * is empty; a step that would drive the load negative clamps to zero and is
 * flagged as an emptying event.
 */

// Intake rate of the processor behind a queue with load q.
inline double inflow_rate(double q, double upstream_flux, double max_rate) {
  return q > 0.0 ? max_rate : std::min(upstream_flux, max_rate);
}

struct QueueStep {
  double next;
  bool emptied;
};

inline QueueStep euler_queue_step(double q, double upstream_flux, double intake, double dt) {
  double unclamped = q + dt * (upstream_flux - intake);
  bool emptied = q > 0.0 && unclamped <= 0.0;
  return {std::max(unclamped, 0.0), emptied};
}

// Shift a density row one cell downstream, feeding the boundary value in.
inline void upwind_step(std::vector<double>& row, double boundary_value) {
  for (std::size_t i = row.size() - 1; i > 0; --i) row[i] = row[i - 1];
  row[0] = boundary_value;
}

struct UETrajectory {
  SupplyChain chain;
  Grid grid;
  std::vector<std::vector<double>> initial_cells;        // [j][i]
  std::vector<std::vector<double>> intake;               // [j][n], n < M_j: applied f_inc
  std::vector<std::vector<double>> exit_density;         // [j][n], n <= M_j: last-cell value
  std::vector<std::vector<double>> queues;               // [i][n], queue before processor i+1
  std::vector<std::vector<std::size_t>> emptying_steps;  // [i]: windows n with q^n > 0, q^{n+1} = 0
  double clamp_added = 0.0;                              // mass created by clamping queues at zero

  std::size_t step_at(std::size_t j, double t) const {
    auto n = static_cast<std::size_t>(std::floor(t / grid.dt[j] + 1e-9));
    return std::min(n, grid.steps[j]);
  }

  // Reconstruct the density row of processor j at step n from the shift
  // structure: cell i entered the chain as boundary intake n - i steps ago,
  // or is an initial sample that has moved i - (i - n) ... n cells right.
  std::vector<double> row_at(std::size_t j, std::size_t n) const {
    const std::size_t cells = grid.cells[j];
    std::vector<double> row(cells);
    for (std::size_t i = 0; i < cells; ++i) {
      if (i + 1 <= n)
        row[i] = intake[j][n - 1 - i] / chain.processors[j].velocity;
      else
        row[i] = initial_cells[j][i - n];
    }
    return row;
  }

  std::vector<double> outflow_trace() const {
    const std::size_t last = chain.size() - 1;
    std::vector<double> out(exit_density[last].size());
    for (std::size_t n = 0; n < out.size(); ++n)
      out[n] = chain.processors[last].velocity * exit_density[last][n];
    return out;
  }

  // Linear interpolation of the queue series (the natural continuous reading
  // of the Euler polygon).
  double queue_at(std::size_t i, double t) const {
    const std::size_t j = i + 1;
    double x = t / grid.dt[j];
    auto n0 = static_cast<std::size_t>(std::floor(x));
    if (n0 + 1 >= queues[i].size()) return queues[i].back();
    double w = x - static_cast<double>(n0);
    return (1.0 - w) * queues[i][n0] + w * queues[i][n0 + 1];
  }

  double mass_initial() const {
    double m = 0.0;
    for (std::size_t j = 0; j < chain.size(); ++j)
      for (double rho : initial_cells[j]) m += rho * grid.dx;
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) m += chain.initial_queues[i];
    return m;
  }
  double mass_final() const {
    double m = 0.0;
    for (std::size_t j = 0; j < chain.size(); ++j)
      for (double rho : row_at(j, grid.steps[j])) m += rho * grid.dx;
    for (const auto& q : queues) m += q.back();
    return m;
  }
  double mass_in() const {
    double m = 0.0;
    for (std::size_t n = 0; n < intake[0].size(); ++n) m += intake[0][n] * grid.dt[0];
    return m;
  }
  double mass_out() const {
    const std::size_t last = chain.size() - 1;
    double m = 0.0;
    for (std::size_t n = 0; n + 1 < exit_density[last].size(); ++n)
      m += chain.processors[last].velocity * exit_density[last][n] * grid.dt[last];
    return m;
  }
  // Absolute defect of initial + in = final + out over the full window span.
  double mass_balance_error() const {
    return std::abs(mass_initial() + mass_in() - mass_final() - mass_out());
  }
};

// Upstream flux feeding queue j over its window [n dt_j, (n+1) dt_j).
// Finer-or-equal upstream clocks are consumed as an exact overlap-weighted
// time average; a coarser upstream clock is point-sampled at the substep
// containing the window start.
inline double aggregate_upstream_flux(const UETrajectory& traj, std::size_t j, std::size_t n) {
  const double dt_up = traj.grid.dt[j - 1];
  const double dt_dn = traj.grid.dt[j];
  const double v_up = traj.chain.processors[j - 1].velocity;
  const std::vector<double>& exit_up = traj.exit_density[j - 1];
  const std::size_t last_window = exit_up.size() - 2;  // windows are 0 .. M_up - 1
  auto flux = [&](std::size_t m) { return v_up * exit_up[std::min(m, last_window)]; };

  if (dt_up == dt_dn) return flux(n);
  if (dt_up < dt_dn) {
    const double t0 = static_cast<double>(n) * dt_dn;
    const double t1 = t0 + dt_dn;
    auto m = static_cast<std::size_t>(std::max(0.0, std::floor(t0 / dt_up)));
    double sum = 0.0;
    while (static_cast<double>(m) * dt_up < t1) {
      double lo = std::max(static_cast<double>(m) * dt_up, t0);
      double hi = std::min(static_cast<double>(m + 1) * dt_up, t1);
      if (hi > lo) sum += (hi - lo) * flux(m);
      ++m;
    }
    return sum / dt_dn;
  }
  auto m = static_cast<std::size_t>(std::floor(static_cast<double>(n) * dt_dn / dt_up));
  return flux(m);
}

inline UETrajectory ue_simulate(const SupplyChain& chain, const InflowControl& control,
                                const Grid& grid) {
  const std::size_t P = chain.size();
  if (grid.dt.size() != P) throw std::invalid_argument("ue_simulate: grid/chain mismatch");
  {
    ValidationReport report = validate_chain(chain);
    if (!report.ok())
      throw std::invalid_argument("invalid chain: " + report.issues.front().message);
  }
  if (!on_lattice(control.quantum, grid.dt_control()) ||
      !on_lattice(grid.dt_control(), control.quantum))
    throw std::invalid_argument("ue_simulate: control quantum must equal the first processor's step");
  if (!control.quantized())
    throw std::invalid_argument("ue_simulate: control breakpoints must sit on the step lattice");
  for (double lvl : control.levels)
    if (lvl > chain.processors[0].max_rate * (1.0 + 1e-12))
      throw std::invalid_argument("ue_simulate: control level exceeds the first processor's rate");

  UETrajectory traj;
  traj.chain = chain;
  traj.grid = grid;
  traj.initial_cells.resize(P);
  traj.intake.resize(P);
  traj.exit_density.resize(P);
  traj.queues.resize(P == 0 ? 0 : P - 1);
  traj.emptying_steps.resize(P == 0 ? 0 : P - 1);

  for (std::size_t j = 0; j < P; ++j) {
    const Processor& proc = chain.processors[j];
    const std::size_t M = grid.steps[j];
    const double dt = grid.dt[j];

    std::vector<double> row = sample_initial(proc, grid.dx);
    traj.initial_cells[j] = row;
    traj.intake[j].resize(M);
    traj.exit_density[j].resize(M + 1);
    traj.exit_density[j][0] = row.back();

    double q = 0.0;
    if (j > 0) {
      traj.queues[j - 1].resize(M + 1);
      q = chain.initial_queues[j - 1];
      traj.queues[j - 1][0] = q;
    }

    for (std::size_t n = 0; n < M; ++n) {
      double f_inc;
      if (j == 0) {
        f_inc = control(grid.time(0, n));
      } else {
        const double f_up = aggregate_upstream_flux(traj, j, n);
        f_inc = inflow_rate(q, f_up, proc.max_rate);
        QueueStep s = euler_queue_step(q, f_up, f_inc, dt);
        if (s.emptied) traj.emptying_steps[j - 1].push_back(n);
        double unclamped = q + dt * (f_up - f_inc);
        if (unclamped < 0.0) traj.clamp_added += -unclamped;
        q = s.next;
        traj.queues[j - 1][n + 1] = q;
      }
      traj.intake[j][n] = f_inc;
      upwind_step(row, f_inc / proc.velocity);
      traj.exit_density[j][n + 1] = row.back();
    }
  }
  return traj;
}

}  // namespace chainflow
