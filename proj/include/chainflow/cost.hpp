#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "chainflow/piecewise.hpp"
#include "chainflow/upwind_euler.hpp"

namespace chainflow {

// J = J1 + J2 with
//   J1 = sum over queues of  int_0^T alpha1(t) q_j(t) dt
//   J2 = int_0^T alpha2(t) (outflow(t) - psi(t))^2 dt
// where outflow is v_P times the exit density of the last processor.
struct CostSpec {
  StepFunction alpha1 = StepFunction::constant(0.0);
  StepFunction alpha2 = StepFunction::constant(0.0);
  StepFunction psi_steps = StepFunction::constant(0.0);
  LinearInterpolant psi_ramp;  // used instead of psi_steps when psi_is_linear
  bool psi_is_linear = false;

  double psi(double t) const { return psi_is_linear ? psi_ramp(t) : psi_steps(t); }
  std::vector<double> psi_knots() const {
    return psi_is_linear ? psi_ramp.knots : psi_steps.knots;
  }
};

struct CostBreakdown {
  std::vector<double> j1_by_queue;
  double j1 = 0.0;
  double j2 = 0.0;
  double total = 0.0;
};

// Exact integral of alpha2 (out - psi)^2 for a piecewise-constant outflow.
// Pieces are cut at every knot of the three functions; on each piece the
// integrand is constant (step psi) or quadratic (linear psi, handled by a
// Simpson rule, exact for quadratics).
inline double tracking_cost(const StepFunction& outflow, const CostSpec& spec, double horizon) {
  std::vector<double> cuts = merge_knots(outflow.knots, spec.alpha2.knots);
  cuts = merge_knots(cuts, spec.psi_knots());
  cuts = clip_knots(cuts, 0.0, horizon);
  double j2 = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double lo = cuts[i], hi = cuts[i + 1], mid = 0.5 * (lo + hi);
    double a2 = spec.alpha2(mid);
    if (a2 == 0.0) continue;
    double out = outflow(mid);
    if (spec.psi_is_linear) {
      auto f = [&](double t) {
        double d = out - spec.psi(t);
        return d * d;
      };
      j2 += a2 * (hi - lo) / 6.0 * (f(lo) + 4.0 * f(mid) + f(hi));
    } else {
      double d = out - spec.psi(mid);
      j2 += a2 * d * d * (hi - lo);
    }
  }
  return j2;
}

// Trapezoid rule for the queue terms, midpoint rule for the outflow term,
// both truncated at the horizon.
inline CostBreakdown cost_ue(const UETrajectory& traj, const CostSpec& spec) {
  const double T = traj.grid.horizon;
  CostBreakdown c;
  c.j1_by_queue.assign(traj.queues.size(), 0.0);
  for (std::size_t i = 0; i < traj.queues.size(); ++i) {
    const std::size_t j = i + 1;
    const double dt = traj.grid.dt[j];
    for (std::size_t n = 0; n < traj.grid.steps[j]; ++n) {
      double lo = traj.grid.time(j, n);
      double hi = std::min(lo + dt, T);
      if (hi <= lo) break;
      double qa = traj.queues[i][n];
      double qb = (hi == lo + dt) ? traj.queues[i][n + 1] : traj.queue_at(i, hi);
      c.j1_by_queue[i] += spec.alpha1(0.5 * (lo + hi)) * 0.5 * (qa + qb) * (hi - lo);
    }
    c.j1 += c.j1_by_queue[i];
  }
  const std::size_t last = traj.chain.size() - 1;
  const double v = traj.chain.processors[last].velocity;
  const double dt = traj.grid.dt[last];
  for (std::size_t n = 0; n < traj.grid.steps[last]; ++n) {
    double lo = traj.grid.time(last, n);
    double hi = std::min(lo + dt, T);
    if (hi <= lo) break;
    double mid = 0.5 * (lo + hi);
    double dev = v * traj.exit_density[last][n] - spec.psi(mid);
    c.j2 += spec.alpha2(mid) * dev * dev * (hi - lo);
  }
  c.total = c.j1 + c.j2;
  return c;
}

}  // namespace chainflow
