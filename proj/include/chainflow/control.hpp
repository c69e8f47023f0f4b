#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "chainflow/piecewise.hpp"

namespace chainflow {

inline bool on_lattice(double t, double quantum, double rel_tol = 1e-9) {
  double steps = t / quantum;
  return std::abs(steps - std::round(steps)) <= rel_tol * std::max(1.0, std::abs(steps));
}

inline double snap_to_lattice(double t, double quantum) {
  return std::round(t / quantum) * quantum;
}

// Piecewise-constant inflow control on [0, horizon]: level levels[k] holds on
// [breakpoints[k-1], breakpoints[k]) with breakpoints[0-1] read as 0, and the
// final level extends up to and including the horizon. Right-continuous.
// Breakpoints live strictly inside (0, horizon) and on the quantum lattice.
struct InflowControl {
  double horizon = 0.0;
  double quantum = 0.0;                // admissible discontinuity lattice spacing
  std::vector<double> breakpoints;     // strictly increasing, size = levels.size() - 1
  std::vector<double> levels;

  InflowControl() = default;
  InflowControl(double T, double dt, std::vector<double> taus, std::vector<double> u)
      : horizon(T), quantum(dt), breakpoints(std::move(taus)), levels(std::move(u)) {
    if (!(horizon > 0.0)) throw std::invalid_argument("InflowControl: horizon must be positive");
    if (levels.empty()) throw std::invalid_argument("InflowControl: needs at least one level");
    if (breakpoints.size() + 1 != levels.size())
      throw std::invalid_argument("InflowControl: breakpoint/level count mismatch");
    for (std::size_t k = 0; k < breakpoints.size(); ++k) {
      if (!(breakpoints[k] > 0.0) || !(breakpoints[k] < horizon))
        throw std::invalid_argument("InflowControl: breakpoints must lie in (0, horizon)");
      if (k > 0 && !(breakpoints[k] > breakpoints[k - 1]))
        throw std::invalid_argument("InflowControl: breakpoints must be strictly increasing");
    }
    for (double u_k : levels)
      if (u_k < 0.0) throw std::invalid_argument("InflowControl: levels must be nonnegative");
  }

  double operator()(double t) const {
    if (t < 0.0 || t > horizon)
      throw std::out_of_range("InflowControl: evaluation outside [0, horizon]");
    auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t);
    return levels[static_cast<std::size_t>(it - breakpoints.begin())];
  }

  double total_variation() const {
    double tv = 0.0;
    for (std::size_t k = 1; k < levels.size(); ++k) tv += std::abs(levels[k] - levels[k - 1]);
    return tv;
  }

  bool quantized(double rel_tol = 1e-9) const {
    for (double tau : breakpoints)
      if (!on_lattice(tau, quantum, rel_tol)) return false;
    return true;
  }

  StepFunction as_step_function() const {
    std::vector<double> knots;
    knots.reserve(levels.size());
    knots.push_back(0.0);
    for (double tau : breakpoints) knots.push_back(tau);
    return StepFunction(knots, levels);
  }
};

// Build a valid control from freely-placed jump times: times are clamped
// into [0, horizon]; a jump landing on 0 or the horizon absorbs its vanished
// segment, and coinciding jumps merge with the later segment's level
// winning. The result has fewer jumps but identical values outside the
// collapsed intervals.
inline InflowControl collapse_control(double horizon, double quantum,
                                      std::span<const double> taus,
                                      std::span<const double> levels) {
  if (taus.size() + 1 != levels.size())
    throw std::invalid_argument("collapse_control: jump/level count mismatch");

  struct Jump {
    double tau;
    double level_after;
    std::size_t order;  // original index, used to break ties deterministically
  };
  std::vector<Jump> jumps;
  jumps.reserve(taus.size());
  for (std::size_t k = 0; k < taus.size(); ++k) {
    double tau = std::clamp(taus[k], 0.0, horizon);
    jumps.push_back({tau, levels[k + 1], k});
  }
  std::stable_sort(jumps.begin(), jumps.end(), [](const Jump& a, const Jump& b) {
    if (a.tau != b.tau) return a.tau < b.tau;
    return a.order < b.order;
  });

  double base = levels[0];
  std::vector<double> kept_taus, kept_lvls;
  for (const Jump& j : jumps) {
    if (j.tau <= 0.0) {           // segment before the jump vanished
      base = j.level_after;
      continue;
    }
    if (j.tau >= horizon) continue;  // segment after the jump vanished
    if (!kept_taus.empty() && kept_taus.back() == j.tau) {
      kept_lvls.back() = j.level_after;  // merge: later segment's level wins
      continue;
    }
    kept_taus.push_back(j.tau);
    kept_lvls.push_back(j.level_after);
  }

  // drop jumps of zero height created by merging
  std::vector<double> taus2;
  std::vector<double> levels2{base};
  for (std::size_t k = 0; k < kept_taus.size(); ++k) {
    if (kept_lvls[k] == levels2.back()) continue;
    taus2.push_back(kept_taus[k]);
    levels2.push_back(kept_lvls[k]);
  }
  return InflowControl(horizon, quantum, std::move(taus2), std::move(levels2));
}

// Shift every breakpoint by the matching offset and normalize.
inline InflowControl shift_control(const InflowControl& c, std::span<const double> offsets) {
  if (offsets.size() != c.breakpoints.size())
    throw std::invalid_argument("shift_control: offset count mismatch");
  std::vector<double> taus(c.breakpoints);
  for (std::size_t k = 0; k < taus.size(); ++k) taus[k] += offsets[k];
  return collapse_control(c.horizon, c.quantum, taus, c.levels);
}

// L1 distance between two controls over [0, horizon]; used by the merge tests.
inline double control_l1_distance(const InflowControl& a, const InflowControl& b) {
  if (a.horizon != b.horizon)
    throw std::invalid_argument("control_l1_distance: horizon mismatch");
  std::vector<double> cuts{0.0, a.horizon};
  cuts.insert(cuts.end(), a.breakpoints.begin(), a.breakpoints.end());
  cuts.insert(cuts.end(), b.breakpoints.begin(), b.breakpoints.end());
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double d = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double mid = 0.5 * (cuts[i] + cuts[i + 1]);
    d += std::abs(a(mid) - b(mid)) * (cuts[i + 1] - cuts[i]);
  }
  return d;
}

}  // namespace chainflow
