#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "chainflow/analysis.hpp"
#include "chainflow/control.hpp"
#include "chainflow/cost.hpp"
#include "chainflow/grid.hpp"
#include "chainflow/tangent.hpp"
#include "chainflow/wft.hpp"

namespace chainflow {

enum class StepPolicy { Fixed, Backtracking };

struct DescentOptions {
  double step_scale = 0.02;  // h: gradient-to-time scaling before quantization
  StepPolicy policy = StepPolicy::Backtracking;
  int max_iterations = 200;
  int patience = 5;        // consecutive flat iterations before stopping
  double rel_tol = 1e-9;   // |dJ| <= rel_tol * (1 + |J|) counts as flat
  Backend backend = Backend::Upwind;
  double probe_sign = 1.0;
};

struct DescentIterate {
  int iteration = 0;
  std::vector<double> taus;      // all jump times, pinned ones included
  double j1 = 0.0, j2 = 0.0, total = 0.0;
  double step_scale_used = 0.0;  // h that produced this state (0 = no move)
  std::vector<double> gradient;  // gradient at these taus (empty for the last row)
};

struct DescentResult {
  std::vector<DescentIterate> trace;
  std::vector<double> final_taus;
  InflowControl final_control;
  CostBreakdown final_cost;
  int iterations = 0;
  std::string stop_reason;
};

// Steepest descent on the jump times with steps quantized to whole control
// quanta (truncation toward zero).  Jumps pushed onto 0 or the horizon are
// absorbed by the control normalization and stay pinned; jumps sharing a
// time move in lockstep through the surviving discontinuity's gradient.
inline DescentResult optimize(const SupplyChain& chain, const InflowControl& control0,
                              const CostSpec& spec, const DescentOptions& opt,
                              const Grid* grid = nullptr) {
  const std::size_t K = control0.breakpoints.size();
  const double T = control0.horizon;
  const double dtq = control0.quantum;
  if (!control0.quantized())
    throw std::invalid_argument("optimize: starting breakpoints must sit on the quantum lattice");
  if (opt.backend == Backend::Upwind && grid == nullptr)
    throw std::invalid_argument("optimize: upwind backend needs a grid");
  // a step can never usefully exceed the whole horizon
  const auto max_quanta = static_cast<long long>(std::ceil(T / dtq)) + 1;

  std::vector<double> taus = control0.breakpoints;
  auto collapsed = [&](const std::vector<double>& t) {
    return collapse_control(T, dtq, t, control0.levels);
  };

  // Gradient in the full tau indexing: a pinned or flattened jump gets zero,
  // merged jumps share the surviving jump's component.
  auto full_gradient = [&](const InflowControl& eff, const std::vector<double>& t) {
    std::vector<double> g_eff;
    if (!eff.breakpoints.empty()) {
      if (opt.backend == Backend::Upwind) {
        UETrajectory traj = ue_simulate(chain, eff, *grid);
        TangentOptions topt;
        topt.probe_sign = opt.probe_sign;
        g_eff = ue_tangent(traj, eff, spec, topt).gradient;
      } else {
        WftOptions wopt;
        wopt.tangents = true;
        wopt.probe_sign = opt.probe_sign;
        wopt.record_events = false;
        g_eff = wft_solve(chain, eff, spec, wopt).gradient;
      }
    }
    std::vector<double> g(K, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
      if (!(t[k] > 0.0) || !(t[k] < T)) continue;  // pinned at a boundary
      for (std::size_t m = 0; m < eff.breakpoints.size(); ++m) {
        if (eff.breakpoints[m] == t[k]) {
          g[k] = g_eff[m];
          break;
        }
      }
      // no match: the jump was flattened away, the cost is locally blind to it
    }
    return g;
  };

  DescentResult res;
  CostBreakdown cur = evaluate_cost(chain, collapsed(taus), spec, opt.backend, grid);
  res.trace.push_back({0, taus, cur.j1, cur.j2, cur.total, 0.0, {}});

  int flat_run = 0;
  int it = 0;
  std::string reason;
  while (it < opt.max_iterations) {
    bool any_free = false;
    for (double tk : taus)
      if (tk > 0.0 && tk < T) any_free = true;
    if (!any_free) {
      reason = "all-boundary";
      break;
    }

    const InflowControl eff = collapse_control(T, dtq, taus, control0.levels);
    const std::vector<double> g = full_gradient(eff, taus);
    res.trace.back().gradient = g;

    double h = opt.step_scale;
    std::vector<double> cand = taus;
    CostBreakdown cand_cost = cur;
    bool moved = false;
    while (true) {
      bool any_step = false;
      for (std::size_t k = 0; k < K; ++k) {
        cand[k] = taus[k];
        if (!(taus[k] > 0.0) || !(taus[k] < T)) continue;
        double raw = std::trunc(h * -g[k] / dtq);
        if (raw > static_cast<double>(max_quanta)) raw = static_cast<double>(max_quanta);
        if (raw < static_cast<double>(-max_quanta)) raw = static_cast<double>(-max_quanta);
        const auto quanta = static_cast<long long>(raw);
        if (quanta == 0) continue;
        const auto idx = static_cast<long long>(std::llround(taus[k] / dtq)) + quanta;
        double moved_tau = static_cast<double>(idx) * dtq;
        if (moved_tau <= 0.0) moved_tau = 0.0;
        if (moved_tau >= T) moved_tau = T;
        cand[k] = moved_tau;
        if (cand[k] != taus[k]) any_step = true;
      }
      if (!any_step) break;
      cand_cost = evaluate_cost(chain, collapsed(cand), spec, opt.backend, grid);
      if (opt.policy == StepPolicy::Fixed || cand_cost.total < cur.total) {
        moved = true;
        break;
      }
      h *= 0.5;
      if (h < 1e-12 * opt.step_scale) break;
    }

    ++it;
    if (moved) {
      taus = cand;
      if (std::abs(cand_cost.total - cur.total) <= opt.rel_tol * (1.0 + std::abs(cur.total)))
        ++flat_run;
      else
        flat_run = 0;
      cur = cand_cost;
      res.trace.push_back({it, taus, cur.j1, cur.j2, cur.total, h, {}});
    } else {
      ++flat_run;
      res.trace.push_back({it, taus, cur.j1, cur.j2, cur.total, 0.0, {}});
    }
    if (flat_run >= opt.patience) {
      reason = "stalled";
      break;
    }
  }
  if (reason.empty()) reason = "max-iterations";

  res.final_taus = taus;
  res.final_control = collapsed(taus);
  res.final_cost = cur;
  res.iterations = it;
  res.stop_reason = reason;
  return res;
}

}  // namespace chainflow
