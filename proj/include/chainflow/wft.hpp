#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

#include "chainflow/chain.hpp"
#include "chainflow/control.hpp"
#include "chainflow/cost.hpp"
#include "chainflow/piecewise.hpp"
#include "chainflow/tangent.hpp"

namespace chainflow {

// Event-driven front-tracking solver.  Density jumps travel at the processor
// velocity, queues are piecewise linear in time, and every interaction time
// is resolved exactly (up to roundoff), so densities, queue loads and costs
// carry no discretization error.

struct WftOptions {
  std::size_t max_events = 1000000;
  bool tangents = false;    // carry one shift slot per control breakpoint
  double probe_sign = 1.0;  // sign of the probe the shifts represent
  bool audit = false;       // record TangentEvent per queue interaction
  bool record_events = true;
};

struct WftEventRecord {
  double time = 0.0;
  int kind = 0;              // 0 queue-empties, 1 wave-arrival, 2 control-jump
  std::size_t location = 0;  // queue index / processor index / breakpoint index
  double before = 0.0;       // context value before the event (flux units)
  double after = 0.0;        // and after
};

struct QueueTrace {
  std::vector<double> times;
  std::vector<double> loads;

  double at(double t) const {
    if (times.empty()) return 0.0;
    if (t <= times.front()) return loads.front();
    if (t >= times.back()) return loads.back();
    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t hi = static_cast<std::size_t>(it - times.begin());
    std::size_t lo = hi - 1;
    double span = times[hi] - times[lo];
    if (span <= 0.0) return loads[hi];
    double w = (t - times[lo]) / span;
    return loads[lo] + w * (loads[hi] - loads[lo]);
  }
};

struct WftSolution {
  SupplyChain chain;
  InflowControl control;
  double horizon = 0.0;

  std::vector<StepFunction> intake_history;  // per processor, flux units
  std::vector<QueueTrace> queues;
  StepFunction outflow;  // v_P * exit density of the last processor
  std::vector<WftEventRecord> events;
  std::size_t event_count = 0;

  CostBreakdown cost;

  // Tangent outputs (when enabled; same conventions as ue_tangent).
  double probe = 0.0;
  std::vector<std::vector<double>> y1;
  std::vector<double> y2;
  std::vector<double> gradient;
  std::vector<TangentEvent> tangent_events;

  // Density at local position x in [0, L_j] at time t, via characteristics:
  // values born at the boundary after time 0 come from the intake history,
  // older ones from the advected initial profile.
  double density_at(std::size_t j, double x, double t) const {
    const Processor& p = chain.processors[j];
    const double s = t - x / p.velocity;
    if (s >= 0.0) return intake_history[j](s) / p.velocity;
    return p.initial_density(x - p.velocity * t);
  }

  // Full density profile of processor j at time t, in local coordinates.
  StepFunction profile_at(std::size_t j, double t) const {
    const Processor& p = chain.processors[j];
    const double v = p.velocity;
    const double L = p.length;
    std::vector<double> cuts;
    cuts.push_back(0.0);
    cuts.push_back(L);
    const double front = v * t;  // boundary-fed region ends here
    if (front > 0.0 && front < L) cuts.push_back(front);
    for (double s : intake_history[j].knots) {
      double x = v * (t - s);
      if (x > 0.0 && x < L) cuts.push_back(x);
    }
    for (double k : p.initial_density.knots) {
      double x = k + front;
      if (x > 0.0 && x < L) cuts.push_back(x);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    StepFunction f;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      f.knots.push_back(cuts[i]);
      f.values.push_back(density_at(j, 0.5 * (cuts[i] + cuts[i + 1]), t));
    }
    return f;
  }

  double queue_at(std::size_t i, double t) const { return queues[i].at(t); }

  double mass_initial() const {
    double m = 0.0;
    for (const auto& p : chain.processors) m += p.initial_density.integrate(0.0, p.length);
    for (const auto& tr : queues) m += tr.loads.empty() ? 0.0 : tr.loads.front();
    return m;
  }
  double mass_in() const { return control.as_step_function().integrate(0.0, horizon); }
  double mass_out() const { return outflow.integrate(0.0, horizon); }
  double mass_final() const {
    double m = 0.0;
    for (std::size_t j = 0; j < chain.size(); ++j)
      m += profile_at(j, horizon).integrate(0.0, chain.processors[j].length);
    for (std::size_t i = 0; i < queues.size(); ++i) m += queue_at(i, horizon);
    return m;
  }
  double mass_balance_error() const {
    const double inflow = mass_initial() + mass_in();
    const double holdings = mass_final() + mass_out();
    return std::abs(inflow - holdings) / std::max(1.0, inflow);
  }
};

namespace detail {

// A density front inside one processor.  left/right are the densities just
// behind (smaller x) and ahead of the front.  shift[k] is the front's
// displacement sensitivity v * delay w.r.t. control breakpoint k; an empty
// vector means all zero.
struct Wave {
  double birth_time = 0.0;
  double birth_pos = 0.0;
  double left = 0.0;
  double right = 0.0;
  std::vector<double> shift;
};

inline double wave_shift(const Wave& w, std::size_t k) {
  return w.shift.empty() ? 0.0 : w.shift[k];
}

// Incremental builder for a right-continuous step function; collapses
// same-instant rewrites and drops no-op values.
struct HistoryBuilder {
  std::vector<double> knots;
  std::vector<double> values;

  void start(double t, double v) {
    knots.assign(1, t);
    values.assign(1, v);
  }
  void push(double t, double v) {
    if (!knots.empty() && knots.back() == t) {
      values.back() = v;
      if (values.size() >= 2 && values[values.size() - 2] == v) {
        values.pop_back();
        knots.pop_back();
      }
      return;
    }
    if (values.empty() || values.back() != v) {
      knots.push_back(t);
      values.push_back(v);
    }
  }
  StepFunction finish() const {
    StepFunction f;
    f.knots = knots;
    f.values = values;
    return f;
  }
};

}  // namespace detail

inline WftSolution wft_solve(const SupplyChain& chain, const InflowControl& control,
                             const CostSpec& spec = {}, WftOptions opt = {}) {
  using detail::Wave;

  {
    ValidationReport report = validate_chain(chain);
    if (!report.ok()) throw std::invalid_argument("invalid chain: " + report.issues.front().message);
  }
  const std::size_t P = chain.size();
  const std::size_t Q = P - 1;
  const double T = control.horizon;
  const double mu_first = chain.processors.front().max_rate;
  const double u_max = *std::max_element(control.levels.begin(), control.levels.end());
  if (u_max > mu_first * (1.0 + 1e-12))
    throw std::invalid_argument("control level exceeds the first processor's max rate");

  const std::size_t K = opt.tangents ? control.breakpoints.size() : 0;

  WftSolution sol;
  sol.chain = chain;
  sol.control = control;
  sol.horizon = T;
  sol.probe = opt.probe_sign * control.quantum;
  sol.y1.assign(K, std::vector<double>(Q, 0.0));
  sol.y2.assign(K, 0.0);
  sol.gradient.assign(K, 0.0);

  // --- runtime state ---------------------------------------------------
  double now = 0.0;
  std::vector<std::deque<Wave>> waves(P);  // front = nearest entry, back = nearest exit
  std::vector<double> trace(P);            // density currently at each exit
  std::vector<double> intake(P);           // flux currently entering each processor
  std::vector<detail::HistoryBuilder> intake_hist(P);
  detail::HistoryBuilder outflow_hist;
  std::vector<double> q(Q), slope(Q);
  std::vector<std::vector<double>> eta(Q, std::vector<double>(K, 0.0));
  std::vector<QueueTrace> qtrace(Q);
  std::vector<double> j1_acc(Q, 0.0);
  std::size_t next_jump = 0;

  auto record_queue_point = [&](std::size_t i) {
    auto& tr = qtrace[i];
    if (!tr.times.empty() && tr.times.back() == now) {
      tr.loads.back() = q[i];
      return;
    }
    tr.times.push_back(now);
    tr.loads.push_back(q[i]);
  };

  // Inject a boundary jump into processor j (new intake value), merging with
  // a front born at the same instant so each processor sees one change per
  // event time.
  auto set_intake = [&](std::size_t j, double flux, const std::vector<double>& shift) {
    const double old = intake[j];
    if (flux == old) return;
    const Processor& p = chain.processors[j];
    Wave w;
    w.birth_time = now;
    w.birth_pos = chain.entry(j);
    w.left = flux / p.velocity;
    w.right = old / p.velocity;
    w.shift = shift;
    if (!waves[j].empty() && waves[j].front().birth_time == now &&
        waves[j].front().birth_pos == w.birth_pos) {
      Wave& f = waves[j].front();
      const double j_old = f.left - f.right;
      const double j_new = w.left - f.left;
      const double total = w.left - f.right;
      if (total == 0.0) {
        waves[j].pop_front();
      } else {
        if (K > 0) {
          std::vector<double> merged(K, 0.0);
          for (std::size_t k = 0; k < K; ++k)
            merged[k] = (detail::wave_shift(f, k) * j_old + detail::wave_shift(w, k) * j_new) /
                        total;
          f.shift = std::move(merged);
        }
        f.left = w.left;
      }
    } else {
      waves[j].push_front(std::move(w));
    }
    intake[j] = flux;
    intake_hist[j].push(now, flux);
  };

  // --- initial data ----------------------------------------------------
  for (std::size_t j = 0; j < P; ++j) {
    const Processor& p = chain.processors[j];
    const StepFunction& rho0 = p.initial_density;
    for (std::size_t i = 1; i < rho0.knots.size(); ++i) {
      if (rho0.knots[i] <= 0.0 || rho0.knots[i] >= p.length) continue;
      if (rho0.values[i] == rho0.values[i - 1]) continue;
      Wave w;
      w.birth_time = 0.0;
      w.birth_pos = chain.entry(j) + rho0.knots[i];
      w.left = rho0.values[i - 1];
      w.right = rho0.values[i];
      waves[j].push_back(std::move(w));
    }
    trace[j] = rho0.values.back();
  }
  {
    const double u0 = control(0.0);
    intake[0] = u0;
    intake_hist[0].start(0.0, u0);
    const Processor& p0 = chain.processors[0];
    const double rho_b = u0 / p0.velocity;
    if (rho_b != p0.initial_density.values.front()) {
      Wave w;
      w.birth_time = 0.0;
      w.birth_pos = chain.entry(0);
      w.left = rho_b;
      w.right = p0.initial_density.values.front();
      waves[0].push_front(std::move(w));
    }
  }
  for (std::size_t i = 0; i < Q; ++i) {
    const std::size_t j = i + 1;  // fed processor
    const Processor& p = chain.processors[j];
    const double fx = chain.processors[i].velocity * trace[i];
    q[i] = chain.initial_queues[i];
    const double f_inc = inflow_rate(q[i], fx, p.max_rate);
    slope[i] = fx - f_inc;
    intake[j] = f_inc;
    intake_hist[j].start(0.0, f_inc);
    const double rho_b = f_inc / p.velocity;
    if (rho_b != p.initial_density.values.front()) {
      Wave w;
      w.birth_time = 0.0;
      w.birth_pos = chain.entry(j);
      w.left = rho_b;
      w.right = p.initial_density.values.front();
      waves[j].push_front(std::move(w));
    }
    record_queue_point(i);
  }
  outflow_hist.start(0.0, chain.processors.back().velocity * trace[P - 1]);

  // --- time advance ----------------------------------------------------
  auto advance = [&](double to) {
    const double dt = to - now;
    if (dt <= 0.0) {
      now = to;
      return;
    }
    for (std::size_t i = 0; i < Q; ++i) {
      if (q[i] > 0.0 || slope[i] != 0.0)
        j1_acc[i] += integrate_weighted_linear(spec.alpha1, now, to, q[i], slope[i]);
      for (std::size_t k = 0; k < K; ++k)
        if (eta[i][k] != 0.0) sol.y1[k][i] += eta[i][k] * spec.alpha1.integrate(now, to);
      q[i] += slope[i] * dt;
      if (q[i] < 0.0) {
        if (q[i] < -1e-9 * std::max(1.0, std::abs(slope[i]) * dt))
          throw std::logic_error("queue crossed zero between events");
        q[i] = 0.0;
      }
    }
    now = to;
  };

  auto audit_event = [&](TangentCase kind, std::size_t queue, std::size_t k, double xi_in,
                         double jump_in, double eta_before, const InteractionOutcome& o) {
    if (!opt.audit) return;
    TangentEvent ev;
    ev.kind = kind;
    ev.queue = queue;
    ev.probe = k;
    ev.time = now;
    ev.xi_in = xi_in;
    ev.jump_in = jump_in;
    ev.eta_before = eta_before;
    ev.eta_after = o.eta_after;
    ev.xi_out = o.xi_out;
    ev.jump_out = o.jump_out;
    sol.tangent_events.push_back(ev);
  };

  // --- event loop ------------------------------------------------------
  std::size_t count = 0;
  const int KIND_EMPTY = 0, KIND_ARRIVAL = 1, KIND_JUMP = 2, KIND_END = 3;
  while (true) {
    double best_t = T;
    int best_kind = KIND_END;
    std::size_t best_loc = 0;
    auto consider = [&](double t, int kind, std::size_t loc) {
      if (t < best_t || (t == best_t && (kind < best_kind ||
                                         (kind == best_kind && loc < best_loc)))) {
        best_t = t;
        best_kind = kind;
        best_loc = loc;
      }
    };
    for (std::size_t i = 0; i < Q; ++i) {
      if (slope[i] < 0.0) consider(std::max(now, now + q[i] / -slope[i]), KIND_EMPTY, i);
    }
    for (std::size_t j = 0; j < P; ++j) {
      if (waves[j].empty()) continue;
      const Wave& w = waves[j].back();
      const double t =
          w.birth_time + (chain.exit(j) - w.birth_pos) / chain.processors[j].velocity;
      consider(std::max(t, now), KIND_ARRIVAL, j);
    }
    if (next_jump < control.breakpoints.size())
      consider(control.breakpoints[next_jump], KIND_JUMP, next_jump);

    if (best_kind == KIND_END || best_t >= T) {
      advance(T);
      break;
    }
    advance(best_t);
    if (++count > opt.max_events)
      throw std::runtime_error("front-tracking event budget exceeded");

    if (best_kind == KIND_JUMP) {
      const std::size_t k = best_loc;
      const double level = control.levels[k + 1];
      if (opt.record_events)
        sol.events.push_back({now, KIND_JUMP, k, intake[0], level});
      std::vector<double> shift;
      if (K > 0) {
        shift.assign(K, 0.0);
        shift[k] = chain.processors[0].velocity * sol.probe;
      }
      set_intake(0, level, shift);
      ++next_jump;
    } else if (best_kind == KIND_ARRIVAL) {
      const std::size_t j = best_loc;
      Wave w = waves[j].back();
      waves[j].pop_back();
      const double old_trace = trace[j];
      trace[j] = w.left;
      const Processor& up = chain.processors[j];
      if (opt.record_events)
        sol.events.push_back(
            {now, KIND_ARRIVAL, j, up.velocity * old_trace, up.velocity * w.left});

      if (j + 1 == P) {
        outflow_hist.push(now, up.velocity * w.left);
        for (std::size_t k = 0; k < K; ++k) {
          const double xi = detail::wave_shift(w, k);
          if (xi == 0.0) continue;
          sol.y2[k] +=
              y2_term(spec.alpha2(now), up.velocity, w.right, w.left, spec.psi(now), xi);
        }
      } else {
        const std::size_t i = j;  // queue hit by this front
        const Processor& dn = chain.processors[j + 1];
        const double mu = dn.max_rate;
        const double fx_before = up.velocity * w.right;
        const double fx_after = up.velocity * w.left;
        const bool loaded = q[i] > 0.0 || slope[i] > 0.0;
        TangentCase kind;
        if (loaded)
          kind = TangentCase::Absorb;
        else if (fx_after > mu)
          kind = TangentCase::Saturation;
        else
          kind = TangentCase::PassThrough;

        std::vector<double> shift_out;
        if (K > 0) shift_out.assign(K, 0.0);
        for (std::size_t k = 0; k < K; ++k) {
          const double xi_in = detail::wave_shift(w, k);
          if (xi_in == 0.0 && eta[i][k] == 0.0) continue;
          const InteractionOutcome o = apply_queue_interaction(
              kind, up.velocity, dn.velocity, mu, fx_before, fx_after, xi_in, eta[i][k]);
          audit_event(kind, i, k, xi_in, w.left - w.right, eta[i][k], o);
          eta[i][k] = o.eta_after;
          if (kind != TangentCase::Absorb) shift_out[k] = o.xi_out;
        }

        switch (kind) {
          case TangentCase::Absorb:
            slope[i] = fx_after - mu;
            break;
          case TangentCase::Saturation:
            slope[i] = fx_after - mu;
            set_intake(j + 1, mu, shift_out);
            break;
          default:  // pass-through
            slope[i] = 0.0;
            set_intake(j + 1, fx_after, shift_out);
            break;
        }
        record_queue_point(i);
      }
    } else {  // queue empties
      const std::size_t i = best_loc;
      const std::size_t j = i + 1;
      const Processor& dn = chain.processors[j];
      const double fx = chain.processors[i].velocity * trace[i];
      if (!(fx < dn.max_rate))
        throw std::logic_error("queue emptied while inflow met the max rate");
      q[i] = 0.0;
      if (opt.record_events) sol.events.push_back({now, KIND_EMPTY, i, intake[j], fx});
      std::vector<double> shift_out;
      if (K > 0) shift_out.assign(K, 0.0);
      for (std::size_t k = 0; k < K; ++k) {
        if (eta[i][k] == 0.0) continue;
        const InteractionOutcome o = apply_queue_interaction(
            TangentCase::Emptying, chain.processors[i].velocity, dn.velocity, dn.max_rate, fx,
            fx, 0.0, eta[i][k]);
        audit_event(TangentCase::Emptying, i, k, 0.0, 0.0, eta[i][k], o);
        eta[i][k] = 0.0;
        shift_out[k] = o.xi_out;
      }
      slope[i] = 0.0;
      set_intake(j, fx, shift_out);
      record_queue_point(i);
    }
  }

  // --- finalize --------------------------------------------------------
  sol.event_count = count;
  for (std::size_t i = 0; i < Q; ++i) record_queue_point(i);
  for (std::size_t j = 0; j < P; ++j) sol.intake_history.push_back(intake_hist[j].finish());
  sol.outflow = outflow_hist.finish();
  sol.queues = std::move(qtrace);

  sol.cost.j1_by_queue = j1_acc;
  for (double v : j1_acc) sol.cost.j1 += v;
  sol.cost.j2 = tracking_cost(sol.outflow, spec, T);
  sol.cost.total = sol.cost.j1 + sol.cost.j2;

  for (std::size_t k = 0; k < K; ++k) {
    double total = sol.y2[k];
    for (std::size_t i = 0; i < Q; ++i) total += sol.y1[k][i];
    sol.gradient[k] = total / sol.probe;
  }
  return sol;
}

}  // namespace chainflow
