#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "chainflow/control.hpp"
#include "chainflow/cost.hpp"
#include "chainflow/grid.hpp"
#include "chainflow/upwind_euler.hpp"

namespace chainflow {

// ---------------------------------------------------------------------------
// First-order sensitivity of the cost to the jump times of the inflow control.
//
// Convention used throughout: a density jump travelling through processor j
// carries a shift xi = v_j * d, where d is the delay (in time units) of the
// jump's birth caused by moving one control breakpoint by the probe amount.
// Positive xi means the jump appears later.  Each queue i carries a scalar
// eta giving the first-order change of its load while it stays loaded.
//
// The pair (xi, jump) of a shifted density jump contributes |xi * jump| to
// the sensitivity norm; eta contributes |eta|.  The interaction rules below
// redistribute that norm when a shifted jump meets a queue:
//
//   pass-through  queue empty, stays empty   xi scales by v_dn/v_up, eta fixed
//   saturation    queue empty, starts load   xi scales, eta absorbs overshoot
//   absorb        queue loaded               jump dies, eta absorbs everything
//   emptying      queue load reaches zero    eta dies, a fresh jump is born
// ---------------------------------------------------------------------------

enum class TangentCase : std::uint8_t { PassThrough, Saturation, Absorb, Emptying };

inline const char* tangent_case_name(TangentCase c) {
  switch (c) {
    case TangentCase::PassThrough: return "pass-through";
    case TangentCase::Saturation: return "saturation";
    case TangentCase::Absorb: return "absorb";
    case TangentCase::Emptying: return "emptying";
  }
  return "?";
}

// Audit record of one shifted-jump/queue interaction.
struct TangentEvent {
  TangentCase kind;
  std::size_t queue = 0;  // 0-based queue index (queue i feeds processor i+1)
  std::size_t probe = 0;  // which control breakpoint this sensitivity belongs to
  double time = 0.0;
  double xi_in = 0.0;
  double jump_in = 0.0;  // upstream density jump carried by xi_in (after - before)
  double eta_before = 0.0;
  double eta_after = 0.0;
  double xi_out = 0.0;
  double jump_out = 0.0;  // downstream density jump carried by xi_out

  double norm_before() const { return std::abs(xi_in * jump_in) + std::abs(eta_before); }
  double norm_after() const { return std::abs(xi_out * jump_out) + std::abs(eta_after); }
};

struct InteractionOutcome {
  double eta_after = 0.0;
  double xi_out = 0.0;
  double jump_out = 0.0;
};

// fx_before / fx_after are the upstream exit fluxes v_up * rho around the
// arriving jump.  For the emptying case there is no arriving jump; fx_before
// is the upstream flux draining the queue (strictly below mu).
inline InteractionOutcome apply_queue_interaction(TangentCase kind, double v_up, double v_dn,
                                                  double mu, double fx_before, double fx_after,
                                                  double xi_in, double eta) {
  InteractionOutcome out;
  out.eta_after = eta;
  switch (kind) {
    case TangentCase::PassThrough:
      out.xi_out = xi_in * v_dn / v_up;
      out.jump_out = (fx_after - fx_before) / v_dn;
      break;
    case TangentCase::Saturation:
      out.xi_out = xi_in * v_dn / v_up;
      out.jump_out = (mu - fx_before) / v_dn;
      out.eta_after = eta - xi_in * (fx_after - mu) / v_up;
      break;
    case TangentCase::Absorb:
      out.eta_after = eta - xi_in * (fx_after - fx_before) / v_up;
      break;
    case TangentCase::Emptying: {
      const double drain = fx_before - mu;
      if (!(drain < 0.0))
        throw std::logic_error("emptying interaction requires upstream flux below mu");
      out.xi_out = -v_dn * eta / drain;
      out.jump_out = drain / v_dn;
      out.eta_after = 0.0;
      break;
    }
  }
  return out;
}

// Queue-load sensitivity accrued while the queue stays loaded over [t, t+dt].
inline double y1_loaded_term(double alpha1, double eta, double dt) { return alpha1 * eta * dt; }

// Terminal wedge when the queue empties: shifting the drain start by
// |xi_out|/v_dn shifts the emptying time by the same amount, and the load
// decays linearly over that sliver.
inline double y1_emptying_term(double alpha1, double eta, double xi_out, double v_dn) {
  return 0.5 * alpha1 * eta * std::abs(xi_out) / v_dn;
}

// Outflow-mismatch sensitivity released when the exit value switches from
// rho_old to rho_new while carrying shift xi: the switch time moves by xi/v.
inline double y2_term(double alpha2, double v, double rho_old, double rho_new, double psi,
                      double xi) {
  const double d_old = v * rho_old - psi;
  const double d_new = v * rho_new - psi;
  return alpha2 * (d_old * d_old - d_new * d_new) * xi / v;
}

struct TangentOptions {
  double probe_sign = 1.0;  // probe = probe_sign * control quantum
  bool audit = false;       // record a TangentEvent per interaction
};

struct TangentResult {
  double probe = 0.0;                   // signed probe size in time units
  std::vector<double> gradient;         // dJ/dtau_k  ~  (sum_i Y1[k][i] + Y2[k]) / probe
  std::vector<std::vector<double>> y1;  // [breakpoint][queue]
  std::vector<double> y2;               // [breakpoint]
  std::vector<TangentEvent> events;     // only when audit was requested
};

namespace detail {

// A shifted density jump waiting to enter a processor through its ghost cell.
struct GhostContribution {
  double xi = 0.0;
  double jump = 0.0;  // downstream density jump it rides on
};

// Merge simultaneous contributions so that xi * jump is preserved.
inline GhostContribution merge_contributions(const std::vector<GhostContribution>& parts) {
  GhostContribution m;
  double weighted = 0.0;
  for (const auto& p : parts) {
    m.jump += p.jump;
    weighted += p.xi * p.jump;
  }
  if (m.jump != 0.0) m.xi = weighted / m.jump;
  return m;
}

}  // namespace detail

// Discrete sensitivity propagation alongside an upwind trajectory.  One shift
// field per control breakpoint is advected through the chain in the same
// cascade order as the base solver; interactions with queues follow
// apply_queue_interaction and feed the Y1/Y2 accumulators.
inline TangentResult ue_tangent(const UETrajectory& base, const InflowControl& control,
                                const CostSpec& spec, TangentOptions opt = {}) {
  const SupplyChain& chain = base.chain;
  const Grid& grid = base.grid;
  const std::size_t P = chain.size();
  const std::size_t K = control.breakpoints.size();

  TangentResult res;
  res.probe = opt.probe_sign * control.quantum;
  res.gradient.assign(K, 0.0);
  res.y1.assign(K, std::vector<double>(P > 0 ? P - 1 : 0, 0.0));
  res.y2.assign(K, 0.0);
  if (K == 0 || P == 0) return res;
  if (res.probe == 0.0) throw std::invalid_argument("tangent probe must be nonzero");

  // Injection steps on the first processor's clock.
  std::vector<std::size_t> inject_step(K);
  for (std::size_t k = 0; k < K; ++k) {
    if (!on_lattice(control.breakpoints[k], grid.dt_control()))
      throw std::invalid_argument("control breakpoints must sit on the control lattice");
    inject_step[k] = static_cast<std::size_t>(
        std::llround(control.breakpoints[k] / grid.dt_control()));
  }

  // Shift carried by the exit cell of the previous processor, per breakpoint
  // and per upstream step (index n = value after step n).
  std::vector<std::vector<double>> exit_shift_prev;

  for (std::size_t j = 0; j < P; ++j) {
    const Processor& p = chain.processors[j];
    const std::size_t cells = grid.cells[j];
    const std::size_t steps = grid.steps[j];
    const double dt = grid.dt[j];
    const bool last = (j + 1 == P);

    std::vector<std::vector<double>> xi_row(K, std::vector<double>(cells, 0.0));
    std::vector<std::vector<double>> exit_shift_cur(K, std::vector<double>(steps + 1, 0.0));

    // Per-breakpoint queue shift.  Arrival-born contributions enter the ghost
    // cell in the window they occur; emptying-born ones enter one window
    // later, when the base intake actually switches off saturation.
    std::vector<double> eta(K, 0.0);
    std::vector<std::vector<detail::GhostContribution>> entering_now(K);
    std::vector<std::vector<detail::GhostContribution>> entering_next(K);

    // Arrivals at the downstream end of processor j-1, grouped by window of
    // processor j.  Each arrival is an upstream exit-value change.
    struct Arrival {
      double time;
      double fx_before, fx_after;  // upstream exit flux around the change
      std::size_t up_step;         // upstream step index of the new value
    };
    std::vector<std::vector<Arrival>> arrivals;
    const double v_up = (j > 0) ? chain.processors[j - 1].velocity : 0.0;
    if (j > 0) {
      arrivals.assign(steps, {});
      const auto& e = base.exit_density[j - 1];
      const double dt_up = grid.dt[j - 1];
      for (std::size_t m = 1; m < e.size(); ++m) {
        if (e[m] == e[m - 1]) continue;
        const double t = static_cast<double>(m) * dt_up;
        const auto w = static_cast<std::size_t>(std::floor(t / dt + 1e-9));
        if (w >= steps) continue;  // takes effect past the horizon
        arrivals[w].push_back({t, v_up * e[m - 1], v_up * e[m], m});
      }
    }

    for (std::size_t n = 0; n < steps; ++n) {
      const double t = grid.time(j, n);
      std::vector<detail::GhostContribution> merged_parts;
      std::vector<double> ghost(K, 0.0);

      if (j == 0) {
        for (std::size_t k = 0; k < K; ++k)
          if (n == inject_step[k]) ghost[k] = p.velocity * res.probe;
      } else {
        const std::size_t qi = j - 1;
        const double q_now = base.queues[qi][n];
        const double q_next = base.queues[qi][n + 1];
        bool loaded = q_now > 0.0;

        for (std::size_t k = 0; k < K; ++k) {
          entering_now[k] = std::move(entering_next[k]);
          entering_next[k].clear();
        }

        for (std::size_t k = 0; k < K; ++k) {
          if (q_next > 0.0 && eta[k] != 0.0)
            res.y1[k][qi] += y1_loaded_term(spec.alpha1(t), eta[k], dt);
        }

        // Interactions of this window's arrivals, in upstream order.  A
        // saturating arrival marks the queue loaded for the rest of the
        // window even though the stored load only turns positive at n+1.
        for (const Arrival& a : arrivals[n]) {
          TangentCase kind;
          if (loaded)
            kind = TangentCase::Absorb;
          else if (a.fx_after > p.max_rate)
            kind = TangentCase::Saturation;
          else
            kind = TangentCase::PassThrough;
          for (std::size_t k = 0; k < K; ++k) {
            const double xi_in = exit_shift_prev[k][a.up_step];
            if (xi_in == 0.0 && eta[k] == 0.0) continue;
            const InteractionOutcome o = apply_queue_interaction(
                kind, v_up, p.velocity, p.max_rate, a.fx_before, a.fx_after, xi_in, eta[k]);
            if (opt.audit) {
              TangentEvent ev;
              ev.kind = kind;
              ev.queue = qi;
              ev.probe = k;
              ev.time = a.time;
              ev.xi_in = xi_in;
              ev.jump_in = (a.fx_after - a.fx_before) / v_up;
              ev.eta_before = eta[k];
              ev.eta_after = o.eta_after;
              ev.xi_out = o.xi_out;
              ev.jump_out = o.jump_out;
              res.events.push_back(ev);
            }
            eta[k] = o.eta_after;
            if (kind != TangentCase::Absorb && o.xi_out != 0.0)
              entering_now[k].push_back({o.xi_out, o.jump_out});
          }
          if (kind == TangentCase::Saturation) loaded = true;
        }

        // The queue ran dry during this window: eta dies, its residual is
        // handed to a fresh jump entering at the start of the next window.
        if (q_now > 0.0 && q_next == 0.0) {
          const double fx = aggregate_upstream_flux(base, j, n);
          for (std::size_t k = 0; k < K; ++k) {
            if (eta[k] == 0.0) continue;
            const InteractionOutcome o = apply_queue_interaction(
                TangentCase::Emptying, v_up, p.velocity, p.max_rate, fx, fx, 0.0, eta[k]);
            if (opt.audit) {
              TangentEvent ev;
              ev.kind = TangentCase::Emptying;
              ev.queue = qi;
              ev.probe = k;
              ev.time = t;
              ev.eta_before = eta[k];
              ev.eta_after = o.eta_after;
              ev.xi_out = o.xi_out;
              ev.jump_out = o.jump_out;
              res.events.push_back(ev);
            }
            res.y1[k][qi] += y1_emptying_term(spec.alpha1(t), eta[k], o.xi_out, p.velocity);
            eta[k] = 0.0;
            if (o.xi_out != 0.0) entering_next[k].push_back({o.xi_out, o.jump_out});
          }
        }

        for (std::size_t k = 0; k < K; ++k) {
          if (entering_now[k].empty()) continue;
          ghost[k] = detail::merge_contributions(entering_now[k]).xi;
          entering_now[k].clear();
        }
      }

      for (std::size_t k = 0; k < K; ++k) {
        upwind_step(xi_row[k], ghost[k]);
        exit_shift_cur[k][n + 1] = xi_row[k].back();
      }

      if (last) {
        const auto& e = base.exit_density[j];
        if (e[n + 1] != e[n]) {
          for (std::size_t k = 0; k < K; ++k) {
            const double xi = exit_shift_cur[k][n + 1];
            if (xi == 0.0) continue;
            res.y2[k] += y2_term(spec.alpha2(t), p.velocity, e[n], e[n + 1], spec.psi(t), xi);
          }
        }
      }
    }

    exit_shift_prev = std::move(exit_shift_cur);
  }

  for (std::size_t k = 0; k < K; ++k) {
    double total = res.y2[k];
    for (double v : res.y1[k]) total += v;
    res.gradient[k] = total / res.probe;
  }
  return res;
}

}  // namespace chainflow
