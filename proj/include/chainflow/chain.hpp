#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "chainflow/piecewise.hpp"

namespace chainflow {

/*
 * A chain of processors separated by unbounded buffer queues. Processor j
 * occupies [a_j, b_j] with length L_j, processing velocity v_j and maximal
 * rate mu_j; its flux is f_j(rho) = min(mu_j, v_j * rho). A queue sits in
 * front of every processor except the first; the first processor is fed
 * directly by the inflow control.
 *
 * Admissibility:
 *  - flux-form density bound v_j * rho <= mu_j everywhere (so the flux is
 *    linear and every wave travels at exactly v_j), and
 *  - all lengths are integer multiples of a common spatial unit Delta, so a
 *    single mesh width divides every processor exactly.
 */
struct Processor {
  double length = 1.0;
  double velocity = 1.0;
  double max_rate = 0.0;
  // initial density in local coordinates x in [0, length), right-continuous
  StepFunction initial_density = StepFunction::constant(0.0);
};

struct SupplyChain {
  std::vector<Processor> processors;
  std::vector<double> initial_queues;  // one per queue, i.e. processors.size() - 1
  double common_unit = 1.0;            // Delta: every length must be a multiple

  std::size_t size() const { return processors.size(); }

  double entry(std::size_t j) const {
    double a = 0.0;
    for (std::size_t i = 0; i < j; ++i) a += processors[i].length;
    return a;
  }
  double exit(std::size_t j) const { return entry(j) + processors[j].length; }
};

struct ValidationIssue {
  bool fatal = false;
  std::string code;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const {
    for (const auto& i : issues)
      if (i.fatal) return false;
    return true;
  }
};

inline bool divides_evenly(double whole, double part, double rel_tol = 1e-9) {
  if (!(part > 0.0)) return false;
  double ratio = whole / part;
  return std::abs(ratio - std::round(ratio)) <= rel_tol * std::max(1.0, std::abs(ratio));
}

inline ValidationReport validate_chain(const SupplyChain& chain) {
  ValidationReport report;
  auto add = [&](bool fatal, std::string code, std::string msg) {
    report.issues.push_back({fatal, std::move(code), std::move(msg)});
  };

  if (chain.processors.empty()) {
    add(true, "empty-chain", "chain has no processors");
    return report;
  }
  if (chain.initial_queues.size() + 1 != chain.processors.size())
    add(true, "queue-count",
        "expected " + std::to_string(chain.processors.size() - 1) + " initial queue values, got " +
            std::to_string(chain.initial_queues.size()));
  if (!(chain.common_unit > 0.0)) add(true, "unit-positive", "common spatial unit must be positive");

  for (std::size_t j = 0; j < chain.processors.size(); ++j) {
    const Processor& p = chain.processors[j];
    std::string tag = "processor " + std::to_string(j + 1);
    if (!(p.length > 0.0)) add(true, "length-positive", tag + ": length must be positive");
    if (!(p.velocity > 0.0)) add(true, "velocity-positive", tag + ": velocity must be positive");
    if (!(p.max_rate > 0.0)) add(true, "rate-positive", tag + ": max rate must be positive");
    if (p.length > 0.0 && chain.common_unit > 0.0 && !divides_evenly(p.length, chain.common_unit))
      add(true, "length-unit",
          tag + ": length " + std::to_string(p.length) + " is not a multiple of the common unit " +
              std::to_string(chain.common_unit));

    for (std::size_t s = 0; s < p.initial_density.values.size(); ++s) {
      double rho = p.initial_density.values[s];
      if (rho < 0.0) add(true, "density-negative", tag + ": initial density must be nonnegative");
      if (p.velocity * rho > p.max_rate * (1.0 + 1e-12))
        add(true, "density-flux-bound",
            tag + ": initial density " + std::to_string(rho) + " violates v*rho <= mu");
      // The literal density bound rho <= mu and the flux bound v*rho <= mu
      // coincide only when v = 1; flag data where they disagree.
      if (p.velocity != 1.0) {
        bool literal = rho <= p.max_rate * (1.0 + 1e-12);
        bool flux = p.velocity * rho <= p.max_rate * (1.0 + 1e-12);
        if (literal != flux)
          add(false, "density-bound-forms",
              tag + ": density " + std::to_string(rho) +
                  " satisfies only one of {rho <= mu, v*rho <= mu}; the flux form is enforced");
      }
    }
  }
  for (std::size_t i = 0; i < chain.initial_queues.size(); ++i)
    if (chain.initial_queues[i] < 0.0)
      add(true, "queue-negative", "queue " + std::to_string(i + 2) + ": initial load must be nonnegative");
  return report;
}

}  // namespace chainflow
