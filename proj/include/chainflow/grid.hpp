#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "chainflow/chain.hpp"

namespace chainflow {

// One spatial mesh width shared by every processor; each processor advances on
// its own clock dt_j = dx / v_j so that the CFL number is exactly one and the
// upwind update degenerates to a pure shift.
struct Grid {
  double base_dx = 0.0;
  int refinement = 0;               // nu: dx = base_dx / 2^nu
  double dx = 0.0;
  double horizon = 0.0;
  std::vector<double> dt;           // per processor
  std::vector<std::size_t> cells;   // N_j = L_j / dx
  std::vector<std::size_t> steps;   // M_j: number of windows covering [0, horizon]

  double dt_control() const { return dt.front(); }
  double time(std::size_t j, std::size_t n) const { return static_cast<double>(n) * dt[j]; }
};

inline Grid build_grid(const SupplyChain& chain, double base_dx, int refinement, double horizon) {
  if (!(base_dx > 0.0)) throw std::invalid_argument("build_grid: base_dx must be positive");
  if (refinement < 0) throw std::invalid_argument("build_grid: refinement must be nonnegative");
  if (!(horizon > 0.0)) throw std::invalid_argument("build_grid: horizon must be positive");
  if (!divides_evenly(chain.common_unit, base_dx))
    throw std::invalid_argument("build_grid: base_dx does not divide the common spatial unit");

  Grid g;
  g.base_dx = base_dx;
  g.refinement = refinement;
  g.dx = base_dx / std::pow(2.0, refinement);
  g.horizon = horizon;
  g.dt.reserve(chain.size());
  g.cells.reserve(chain.size());
  g.steps.reserve(chain.size());
  for (const Processor& p : chain.processors) {
    if (!divides_evenly(p.length, g.dx))
      throw std::invalid_argument("build_grid: mesh does not divide a processor length");
    double dt = g.dx / p.velocity;
    auto cells = static_cast<std::size_t>(std::llround(p.length / g.dx));
    auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
    g.dt.push_back(dt);
    g.cells.push_back(cells);
    g.steps.push_back(steps);
  }
  return g;
}

// Cell i of processor j holds the right limit of the initial density at the
// cell's left edge, i.e. rho_{j,0}((a_j + i dx)+) in local coordinates.
inline std::vector<double> sample_initial(const Processor& p, double dx) {
  auto n = static_cast<std::size_t>(std::llround(p.length / dx));
  std::vector<double> cells(n);
  for (std::size_t i = 0; i < n; ++i) cells[i] = p.initial_density(static_cast<double>(i) * dx);
  return cells;
}

}  // namespace chainflow
