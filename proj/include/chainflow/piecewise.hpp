#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace chainflow {

// Right-continuous step function. values[i] holds on [knots[i], knots[i+1]);
// the last value extends past the final knot, the first value covers anything
// before the first knot. Knots are strictly increasing.
struct StepFunction {
  std::vector<double> knots;
  std::vector<double> values;

  StepFunction() = default;
  StepFunction(std::vector<double> k, std::vector<double> v)
      : knots(std::move(k)), values(std::move(v)) {
    if (knots.empty() || knots.size() != values.size())
      throw std::invalid_argument("StepFunction: knot/value size mismatch");
    for (std::size_t i = 1; i < knots.size(); ++i)
      if (!(knots[i] > knots[i - 1]))
        throw std::invalid_argument("StepFunction: knots must be strictly increasing");
  }

  static StepFunction constant(double v, double start = 0.0) {
    return StepFunction({start}, {v});
  }

  std::size_t segment_index(double t) const {
    // first knot > t, minus one; clamped to the first segment
    auto it = std::upper_bound(knots.begin(), knots.end(), t);
    if (it == knots.begin()) return 0;
    return static_cast<std::size_t>(it - knots.begin()) - 1;
  }

  double operator()(double t) const { return values[segment_index(t)]; }

  double integrate(double a, double b) const {
    if (b < a) throw std::invalid_argument("StepFunction::integrate: b < a");
    double total = 0.0;
    std::size_t i = segment_index(a);
    double lo = a;
    while (lo < b) {
      double hi = (i + 1 < knots.size()) ? std::min(knots[i + 1], b) : b;
      total += values[i] * (hi - lo);
      lo = hi;
      ++i;
    }
    return total;
  }

  double total_variation() const {
    double tv = 0.0;
    for (std::size_t i = 1; i < values.size(); ++i)
      tv += std::abs(values[i] - values[i - 1]);
    return tv;
  }

  double max_value() const { return *std::max_element(values.begin(), values.end()); }
  double min_value() const { return *std::min_element(values.begin(), values.end()); }
};

// Continuous piecewise-linear function through (knots[i], values[i]),
// extended constantly outside the knot range.
struct LinearInterpolant {
  std::vector<double> knots;
  std::vector<double> values;

  LinearInterpolant() = default;
  LinearInterpolant(std::vector<double> k, std::vector<double> v)
      : knots(std::move(k)), values(std::move(v)) {
    if (knots.empty() || knots.size() != values.size())
      throw std::invalid_argument("LinearInterpolant: knot/value size mismatch");
    for (std::size_t i = 1; i < knots.size(); ++i)
      if (!(knots[i] > knots[i - 1]))
        throw std::invalid_argument("LinearInterpolant: knots must be strictly increasing");
  }

  double operator()(double t) const {
    if (t <= knots.front()) return values.front();
    if (t >= knots.back()) return values.back();
    auto it = std::upper_bound(knots.begin(), knots.end(), t);
    std::size_t i = static_cast<std::size_t>(it - knots.begin()) - 1;
    double w = (t - knots[i]) / (knots[i + 1] - knots[i]);
    return values[i] + w * (values[i + 1] - values[i]);
  }
};

// Merge sorted knot lists, dropping duplicates (exact comparison: the callers
// deal in lattice-aligned or event-exact doubles).
inline std::vector<double> merge_knots(const std::vector<double>& a,
                                       const std::vector<double>& b) {
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline std::vector<double> clip_knots(std::vector<double> k, double a, double b) {
  std::vector<double> out;
  out.push_back(a);
  for (double t : k)
    if (t > a && t < b) out.push_back(t);
  out.push_back(b);
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Exact integral of w(t) * q(t) over [a, b] where w is a step function and q is
// linear with q(a) = q0, slope s.
inline double integrate_weighted_linear(const StepFunction& w, double a, double b,
                                        double q0, double slope) {
  if (b <= a) return 0.0;
  double total = 0.0;
  std::vector<double> cuts = clip_knots(w.knots, a, b);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double lo = cuts[i], hi = cuts[i + 1];
    double qa = q0 + slope * (lo - a);
    double qb = q0 + slope * (hi - a);
    total += w(lo) * 0.5 * (qa + qb) * (hi - lo);
  }
  return total;
}

}  // namespace chainflow
