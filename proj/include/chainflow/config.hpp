#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "chainflow/analysis.hpp"
#include "chainflow/chain.hpp"
#include "chainflow/control.hpp"
#include "chainflow/cost.hpp"
#include "chainflow/io.hpp"
#include "chainflow/optimizer.hpp"
#include "chainflow/piecewise.hpp"

namespace chainflow {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_tokens(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  auto res = std::from_chars(b, e, out);
  return res.ec == std::errc() && res.ptr == e;
}

}  // namespace detail

// Minimal INI-style configuration: [section] headers, key = value lines,
// comments with '#' or ';'.  Typed access with per-line error reporting.
class Config {
 public:
  static Config parse_string(const std::string& text, const std::string& origin = "<config>") {
    Config cfg;
    cfg.origin_ = origin;
    std::string section;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      std::size_t nl = text.find('\n', pos);
      std::string line =
          text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
      pos = (nl == std::string::npos) ? text.size() + 1 : nl + 1;
      ++line_no;

      std::size_t hash = line.find_first_of("#;");
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = detail::trim(line);
      if (line.empty()) continue;

      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError(origin + ":" + std::to_string(line_no) + ": malformed section header");
        section = detail::trim(line.substr(1, line.size() - 2));
        if (section.empty())
          throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty section name");
        cfg.sections_[section];
        continue;
      }
      std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
      if (section.empty())
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": key outside any section");
      std::string key = detail::trim(line.substr(0, eq));
      std::string value = detail::trim(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
      auto& sec = cfg.sections_[section];
      if (sec.count(key))
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key +
                          "' in [" + section + "]");
      sec[key] = {value, line_no};
    }
    return cfg;
  }

  static Config parse_file(const std::string& path) {
    return parse_string(read_text_file(path), path);
  }

  // Override or add "section.key" = value (the --set mechanism).
  void set(const std::string& dotted, const std::string& value) {
    std::size_t dot = dotted.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == dotted.size())
      throw ConfigError("override '" + dotted + "' is not of the form section.key");
    sections_[dotted.substr(0, dot)][dotted.substr(dot + 1)] = {detail::trim(value), 0};
  }

  bool has(const std::string& sec, const std::string& key) const {
    auto s = sections_.find(sec);
    return s != sections_.end() && s->second.count(key) > 0;
  }

  std::string get_string(const std::string& sec, const std::string& key) const {
    return entry(sec, key).value;
  }
  std::string get_string(const std::string& sec, const std::string& key,
                         const std::string& fallback) const {
    return has(sec, key) ? get_string(sec, key) : fallback;
  }

  double get_double(const std::string& sec, const std::string& key) const {
    const Entry& e = entry(sec, key);
    double out;
    if (!detail::parse_double(e.value, out)) throw bad_value(sec, key, e, "a number");
    return out;
  }
  double get_double(const std::string& sec, const std::string& key, double fallback) const {
    return has(sec, key) ? get_double(sec, key) : fallback;
  }

  long long get_int(const std::string& sec, const std::string& key) const {
    const Entry& e = entry(sec, key);
    long long out;
    auto res = std::from_chars(e.value.data(), e.value.data() + e.value.size(), out);
    if (res.ec != std::errc() || res.ptr != e.value.data() + e.value.size())
      throw bad_value(sec, key, e, "an integer");
    return out;
  }
  long long get_int(const std::string& sec, const std::string& key, long long fallback) const {
    return has(sec, key) ? get_int(sec, key) : fallback;
  }

  std::vector<double> get_list(const std::string& sec, const std::string& key) const {
    const Entry& e = entry(sec, key);
    std::vector<double> out;
    for (const std::string& tok : detail::split_tokens(e.value)) {
      double v;
      if (!detail::parse_double(tok, v)) throw bad_value(sec, key, e, "a list of numbers");
      out.push_back(v);
    }
    return out;
  }
  std::vector<double> get_list(const std::string& sec, const std::string& key,
                               const std::vector<double>& fallback) const {
    return has(sec, key) ? get_list(sec, key) : fallback;
  }

  // A scalar "c" (constant) or a table "0:v0 t1:v1 ..." of position:value
  // pairs starting at 0 with strictly increasing positions.
  StepFunction get_table(const std::string& sec, const std::string& key,
                         double fallback_constant) const {
    if (!has(sec, key)) return StepFunction::constant(fallback_constant);
    const Entry& e = entry(sec, key);
    auto toks = detail::split_tokens(e.value);
    if (toks.empty()) throw bad_value(sec, key, e, "a constant or position:value pairs");
    if (toks.size() == 1 && toks[0].find(':') == std::string::npos) {
      double v;
      if (!detail::parse_double(toks[0], v)) throw bad_value(sec, key, e, "a number");
      return StepFunction::constant(v);
    }
    std::vector<double> knots, values;
    for (const std::string& tok : toks) {
      std::size_t colon = tok.find(':');
      if (colon == std::string::npos) throw bad_value(sec, key, e, "position:value pairs");
      double t, v;
      if (!detail::parse_double(tok.substr(0, colon), t) ||
          !detail::parse_double(tok.substr(colon + 1), v))
        throw bad_value(sec, key, e, "position:value pairs");
      if (!knots.empty() && t <= knots.back())
        throw bad_value(sec, key, e, "strictly increasing positions");
      knots.push_back(t);
      values.push_back(v);
    }
    if (knots.front() != 0.0) throw bad_value(sec, key, e, "a table starting at position 0");
    return StepFunction(std::move(knots), std::move(values));
  }

  // Reject keys nobody consumes; catches typos early.
  void enforce_schema(const std::map<std::string, std::set<std::string>>& schema) const {
    for (const auto& [sec, keys] : sections_) {
      auto it = schema.find(sec);
      if (it == schema.end()) throw ConfigError(origin_ + ": unknown section [" + sec + "]");
      for (const auto& [key, e] : keys) {
        if (it->second.count(key)) continue;
        if (sec == "chain" && key.rfind("density_", 0) == 0) continue;
        throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": unknown key '" + key +
                          "' in [" + sec + "]");
      }
    }
  }

  const std::string& origin() const { return origin_; }

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };

  const Entry& entry(const std::string& sec, const std::string& key) const {
    auto s = sections_.find(sec);
    if (s == sections_.end() || !s->second.count(key))
      throw ConfigError(origin_ + ": missing required key '" + key + "' in [" + sec + "]");
    return s->second.at(key);
  }

  ConfigError bad_value(const std::string& sec, const std::string& key, const Entry& e,
                        const std::string& expected) const {
    return ConfigError(origin_ + ":" + std::to_string(e.line) + ": value of '" + sec + "." + key +
                       "' must be " + expected + " (got '" + e.value + "')");
  }

  std::string origin_;
  std::map<std::string, std::map<std::string, Entry>> sections_;
};

// Everything a CLI command needs, assembled and validated from one config.
struct Problem {
  SupplyChain chain;
  InflowControl control;
  CostSpec cost;
  double base_dx = 0.0;
  int refinement = 0;
  std::vector<int> refinements;  // for the refinement study
  double snapshot_time = 0.0;
  std::string solver;  // upwind | exact | both
  DescentOptions descent;
  std::vector<std::string> warnings;
};

inline Problem build_problem(const Config& cfg) {
  static const std::map<std::string, std::set<std::string>> schema = {
      {"chain",
       {"max_rates", "velocities", "lengths", "common_unit", "initial_queues", "density"}},
      {"control", {"horizon", "levels", "breakpoints", "tv_budget"}},
      {"cost", {"alpha1", "alpha2", "psi", "psi_interpolation"}},
      {"grid", {"base_dx", "refinement", "refinements", "snapshot_time", "solver"}},
      {"descent",
       {"h", "policy", "max_iterations", "patience", "rel_tol", "backend", "probe_sign"}},
      {"output", {"directory"}},
  };
  cfg.enforce_schema(schema);

  Problem prob;

  // --- chain -----------------------------------------------------------
  const std::vector<double> rates = cfg.get_list("chain", "max_rates");
  if (rates.empty()) throw ConfigError("chain.max_rates must name at least one processor");
  const std::size_t P = rates.size();
  auto broadcast = [&](const char* key, double fallback, std::size_t n) {
    std::vector<double> vals = cfg.get_list("chain", key, {fallback});
    if (vals.size() == 1) vals.assign(n, vals[0]);
    if (vals.size() != n)
      throw ConfigError(std::string("chain.") + key + ": expected 1 or " + std::to_string(n) +
                        " values, got " + std::to_string(vals.size()));
    return vals;
  };
  const std::vector<double> velocities = broadcast("velocities", 1.0, P);
  const std::vector<double> lengths = broadcast("lengths", 1.0, P);
  std::vector<double> queues0;
  if (P > 1) queues0 = broadcast("initial_queues", 0.0, P - 1);

  prob.chain.common_unit = cfg.get_double("chain", "common_unit", 1.0);
  prob.chain.initial_queues = queues0;
  const StepFunction density_default = cfg.get_table("chain", "density", 0.0);
  for (std::size_t j = 0; j < P; ++j) {
    Processor p;
    p.length = lengths[j];
    p.velocity = velocities[j];
    p.max_rate = rates[j];
    const std::string key = "density_" + std::to_string(j + 1);
    p.initial_density = cfg.has("chain", key) ? cfg.get_table("chain", key, 0.0) : density_default;
    if (p.initial_density.knots.back() >= p.length && p.initial_density.knots.size() > 1)
      throw ConfigError("chain." + key + ": positions must lie inside [0, length)");
    prob.chain.processors.push_back(std::move(p));
  }
  {
    ValidationReport report = validate_chain(prob.chain);
    for (const auto& issue : report.issues) {
      if (issue.fatal) throw ConfigError("chain: " + issue.message);
      prob.warnings.push_back("chain: " + issue.message);
    }
  }

  // --- grid ------------------------------------------------------------
  prob.base_dx = cfg.get_double("grid", "base_dx");
  prob.refinement = static_cast<int>(cfg.get_int("grid", "refinement", 0));
  if (prob.refinement < 0) throw ConfigError("grid.refinement must be nonnegative");
  for (double nu : cfg.get_list("grid", "refinements", {0.0, 1.0, 2.0, 3.0})) {
    if (nu < 0.0 || nu != std::floor(nu))
      throw ConfigError("grid.refinements must be nonnegative integers");
    prob.refinements.push_back(static_cast<int>(nu));
  }
  prob.solver = cfg.get_string("grid", "solver", "both");
  if (prob.solver != "upwind" && prob.solver != "exact" && prob.solver != "both")
    throw ConfigError("grid.solver must be one of: upwind, exact, both");

  // --- control ---------------------------------------------------------
  const double horizon = cfg.get_double("control", "horizon");
  if (!(horizon > 0.0)) throw ConfigError("control.horizon must be positive");
  const std::vector<double> levels = cfg.get_list("control", "levels");
  std::vector<double> taus = cfg.get_list("control", "breakpoints", {});
  if (taus.size() + 1 != levels.size())
    throw ConfigError("control: levels must have exactly one more entry than breakpoints");

  const double quantum =
      (prob.base_dx / std::pow(2.0, prob.refinement)) / prob.chain.processors[0].velocity;
  bool snapped_any = false;
  for (double& tau : taus) {
    if (on_lattice(tau, quantum)) continue;
    double snapped = snap_to_lattice(tau, quantum);
    prob.warnings.push_back("control: breakpoint " + fmt9(tau) +
                            " is off the time lattice, snapped to " + fmt9(snapped));
    tau = snapped;
    snapped_any = true;
  }
  InflowControl control = collapse_control(horizon, quantum, taus, levels);
  if (snapped_any && control.breakpoints.size() != taus.size())
    prob.warnings.push_back("control: snapping merged or removed breakpoints");
  prob.control = std::move(control);
  if (cfg.has("control", "tv_budget")) {
    const double budget = cfg.get_double("control", "tv_budget");
    if (prob.control.total_variation() > budget * (1.0 + 1e-12))
      throw ConfigError("control: total variation " + fmt9(prob.control.total_variation()) +
                        " exceeds the budget " + fmt9(budget));
  }

  prob.snapshot_time = cfg.get_double("grid", "snapshot_time", horizon);
  if (prob.snapshot_time < 0.0 || prob.snapshot_time > horizon)
    throw ConfigError("grid.snapshot_time must lie in [0, horizon]");

  // --- cost ------------------------------------------------------------
  prob.cost.alpha1 = cfg.get_table("cost", "alpha1", 0.0);
  prob.cost.alpha2 = cfg.get_table("cost", "alpha2", 0.0);
  const std::string interp = cfg.get_string("cost", "psi_interpolation", "constant");
  if (interp == "linear") {
    StepFunction t = cfg.get_table("cost", "psi", 0.0);
    prob.cost.psi_is_linear = true;
    prob.cost.psi_ramp = LinearInterpolant{t.knots, t.values};
  } else if (interp == "constant") {
    prob.cost.psi_steps = cfg.get_table("cost", "psi", 0.0);
  } else {
    throw ConfigError("cost.psi_interpolation must be 'constant' or 'linear'");
  }

  // --- descent ---------------------------------------------------------
  prob.descent.step_scale = cfg.get_double("descent", "h", 0.02);
  if (!(prob.descent.step_scale > 0.0)) throw ConfigError("descent.h must be positive");
  const std::string policy = cfg.get_string("descent", "policy", "backtracking");
  if (policy == "backtracking")
    prob.descent.policy = StepPolicy::Backtracking;
  else if (policy == "fixed")
    prob.descent.policy = StepPolicy::Fixed;
  else
    throw ConfigError("descent.policy must be 'backtracking' or 'fixed'");
  prob.descent.max_iterations = static_cast<int>(cfg.get_int("descent", "max_iterations", 200));
  prob.descent.patience = static_cast<int>(cfg.get_int("descent", "patience", 5));
  prob.descent.rel_tol = cfg.get_double("descent", "rel_tol", 1e-9);
  const std::string backend = cfg.get_string("descent", "backend", "upwind");
  if (backend == "upwind")
    prob.descent.backend = Backend::Upwind;
  else if (backend == "exact")
    prob.descent.backend = Backend::FrontTracking;
  else
    throw ConfigError("descent.backend must be 'upwind' or 'exact'");
  prob.descent.probe_sign = cfg.get_double("descent", "probe_sign", 1.0);
  if (prob.descent.probe_sign != 1.0 && prob.descent.probe_sign != -1.0)
    throw ConfigError("descent.probe_sign must be 1 or -1");

  return prob;
}

}  // namespace chainflow
