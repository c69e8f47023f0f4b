#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "chainflow/analysis.hpp"
#include "chainflow/config.hpp"
#include "chainflow/cost.hpp"
#include "chainflow/grid.hpp"
#include "chainflow/io.hpp"
#include "chainflow/optimizer.hpp"
#include "chainflow/tangent.hpp"
#include "chainflow/upwind_euler.hpp"
#include "chainflow/wft.hpp"

namespace {

using namespace chainflow;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;  // empty: [output] directory from the config, or "out"
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "configuration file")->required();
  cmd->add_option("--set", args.overrides, "override section.key=value")->take_all();
  cmd->add_option("--out", args.out_dir, "output directory");
}

// All computation happens against this buffer; files only touch disk once the
// whole command has succeeded.
struct Report {
  std::vector<std::pair<std::string, std::string>> files;
  std::string echo;  // also printed to stdout

  void add(const std::string& name, std::string content) {
    files.emplace_back(name, std::move(content));
  }
  void add_echoed(const std::string& name, const std::string& content) {
    add(name, content);
    echo += content;
  }
  void flush(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    for (const auto& [name, content] : files)
      write_text_file((std::filesystem::path(dir) / name).string(), content);
    std::cout << echo;
  }
};

struct LoadedProblem {
  Problem prob;
  std::string out_dir;
};

LoadedProblem load_problem(const CommonArgs& args) {
  Config cfg = Config::parse_file(args.config_path);
  for (const std::string& ov : args.overrides) {
    std::size_t eq = ov.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override '" + ov + "' is not of the form section.key=value");
    cfg.set(ov.substr(0, eq), ov.substr(eq + 1));
  }
  LoadedProblem lp;
  lp.out_dir = args.out_dir;
  if (lp.out_dir.empty()) lp.out_dir = cfg.get_string("output", "directory", "out");
  lp.prob = build_problem(cfg);
  for (const std::string& w : lp.prob.warnings) std::cerr << "warning: " << w << "\n";
  return lp;
}

// Queue i (0-based) sits in front of processor i+2 in 1-based numbering.
std::string queue_label(std::size_t i) { return fmt_int(static_cast<long long>(i) + 2); }

// --- simulate -----------------------------------------------------------

int cmd_simulate(const CommonArgs& args) {
  LoadedProblem lp = load_problem(args);
  const Problem& prob = lp.prob;
  const bool run_ue = prob.solver != "exact";
  const bool run_wft = prob.solver != "upwind";
  const double T = prob.control.horizon;

  Report report;
  std::string summary;
  UETrajectory traj;
  WftSolution sol;

  if (run_ue) {
    Grid grid = build_grid(prob.chain, prob.base_dx, prob.refinement, T);
    traj = ue_simulate(prob.chain, prob.control, grid);
    CostBreakdown cost = cost_ue(traj, prob.cost);

    std::string rows = "# queue step time load\n";
    for (std::size_t i = 0; i < traj.queues.size(); ++i)
      for (std::size_t n = 0; n < traj.queues[i].size(); ++n)
        rows += queue_label(i) + " " + fmt_int(static_cast<long long>(n)) + " " +
                fmt9(grid.time(i + 1, n)) + " " + fmt9(traj.queues[i][n]) + "\n";
    report.add("ue_queues.txt", std::move(rows));

    rows = "# step time rate\n";
    const std::size_t last = prob.chain.size() - 1;
    for (std::size_t n = 0; n < traj.grid.steps[last]; ++n)
      rows += fmt_int(static_cast<long long>(n)) + " " + fmt9(grid.time(last, n)) + " " +
              fmt9(prob.chain.processors[last].velocity * traj.exit_density[last][n]) + "\n";
    report.add("ue_outflow.txt", std::move(rows));

    rows = "# processor cell x density\n";
    for (std::size_t j = 0; j < prob.chain.size(); ++j) {
      std::vector<double> row = traj.row_at(j, traj.step_at(j, prob.snapshot_time));
      for (std::size_t i = 0; i < row.size(); ++i)
        rows += fmt_int(static_cast<long long>(j) + 1) + " " +
                fmt_int(static_cast<long long>(i)) + " " +
                fmt9(static_cast<double>(i) * grid.dx) + " " + fmt9(row[i]) + "\n";
    }
    report.add("ue_profile.txt", std::move(rows));

    summary += "solver upwind\n";
    summary += "refinement " + fmt_int(prob.refinement) + "\n";
    summary += "dx " + fmt9(grid.dx) + "\n";
    for (std::size_t i = 0; i < cost.j1_by_queue.size(); ++i)
      summary += "J1_queue_" + queue_label(i) + " " + fmt9(cost.j1_by_queue[i]) + "\n";
    summary += "J1 " + fmt9(cost.j1) + "\n";
    summary += "J2 " + fmt9(cost.j2) + "\n";
    summary += "J " + fmt9(cost.total) + "\n";
    summary += "mass_initial " + fmt9(traj.mass_initial()) + "\n";
    summary += "mass_in " + fmt9(traj.mass_in()) + "\n";
    summary += "mass_out " + fmt9(traj.mass_out()) + "\n";
    summary += "mass_final " + fmt9(traj.mass_final()) + "\n";
    summary += "mass_error " + fmt9(traj.mass_balance_error()) + "\n";
    summary += "queue_clamp_mass " + fmt9(traj.clamp_added) + "\n";
  }

  if (run_wft) {
    sol = wft_solve(prob.chain, prob.control, prob.cost);

    std::string rows = "# queue time load\n";
    for (std::size_t i = 0; i < sol.queues.size(); ++i)
      for (std::size_t n = 0; n < sol.queues[i].times.size(); ++n)
        rows += queue_label(i) + " " + fmt9(sol.queues[i].times[n]) + " " +
                fmt9(sol.queues[i].loads[n]) + "\n";
    report.add("wft_queues.txt", std::move(rows));

    rows = "# time rate\n";
    for (std::size_t n = 0; n < sol.outflow.knots.size(); ++n)
      rows += fmt9(sol.outflow.knots[n]) + " " + fmt9(sol.outflow.values[n]) + "\n";
    report.add("wft_outflow.txt", std::move(rows));

    rows = "# time kind location before after\n";
    for (const WftEventRecord& ev : sol.events) {
      const char* kind = ev.kind == 0 ? "queue-empties" : (ev.kind == 1 ? "arrival" : "jump");
      rows += fmt9(ev.time) + " " + kind + " " + fmt_int(static_cast<long long>(ev.location)) +
              " " + fmt9(ev.before) + " " + fmt9(ev.after) + "\n";
    }
    report.add("wft_events.txt", std::move(rows));

    rows = "# processor x density\n";
    for (std::size_t j = 0; j < prob.chain.size(); ++j) {
      StepFunction profile = sol.profile_at(j, prob.snapshot_time);
      for (std::size_t n = 0; n < profile.knots.size(); ++n)
        rows += fmt_int(static_cast<long long>(j) + 1) + " " + fmt9(profile.knots[n]) + " " +
                fmt9(profile.values[n]) + "\n";
    }
    report.add("wft_profile.txt", std::move(rows));

    summary += "solver exact\n";
    summary += "events " + fmt_int(static_cast<long long>(sol.event_count)) + "\n";
    for (std::size_t i = 0; i < sol.cost.j1_by_queue.size(); ++i)
      summary += "J1_queue_" + queue_label(i) + " " + fmt9(sol.cost.j1_by_queue[i]) + "\n";
    summary += "J1 " + fmt9(sol.cost.j1) + "\n";
    summary += "J2 " + fmt9(sol.cost.j2) + "\n";
    summary += "J " + fmt9(sol.cost.total) + "\n";
    summary += "mass_initial " + fmt9(sol.mass_initial()) + "\n";
    summary += "mass_in " + fmt9(sol.mass_in()) + "\n";
    summary += "mass_out " + fmt9(sol.mass_out()) + "\n";
    summary += "mass_final " + fmt9(sol.mass_final()) + "\n";
    summary += "mass_error " + fmt9(sol.mass_balance_error()) + "\n";
  }

  if (run_ue && run_wft) {
    SolverDistance d = solver_distance(traj, sol, prob.snapshot_time);
    summary += "distance_time " + fmt9(prob.snapshot_time) + "\n";
    summary += "distance_density " + fmt9(d.density) + "\n";
    summary += "distance_queue " + fmt9(d.queue) + "\n";
    summary += "distance_total " + fmt9(d.total) + "\n";
  }

  report.add_echoed("summary.txt", summary);
  report.flush(lp.out_dir);
  return 0;
}

// --- optimize -----------------------------------------------------------

int cmd_optimize(const CommonArgs& args) {
  LoadedProblem lp = load_problem(args);
  const Problem& prob = lp.prob;
  Grid grid = build_grid(prob.chain, prob.base_dx, prob.refinement, prob.control.horizon);
  DescentResult res = optimize(prob.chain, prob.control, prob.cost, prob.descent, &grid);

  Report report;
  const std::size_t K = prob.control.breakpoints.size();
  std::string rows = "# iteration";
  for (std::size_t k = 0; k < K; ++k) rows += " tau_" + fmt_int(static_cast<long long>(k) + 1);
  rows += " j1 j2 j h\n";
  for (const DescentIterate& it : res.trace) {
    rows += fmt_int(it.iteration);
    for (double tau : it.taus) rows += " " + fmt9(tau);
    rows += " " + fmt9(it.j1) + " " + fmt9(it.j2) + " " + fmt9(it.total) + " " +
            fmt9(it.step_scale_used) + "\n";
  }
  report.add("trace.txt", std::move(rows));

  std::string summary;
  for (std::size_t k = 0; k < K; ++k)
    summary += "tau_" + fmt_int(static_cast<long long>(k) + 1) + " " + fmt9(res.final_taus[k]) +
               "\n";
  summary += "J1 " + fmt9(res.final_cost.j1) + "\n";
  summary += "J2 " + fmt9(res.final_cost.j2) + "\n";
  summary += "J " + fmt9(res.final_cost.total) + "\n";
  summary += "iterations " + fmt_int(res.iterations) + "\n";
  summary += "stop_reason " + res.stop_reason + "\n";
  summary += "control_levels";
  for (double lvl : res.final_control.levels) summary += " " + fmt9(lvl);
  summary += "\ncontrol_breakpoints";
  for (double tau : res.final_control.breakpoints) summary += " " + fmt9(tau);
  summary += "\n";
  report.add_echoed("optimize_summary.txt", summary);
  report.flush(lp.out_dir);
  return 0;
}

// --- compare ------------------------------------------------------------

int cmd_compare(const CommonArgs& args) {
  LoadedProblem lp = load_problem(args);
  const Problem& prob = lp.prob;
  std::vector<ConvergenceRow> rows = convergence_study(
      prob.chain, prob.control, prob.cost, prob.base_dx, prob.refinements, prob.snapshot_time);

  std::string out = "# refinement dx distance ratio emptying_events mass_error\n";
  for (const ConvergenceRow& r : rows) {
    out += fmt_int(r.refinement) + " " + fmt9(r.dx) + " " + fmt9(r.distance) + " " +
           (r.has_ratio ? fmt9(r.ratio) : std::string("-")) + " " +
           fmt_int(static_cast<long long>(r.emptying_events)) + " " + fmt9(r.mass_error) + "\n";
  }
  Report report;
  report.add_echoed("convergence.txt", out);
  report.flush(lp.out_dir);
  return 0;
}

// --- gradcheck ----------------------------------------------------------

int cmd_gradcheck(const CommonArgs& args) {
  LoadedProblem lp = load_problem(args);
  const Problem& prob = lp.prob;
  Grid grid = build_grid(prob.chain, prob.base_dx, prob.refinement, prob.control.horizon);
  const Grid* grid_ptr = prob.descent.backend == Backend::Upwind ? &grid : nullptr;

  TangentResult tan;
  CostBreakdown cost;
  if (prob.descent.backend == Backend::Upwind) {
    UETrajectory traj = ue_simulate(prob.chain, prob.control, grid);
    cost = cost_ue(traj, prob.cost);
    TangentOptions topt;
    topt.probe_sign = prob.descent.probe_sign;
    tan = ue_tangent(traj, prob.control, prob.cost, topt);
  } else {
    WftOptions wopt;
    wopt.tangents = true;
    wopt.probe_sign = prob.descent.probe_sign;
    wopt.record_events = false;
    WftSolution sol = wft_solve(prob.chain, prob.control, prob.cost, wopt);
    cost = sol.cost;
    tan.probe = sol.probe;
    tan.gradient = sol.gradient;
    tan.y1 = sol.y1;
    tan.y2 = sol.y2;
  }
  FdGradient fd =
      fd_gradient(prob.chain, prob.control, prob.cost, prob.descent.backend, grid_ptr);

  Report report;
  const std::size_t K = prob.control.breakpoints.size();
  const std::size_t Q = prob.chain.size() - 1;
  std::string rows = "# component tau";
  for (std::size_t i = 0; i < Q; ++i) rows += " y1_queue_" + queue_label(i);
  rows += " y2 gradient\n";
  for (std::size_t k = 0; k < K; ++k) {
    rows += fmt_int(static_cast<long long>(k) + 1) + " " + fmt9(prob.control.breakpoints[k]);
    for (std::size_t i = 0; i < Q; ++i) rows += " " + fmt9(tan.y1[k][i]);
    rows += " " + fmt9(tan.y2[k]) + " " + fmt9(tan.gradient[k]) + "\n";
  }
  report.add("gradient.txt", std::move(rows));

  const double floor = gradient_noise_floor(prob.control.quantum, cost.total);
  bool any_mismatch = false;
  std::string check = "# component tangent fd rel_error status\n";
  for (std::size_t k = 0; k < K; ++k) {
    check += fmt_int(static_cast<long long>(k) + 1) + " " + fmt9(tan.gradient[k]) + " ";
    if (!fd.valid[k]) {
      check += "- - skipped\n";
      continue;
    }
    check += fmt9(fd.values[k]) + " ";
    if (std::abs(fd.values[k]) <= floor && std::abs(tan.gradient[k]) <= floor) {
      check += "- stationary\n";
      continue;
    }
    const double rel = std::abs(tan.gradient[k] - fd.values[k]) / std::abs(fd.values[k]);
    if (rel <= 0.05) {
      check += fmt9(rel) + " ok\n";
    } else {
      check += fmt9(rel) + " mismatch\n";
      any_mismatch = true;
    }
  }
  report.add_echoed("gradient_check.txt", check);
  report.flush(lp.out_dir);
  return any_mismatch ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"supply-chain flow simulation and switching-time optimization"};
  app.require_subcommand(1);

  CommonArgs sim_args, opt_args, cmp_args, grad_args;
  CLI::App* sim = app.add_subcommand("simulate", "run the solvers and write trajectories");
  add_common(sim, sim_args);
  CLI::App* opt = app.add_subcommand("optimize", "steepest descent on the control jump times");
  add_common(opt, opt_args);
  CLI::App* cmp = app.add_subcommand("compare", "refinement study against the exact solver");
  add_common(cmp, cmp_args);
  CLI::App* grad = app.add_subcommand("gradcheck", "tangent gradient vs finite differences");
  add_common(grad, grad_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(sim_args);
    if (opt->parsed()) return cmd_optimize(opt_args);
    if (cmp->parsed()) return cmd_compare(cmp_args);
    if (grad->parsed()) return cmd_gradcheck(grad_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
