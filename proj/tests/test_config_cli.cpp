#include <catch2/catch_amalgamated.hpp>

#include <string>

#include "chainflow/config.hpp"
#include "chainflow/io.hpp"

using namespace chainflow;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

const char* kMinimal = R"(
[chain]
max_rates = 200 75

[control]
horizon = 2.5
levels = 100 58
breakpoints = 0.3

[cost]
alpha1 = 1

[grid]
base_dx = 0.1
)";

}  // namespace

TEST_CASE("config parser understands sections, comments and lists") {
    Config cfg = Config::parse_string("# top comment\n[a]\nx = 1 2 3\ny = hello ; trailing\n");
    CHECK(cfg.get_list("a", "x") == std::vector<double>{1.0, 2.0, 3.0});
    CHECK(cfg.get_string("a", "y") == "hello");
    CHECK(cfg.has("a", "x"));
    CHECK_FALSE(cfg.has("a", "z"));
    CHECK(cfg.get_double("a", "z", 9.0) == 9.0);
}

TEST_CASE("config parser reports the offending line") {
    CHECK_THROWS_WITH(Config::parse_string("[a]\nkey_without_value\n"),
                      ContainsSubstring(":2:"));
    CHECK_THROWS_WITH(Config::parse_string("x = 1\n"), ContainsSubstring("outside any section"));
    CHECK_THROWS_WITH(Config::parse_string("[a\n"), ContainsSubstring("malformed section"));
    CHECK_THROWS_WITH(Config::parse_string("[a]\nx = 1\nx = 2\n"),
                      ContainsSubstring("duplicate key"));
    CHECK_THROWS_WITH(Config::parse_string("[a]\nx = nan-ish\n").get_double("a", "x"),
                      ContainsSubstring("a.x"));
}

TEST_CASE("tables parse scalars and time:value rows") {
    Config cfg = Config::parse_string("[c]\nflat = 7\nsteps = 0:100 10:75\nbad = 5:1\n");
    StepFunction flat = cfg.get_table("c", "flat", 0.0);
    CHECK(flat(123.0) == 7.0);
    StepFunction steps = cfg.get_table("c", "steps", 0.0);
    CHECK(steps(9.9) == 100.0);
    CHECK(steps(10.0) == 75.0);
    CHECK_THROWS(cfg.get_table("c", "bad", 0.0));
    StepFunction fallback = cfg.get_table("c", "absent", 3.0);
    CHECK(fallback(0.0) == 3.0);
}

TEST_CASE("overrides replace values before building") {
    Config cfg = Config::parse_string(kMinimal);
    cfg.set("grid.refinement", "2");
    cfg.set("control.levels", "100 60");
    Problem p = build_problem(cfg);
    CHECK(p.refinement == 2);
    CHECK(p.control.levels == std::vector<double>{100.0, 60.0});
    CHECK_THROWS(cfg.set("no-dot", "1"));
}

TEST_CASE("problem building fills the chain and the lattice quantum") {
    Config cfg = Config::parse_string(kMinimal);
    Problem p = build_problem(cfg);
    REQUIRE(p.chain.size() == 2);
    CHECK(p.chain.processors[0].max_rate == 200.0);
    CHECK(p.chain.processors[1].max_rate == 75.0);
    CHECK(p.chain.processors[0].velocity == 1.0);  // broadcast default
    CHECK(p.chain.processors[0].length == 1.0);
    CHECK(p.chain.initial_queues == std::vector<double>{0.0});
    CHECK(p.control.quantum == Approx(0.1));
    CHECK(p.control.breakpoints == std::vector<double>{0.3});
    CHECK(p.snapshot_time == Approx(2.5));  // defaults to the horizon
    CHECK(p.solver == "both");
    CHECK(p.warnings.empty());
}

TEST_CASE("schema rejects unknown sections and keys") {
    CHECK_THROWS_WITH(build_problem(Config::parse_string(std::string(kMinimal) + "[junk]\nx = 1\n")),
                      ContainsSubstring("unknown section"));
    CHECK_THROWS_WITH(
        build_problem(Config::parse_string(std::string(kMinimal) + "[descent]\nstep = 1\n")),
        ContainsSubstring("unknown key"));
}

TEST_CASE("per-processor density overrides are validated") {
    Config cfg = Config::parse_string(
        "[chain]\nmax_rates = 200 75\ndensity_2 = 0:10 0.5:20\n"
        "[control]\nhorizon = 2.5\nlevels = 100 58\nbreakpoints = 0.3\n"
        "[grid]\nbase_dx = 0.1\n");
    Problem p = build_problem(cfg);
    CHECK(p.chain.processors[1].initial_density(0.25) == 10.0);
    CHECK(p.chain.processors[1].initial_density(0.75) == 20.0);

    Config bad = Config::parse_string(
        "[chain]\nmax_rates = 200 75\ndensity_2 = 0:10 1.5:20\n"
        "[control]\nhorizon = 2.5\nlevels = 100 58\nbreakpoints = 0.3\n"
        "[grid]\nbase_dx = 0.1\n");
    CHECK_THROWS_WITH(build_problem(bad), ContainsSubstring("inside [0, length)"));
}

TEST_CASE("off-lattice breakpoints are snapped with a warning") {
    Config cfg = Config::parse_string(
        "[chain]\nmax_rates = 200 75\n"
        "[control]\nhorizon = 2.5\nlevels = 100 58\nbreakpoints = 0.301\n"
        "[grid]\nbase_dx = 0.1\n");
    Problem p = build_problem(cfg);
    REQUIRE(p.control.breakpoints.size() == 1);
    CHECK(p.control.breakpoints[0] == Approx(0.3).epsilon(1e-12));  // 3 lattice quanta
    REQUIRE_FALSE(p.warnings.empty());
    CHECK_THAT(p.warnings.front(), ContainsSubstring("0.301"));
}

TEST_CASE("total-variation budget is enforced when present") {
    Config cfg = Config::parse_string(
        "[chain]\nmax_rates = 200 75\n"
        "[control]\nhorizon = 2.5\nlevels = 100 58\nbreakpoints = 0.3\ntv_budget = 10\n"
        "[grid]\nbase_dx = 0.1\n");
    CHECK_THROWS_WITH(build_problem(cfg), ContainsSubstring("total variation"));
}

TEST_CASE("zero-data problem runs to an identically zero state") {
    Config cfg = Config::parse_string(
        "[chain]\nmax_rates = 200 75\n"
        "[control]\nhorizon = 1.0\nlevels = 0\n"
        "[grid]\nbase_dx = 0.1\n");
    Problem p = build_problem(cfg);
    Grid g = build_grid(p.chain, p.base_dx, p.refinement, p.control.horizon);
    UETrajectory t = ue_simulate(p.chain, p.control, g);
    for (const auto& qs : t.queues)
        for (double q : qs) CHECK(q == 0.0);
    CHECK(cost_ue(t, p.cost).total == 0.0);
    WftSolution w = wft_solve(p.chain, p.control, p.cost);
    CHECK(w.cost.total == 0.0);
    CHECK(w.outflow.max_value() == 0.0);
}

TEST_CASE("descent options parse and validate") {
    Config cfg = Config::parse_string(
        "[chain]\nmax_rates = 200 75\n"
        "[control]\nhorizon = 2.5\nlevels = 100 58\nbreakpoints = 0.3\n"
        "[grid]\nbase_dx = 0.1\n"
        "[descent]\nh = 0.01\npolicy = fixed\nbackend = exact\nmax_iterations = 7\n"
        "patience = 2\nprobe_sign = -1\n");
    Problem p = build_problem(cfg);
    CHECK(p.descent.step_scale == Approx(0.01));
    CHECK(p.descent.policy == StepPolicy::Fixed);
    CHECK(p.descent.backend == Backend::FrontTracking);
    CHECK(p.descent.max_iterations == 7);
    CHECK(p.descent.patience == 2);
    CHECK(p.descent.probe_sign == -1.0);

    Config bad = Config::parse_string(
        "[chain]\nmax_rates = 200 75\n"
        "[control]\nhorizon = 2.5\nlevels = 100 58\nbreakpoints = 0.3\n"
        "[grid]\nbase_dx = 0.1\n[descent]\npolicy = sideways\n");
    CHECK_THROWS_WITH(build_problem(bad), ContainsSubstring("policy"));
}

TEST_CASE("psi accepts the linear interpolation form") {
    Config cfg = Config::parse_string(
        "[chain]\nmax_rates = 200 75\n"
        "[control]\nhorizon = 2.5\nlevels = 100 58\nbreakpoints = 0.3\n"
        "[cost]\nalpha2 = 1\npsi = 0:100 2:60\npsi_interpolation = linear\n"
        "[grid]\nbase_dx = 0.1\n");
    Problem p = build_problem(cfg);
    CHECK(p.cost.psi_is_linear);
    CHECK(p.cost.psi(1.0) == Approx(80.0));

    cfg.set("cost.psi_interpolation", "constant");
    Problem p2 = build_problem(cfg);
    CHECK_FALSE(p2.cost.psi_is_linear);
    CHECK(p2.cost.psi(1.0) == Approx(100.0));
}

TEST_CASE("number formatting is deterministic and trim round-trips") {
    CHECK(fmt9(0.0) == "0");
    CHECK(fmt9(2.25) == "2.25");
    CHECK(fmt9(1.0 / 3.0) == "0.333333333");
    CHECK(fmt_int(42) == "42");
    CHECK(join({"a", "b"}, " ") == "a b");
}
