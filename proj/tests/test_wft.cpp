#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <vector>

#include "chainflow/wft.hpp"

using namespace chainflow;
using Catch::Approx;

namespace {

SupplyChain two_arc() {
    SupplyChain c;
    c.common_unit = 1.0;
    c.processors = {{1.0, 1.0, 200.0, StepFunction::constant(0.0)},
                    {1.0, 1.0, 75.0, StepFunction::constant(0.0)}};
    c.initial_queues = {0.0};
    return c;
}

SupplyChain eleven_arc() {
    SupplyChain c;
    c.common_unit = 1.0;
    for (double mu : {200.0, 75.0, 100.0, 65.0, 150.0, 75.0, 30.0, 100.0, 80.0, 100.0, 120.0})
        c.processors.push_back({1.0, 1.0, mu, StepFunction::constant(0.0)});
    c.initial_queues.assign(10, 0.0);
    return c;
}

}  // namespace

TEST_CASE("saturating burst resolved exactly") {
    SupplyChain c = two_arc();
    InflowControl u(2.5, 0.1, {0.3}, {100.0, 58.0});
    CostSpec spec;
    spec.alpha1 = StepFunction::constant(1.0);
    WftSolution w = wft_solve(c, u, spec);

    // queue 2: rises at 25 from t=1, drains at 17 from t=1.3, empties at 1.3+7.5/17
    const double t_empty = 1.3 + 7.5 / 17.0;
    CHECK(w.queue_at(0, 1.0) == 0.0);
    CHECK(w.queue_at(0, 1.3) == Approx(7.5));
    CHECK(w.queue_at(0, 1.5) == Approx(7.5 - 17.0 * 0.2));
    CHECK(w.queue_at(0, t_empty) == Approx(0.0).margin(1e-12));
    CHECK(w.queue_at(0, 2.4) == 0.0);

    // exact queue-time integral
    CHECK(w.cost.j1 == Approx(1.125 + 7.5 * 7.5 / (2.0 * 17.0)).epsilon(1e-12));

    // outflow: transit time 2, capacity-limited to 75
    CHECK(w.outflow(1.9) == 0.0);
    CHECK(w.outflow(2.1) == Approx(75.0));
    CHECK(w.outflow(2.5) == Approx(75.0));

    // intake of processor 2: free 0, saturated 75, then free 58
    CHECK(w.intake_history[1](0.5) == 0.0);
    CHECK(w.intake_history[1](1.2) == Approx(75.0));
    CHECK(w.intake_history[1](t_empty + 1e-9) == Approx(58.0));

    // recorded events: control jump, three wave arrivals, one queue emptying
    REQUIRE(w.event_count == 5);
    REQUIRE(w.events.size() == 5);
    CHECK(std::is_sorted(w.events.begin(), w.events.end(),
                         [](const WftEventRecord& a, const WftEventRecord& b) {
                             return a.time < b.time;
                         }));
    std::vector<int> kinds;
    for (const auto& e : w.events) kinds.push_back(e.kind);
    std::sort(kinds.begin(), kinds.end());
    CHECK(kinds == std::vector<int>{0, 1, 1, 1, 2});
    const auto empty_event =
        std::find_if(w.events.begin(), w.events.end(),
                     [](const WftEventRecord& e) { return e.kind == 0; });
    REQUIRE(empty_event != w.events.end());
    CHECK(empty_event->time == Approx(t_empty).epsilon(1e-12));

    CHECK(w.mass_balance_error() < 1e-12);
}

TEST_CASE("density profiles come from characteristics") {
    SupplyChain c = two_arc();
    InflowControl u(2.5, 0.1, {0.3}, {100.0, 58.0});
    WftSolution w = wft_solve(c, u);

    const double t_empty = 1.3 + 7.5 / 17.0;
    StepFunction p2 = w.profile_at(1, 2.5);
    // the 58-region has been feeding since t_empty: it fills [0, 2.5 - t_empty)
    CHECK(p2(0.0) == Approx(58.0));
    CHECK(p2(2.5 - t_empty - 1e-6) == Approx(58.0));
    CHECK(p2(2.5 - t_empty + 1e-6) == Approx(75.0));
    CHECK(p2(1.9) == Approx(75.0));

    // processor 1 carries the control levels with transit delay
    CHECK(w.density_at(0, 0.5, 2.5) == Approx(58.0));
    CHECK(w.density_at(0, 0.5, 0.6) == Approx(100.0));
    CHECK(w.density_at(0, 0.9, 0.5) == 0.0);  // ahead of the first front
}

TEST_CASE("constant sub-capacity inflow passes through undisturbed") {
    SupplyChain c = two_arc();
    InflowControl u(3.0, 0.1, {}, {50.0});
    WftSolution w = wft_solve(c, u);
    CHECK(w.queue_at(0, 2.9) == 0.0);
    CHECK(w.outflow(1.9) == 0.0);
    CHECK(w.outflow(2.1) == Approx(50.0));  // transit time 2
    CHECK(w.cost.j1 == 0.0);
    CHECK(w.mass_balance_error() < 1e-12);
}

TEST_CASE("eleven-processor run matches the frozen cost split") {
    SupplyChain c = eleven_arc();
    InflowControl u(10.0, 0.02, {1.0, 3.0}, {90.0, 100.0, 125.0});
    CostSpec spec;
    spec.alpha1 = StepFunction::constant(1.0);
    WftSolution w = wft_solve(c, u, spec);

    CHECK(w.cost.j1 == Approx(1902.5).epsilon(1e-9));
    CHECK(w.cost.j1_by_queue[0] == Approx(1377.5).epsilon(1e-9));   // before processor 2
    CHECK(w.cost.j1_by_queue[2] == Approx(245.0).epsilon(1e-9));    // before processor 4
    CHECK(w.cost.j1_by_queue[5] == Approx(280.0).epsilon(1e-9));    // before processor 7
    for (std::size_t i : {1, 3, 4, 6, 7, 8, 9})
        CHECK(w.cost.j1_by_queue[i] == 0.0);
    CHECK(w.mass_balance_error() < 1e-12);
}

TEST_CASE("repeated solves are identical") {
    SupplyChain c = two_arc();
    InflowControl u(2.5, 0.1, {0.3}, {100.0, 58.0});
    WftSolution a = wft_solve(c, u);
    WftSolution b = wft_solve(c, u);
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t i = 0; i < a.events.size(); ++i) {
        CHECK(a.events[i].time == b.events[i].time);
        CHECK(a.events[i].kind == b.events[i].kind);
        CHECK(a.events[i].before == b.events[i].before);
        CHECK(a.events[i].after == b.events[i].after);
    }
    CHECK(a.cost.j1 == b.cost.j1);
    CHECK(a.outflow.knots == b.outflow.knots);
    CHECK(a.outflow.values == b.outflow.values);
}

TEST_CASE("solver rejects inflow beyond the first processor's capacity") {
    SupplyChain c = two_arc();
    c.processors[0].max_rate = 90.0;
    InflowControl u(1.0, 0.1, {}, {100.0});
    CHECK_THROWS(wft_solve(c, u));
}

TEST_CASE("solver rejects invalid chains") {
    SupplyChain c = two_arc();
    c.initial_queues = {-1.0};
    InflowControl u(1.0, 0.1, {}, {50.0});
    CHECK_THROWS(wft_solve(c, u));
}

TEST_CASE("initial densities advect and drain into the queue") {
    // processor 1 starts full at 60; no inflow; the block reaches queue 2 and
    // passes through (60 < 75) producing outflow one transit later
    SupplyChain c = two_arc();
    c.processors[0].initial_density = StepFunction::constant(60.0);
    InflowControl u(3.0, 0.1, {}, {0.0});
    WftSolution w = wft_solve(c, u);
    CHECK(w.queue_at(0, 1.5) == 0.0);
    // the block drains off processor 1 during [0, 1) and off processor 2
    // during [1, 2); the second processor starts empty
    CHECK(w.outflow(0.5) == 0.0);
    CHECK(w.outflow(1.5) == Approx(60.0));
    CHECK(w.outflow(2.2) == 0.0);
    CHECK(w.mass_balance_error() < 1e-12);
}
