#include <catch2/catch_amalgamated.hpp>

#include "chainflow/control.hpp"

using namespace chainflow;
using Catch::Approx;

TEST_CASE("lattice predicates") {
    CHECK(on_lattice(0.06, 0.02));
    CHECK(on_lattice(0.0, 0.02));
    CHECK_FALSE(on_lattice(0.05, 0.02));
    CHECK(snap_to_lattice(0.051, 0.02) == Approx(0.06));
    CHECK(snap_to_lattice(0.049, 0.02) == Approx(0.04));
}

TEST_CASE("inflow control validates its data") {
    CHECK_NOTHROW(InflowControl(10.0, 0.02, {1.0, 3.0}, {90.0, 100.0, 125.0}));
    CHECK_THROWS(InflowControl(10.0, 0.02, {1.0}, {90.0}));          // count mismatch
    CHECK_THROWS(InflowControl(10.0, 0.02, {3.0, 1.0}, {1.0, 2.0, 3.0}));  // not increasing
    CHECK_THROWS(InflowControl(10.0, 0.02, {0.0}, {1.0, 2.0}));      // breakpoint at 0
    CHECK_THROWS(InflowControl(10.0, 0.02, {10.0}, {1.0, 2.0}));     // breakpoint at T
    CHECK_THROWS(InflowControl(10.0, 0.02, {1.0}, {-1.0, 2.0}));     // negative level
    CHECK_THROWS(InflowControl(0.0, 0.02, {}, {1.0}));               // empty horizon
}

TEST_CASE("inflow control evaluates right-continuously on [0, T]") {
    InflowControl u(10.0, 0.02, {1.0, 3.0}, {90.0, 100.0, 125.0});
    CHECK(u(0.0) == 90.0);
    CHECK(u(1.0) == 100.0);
    CHECK(u(2.999) == 100.0);
    CHECK(u(3.0) == 125.0);
    CHECK(u(10.0) == 125.0);
    CHECK_THROWS(u(-0.1));
    CHECK_THROWS(u(10.1));
    CHECK(u.total_variation() == Approx(10.0 + 25.0));
    CHECK(u.quantized());
    CHECK_FALSE(InflowControl(10.0, 0.02, {1.001}, {1.0, 2.0}).quantized());
}

TEST_CASE("as_step_function mirrors the control") {
    InflowControl u(10.0, 0.02, {1.0}, {90.0, 100.0});
    StepFunction f = u.as_step_function();
    CHECK(f(0.5) == 90.0);
    CHECK(f(1.0) == 100.0);
}

TEST_CASE("collapse_control clamps, merges and prunes jumps") {
    SECTION("clamping a breakpoint to zero absorbs the leading level") {
        std::vector<double> taus{-0.5, 3.0};
        std::vector<double> levels{90.0, 100.0, 125.0};
        InflowControl c = collapse_control(10.0, 0.02, taus, levels);
        CHECK(c.breakpoints == std::vector<double>{3.0});
        CHECK(c.levels == std::vector<double>{100.0, 125.0});
    }
    SECTION("a breakpoint pushed past the horizon is dropped") {
        std::vector<double> taus{1.0, 12.0};
        std::vector<double> levels{90.0, 100.0, 125.0};
        InflowControl c = collapse_control(10.0, 0.02, taus, levels);
        CHECK(c.breakpoints == std::vector<double>{1.0});
        CHECK(c.levels == std::vector<double>{90.0, 100.0});
    }
    SECTION("jumps landing on the same time merge; the later level wins") {
        std::vector<double> taus{2.0, 2.0};
        std::vector<double> levels{90.0, 100.0, 125.0};
        InflowControl c = collapse_control(10.0, 0.02, taus, levels);
        CHECK(c.breakpoints == std::vector<double>{2.0});
        CHECK(c.levels == std::vector<double>{90.0, 125.0});
    }
    SECTION("zero-height jumps disappear") {
        std::vector<double> taus{2.0};
        std::vector<double> levels{90.0, 90.0};
        InflowControl c = collapse_control(10.0, 0.02, taus, levels);
        CHECK(c.breakpoints.empty());
        CHECK(c.levels == std::vector<double>{90.0});
    }
    SECTION("crossing jumps keep their own target levels in time order") {
        std::vector<double> taus{4.0, 2.0};
        std::vector<double> levels{10.0, 20.0, 30.0};
        InflowControl c = collapse_control(10.0, 0.02, taus, levels);
        CHECK(c.breakpoints == std::vector<double>{2.0, 4.0});
        CHECK(c(0.0) == 10.0);
        CHECK(c(3.0) == 30.0);  // the switch to 30 now happens first
        CHECK(c(5.0) == 20.0);
    }
}

TEST_CASE("shift_control moves breakpoints on exact lattice values") {
    InflowControl u(10.0, 0.02, {1.0, 3.0}, {90.0, 100.0, 125.0});
    std::vector<double> offsets{0.02, -0.02};
    InflowControl moved = shift_control(u, offsets);
    CHECK(moved.breakpoints[0] == Approx(1.02));
    CHECK(moved.breakpoints[1] == Approx(2.98));
    CHECK(moved.levels == u.levels);

    // shifting the first jump onto zero pins it
    std::vector<double> big{-1.0, 0.0};
    InflowControl pinned = shift_control(u, big);
    CHECK(pinned.breakpoints == std::vector<double>{3.0});
    CHECK(pinned.levels == std::vector<double>{100.0, 125.0});
}

TEST_CASE("control L1 distance integrates the absolute gap") {
    InflowControl a(10.0, 0.02, {2.0}, {100.0, 50.0});
    InflowControl b(10.0, 0.02, {4.0}, {100.0, 50.0});
    // they differ by 50 on [2, 4)
    CHECK(control_l1_distance(a, b) == Approx(100.0));
    CHECK(control_l1_distance(a, a) == 0.0);
}
