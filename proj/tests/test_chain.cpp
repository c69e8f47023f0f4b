#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "chainflow/chain.hpp"

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

bool has_issue(const ValidationReport& r, const std::string& code, bool fatal) {
    for (const auto& i : r.issues)
        if (i.code == code && i.fatal == fatal) return true;
    return false;
}

}  // namespace

TEST_CASE("a well-formed chain validates cleanly") {
    ValidationReport r = validate_chain(two_arc());
    CHECK(r.ok());
    CHECK(r.issues.empty());
}

TEST_CASE("entry and exit positions accumulate lengths") {
    SupplyChain c = two_arc();
    c.processors[0].length = 2.0;
    CHECK(c.entry(0) == 0.0);
    CHECK(c.exit(0) == 2.0);
    CHECK(c.entry(1) == 2.0);
    CHECK(c.exit(1) == Approx(3.0));
}

TEST_CASE("divides_evenly tolerates roundoff but rejects real misfits") {
    CHECK(divides_evenly(1.0, 0.02));
    CHECK(divides_evenly(3.0, 1.0));
    CHECK_FALSE(divides_evenly(1.0, 0.3));
    CHECK_FALSE(divides_evenly(std::sqrt(2.0), 1.0));
}

TEST_CASE("validation flags every fatal defect") {
    SECTION("empty chain") {
        SupplyChain c;
        ValidationReport r = validate_chain(c);
        CHECK_FALSE(r.ok());
        CHECK(has_issue(r, "empty-chain", true));
    }
    SECTION("queue count mismatch") {
        SupplyChain c = two_arc();
        c.initial_queues = {0.0, 0.0};
        CHECK(has_issue(validate_chain(c), "queue-count", true));
    }
    SECTION("nonpositive unit") {
        SupplyChain c = two_arc();
        c.common_unit = 0.0;
        CHECK(has_issue(validate_chain(c), "unit-positive", true));
    }
    SECTION("nonpositive length, velocity, rate") {
        SupplyChain c = two_arc();
        c.processors[0].length = 0.0;
        CHECK(has_issue(validate_chain(c), "length-positive", true));
        c = two_arc();
        c.processors[1].velocity = -1.0;
        CHECK(has_issue(validate_chain(c), "velocity-positive", true));
        c = two_arc();
        c.processors[1].max_rate = 0.0;
        CHECK(has_issue(validate_chain(c), "rate-positive", true));
    }
    SECTION("length not a multiple of the common unit") {
        SupplyChain c = two_arc();
        c.processors[0].length = std::sqrt(2.0);
        CHECK(has_issue(validate_chain(c), "length-unit", true));
    }
    SECTION("negative initial density") {
        SupplyChain c = two_arc();
        c.processors[0].initial_density = StepFunction::constant(-1.0);
        CHECK(has_issue(validate_chain(c), "density-negative", true));
    }
    SECTION("initial density violating the flux bound") {
        SupplyChain c = two_arc();
        c.processors[1].initial_density = StepFunction::constant(80.0);  // v*rho = 80 > 75
        CHECK(has_issue(validate_chain(c), "density-flux-bound", true));
    }
    SECTION("negative initial queue") {
        SupplyChain c = two_arc();
        c.initial_queues = {-2.0};
        CHECK(has_issue(validate_chain(c), "queue-negative", true));
    }
}

TEST_CASE("density bound forms are flagged as a warning when they disagree") {
    SupplyChain c = two_arc();
    c.processors[0].velocity = 2.0;
    c.processors[0].max_rate = 100.0;
    // rho = 60: v*rho = 120 > 100 fatal, and rho <= mu holds -> forms disagree
    c.processors[0].initial_density = StepFunction::constant(60.0);
    ValidationReport r = validate_chain(c);
    CHECK(has_issue(r, "density-flux-bound", true));
    CHECK(has_issue(r, "density-bound-forms", false));

    // rho = 40: both forms hold -> no warning
    c.processors[0].initial_density = StepFunction::constant(40.0);
    r = validate_chain(c);
    CHECK(r.ok());
    CHECK_FALSE(has_issue(r, "density-bound-forms", false));
}
