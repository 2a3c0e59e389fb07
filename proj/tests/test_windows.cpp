#include "doctest.h"

#include <cmath>
#include <string>

#include "resonance/windows.hpp"

using namespace resonance;

TEST_SUITE_BEGIN("windows");

TEST_CASE("make_window accepts a valid geometry") {
    const WindowSpec w = make_window(3.5, 0.1, 0.3, 2.0, 6.0);
    CHECK(w.sr_lo() == doctest::Approx(3.4));
    CHECK(w.ss_hi() == doctest::Approx(3.8));
}

TEST_CASE("make_window names the violated constraint") {
    CHECK_THROWS_WITH_AS(make_window(3.5, 0.3, 0.1, 2.0, 6.0), "delta < epsilon violated",
                         config_error);
    CHECK_THROWS_WITH_AS(make_window(5.9, 0.1, 0.3, 2.0, 6.0), "window exceeds domain",
                         config_error);
    CHECK_THROWS_AS(make_window(3.5, 0.0, 0.3, 2.0, 6.0), config_error);
}

TEST_CASE("plan_scan enumerates the arithmetic sequence of centers") {
    const ScanPlan plan = plan_scan(2.0, 6.0, 0.1, 0.3, 0.2);
    REQUIRE(plan.windows.size() == 18);
    CHECK(plan.windows.front().m0 == doctest::Approx(2.3).epsilon(1e-12));
    CHECK(plan.windows.back().m0 == doctest::Approx(5.7).epsilon(1e-12));
    CHECK(plan.n_independent == 17);  // floor((5.7-2.3)/0.2)
    for (std::size_t i = 1; i < plan.windows.size(); ++i)
        CHECK(plan.windows[i].m0 - plan.windows[i - 1].m0 == doctest::Approx(0.2));
}

TEST_CASE("step of two epsilon keeps SRs disjoint while SS regions touch") {
    const double delta = 0.1, epsilon = 0.3;
    const ScanPlan plan = plan_scan(2.0, 6.0, delta, epsilon, 2 * epsilon);
    REQUIRE(plan.windows.size() >= 2);
    for (std::size_t i = 1; i < plan.windows.size(); ++i) {
        const auto& prev = plan.windows[i - 1];
        const auto& cur = plan.windows[i];
        CHECK(prev.sr_hi() < cur.sr_lo());                       // SRs never overlap
        CHECK(prev.ss_hi() == doctest::Approx(cur.ss_lo()));     // SS regions touch
    }
}

TEST_CASE("scan covers the scanned sub-domain when step <= 2 delta") {
    const double delta = 0.1;
    const ScanPlan plan = plan_scan(2.0, 6.0, delta, 0.3, delta);
    const double lo = plan.windows.front().m0 - delta;
    const double hi = plan.windows.back().m0 + delta;
    for (int i = 0; i <= 1000; ++i) {
        const double m = lo + (hi - lo) * i / 1000.0;
        bool inside_some_sr = false;
        for (const auto& w : plan.windows)
            if (m > w.sr_lo() && m < w.sr_hi()) inside_some_sr = true;
        // boundary grid points may sit exactly on SR edges
        bool on_edge = false;
        for (const auto& w : plan.windows)
            if (m == w.sr_lo() || m == w.sr_hi()) on_edge = true;
        CHECK((inside_some_sr || on_edge));
    }
}

TEST_CASE("single window scan has trials factor one") {
    const ScanPlan plan = plan_scan(2.0, 6.0, 0.1, 0.3, 10.0);
    CHECK(plan.windows.size() == 1);
    CHECK(plan.n_independent == 1);
}

TEST_CASE("scan sub-range restricts window centers") {
    const ScanPlan plan = plan_scan(2.0, 6.0, 0.1, 0.3, 0.2, 2.5, 5.0);
    CHECK(plan.windows.front().m0 == doctest::Approx(2.8));
    CHECK(plan.windows.back().m0 + 0.3 <= 5.0 + 1e-9);
    for (const auto& w : plan.windows) {
        CHECK(w.domain_lo == 2.0);  // region assignment still spans the full domain
        CHECK(w.domain_hi == 6.0);
    }
    CHECK_THROWS_AS(plan_scan(2.0, 6.0, 0.1, 0.3, 0.2, 1.0, 7.0), config_error);
}

TEST_CASE("zero windows fit is an error") {
    CHECK_THROWS_AS(plan_scan(2.0, 2.5, 0.1, 0.3, 0.2), config_error);
    CHECK_THROWS_AS(plan_scan(2.0, 6.0, 0.1, 0.3, 0.0), config_error);
}

TEST_SUITE_END();
