#include "doctest.h"

#include <cmath>

#include "resonance/core.hpp"
#include "resonance/rng.hpp"
#include "resonance/windows.hpp"

using namespace resonance;

TEST_SUITE_BEGIN("core");

namespace {

WindowSpec test_window() { return make_window(3.5, 0.1, 0.3, 2.0, 6.0); }

Dataset uniform_dataset(std::size_t n, std::uint64_t seed, int d = 2) {
    Dataset ds(d, false);
    StreamRng rng(seed, Stream::TestData);
    std::vector<double> x(d);
    for (std::size_t i = 0; i < n; ++i) {
        const double m = 2.0 + 4.0 * rng.next_unit();
        for (int j = 0; j < d; ++j) x[j] = rng.next_normal();
        ds.append(m, x);
    }
    return ds;
}

}  // namespace

TEST_CASE("region assignment examples") {
    const WindowSpec w = test_window();
    CHECK(assign_region(3.45, w) == Region::SR);
    CHECK(assign_region(3.72, w) == Region::SS);
    CHECK(assign_region(4.20, w) == Region::FarSB);
}

TEST_CASE("boundary values fall outward") {
    const WindowSpec w = test_window();
    CHECK(assign_region(w.sr_hi(), w) == Region::SS);
    CHECK(assign_region(w.sr_lo(), w) == Region::SS);
    CHECK(assign_region(w.ss_hi(), w) == Region::FarSB);
    CHECK(assign_region(w.ss_lo(), w) == Region::FarSB);
}

TEST_CASE("out of domain is an error") {
    const WindowSpec w = test_window();
    CHECK_THROWS_AS(assign_region(1.9, w), out_of_domain_error);
    CHECK_THROWS_AS(assign_region(6.1, w), out_of_domain_error);
}

TEST_CASE("assignment agrees with interval membership oracle") {
    StreamRng rng(7, Stream::TestData);
    int checked = 0;
    for (int trial = 0; trial < 100000; ++trial) {
        const double delta = 0.02 + 0.3 * rng.next_unit();
        const double epsilon = delta + 0.02 + 0.5 * rng.next_unit();
        const double m0 = 2.0 + epsilon + (4.0 - 2.0 * epsilon) * rng.next_unit();
        if (m0 + epsilon > 6.0 || m0 - epsilon < 2.0) continue;
        const WindowSpec w = make_window(m0, delta, epsilon, 2.0, 6.0);
        const double m = 2.0 + 4.0 * rng.next_unit();
        const Region got = assign_region(m, w);
        // brute-force interval membership
        Region expect;
        if (m > m0 - delta && m < m0 + delta)
            expect = Region::SR;
        else if (m > m0 - epsilon && m < m0 + epsilon)
            expect = Region::SS;
        else
            expect = Region::FarSB;
        REQUIRE(got == expect);
        ++checked;
    }
    CHECK(checked > 50000);
}

TEST_CASE("partition conserves events and preserves order") {
    const WindowSpec w = test_window();
    const Dataset ds = uniform_dataset(5000, 11);
    const auto [sr, ss, far] = partition(ds, w);
    CHECK(sr.size() + ss.size() + far.size() == ds.size());

    // order preserved within each part: m sequences are subsequences
    std::size_t i_sr = 0, i_ss = 0, i_far = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        switch (assign_region(ds.m(i), w)) {
            case Region::SR: CHECK(sr.m(i_sr++) == ds.m(i)); break;
            case Region::SS: CHECK(ss.m(i_ss++) == ds.m(i)); break;
            case Region::FarSB: CHECK(far.m(i_far++) == ds.m(i)); break;
        }
    }
}

TEST_CASE("partition sizes follow region lengths for uniform m") {
    const WindowSpec w = test_window();
    const std::size_t n = 100000;
    const Dataset ds = uniform_dataset(n, 13);
    const auto [sr, ss, far] = partition(ds, w);
    // multinomial expectation: lengths 0.2 / 0.4 / 3.4 over span 4
    const double span = 4.0;
    const double p_sr = 2 * w.delta / span;
    const double p_ss = 2 * (w.epsilon - w.delta) / span;
    auto within_5sigma = [n](std::size_t got, double p) {
        const double mu = static_cast<double>(n) * p;
        const double sd = std::sqrt(static_cast<double>(n) * p * (1 - p));
        return std::fabs(static_cast<double>(got) - mu) < 5.0 * sd;
    };
    CHECK(within_5sigma(sr.size(), p_sr));
    CHECK(within_5sigma(ss.size(), p_ss));
    CHECK(within_5sigma(far.size(), 1.0 - p_sr - p_ss));
}

TEST_CASE("degenerate window raises") {
    const WindowSpec w = test_window();
    Dataset ds(1, false);
    const std::vector<double> x{0.0};
    for (int i = 0; i < 10; ++i) ds.append(3.45 + 0.001 * i, x);  // all inside the SR
    CHECK_THROWS_AS(partition(ds, w), degenerate_window_error);
}

TEST_CASE("partition completeness over random windows") {
    StreamRng rng(17, Stream::TestData);
    for (int trial = 0; trial < 20; ++trial) {
        const double delta = 0.05 + 0.3 * rng.next_unit();
        const double epsilon = delta * (1.5 + rng.next_unit());
        const double m0 = 2.0 + epsilon + (4.0 - 2 * epsilon) * rng.next_unit();
        if (m0 + epsilon > 6.0) continue;
        const WindowSpec w = make_window(m0, delta, epsilon, 2.0, 6.0);
        const Dataset ds = uniform_dataset(2000, 100 + trial);
        try {
            const auto [sr, ss, far] = partition(ds, w);
            CHECK(sr.size() + ss.size() + far.size() == ds.size());
        } catch (const degenerate_window_error&) {
            // acceptable for tiny regions
        }
    }
}

TEST_CASE("dataset rejects malformed events") {
    Dataset ds(2, false);
    CHECK_THROWS_AS(ds.append(0.0, std::vector<double>{1.0, 2.0}), data_error);
    CHECK_THROWS_AS(ds.append(-1.0, std::vector<double>{1.0, 2.0}), data_error);
    CHECK_THROWS_AS(ds.append(1.0, std::vector<double>{1.0}), data_error);
    CHECK_THROWS_AS(ds.append(1.0, std::vector<double>{1.0, std::nan("")}), data_error);
    CHECK_THROWS_AS(ds.append(1.0, std::vector<double>{1.0, 2.0}, Label::Signal), data_error);
    ds.append(1.0, std::vector<double>{1.0, 2.0});
    CHECK(ds.size() == 1);

    Dataset labeled(2, true);
    CHECK_THROWS_AS(labeled.append(1.0, std::vector<double>{1.0, 2.0}), data_error);
    labeled.append(1.0, std::vector<double>{1.0, 2.0}, Label::Signal);
    CHECK(labeled.count_label(Label::Signal) == 1);
}

TEST_CASE("label stripping keeps features intact") {
    Dataset labeled(2, true);
    StreamRng rng(23, Stream::TestData);
    for (int i = 0; i < 100; ++i)
        labeled.append(1.0 + rng.next_unit(), std::vector<double>{rng.next_normal(), rng.next_normal()},
                       i % 3 ? Label::Background : Label::Signal);
    const Dataset stripped = labeled.without_labels();
    CHECK_FALSE(stripped.labeled());
    CHECK(stripped.feature_digest() == labeled.feature_digest());
    for (std::size_t i = 0; i < labeled.size(); ++i) {
        CHECK(stripped.m(i) == labeled.m(i));
        CHECK(stripped.x(i)[0] == labeled.x(i)[0]);
    }
}

TEST_SUITE_END();
