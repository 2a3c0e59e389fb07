#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "oracles.hpp"
#include "resonance/datagen.hpp"
#include "resonance/eval.hpp"
#include "resonance/rng.hpp"

using namespace resonance;

TEST_SUITE_BEGIN("eval");

namespace {

ScoreTable table_from(const std::vector<double>& scores, const std::vector<int>& labels) {
    ScoreTable st(true);
    for (std::size_t i = 0; i < scores.size(); ++i)
        st.append(3.0, scores[i], Region::SR,
                  labels[i] ? Label::Signal : Label::Background);
    return st;
}

}  // namespace

TEST_CASE("roc endpoints and degenerate cases") {
    // perfectly separating scores
    const auto perfect = table_from({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0});
    CHECK(auc(roc(perfect)) == 1.0);
    // inverted scores
    const auto inverted = table_from({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0});
    CHECK(auc(roc(inverted)) == 0.0);
    // all scores tied: straight diagonal
    const auto tied = table_from({0.5, 0.5, 0.5, 0.5}, {1, 1, 0, 0});
    CHECK(auc(roc(tied)) == 0.5);

    const RocCurve c = roc(perfect);
    CHECK(c.points.front().tpr == 0.0);
    CHECK(c.points.front().fpr == 0.0);
    CHECK(c.points.back().tpr == 1.0);
    CHECK(c.points.back().fpr == 1.0);

    const auto one_class = table_from({0.5, 0.6}, {1, 1});
    CHECK_THROWS_AS(roc(one_class), data_error);
}

TEST_CASE("uniform random scores give auc one half") {
    StreamRng rng(5, Stream::TestData);
    std::vector<double> scores(100000);
    std::vector<int> labels(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        scores[i] = rng.next_unit();
        labels[i] = rng.next_u64() & 1;
    }
    const double a = auc(roc(table_from(scores, labels)));
    CHECK(std::fabs(a - 0.5) < 0.01);
}

TEST_CASE("auc equals the pairwise oracle with ties counted half") {
    StreamRng rng(7, Stream::TestData);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 20 + rng.next_below(980);
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        bool has0 = false, has1 = false;
        for (std::size_t i = 0; i < n; ++i) {
            // coarse grid forces plenty of ties
            scores[i] = std::floor(rng.next_unit() * 8) / 8.0;
            labels[i] = rng.next_u64() & 1;
            (labels[i] ? has1 : has0) = true;
        }
        if (!has0 || !has1) {
            labels[0] = 0;
            labels[1] = 1;
        }
        const double got = auc(roc(table_from(scores, labels)));
        const double want = oracles::auc_pairwise(scores, labels);
        REQUIRE(got == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("auc of negated scores is the complement") {
    StreamRng rng(9, Stream::TestData);
    std::vector<double> scores(2000);
    std::vector<int> labels(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        scores[i] = std::floor(rng.next_unit() * 16) / 16.0;
        labels[i] = rng.next_u64() & 1;
    }
    std::vector<double> neg(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) neg[i] = -scores[i];
    const double a = auc(roc(table_from(scores, labels)));
    const double b = auc(roc(table_from(neg, labels)));
    CHECK(a + b == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("roc is monotone for arbitrary score tables") {
    StreamRng rng(11, Stream::TestData);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 10 + rng.next_below(500);
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = std::floor(rng.next_unit() * 5) / 5.0;
            labels[i] = rng.next_u64() & 1;
        }
        labels[0] = 0;
        if (n > 1) labels[1] = 1;
        const RocCurve c = roc(table_from(scores, labels));
        for (std::size_t i = 1; i < c.points.size(); ++i) {
            REQUIRE(c.points[i].tpr >= c.points[i - 1].tpr);
            REQUIRE(c.points[i].fpr >= c.points[i - 1].fpr);
            REQUIRE(c.points[i].threshold <= c.points[i - 1].threshold);
        }
    }
}

TEST_CASE("sic values at reference points") {
    RocCurve c;
    c.n_signal = 1000;
    c.n_background = 100000;
    c.points.push_back({INFINITY, 0.0, 0.0});
    c.points.push_back({3.0, 0.25, 0.25 * 0.25 / 49.0});  // SIC 7: the ANODE working point
    c.points.push_back({2.0, 0.5, 0.25});                 // SIC 1.0
    c.points.push_back({1.0, 1.0, 1.0});                  // SIC 1
    const SicCurve s = sic_curve(c, 1e-5);
    REQUIRE(s.points.size() == 3);
    CHECK(s.points[0].sic == doctest::Approx(7.0).epsilon(1e-12));
    CHECK(s.points[1].sic == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.points[2].sic == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.max_sic == doctest::Approx(7.0));
    CHECK(s.tpr_at_max == doctest::Approx(0.25));
}

TEST_CASE("sic floor defaults to ten background events") {
    RocCurve c;
    c.n_signal = 100;
    c.n_background = 10000;
    c.points.push_back({INFINITY, 0.0, 0.0});
    c.points.push_back({5.0, 0.2, 5e-4});  // below 10/10000 floor: dropped
    c.points.push_back({1.0, 1.0, 1.0});
    const SicCurve s = sic_curve(c);
    CHECK(s.fpr_floor == doctest::Approx(1e-3));
    REQUIRE(s.points.size() == 1);
    CHECK(s.points[0].sic == doctest::Approx(1.0));

    RocCurve below;
    below.n_signal = 10;
    below.n_background = 100;
    below.points.push_back({INFINITY, 0.0, 0.0});
    below.points.push_back({1.0, 1.0, 0.01});
    CHECK_THROWS_AS(sic_curve(below, 0.5), data_error);
}

TEST_CASE("max sic is invariant under monotone score transforms") {
    StreamRng rng(13, Stream::TestData);
    std::vector<double> scores(5000);
    std::vector<int> labels(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool sig = rng.next_u64() & 1;
        scores[i] = (sig ? 0.8 : 0.0) + rng.next_normal();
        labels[i] = sig;
    }
    std::vector<double> warped(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
        warped[i] = std::exp(0.7 * scores[i]) + 3.0;
    const SicCurve a = sic_curve(roc(table_from(scores, labels)), 1e-3);
    const SicCurve b = sic_curve(roc(table_from(warped, labels)), 1e-3);
    CHECK(a.max_sic == doctest::Approx(b.max_sic).epsilon(1e-12));
    CHECK(a.tpr_at_max == doctest::Approx(b.tpr_at_max).epsilon(1e-12));
}

TEST_CASE("key comparison reports pull localization and identity") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() /
                         ("resonance_eval_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    const std::string data_path = (dir / "bb.csv").string();
    const std::string key_path = (dir / "bb.key").string();

    ToyConfig cfg = default_toy_preset();
    cfg.n_background = 4000;
    cfg.n_signal = 40;
    cfg.seed = 17;
    const SealedKey key = emit_blackbox(cfg, data_path, key_path);

    BumpHuntResult hunt;
    hunt.n_windows = 1;
    hunt.n_quantiles = 1;
    hunt.n_independent = 1;
    hunt.min_local_p = 0.001;
    hunt.best_cell = 0;
    hunt.global_p = 0.001;
    BumpCell cell;
    cell.window_index = 0;
    cell.m0 = cfg.signal_m0 + 0.05;
    cell.delta = 0.1;
    cell.q = 0.1;
    cell.valid = true;
    hunt.cells.push_back(cell);

    SealedKey truth834 = key;
    truth834.signal_count = 834;
    const KeyReport rep = compare_to_key(hunt, 800.0, 100.0, truth834, data_path);
    CHECK(rep.pull == doctest::Approx(-0.34).epsilon(1e-12));
    CHECK(rep.localized);  // 3.5 inside [3.45, 3.65]
    CHECK(rep.global_p == doctest::Approx(0.001));

    hunt.cells[0].m0 = cfg.signal_m0 + 0.2;  // SR no longer contains the true m0
    CHECK_FALSE(compare_to_key(hunt, 800, 100, truth834, data_path).localized);

    SealedKey tampered = key;
    tampered.digest[0] = tampered.digest[0] == 'a' ? 'b' : 'a';
    CHECK_THROWS_AS(compare_to_key(hunt, 800, 100, tampered, data_path),
                    digest_mismatch_error);
    fs::remove_all(dir);
}

TEST_CASE("roc and sic csv output") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() /
                         ("resonance_evalcsv_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    const auto perfect = table_from({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0});
    const RocCurve c = roc(perfect);
    write_roc_csv(c, (dir / "roc.csv").string());
    write_sic_csv(sic_curve(c, 0.4), (dir / "sic.csv").string());
    std::ifstream in(dir / "roc.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "threshold,tpr,fpr");
    fs::remove_all(dir);
}

TEST_SUITE_END();
