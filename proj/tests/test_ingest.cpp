#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include "resonance/ingest.hpp"
#include "resonance/rng.hpp"
#include "resonance/score_table.hpp"

using namespace resonance;

TEST_SUITE_BEGIN("ingest");

namespace {

struct TempDir {
    std::filesystem::path dir;
    TempDir() {
        dir = std::filesystem::temp_directory_path() /
              ("resonance_test_" + std::to_string(::getpid()) + "_" +
               std::to_string(counter()++));
        std::filesystem::create_directories(dir);
    }
    ~TempDir() { std::filesystem::remove_all(dir); }
    std::string path(const std::string& name) const { return (dir / name).string(); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

}  // namespace

TEST_CASE("labeled three-row file") {
    TempDir tmp;
    const auto p = tmp.path("d.csv");
    write_file(p, "m,x0,x1,label\n3.1,0.5,-1.0,1\n3.2,0.1,0.2,0\n3.3,0.0,0.9,1\n");
    const Dataset ds = read_csv(p, ColumnSchema::canonical(2, true));
    REQUIRE(ds.size() == 3);
    CHECK(ds.count_label(Label::Signal) == 2);
    CHECK(ds.count_label(Label::Background) == 1);
}

TEST_CASE("unit scale converts units on read") {
    TempDir tmp;
    const auto p = tmp.path("gev.csv");
    write_file(p, "m,x0\n3500,1.0\n");
    ColumnSchema s = ColumnSchema::canonical(1, false);
    s.unit_scale = 0.001;
    const Dataset ds = read_csv(p, s);
    CHECK(ds.m(0) == doctest::Approx(3.5).epsilon(1e-12));
}

TEST_CASE("non-finite rows are rejected with a report") {
    TempDir tmp;
    const auto p = tmp.path("nan.csv");
    write_file(p, "m,x0\n3.0,1.0\n3.1,NaN\n3.2,2.0\n");
    ReadReport report;
    const Dataset ds = read_csv(p, ColumnSchema::canonical(1, false), &report);
    CHECK(ds.size() == 2);
    CHECK(report.rows_rejected == 1);
    REQUIRE(report.rejected_rows.size() == 1);
    CHECK(report.rejected_rows[0] == 2);
}

TEST_CASE("hard errors: missing column, unparsable cell, empty file, bad label") {
    TempDir tmp;
    write_file(tmp.path("a.csv"), "m,y\n1,2\n");
    CHECK_THROWS_AS(read_csv(tmp.path("a.csv"), ColumnSchema::canonical(1, false)), data_error);
    write_file(tmp.path("b.csv"), "m,x0\n1,abc\n");
    CHECK_THROWS_AS(read_csv(tmp.path("b.csv"), ColumnSchema::canonical(1, false)), data_error);
    write_file(tmp.path("c.csv"), "m,x0\n");
    CHECK_THROWS_AS(read_csv(tmp.path("c.csv"), ColumnSchema::canonical(1, false)), data_error);
    write_file(tmp.path("d.csv"), "m,x0,label\n1,1,2\n");
    CHECK_THROWS_AS(read_csv(tmp.path("d.csv"), ColumnSchema::canonical(1, true)), data_error);
    CHECK_THROWS_AS(read_csv(tmp.path("missing.csv"), ColumnSchema::canonical(1, false)),
                    data_error);
}

TEST_CASE("round trip is lossless at 17 significant digits") {
    TempDir tmp;
    Dataset ds(3, true);
    StreamRng rng(101, Stream::TestData);
    for (int i = 0; i < 10000; ++i) {
        const double m = 1e-3 + 10.0 * rng.next_unit();
        ds.append(m,
                  std::vector<double>{rng.next_normal() * 1e6, rng.next_normal() * 1e-7,
                                      rng.next_normal()},
                  (rng.next_u64() & 1) ? Label::Signal : Label::Background);
    }
    const auto p = tmp.path("rt.csv");
    const auto schema = ColumnSchema::canonical(3, true);
    write_csv(ds, p, schema);
    const Dataset back = read_csv(p, schema);
    REQUIRE(back.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(back.m(i) == ds.m(i));
        for (int j = 0; j < 3; ++j) CHECK(back.x(i)[j] == ds.x(i)[j]);
        CHECK(back.label(i) == ds.label(i));
    }
}

TEST_CASE("unlabeled dataset emits no label column and order follows schema") {
    TempDir tmp;
    Dataset ds(2, false);
    ds.append(3.0, std::vector<double>{1.0, 2.0});
    ColumnSchema schema;
    schema.resonant_column = "mass";
    schema.feature_columns = {"tau", "rho"};
    const auto p = tmp.path("u.csv");
    write_csv(ds, p, schema);
    std::ifstream in(p);
    std::string header;
    std::getline(in, header);
    CHECK(header == "mass,tau,rho");
}

TEST_CASE("schema json round trip and the published layout") {
    TempDir tmp;
    const auto p = tmp.path("schema.json");
    ColumnSchema s = ColumnSchema::lhco();
    s.unit_scale = 0.001;
    s.to_json_file(p);
    const ColumnSchema back = ColumnSchema::from_json_file(p);
    CHECK(back.resonant_column == "m");
    CHECK(back.feature_columns == std::vector<std::string>{"m_j1", "dm_j", "tau21_1", "tau21_2"});
    CHECK(back.label_column == "label");
    CHECK(back.unit_scale == 0.001);
}

TEST_CASE("score table round trip") {
    TempDir tmp;
    ScoreTable st(true);
    StreamRng rng(5, Stream::TestData);
    for (int i = 0; i < 500; ++i) {
        const Region r = static_cast<Region>(rng.next_below(3));
        st.append(2.0 + 4 * rng.next_unit(), rng.next_normal(), r,
                  (rng.next_u64() & 1) ? Label::Signal : Label::Background);
    }
    const auto p = tmp.path("scores.csv");
    write_scores_csv(st, p);
    const ScoreTable back = read_scores_csv(p);
    REQUIRE(back.size() == st.size());
    for (std::size_t i = 0; i < st.size(); ++i) {
        CHECK(back.m(i) == st.m(i));
        CHECK(back.score(i) == st.score(i));
        CHECK(back.region(i) == st.region(i));
        CHECK(back.label(i) == st.label(i));
    }
}

TEST_SUITE_END();
