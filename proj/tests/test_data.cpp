#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "etnode/data.hpp"
#include "testutil.hpp"

using namespace etnode;
using namespace etnode::data;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& content) {
    fs::path p = fs::temp_directory_path() / name;
    std::ofstream out(p);
    out << content;
    return p;
}

MultivariateSeries ramp_series(std::size_t len) {
    MultivariateSeries s;
    s.names = {"x1", "y"};
    s.cols.resize(2);
    for (std::size_t t = 0; t < len; ++t) {
        s.cols[0].push_back(std::sin(0.1 * static_cast<double>(t)));
        s.cols[1].push_back(static_cast<double>(t));
    }
    return s;
}

}  // namespace

TEST_SUITE_BEGIN("data");

TEST_CASE("load_csv selects and orders columns") {
    fs::path p = write_temp("etnode_basic.csv",
                            "a,b,c\n1,2,3\n4,5,6\n7,8,9\n10,11,12\n13,14,15\n");
    MultivariateSeries s = load_csv(p, "b", {"c", "a"});
    CHECK(s.length() == 5);
    CHECK(s.num_vars() == 3);
    CHECK(s.names == std::vector<std::string>{"c", "a", "b"});
    CHECK(s.cols[0][0] == 3.0);  // c first
    CHECK(s.cols[1][0] == 1.0);  // then a
    CHECK(s.target()[4] == 14.0);
}

TEST_CASE("missing column names the candidates") {
    fs::path p = write_temp("etnode_schema.csv", "a,b\n1,2\n");
    CHECK_THROWS_AS(load_csv(p, "target", {"a"}), SchemaError);
    try {
        load_csv(p, "target", {"a"});
    } catch (const SchemaError& e) {
        std::string msg = e.what();
        CHECK(msg.find("target") != std::string::npos);
        CHECK(msg.find("a, b") != std::string::npos);
    }
}

TEST_CASE("blank and non-numeric cells cite the row") {
    fs::path p = write_temp("etnode_blank.csv", "a,b\n1,2\n,3\n");
    try {
        load_csv(p, "b", {"a"});
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }
    fs::path p2 = write_temp("etnode_alpha.csv", "a,b\n1,2\nx,3\n");
    CHECK_THROWS_AS(load_csv(p2, "b", {"a"}), ParseError);
}

TEST_CASE("normalization uses population statistics") {
    MultivariateSeries s;
    s.names = {"x1", "y"};
    s.cols = {{1.0, 2.0, 3.0}, {2.0, 4.0, 6.0}};
    NormStats stats = compute_stats(s, 3);
    CHECK(stats.mean[0] == doctest::Approx(2.0));
    CHECK(stats.stddev[0] == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
    MultivariateSeries n = normalize(s, stats);
    CHECK(n.cols[0][0] == doctest::Approx(-1.2247448713915890).epsilon(1e-12));
    CHECK(n.cols[0][1] == doctest::Approx(0.0));
    CHECK(n.cols[0][2] == doctest::Approx(1.2247448713915890).epsilon(1e-12));
}

TEST_CASE("denormalize round-trips") {
    Rng rng(3);
    MultivariateSeries s;
    s.names = {"x1", "y"};
    s.cols = {std::vector<double>(50), std::vector<double>(50)};
    for (std::size_t i = 0; i < 50; ++i) {
        s.cols[0][i] = rng.uniform(-5, 5);
        s.cols[1][i] = rng.uniform(100, 200);
    }
    NormStats stats = compute_stats(s, 40);
    MultivariateSeries n = normalize(s, stats);
    for (std::size_t i = 0; i < 50; ++i) {
        CHECK(std::abs(stats.denorm_target(n.target()[i]) - s.target()[i]) <
              1e-12);
    }
}

TEST_CASE("zero-variance column is rejected by name") {
    MultivariateSeries s;
    s.names = {"flat", "y"};
    s.cols = {{5.0, 5.0, 5.0}, {1.0, 2.0, 3.0}};
    try {
        compute_stats(s, 3);
        FAIL("expected ContractError");
    } catch (const ContractError& e) {
        CHECK(std::string(e.what()).find("flat") != std::string::npos);
    }
}

TEST_CASE("test rows are normalized with train statistics") {
    MultivariateSeries s;
    s.names = {"x1", "y"};
    // train rows in [0,8): mean/std differ wildly from the tail
    s.cols = {{0, 1, 0, 1, 0, 1, 0, 1, 100, 100},
              {1, 2, 1, 2, 1, 2, 1, 2, 50, 60}};
    NormStats stats = compute_stats(s, 8);
    MultivariateSeries n = normalize(s, stats);
    CHECK(n.cols[0][8] == doctest::Approx((100.0 - 0.5) / 0.5).epsilon(1e-12));
}

TEST_CASE("window count and alignment") {
    MultivariateSeries s = ramp_series(100);
    WindowedDataset ds = make_windows(s, 20, 3);
    CHECK(ds.windows.size() == 78);  // len - T - K + 1
    const Window& last = ds.windows.back();
    CHECK(last.y_raw.back() == 99.0);  // final target is the series' last value

    MultivariateSeries tiny = ramp_series(23);
    WindowedDataset one = make_windows(tiny, 20, 3, 0.9, 0.0);
    CHECK(one.windows.size() == 1);
}

TEST_CASE("window count formula holds across a parameter sweep") {
    for (std::size_t len : {10, 11, 25, 40}) {
        for (std::size_t T : {1, 3, 7}) {
            for (std::size_t K : {1, 2, 5}) {
                if (len < T + K) continue;
                MultivariateSeries s = ramp_series(len);
                WindowedDataset ds = make_windows(s, T, K, 0.9, 0.0);
                CHECK(ds.windows.size() == len - T - K + 1);
            }
        }
    }
}

TEST_CASE("too-short series names the required minimum") {
    MultivariateSeries s = ramp_series(10);
    try {
        make_windows(s, 20, 3);
        FAIL("expected ContractError");
    } catch (const ContractError& e) {
        CHECK(std::string(e.what()).find("23") != std::string::npos);
    }
}

TEST_CASE("no target leakage between splits") {
    MultivariateSeries s = ramp_series(200);
    WindowedDataset ds = make_windows(s, 10, 3, 0.9, 0.1);
    std::size_t max_train_target = 0, min_test_target = SIZE_MAX;
    for (const Window& w : ds.windows) {
        std::size_t first = w.end_index + 1;
        std::size_t last = w.end_index + ds.K;
        if (w.split == Split::train)
            max_train_target = std::max(max_train_target, last);
        if (w.split == Split::test)
            min_test_target = std::min(min_test_target, first);
    }
    CHECK(max_train_target < min_test_target);
    CHECK(!ds.of(Split::train).empty());
    CHECK(!ds.of(Split::val).empty());
    CHECK(!ds.of(Split::test).empty());
}

TEST_CASE("resample keeps evens and holds out odds") {
    MultivariateSeries s;
    s.names = {"x1", "y"};
    s.cols = {{0, 1, 2, 3, 4, 5}, {10, 11, 12, 13, 14, 15}};
    MultivariateSeries r = resample_half(s);
    CHECK(r.cols[0] == std::vector<double>{0, 2, 4});
    CHECK(r.target() == std::vector<double>{10, 12, 14});
    REQUIRE(r.half_truth.has_value());
    CHECK(*r.half_truth == std::vector<double>{11, 13, 15});

    MultivariateSeries r2 = resample_half(r);
    CHECK(r2.length() == 2);  // quartered by integer division
    CHECK(r2.cols[0] == std::vector<double>{0, 4});
}

TEST_CASE("fractional truth indexing verified by enumeration") {
    // Build an original series whose target at index i is exactly i, so the
    // expected original index can be read off the value.
    MultivariateSeries orig = ramp_series(101);
    MultivariateSeries half = resample_half(orig);
    WindowedDataset ds = make_windows(half, 5, 3, 0.9, 0.0);
    for (const Window& w : ds.windows) {
        for (std::size_t k = 0; k <= 2; ++k) {
            double offset = static_cast<double>(k) + 0.5;
            auto truth = ds.fractional_truth(w, offset);
            std::size_t original_index = 2 * w.end_index + 2 * k + 1;
            if (original_index < 101) {
                REQUIRE(truth.has_value());
                CHECK(*truth == doctest::Approx(original_index));
            } else {
                CHECK(!truth.has_value());
            }
        }
        CHECK(!ds.fractional_truth(w, 1.25).has_value());
    }
    // offset 1.5 for a window ending at resampled j reads original 2j+3
    const Window& w0 = ds.windows.front();
    CHECK(*ds.fractional_truth(w0, 1.5) ==
          doctest::Approx(2.0 * w0.end_index + 3.0));
}

TEST_CASE("kept and held-out index sets are disjoint") {
    MultivariateSeries orig = ramp_series(64);
    MultivariateSeries half = resample_half(orig);
    std::set<double> kept(half.target().begin(), half.target().end());
    for (double v : *half.half_truth) CHECK(kept.count(v) == 0);
    CHECK(kept.size() + half.half_truth->size() == 64);
}

TEST_CASE("synthetic series is deterministic and respects a pure driver") {
    SyntheticSpec spec;
    spec.len = 300;
    spec.num_exo = 2;
    spec.noise = 0.0;
    spec.ar_coeff = 0.0;
    spec.drivers = {{"x1", 0, 1.0}};
    MultivariateSeries a = gen_synthetic(42, spec);
    MultivariateSeries b = gen_synthetic(42, spec);
    CHECK(a.cols == b.cols);
    for (std::size_t t = 0; t < a.length(); ++t)
        CHECK(a.target()[t] == a.cols[0][t]);

    MultivariateSeries c = gen_synthetic(43, spec);
    CHECK(c.cols != a.cols);
}

TEST_CASE("lagged regression recovers the synthetic coefficients") {
    SyntheticSpec spec;  // defaults: x1 lag 3 coeff 0.6, x2 lag 6 coeff 0.3
    MultivariateSeries s = gen_synthetic(7, spec);
    std::size_t max_lag = 8;
    std::size_t n = s.length();
    // Regressors: every exogenous at lags 0..8, previous target, intercept.
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (std::size_t t = max_lag + 1; t < n; ++t) {
        std::vector<double> row;
        for (std::size_t j = 0; j < spec.num_exo; ++j)
            for (std::size_t lag = 0; lag <= max_lag; ++lag)
                row.push_back(s.cols[j][t - lag]);
        row.push_back(s.target()[t - 1]);
        row.push_back(1.0);
        rows.push_back(row);
        y.push_back(s.target()[t]);
    }
    std::vector<double> beta = testutil::ols(rows, y);
    auto coeff = [&](std::size_t exo, std::size_t lag) {
        return beta[exo * (max_lag + 1) + lag];
    };
    CHECK(std::abs(coeff(0, 3) - 0.6) < 0.05);
    CHECK(std::abs(coeff(1, 6) - 0.3) < 0.05);
    CHECK(std::abs(beta[spec.num_exo * (max_lag + 1)] - spec.ar_coeff) < 0.05);
    // Non-driver lags stay near zero.
    CHECK(std::abs(coeff(0, 0)) < 0.05);
    CHECK(std::abs(coeff(1, 1)) < 0.05);
}

TEST_CASE("synthetic contract errors") {
    SyntheticSpec spec;
    spec.len = 100;
    spec.drivers = {{"x9", 0, 1.0}};
    CHECK_THROWS_AS(gen_synthetic(1, spec), ContractError);
    SyntheticSpec big_lag;
    big_lag.len = 100;
    big_lag.drivers = {{"x1", 100, 1.0}};
    CHECK_THROWS_AS(gen_synthetic(1, big_lag), ContractError);
}

TEST_CASE("csv write/load round-trip") {
    SyntheticSpec spec;
    spec.len = 50;
    spec.num_exo = 2;
    MultivariateSeries s = gen_synthetic(9, spec);
    fs::path p = fs::temp_directory_path() / "etnode_roundtrip.csv";
    write_csv(s, p);
    MultivariateSeries loaded = load_csv(p, "y", {"x1", "x2"});
    REQUIRE(loaded.length() == 50);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < 50; ++i)
            CHECK(loaded.cols[c][i] == s.cols[c][i]);
}

TEST_SUITE_END();
