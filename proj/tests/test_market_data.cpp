#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "portcast/market_data.hpp"

using namespace portcast;
using data::PriceSeries;

namespace {

std::string temp_csv(const std::string& name, const std::string& content) {
    auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << content;
    return path.string();
}

}  // namespace

TEST_CASE("wide csv parses to an aligned series") {
    auto path = temp_csv("md_wide.csv",
                         "date,AA,BB\n"
                         "2020-01-01,10.0,20.0\n"
                         "2020-01-02,11.0,21.0\n"
                         "2020-01-03,12.0,22.0\n");
    auto s = data::load_prices(path, data::CsvFormat::Wide);
    CHECK(s.n() == 2);
    CHECK(s.t() == 3);
    CHECK(s.universe.asset_ids == std::vector<std::string>{"AA", "BB"});
    CHECK(s.prices(1, 2) == 22.0);
}

TEST_CASE("calendar shrinks to the dates every asset has") {
    auto path = temp_csv("md_missing.csv",
                         "date,AA,BB\n"
                         "2020-01-01,10.0,20.0\n"
                         "2020-01-02,11.0,21.0\n"
                         "2020-01-03,12.0,\n");
    auto s = data::load_prices(path, data::CsvFormat::Wide);
    CHECK(s.t() == 2);
    CHECK(s.dates.back() == "2020-01-02");
}

TEST_CASE("a zero price cell is rejected by name") {
    auto path = temp_csv("md_zero.csv",
                         "date,AA\n"
                         "2020-01-01,10.0\n"
                         "2020-01-02,0.0\n");
    CHECK_THROWS_WITH_AS(data::load_prices(path, data::CsvFormat::Wide),
                         doctest::Contains("AA"), NonPositivePrice);
}

TEST_CASE("missing columns are named") {
    auto p1 = temp_csv("md_nohdr.csv", "time,AA\n2020-01-01,1\n");
    CHECK_THROWS_AS(data::load_prices(p1, data::CsvFormat::Wide), MissingColumn);
    auto p2 = temp_csv("md_long_noclose.csv",
                       "date,asset,price\n2020-01-01,AA,1.0\n");
    CHECK_THROWS_WITH_AS(data::load_prices(p2, data::CsvFormat::Long),
                         doctest::Contains("close"), MissingColumn);
}

TEST_CASE("long csv groups by asset and intersects dates") {
    auto path = temp_csv("md_long.csv",
                         "date,asset,close\n"
                         "2020-01-01,AA,10\n"
                         "2020-01-02,AA,11\n"
                         "2020-01-01,BB,20\n"
                         "2020-01-02,BB,21\n"
                         "2020-01-03,BB,22\n");
    auto s = data::load_prices(path, data::CsvFormat::Long);
    CHECK(s.n() == 2);
    CHECK(s.t() == 2);
    CHECK(s.prices(0, 1) == 11.0);
}

TEST_CASE("disjoint calendars fail loudly") {
    auto path = temp_csv("md_disjoint.csv",
                         "date,asset,close\n"
                         "2020-01-01,AA,10\n"
                         "2020-01-02,BB,20\n");
    CHECK_THROWS_AS(data::load_prices(path, data::CsvFormat::Long), EmptyIntersection);
}

TEST_CASE("split respects date bounds and counts") {
    data::SynthSpec spec;
    spec.n = 2;
    spec.T = 100;
    auto s = data::synth_market(spec, 1);
    // bounds by position: 60 / 20 / 20
    data::DataSplit split({s.dates[0], s.dates[59]}, {s.dates[60], s.dates[79]},
                          {s.dates[80], s.dates[99]});
    auto [train, dev, test] = data::split_series(s, split);
    CHECK(train.t() == 60);
    CHECK(dev.t() == 20);
    CHECK(test.t() == 20);

    SUBCASE("concatenation preserves per-asset values exactly") {
        Eigen::MatrixXd glued(s.n(), 100);
        glued << train.prices, dev.prices, test.prices;
        CHECK((glued - s.prices).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("overlapping split ranges are rejected at construction") {
    CHECK_THROWS_AS(data::DataSplit({"2020-01-01", "2020-06-30"},
                                    {"2020-06-30", "2020-09-30"},
                                    {"2020-10-01", "2020-12-31"}),
                    DataError);
}

TEST_CASE("the published experiment split bounds form a valid DataSplit") {
    data::DataSplit split({"1992-01-01", "2004-09-30"}, {"2004-10-01", "2006-05-31"},
                          {"2006-06-01", "2022-12-31"});
    CHECK(split.train.end < split.dev.start);
    CHECK(split.dev.end < split.test.start);
}

TEST_CASE("a range with no trading days is an error") {
    data::SynthSpec spec;
    spec.n = 1;
    spec.T = 30;
    auto s = data::synth_market(spec, 1);
    data::DataSplit split({s.dates[0], s.dates[9]}, {s.dates[10], s.dates[19]},
                          {"2099-01-01", "2099-12-31"});
    CHECK_THROWS_AS(data::split_series(s, split), EmptyRange);
}

TEST_CASE("window counts follow floor((T-w-h)/stride)+1") {
    data::SynthSpec spec;
    spec.n = 2;
    spec.T = 10;
    auto s = data::synth_market(spec, 3);
    CHECK(data::make_windows(s, 5, 1, 1).size() == 5);
    CHECK(data::make_windows(s, 5, 5, 1).size() == 1);
    CHECK(data::make_windows(s, 3, 2, 2).size() == 3);

    data::SynthSpec small;
    small.n = 2;
    small.T = 9;
    auto tiny = data::synth_market(small, 3);
    CHECK_THROWS_AS(data::make_windows(tiny, 5, 5, 1), SeriesTooShort);
}

TEST_CASE("windows and targets are disjoint contiguous slices") {
    data::SynthSpec spec;
    spec.n = 2;
    spec.T = 40;
    spec.trend_slopes = {0.01, -0.004};
    auto s = data::synth_market(spec, 9);
    for (const auto& sample : data::make_windows(s, 6, 3, 2)) {
        int t = sample.anchor_index;
        CHECK(sample.window.cols() == 6);
        CHECK(sample.target.cols() == 3);
        // window ends the day before the anchor, target starts at the anchor
        CHECK(sample.window(0, 5) == s.prices(0, t - 1));
        CHECK(sample.target(0, 0) == s.prices(0, t));
        CHECK(sample.anchor_date == s.dates[static_cast<size_t>(t)]);
    }
}

TEST_CASE("rate of return matches hand arithmetic") {
    Eigen::MatrixXd p(1, 3);
    p << 100.0, 90.0, 99.0;
    PriceSeries s(data::AssetUniverse({"A"}), {"2020-01-01", "2020-01-02", "2020-01-03"},
                  p);
    auto r = data::rate_of_return(s);
    CHECK(r(0, 0) == doctest::Approx(-0.10).epsilon(1e-12));
    CHECK(r(0, 1) == doctest::Approx(0.10).epsilon(1e-12));

    Eigen::MatrixXd q(1, 2);
    q << 100.0, 110.0;
    PriceSeries s2(data::AssetUniverse({"A"}), {"2020-01-01", "2020-01-02"}, q);
    CHECK(data::rate_of_return(s2)(0, 0) == doctest::Approx(0.10).epsilon(1e-12));

    Eigen::MatrixXd c = Eigen::MatrixXd::Constant(1, 4, 42.0);
    PriceSeries s3(data::AssetUniverse({"A"}),
                   {"2020-01-01", "2020-01-02", "2020-01-03", "2020-01-06"}, c);
    CHECK(data::rate_of_return(s3).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("compounding returns reconstructs the series") {
    data::SynthSpec spec;
    spec.n = 3;
    spec.T = 120;
    spec.trend_slopes = {0.002, -0.001, 0.0005};
    spec.seasonal_amplitudes = {0.05};
    spec.seasonal_periods = {17.0};
    spec.noise_scale = 0.01;
    auto s = data::synth_market(spec, 21);
    auto r = data::rate_of_return(s);
    for (int i = 0; i < s.n(); ++i) {
        double price = s.prices(i, 0);
        for (int t = 0; t < r.cols(); ++t) {
            price *= 1.0 + r(i, t);
            CHECK(std::abs(price - s.prices(i, t + 1)) / s.prices(i, t + 1) < 1e-9);
        }
    }
}

TEST_CASE("synthetic market basics") {
    SUBCASE("degenerate spec gives a constant series") {
        data::SynthSpec spec;
        spec.n = 2;
        spec.T = 10;
        auto s = data::synth_market(spec, 5);
        CHECK((s.prices.array() == s.prices(0, 0)).all());
    }
    SUBCASE("same seed is bit-identical") {
        data::SynthSpec spec;
        spec.n = 3;
        spec.T = 50;
        spec.noise_scale = 0.02;
        spec.seasonal_amplitudes = {0.1};
        spec.seasonal_periods = {12.0};
        auto a = data::synth_market(spec, 99);
        auto b = data::synth_market(spec, 99);
        CHECK((a.prices - b.prices).cwiseAbs().maxCoeff() == 0.0);
        auto c = data::synth_market(spec, 100);
        CHECK((a.prices - c.prices).cwiseAbs().maxCoeff() > 0.0);
    }
    SUBCASE("positive slope with no noise rises strictly") {
        data::SynthSpec spec;
        spec.n = 1;
        spec.T = 200;
        spec.trend_slopes = {0.001};
        auto s = data::synth_market(spec, 2);
        for (int t = 1; t < s.t(); ++t) CHECK(s.prices(0, t) > s.prices(0, t - 1));
    }
    SUBCASE("overflow-prone specs are rejected") {
        data::SynthSpec spec;
        spec.n = 1;
        spec.T = 1000;
        spec.trend_slopes = {2.0};
        CHECK_THROWS_AS(data::synth_market(spec, 1), InvalidSpec);
    }
    SUBCASE("weekday calendar only") {
        data::SynthSpec spec;
        spec.n = 1;
        spec.T = 30;
        auto s = data::synth_market(spec, 1);
        for (const auto& d : s.dates) CHECK(d >= "2000-01-03");
        CHECK(s.dates[0] == "2000-01-03");  // a Monday
        CHECK(s.dates[5] == "2000-01-10");  // weekend skipped
    }
}

TEST_CASE("wide csv round-trips through write_wide_csv") {
    data::SynthSpec spec;
    spec.n = 2;
    spec.T = 15;
    spec.noise_scale = 0.05;
    auto s = data::synth_market(spec, 8);
    auto path = (std::filesystem::temp_directory_path() / "md_roundtrip.csv").string();
    data::write_wide_csv(s, path);
    auto back = data::load_prices(path, data::CsvFormat::Wide);
    CHECK(back.universe.asset_ids == s.universe.asset_ids);
    CHECK(back.dates == s.dates);
    CHECK((back.prices - s.prices).cwiseAbs().maxCoeff() == 0.0);
}
