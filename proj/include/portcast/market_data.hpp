#pragma once

#include <Eigen/Dense>
#include <string>
#include <tuple>
#include <vector>

#include "portcast/errors.hpp"

namespace portcast::data {

using Mat = Eigen::MatrixXd;

struct AssetUniverse {
    std::vector<std::string> asset_ids;

    AssetUniverse() = default;
    explicit AssetUniverse(std::vector<std::string> ids);

    int n() const { return static_cast<int>(asset_ids.size()); }
};

// Per-asset daily closing prices over a shared trading calendar. Immutable
// after construction; all accessors are const and safe to share.
struct PriceSeries {
    AssetUniverse universe;
    std::vector<std::string> dates;  // ISO-8601, strictly increasing
    Mat prices;                      // n x T, strictly positive and finite

    PriceSeries() = default;
    PriceSeries(AssetUniverse u, std::vector<std::string> d, Mat p);

    int n() const { return universe.n(); }
    int t() const { return static_cast<int>(dates.size()); }
    // first calendar index with dates[i] >= date, or t() if none
    int lower_bound_index(const std::string& date) const;
    PriceSeries slice_cols(int start, int len) const;
};

struct DateRange {
    std::string start;  // inclusive
    std::string end;    // inclusive

    DateRange() = default;
    DateRange(std::string s, std::string e);
};

struct DataSplit {
    DateRange train, dev, test;

    DataSplit() = default;
    DataSplit(DateRange tr, DateRange de, DateRange te);
};

struct WindowSample {
    Mat window;   // n x w, the w days strictly before the anchor
    Mat target;   // n x h, the h days starting at the anchor
    std::string anchor_date;
    int anchor_index = 0;  // calendar index of the anchor in the parent series
};

enum class CsvFormat { Wide, Long };

// Wide: one `date` column plus one column per asset.
// Long: columns `date`, `asset` (or ticker/symbol) and `close`.
// The calendar is the intersection of dates available for every asset.
PriceSeries load_prices(const std::string& path, CsvFormat format);

std::tuple<PriceSeries, PriceSeries, PriceSeries> split_series(const PriceSeries& series,
                                                               const DataSplit& split);

std::vector<WindowSample> make_windows(const PriceSeries& series, int w, int h,
                                       int stride = 1);

// entry (i, t) = (p[i,t+1] - p[i,t]) / p[i,t]
Mat rate_of_return(const PriceSeries& series);

struct SynthSpec {
    int n = 1;
    int T = 2;
    std::vector<double> trend_slopes;          // per asset, or single value broadcast
    std::vector<double> seasonal_amplitudes;   // shared sinusoid components
    std::vector<double> seasonal_periods;      // same length as amplitudes, in days
    double noise_scale = 0.0;
    double base_log_price = 4.605170185988091;  // log(100)
    std::string start_date = "2000-01-03";
};

// Deterministic weekday-calendar fixture generator:
// price = exp(base + slope*t + sum_k A_k sin(2 pi t / period_k + phase) + noise)
PriceSeries synth_market(const SynthSpec& spec, unsigned long long seed);

void write_wide_csv(const PriceSeries& series, const std::string& path);

}  // namespace portcast::data
