#include "portcast/market_data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

namespace portcast::data {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

bool is_missing(const std::string& cell) {
    std::string c = lower(cell);
    return c.empty() || c == "na" || c == "nan" || c == "null";
}

double parse_price(const std::string& cell, const std::string& asset,
                   const std::string& date) {
    double v = 0.0;
    try {
        size_t pos = 0;
        v = std::stod(cell, &pos);
        if (pos != cell.size()) throw std::invalid_argument("trailing chars");
    } catch (const std::exception&) {
        throw DataError("unparseable price cell for asset " + asset + " at " + date +
                        ": '" + cell + "'");
    }
    if (!(v > 0.0) || !std::isfinite(v))
        throw NonPositivePrice("non-positive price for asset " + asset + " at " + date +
                               ": " + cell);
    return v;
}

// per-asset observations keyed by date
using ObsMap = std::map<std::string, std::map<std::string, double>>;

PriceSeries assemble(const std::vector<std::string>& asset_order, const ObsMap& obs) {
    if (asset_order.empty()) throw MissingColumn("no asset columns found");
    // intersection of dates available for every asset
    std::set<std::string> common;
    bool first = true;
    for (const auto& id : asset_order) {
        auto it = obs.find(id);
        std::set<std::string> have;
        if (it != obs.end())
            for (const auto& [d, _] : it->second) have.insert(d);
        if (first) {
            common = std::move(have);
            first = false;
        } else {
            std::set<std::string> next;
            std::set_intersection(common.begin(), common.end(), have.begin(), have.end(),
                                  std::inserter(next, next.begin()));
            common = std::move(next);
        }
    }
    if (common.empty()) throw EmptyIntersection("no date is present for every asset");

    std::vector<std::string> dates(common.begin(), common.end());
    Mat prices(static_cast<Eigen::Index>(asset_order.size()),
               static_cast<Eigen::Index>(dates.size()));
    for (size_t i = 0; i < asset_order.size(); ++i) {
        const auto& m = obs.at(asset_order[i]);
        for (size_t t = 0; t < dates.size(); ++t)
            prices(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) =
                m.at(dates[t]);
    }
    return PriceSeries(AssetUniverse(asset_order), std::move(dates), std::move(prices));
}

}  // namespace

AssetUniverse::AssetUniverse(std::vector<std::string> ids) : asset_ids(std::move(ids)) {
    if (asset_ids.empty()) throw DataError("asset universe must not be empty");
    std::unordered_set<std::string> seen;
    for (const auto& id : asset_ids) {
        if (id.empty()) throw DataError("empty asset id");
        if (!seen.insert(id).second) throw DataError("duplicate asset id: " + id);
    }
}

PriceSeries::PriceSeries(AssetUniverse u, std::vector<std::string> d, Mat p)
    : universe(std::move(u)), dates(std::move(d)), prices(std::move(p)) {
    if (prices.rows() != universe.n())
        throw ShapeMismatch("price matrix rows != universe size");
    if (prices.cols() != static_cast<Eigen::Index>(dates.size()))
        throw ShapeMismatch("price matrix cols != calendar length");
    for (size_t i = 1; i < dates.size(); ++i)
        if (!(dates[i - 1] < dates[i]))
            throw DataError("calendar not strictly increasing at " + dates[i]);
    for (Eigen::Index i = 0; i < prices.rows(); ++i)
        for (Eigen::Index t = 0; t < prices.cols(); ++t) {
            double v = prices(i, t);
            if (!(v > 0.0) || !std::isfinite(v))
                throw NonPositivePrice("non-positive price for asset " +
                                       universe.asset_ids[static_cast<size_t>(i)] +
                                       " at " + dates[static_cast<size_t>(t)]);
        }
}

int PriceSeries::lower_bound_index(const std::string& date) const {
    auto it = std::lower_bound(dates.begin(), dates.end(), date);
    return static_cast<int>(it - dates.begin());
}

PriceSeries PriceSeries::slice_cols(int start, int len) const {
    if (start < 0 || len < 1 || start + len > t())
        throw ShapeMismatch("slice_cols out of range");
    std::vector<std::string> d(dates.begin() + start, dates.begin() + start + len);
    return PriceSeries(universe, std::move(d), prices.middleCols(start, len));
}

DateRange::DateRange(std::string s, std::string e) : start(std::move(s)), end(std::move(e)) {
    if (start.empty() || end.empty() || end < start)
        throw DataError("invalid date range " + start + ".." + end);
}

DataSplit::DataSplit(DateRange tr, DateRange de, DateRange te)
    : train(std::move(tr)), dev(std::move(de)), test(std::move(te)) {
    if (!(train.end < dev.start) || !(dev.end < test.start))
        throw DataError("split ranges must be disjoint and ordered train < dev < test");
}

PriceSeries load_prices(const std::string& path, CsvFormat format) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open price file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw MissingColumn("empty file: " + path);
    auto header = split_csv_line(line);
    if (header.empty()) throw MissingColumn("empty header: " + path);

    ObsMap obs;
    std::vector<std::string> asset_order;

    if (format == CsvFormat::Wide) {
        if (lower(header[0]) != "date")
            throw MissingColumn("wide csv must start with a 'date' column, got '" +
                                header[0] + "'");
        if (header.size() < 2) throw MissingColumn("wide csv has no asset columns");
        for (size_t j = 1; j < header.size(); ++j) asset_order.push_back(header[j]);
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            auto cells = split_csv_line(line);
            if (cells.size() != header.size())
                throw DataError("row width mismatch at date '" + cells[0] + "' in " + path);
            const std::string& date = cells[0];
            for (size_t j = 1; j < cells.size(); ++j) {
                if (is_missing(cells[j])) continue;
                obs[asset_order[j - 1]][date] =
                    parse_price(cells[j], asset_order[j - 1], date);
            }
        }
    } else {
        int date_col = -1, asset_col = -1, close_col = -1;
        for (size_t j = 0; j < header.size(); ++j) {
            std::string h = lower(header[j]);
            if (h == "date") date_col = static_cast<int>(j);
            if (h == "asset" || h == "ticker" || h == "symbol")
                asset_col = static_cast<int>(j);
            if (h == "close") close_col = static_cast<int>(j);
        }
        if (date_col < 0) throw MissingColumn("long csv is missing a 'date' column");
        if (asset_col < 0)
            throw MissingColumn("long csv is missing an 'asset'/'ticker'/'symbol' column");
        if (close_col < 0) throw MissingColumn("long csv is missing a 'close' column");
        std::set<std::string> ids;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            auto cells = split_csv_line(line);
            if (cells.size() != header.size())
                throw DataError("row width mismatch in " + path + ": " + line);
            const std::string& date = cells[static_cast<size_t>(date_col)];
            const std::string& asset = cells[static_cast<size_t>(asset_col)];
            const std::string& close = cells[static_cast<size_t>(close_col)];
            if (asset.empty() || date.empty())
                throw DataError("empty asset or date field in " + path);
            if (is_missing(close)) continue;
            obs[asset][date] = parse_price(close, asset, date);
            ids.insert(asset);
        }
        asset_order.assign(ids.begin(), ids.end());
    }
    return assemble(asset_order, obs);
}

std::tuple<PriceSeries, PriceSeries, PriceSeries> split_series(const PriceSeries& series,
                                                               const DataSplit& split) {
    auto restrict = [&](const DateRange& r, const char* name) {
        int lo = series.lower_bound_index(r.start);
        int hi = series.lower_bound_index(r.end + "\x7f");  // first index past r.end
        if (hi <= lo)
            throw EmptyRange(std::string(name) + " range " + r.start + ".." + r.end +
                             " captures no trading days");
        return series.slice_cols(lo, hi - lo);
    };
    return {restrict(split.train, "train"), restrict(split.dev, "dev"),
            restrict(split.test, "test")};
}

std::vector<WindowSample> make_windows(const PriceSeries& series, int w, int h,
                                       int stride) {
    if (w < 1 || h < 1 || stride < 1) throw InvalidSpec("window sizes must be >= 1");
    int T = series.t();
    if (T < w + h)
        throw SeriesTooShort("need at least w+h=" + std::to_string(w + h) +
                             " days, have " + std::to_string(T));
    std::vector<WindowSample> out;
    for (int t = w; t + h - 1 <= T - 1; t += stride) {
        WindowSample s;
        s.window = series.prices.middleCols(t - w, w);
        s.target = series.prices.middleCols(t, h);
        s.anchor_date = series.dates[static_cast<size_t>(t)];
        s.anchor_index = t;
        out.push_back(std::move(s));
    }
    return out;
}

Mat rate_of_return(const PriceSeries& series) {
    int T = series.t();
    if (T < 2) throw SeriesTooShort("need at least two days for returns");
    Mat out(series.n(), T - 1);
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        for (Eigen::Index t = 0; t < out.cols(); ++t)
            out(i, t) = (series.prices(i, t + 1) - series.prices(i, t)) /
                        series.prices(i, t);
    return out;
}

namespace {

// civil-date conversions (proleptic Gregorian), days since 1970-01-01
long days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    long era = (y >= 0 ? y : y - 399) / 400;
    unsigned yoe = static_cast<unsigned>(y - era * 400);
    unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                   static_cast<unsigned>(d) - 1u;
    unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

void civil_from_days(long z, int& y, int& m, int& d) {
    z += 719468;
    long era = (z >= 0 ? z : z - 146096) / 146097;
    unsigned doe = static_cast<unsigned>(z - era * 146097);
    unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    long yy = static_cast<long>(yoe) + era * 400;
    unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

long parse_iso_date(const std::string& s) {
    int y, m, d;
    if (std::sscanf(s.c_str(), "%d-%d-%d", &y, &m, &d) != 3)
        throw InvalidSpec("bad ISO date: " + s);
    return days_from_civil(y, m, d);
}

std::string format_iso_date(long days) {
    int y, m, d;
    civil_from_days(days, y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
    return buf;
}

bool is_weekday(long days) {
    long wd = ((days % 7) + 10) % 7;  // 0 = Monday (1970-01-01 was a Thursday)
    return wd < 5;
}

}  // namespace

PriceSeries synth_market(const SynthSpec& spec, unsigned long long seed) {
    if (spec.n < 1 || spec.T < 2) throw InvalidSpec("synth market needs n >= 1, T >= 2");
    if (spec.noise_scale < 0) throw InvalidSpec("noise scale must be >= 0");
    if (spec.seasonal_amplitudes.size() != spec.seasonal_periods.size())
        throw InvalidSpec("seasonal amplitudes and periods must pair up");
    for (double p : spec.seasonal_periods)
        if (!(p > 0)) throw InvalidSpec("seasonal periods must be positive");

    std::vector<double> slopes = spec.trend_slopes;
    if (slopes.empty()) slopes.assign(static_cast<size_t>(spec.n), 0.0);
    if (slopes.size() == 1) slopes.assign(static_cast<size_t>(spec.n), slopes[0]);
    if (slopes.size() != static_cast<size_t>(spec.n))
        throw InvalidSpec("trend_slopes must have 1 or n entries");

    // keep log-prices far from the exp overflow/underflow boundary
    double amp_sum = 0.0;
    for (double a : spec.seasonal_amplitudes) amp_sum += std::abs(a);
    double max_slope = 0.0;
    for (double s : slopes) max_slope = std::max(max_slope, std::abs(s));
    double bound = std::abs(spec.base_log_price) + max_slope * spec.T + amp_sum +
                   12.0 * spec.noise_scale;
    if (bound > 600.0)
        throw InvalidSpec("synth spec cannot guarantee finite positive prices");

    std::vector<std::string> dates;
    dates.reserve(static_cast<size_t>(spec.T));
    long day = parse_iso_date(spec.start_date);
    while (static_cast<int>(dates.size()) < spec.T) {
        if (is_weekday(day)) dates.push_back(format_iso_date(day));
        ++day;
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 2.0 * M_PI);

    Mat prices(spec.n, spec.T);
    for (int i = 0; i < spec.n; ++i) {
        std::vector<double> phases;
        for (size_t k = 0; k < spec.seasonal_amplitudes.size(); ++k)
            phases.push_back(unif(rng));
        for (int t = 0; t < spec.T; ++t) {
            double lp = spec.base_log_price + slopes[static_cast<size_t>(i)] * t;
            for (size_t k = 0; k < spec.seasonal_amplitudes.size(); ++k)
                lp += spec.seasonal_amplitudes[k] *
                      std::sin(2.0 * M_PI * t / spec.seasonal_periods[k] + phases[k]);
            if (spec.noise_scale > 0) {
                double g = gauss(rng);
                g = std::clamp(g, -12.0, 12.0);
                lp += spec.noise_scale * g;
            }
            prices(i, t) = std::exp(lp);
        }
    }

    std::vector<std::string> ids;
    for (int i = 0; i < spec.n; ++i) ids.push_back("SYN" + std::to_string(i));
    return PriceSeries(AssetUniverse(std::move(ids)), std::move(dates), std::move(prices));
}

void write_wide_csv(const PriceSeries& series, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "date";
    for (const auto& id : series.universe.asset_ids) out << "," << id;
    out << "\n";
    char buf[32];
    for (int t = 0; t < series.t(); ++t) {
        out << series.dates[static_cast<size_t>(t)];
        for (int i = 0; i < series.n(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", series.prices(i, t));
            out << "," << buf;
        }
        out << "\n";
    }
}

}  // namespace portcast::data
