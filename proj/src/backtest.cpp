#include "portcast/backtest.hpp"

#include <cmath>

namespace portcast::bt {

Mat MarketView::window(int w) const {
    if (w < 1 || end_ < w)
        throw InsufficientHistory("need " + std::to_string(w) + " days of history, have " +
                                  std::to_string(end_));
    return series_->prices.middleCols(end_ - w, w);
}

Vec MarketView::trailing_returns(int lookback) const {
    if (lookback < 1 || end_ < lookback + 1)
        throw InsufficientHistory("need " + std::to_string(lookback + 1) +
                                  " days of history, have " + std::to_string(end_));
    Vec out(series_->n());
    for (int i = 0; i < series_->n(); ++i) {
        double now = series_->prices(i, end_ - 1);
        double then = series_->prices(i, end_ - 1 - lookback);
        out(i) = (now - then) / then;
    }
    return out;
}

Trajectory run_backtest(const Strategy& strategy, const data::PriceSeries& test,
                        int warmup) {
    if (warmup < 1) throw ConfigError("backtest warmup must be >= 1");
    int T = test.t();
    if (T <= warmup + 1)
        throw SeriesTooShort("test period must be longer than warmup + 1 days");
    Trajectory traj;
    double equity = 1.0;
    for (int t = warmup; t < T; ++t) {
        MarketView view(test, t);
        policy::PortfolioVector p = strategy(view, test.dates[static_cast<size_t>(t)]);
        policy::validate_portfolio(p);
        double r = 0.0;
        for (int i = 0; i < test.n(); ++i) {
            double delta =
                (test.prices(i, t) - test.prices(i, t - 1)) / test.prices(i, t - 1);
            r += delta * (p.long_alloc(i) + p.short_alloc(i));
        }
        equity *= 1.0 + r;
        traj.dates.push_back(test.dates[static_cast<size_t>(t)]);
        traj.returns.push_back(r);
        traj.equity.push_back(equity);
        traj.rho.push_back(p.rho);
        traj.portfolios.push_back(std::move(p));
    }
    return traj;
}

MetricsReport compute_metrics(const std::vector<double>& returns,
                              int trading_days_per_year) {
    if (returns.size() < 2) throw DataError("metrics need at least 2 return observations");
    double n = static_cast<double>(returns.size());
    double mean = 0.0;
    for (double r : returns) mean += r;
    mean /= n;

    double var = 0.0, downside_sq = 0.0;
    for (double r : returns) {
        var += (r - mean) * (r - mean);
        double d = std::min(r, 0.0);
        downside_sq += d * d;
    }
    var /= n;  // population variance
    downside_sq /= n;
    // constant series must report exactly zero volatility despite the
    // cancellation noise in (r - mean)
    if (var < 1e-24) var = 0.0;

    double ann = static_cast<double>(trading_days_per_year);
    MetricsReport m;
    m.arr = mean * ann;
    m.avol = std::sqrt(var) * std::sqrt(ann);

    double equity = 1.0, peak = 1.0, mdd = 0.0;
    for (double r : returns) {
        equity *= 1.0 + r;
        peak = std::max(peak, equity);
        mdd = std::max(mdd, (peak - equity) / peak);
    }
    m.mdd = mdd;

    if (m.avol > 0.0) m.asr = m.arr / m.avol;
    if (m.mdd > 0.0) m.cr = m.arr / m.mdd;
    double downside = std::sqrt(downside_sq) * std::sqrt(ann);
    if (downside > 0.0) m.sor = m.arr / downside;
    return m;
}

namespace {

policy::PortfolioVector equal_weight_books(const std::vector<int>& long_set,
                                           const std::vector<int>& short_set, int n,
                                           double rho, const std::string& date) {
    policy::PositionWeights w;
    w.long_set = long_set;
    w.short_set = short_set;
    w.long_weights = Vec::Zero(n);
    w.short_weights = Vec::Zero(n);
    for (int i : long_set) w.long_weights(i) = 1.0 / static_cast<double>(long_set.size());
    for (int i : short_set)
        w.short_weights(i) = -1.0 / static_cast<double>(short_set.size());
    return policy::assemble_portfolio(rho, w, date);
}

}  // namespace

Strategy csm_strategy(int lookback, policy::SelectionConfig cfg) {
    if (lookback < 1) throw ConfigError("csm lookback must be >= 1");
    return [lookback, cfg](const MarketView& view, const std::string& date) {
        Vec scores = view.trailing_returns(lookback);
        auto [long_set, short_set] = policy::select_positions(scores, cfg);
        return equal_weight_books(long_set, short_set, view.n(), 0.5, date);
    };
}

Strategy blsw_strategy(int lookback, policy::SelectionConfig cfg) {
    if (lookback < 1) throw ConfigError("blsw lookback must be >= 1");
    return [lookback, cfg](const MarketView& view, const std::string& date) {
        Vec scores = -view.trailing_returns(lookback).array();
        auto [long_set, short_set] = policy::select_positions(scores, cfg);
        return equal_weight_books(long_set, short_set, view.n(), 0.5, date);
    };
}

Strategy benchmark_index() {
    return [](const MarketView& view, const std::string& date) {
        int n = view.n();
        policy::PortfolioVector p;
        p.rho = 1.0;
        p.date = date;
        p.long_alloc = Vec::Constant(n, 1.0 / n);
        p.short_alloc = Vec::Zero(n);
        return p;
    };
}

}  // namespace portcast::bt
