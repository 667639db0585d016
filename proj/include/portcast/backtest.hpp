#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "portcast/market_data.hpp"
#include "portcast/policy.hpp"

namespace portcast::bt {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// The only market access a strategy gets: data strictly before the decision
// day, so lookahead is ruled out by construction.
class MarketView {
  public:
    MarketView(const data::PriceSeries& series, int end) : series_(&series), end_(end) {}

    int n() const { return series_->n(); }
    int history() const { return end_; }
    // last w closes before the decision day
    Mat window(int w) const;
    // per-asset return over the trailing `lookback` days
    Vec trailing_returns(int lookback) const;

  private:
    const data::PriceSeries* series_;
    int end_;
};

using Strategy =
    std::function<policy::PortfolioVector(const MarketView&, const std::string& date)>;

struct Trajectory {
    std::vector<std::string> dates;
    std::vector<double> returns;  // daily portfolio return r_p
    std::vector<double> equity;   // E(k) = E(k-1) * (1 + r_p(k)), E implicit 1 at start
    std::vector<double> rho;
    std::vector<policy::PortfolioVector> portfolios;
};

// decisions on days warmup..T-1, each seeing only data before the day
Trajectory run_backtest(const Strategy& strategy, const data::PriceSeries& test,
                        int warmup);

struct MetricsReport {
    double arr = 0.0;   // mean daily return * 252
    double avol = 0.0;  // population std * sqrt(252)
    double mdd = 0.0;   // max peak-to-trough equity decline (curve starts at 1)
    std::optional<double> asr;  // arr / avol, absent on zero volatility
    std::optional<double> cr;   // arr / mdd, absent on zero drawdown
    std::optional<double> sor;  // arr / downside vol, absent with no downside
};

MetricsReport compute_metrics(const std::vector<double>& returns,
                              int trading_days_per_year = 252);

// trailing-return momentum: long the top, short the bottom, both equal weight,
// rho fixed at 0.5
Strategy csm_strategy(int lookback, policy::SelectionConfig cfg);
// the same ranking reversed
Strategy blsw_strategy(int lookback, policy::SelectionConfig cfg);
// equal-weight long-only basket over the universe, rho = 1
Strategy benchmark_index();

}  // namespace portcast::bt
