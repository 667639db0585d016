#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "portcast/backtest.hpp"
#include "portcast/lora.hpp"
#include "portcast/market_data.hpp"
#include "portcast/policy.hpp"
#include "portcast/rl.hpp"
#include "portcast/seq_ops.hpp"
#include "portcast/training.hpp"

namespace py = pybind11;
using namespace portcast;

namespace {

data::SynthSpec synth_spec_from_kwargs(int n, int T, std::vector<double> trend_slopes,
                                       std::vector<double> seasonal_amplitudes,
                                       std::vector<double> seasonal_periods,
                                       double noise_scale, const std::string& start_date) {
    data::SynthSpec s;
    s.n = n;
    s.T = T;
    s.trend_slopes = std::move(trend_slopes);
    s.seasonal_amplitudes = std::move(seasonal_amplitudes);
    s.seasonal_periods = std::move(seasonal_periods);
    s.noise_scale = noise_scale;
    s.start_date = start_date;
    return s;
}

py::dict metrics_dict(const bt::MetricsReport& m) {
    py::dict d;
    d["ARR"] = m.arr;
    d["AVol"] = m.avol;
    d["MDD"] = m.mdd;
    d["ASR"] = m.asr ? py::object(py::float_(*m.asr)) : py::object(py::none());
    d["CR"] = m.cr ? py::object(py::float_(*m.cr)) : py::object(py::none());
    d["SoR"] = m.sor ? py::object(py::float_(*m.sor)) : py::object(py::none());
    return d;
}

}  // namespace

PYBIND11_MODULE(portcast, m) {
    m.doc() = "forecast-driven long/short portfolio selection toolkit";

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<DataError>(m, "DataError");

    py::class_<data::PriceSeries>(m, "PriceSeries")
        .def_property_readonly("asset_ids",
                               [](const data::PriceSeries& s) { return s.universe.asset_ids; })
        .def_property_readonly("dates", [](const data::PriceSeries& s) { return s.dates; })
        .def_property_readonly("prices", [](const data::PriceSeries& s) { return s.prices; })
        .def("__repr__", [](const data::PriceSeries& s) {
            return "<PriceSeries " + std::to_string(s.n()) + " assets x " +
                   std::to_string(s.t()) + " days>";
        });

    m.def("synth_market", [](int n, int T, std::vector<double> trend_slopes,
                             std::vector<double> seasonal_amplitudes,
                             std::vector<double> seasonal_periods, double noise_scale,
                             const std::string& start_date, unsigned long long seed) {
              return data::synth_market(
                  synth_spec_from_kwargs(n, T, std::move(trend_slopes),
                                         std::move(seasonal_amplitudes),
                                         std::move(seasonal_periods), noise_scale,
                                         start_date),
                  seed);
          },
          py::arg("n"), py::arg("T"), py::arg("trend_slopes") = std::vector<double>{},
          py::arg("seasonal_amplitudes") = std::vector<double>{},
          py::arg("seasonal_periods") = std::vector<double>{},
          py::arg("noise_scale") = 0.0, py::arg("start_date") = "2000-01-03",
          py::arg("seed") = 0);

    m.def("load_prices", [](const std::string& path, const std::string& format) {
              if (format != "wide" && format != "long")
                  throw ConfigError("format must be 'wide' or 'long'");
              return data::load_prices(path, format == "wide" ? data::CsvFormat::Wide
                                                              : data::CsvFormat::Long);
          },
          py::arg("path"), py::arg("format") = "wide");

    m.def("rate_of_return", &data::rate_of_return, py::arg("series"));

    m.def("decompose", [](const Eigen::MatrixXd& x, int kernel) {
              auto out = model::decompose(x, kernel);
              return py::make_tuple(out.trend, out.seasonal);
          },
          py::arg("x"), py::arg("kernel"), "seasonal-trend split along axis 0");

    m.def("freq_block_identity", [](const Eigen::MatrixXd& x, int mode_count) {
              auto p = model::FreqBlockParams::identity(mode_count,
                                                        static_cast<int>(x.cols()));
              return model::freq_block(x, p);
          },
          py::arg("x"), py::arg("mode_count"));

    m.def("select_positions", [](const Eigen::VectorXd& v, int n_long, int n_short) {
              policy::SelectionConfig cfg(n_long, n_short, static_cast<int>(v.size()));
              auto [l, s] = policy::select_positions(v, cfg);
              return py::make_tuple(l, s);
          },
          py::arg("v"), py::arg("n_long"), py::arg("n_short"));

    m.def("position_weights", [](const Eigen::VectorXd& v, const std::vector<int>& long_set,
                                 const std::vector<int>& short_set) {
              auto w = policy::position_weights(v, long_set, short_set);
              return py::make_tuple(w.long_weights, w.short_weights);
          },
          py::arg("v"), py::arg("long_set"), py::arg("short_set"));

    m.def("rho_from", [](double mu, double sigma, double noise, const std::string& mode) {
              return policy::rho_from(mu, sigma, noise,
                                      mode == "train" ? policy::RhoMode::Train
                                                      : policy::RhoMode::Test);
          },
          py::arg("mu"), py::arg("sigma") = 0.0, py::arg("noise") = 0.0,
          py::arg("mode") = "test");

    m.def("assemble_portfolio", [](double rho, const Eigen::VectorXd& v,
                                   const std::vector<int>& long_set,
                                   const std::vector<int>& short_set) {
              auto w = policy::position_weights(v, long_set, short_set);
              auto p = policy::assemble_portfolio(rho, w);
              return py::make_tuple(p.long_alloc, p.short_alloc);
          },
          py::arg("rho"), py::arg("v"), py::arg("long_set"), py::arg("short_set"));

    m.def("reward_r1", [](const Eigen::VectorXd& delta, const Eigen::VectorXd& long_alloc,
                          const Eigen::VectorXd& short_alloc, double rho) {
              policy::PortfolioVector p;
              p.long_alloc = long_alloc;
              p.short_alloc = short_alloc;
              p.rho = rho;
              return rl::reward_r1(delta, p);
          },
          py::arg("delta"), py::arg("long_alloc"), py::arg("short_alloc"),
          py::arg("rho") = 0.5);

    m.def("reward_r2", &rl::reward_r2, py::arg("delta"), py::arg("v"));

    m.def("objective_value", [](double rho, double r1, double r2, double alpha, double beta) {
              rl::RLConfig cfg;
              cfg.alpha = alpha;
              cfg.beta = beta;
              return rl::objective_value(rho, r1, r2, cfg);
          },
          py::arg("rho"), py::arg("r1"), py::arg("r2"), py::arg("alpha") = 0.05,
          py::arg("beta") = 1.0);

    m.def("compute_metrics", [](const std::vector<double>& returns, int trading_days) {
              return metrics_dict(bt::compute_metrics(returns, trading_days));
          },
          py::arg("returns"), py::arg("trading_days_per_year") = 252);

    m.def("backtest_csm", [](const data::PriceSeries& series, int lookback, int n_long,
                             int n_short, int warmup) {
              policy::SelectionConfig cfg(n_long, n_short, series.n());
              auto traj = bt::run_backtest(bt::csm_strategy(lookback, cfg), series, warmup);
              return py::make_tuple(traj.dates, traj.returns, traj.equity);
          },
          py::arg("series"), py::arg("lookback") = 20, py::arg("n_long") = 1,
          py::arg("n_short") = 1, py::arg("warmup") = 21);

    m.def("backtest_benchmark", [](const data::PriceSeries& series, int warmup) {
              auto traj = bt::run_backtest(bt::benchmark_index(), series, warmup);
              return py::make_tuple(traj.dates, traj.returns, traj.equity);
          },
          py::arg("series"), py::arg("warmup") = 1);

    m.def("train_and_eval_forecaster",
          [](const data::PriceSeries& series, const std::string& kind, int w, int h,
             int d_model, int ff_dim, int mode_count, int epochs, double lr,
             unsigned long long seed, double train_frac) {
              model::ModelConfig cfg;
              cfg.n = series.n();
              cfg.w = w;
              cfg.h = h;
              cfg.d_model = d_model;
              cfg.ff_dim = ff_dim;
              cfg.mode_count = mode_count;
              auto windows = data::make_windows(series, w, h, 1);
              size_t split = static_cast<size_t>(windows.size() * train_frac);
              if (split == 0 || split >= windows.size())
                  throw ConfigError("train_frac leaves an empty split");
              std::vector<data::WindowSample> train_w(windows.begin(),
                                                      windows.begin() + split);
              std::vector<data::WindowSample> test_w(windows.begin() + split,
                                                     windows.end());
              model::Forecaster f = kind == "vanilla"
                                        ? model::make_vanilla_forecaster(cfg, seed)
                                        : model::make_frequency_forecaster(cfg, seed);
              train::TrainConfig tc;
              tc.epochs = epochs;
              tc.learning_rate = lr;
              tc.seed = seed;
              train::pretrain(f, train_w, test_w, tc);
              auto rep = train::evaluate_forecasts(f, test_w);
              py::dict d;
              d["mae"] = rep.mae;
              d["rmse"] = rep.rmse;
              d["mape"] = rep.mape;
              d["param_count"] = f.param_count();
              return d;
          },
          py::arg("series"), py::arg("kind") = "frequency", py::arg("w") = 5,
          py::arg("h") = 5, py::arg("d_model") = 16, py::arg("ff_dim") = 32,
          py::arg("mode_count") = 8, py::arg("epochs") = 10, py::arg("lr") = 0.01,
          py::arg("seed") = 7, py::arg("train_frac") = 0.8);
}
