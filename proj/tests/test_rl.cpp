#include <cmath>
#include <random>

#include "doctest.h"
#include "portcast/rl.hpp"
#include "support/oracles.hpp"

using namespace portcast;
using policy::Vec;
using rl::RLConfig;

namespace {

Vec vec(std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

policy::PortfolioVector books(std::initializer_list<double> long_alloc,
                              std::initializer_list<double> short_alloc, double rho) {
    policy::PortfolioVector p;
    p.long_alloc = vec(long_alloc);
    p.short_alloc = vec(short_alloc);
    p.rho = rho;
    return p;
}

rl::PolicyComponents lora_components(int n, int w, int h, unsigned long long seed,
                                     const std::string& plan = "encoders") {
    model::ModelConfig cfg;
    cfg.n = n;
    cfg.w = w;
    cfg.h = h;
    cfg.d_model = 6;
    cfg.ff_dim = 8;
    cfg.mode_count = 2;
    auto base = model::make_frequency_forecaster(cfg, seed);
    auto adapted = lora::inject(std::move(base), lora::InjectionPlan::parse(plan), 2,
                                8.0, seed + 1);
    return rl::make_components(rl::ForecastMode::LoRA, std::move(adapted), n, w, h,
                               policy::SelectionConfig(1, 1, n), 8, seed + 2);
}

data::PriceSeries trending_series(int n, int T, double slope_lo, double slope_hi,
                                  unsigned long long seed) {
    data::SynthSpec spec;
    spec.n = n;
    spec.T = T;
    for (int i = 0; i < n; ++i)
        spec.trend_slopes.push_back(slope_lo + (slope_hi - slope_lo) * i /
                                                   std::max(1, n - 1));
    return data::synth_market(spec, seed);
}

}  // namespace

TEST_CASE("r1 hand arithmetic") {
    CHECK(rl::reward_r1(vec({0.01, -0.02}), books({1, 0}, {0, 0}, 1.0)) ==
          doctest::Approx(0.01).epsilon(1e-12));
    CHECK(rl::reward_r1(vec({0.01, -0.02}), books({0, 0}, {0, -1}, policy::kRhoEps)) ==
          doctest::Approx(0.02).epsilon(1e-9));
    // rho 0.6 split across one long and one short leg
    CHECK(rl::reward_r1(vec({0.01, -0.02}), books({0.6, 0}, {0, -0.4}, 0.6)) ==
          doctest::Approx(0.014).epsilon(1e-12));
    CHECK_THROWS_AS(rl::reward_r1(vec({0.01}), books({1, 0}, {0, 0}, 1.0)),
                    ShapeMismatch);
}

TEST_CASE("r2 hand arithmetic") {
    CHECK(rl::reward_r2(vec({0.02, -0.02}), vec({0.5, 0.5})) ==
          doctest::Approx(0.0).epsilon(1e-15));
    CHECK(rl::reward_r2(vec({0.03, -0.5}), vec({1.0, 0.0})) ==
          doctest::Approx(0.03).epsilon(1e-15));
    CHECK(rl::reward_r2(vec({0.01, -0.02}), vec({0.8, 0.2})) ==
          doctest::Approx(0.004).epsilon(1e-12));
    CHECK_THROWS_AS(rl::reward_r2(vec({0.01}), vec({0.5, 0.5})), ShapeMismatch);
}

TEST_CASE("objective arithmetic and linearity in r2") {
    RLConfig cfg;
    CHECK(rl::objective_value(1.0 - policy::kRhoEps, 0.01, 0.0, cfg) ==
          doctest::Approx(-5.0e-8).epsilon(1e-2));
    CHECK(rl::objective_value(0.5, 0.0, 0.0, cfg) == 0.0);
    double base = rl::objective_value(0.3, 0.02, 0.005, cfg);
    double doubled = rl::objective_value(0.3, 0.02, 0.01, cfg);
    CHECK(doubled - base == doctest::Approx(cfg.beta * 0.005).epsilon(1e-12));
}

TEST_CASE("r1 decomposes bilinearly over the books") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(0.05, 0.95);
    for (int trial = 0; trial < 30; ++trial) {
        int n = 5;
        Vec v(n), delta(n);
        for (int i = 0; i < n; ++i) {
            v(i) = unif(rng);
            delta(i) = 0.05 * (unif(rng) - 0.5);
        }
        auto [l, s] = policy::select_positions(v, policy::SelectionConfig(2, 2, n));
        auto w = policy::position_weights(v, l, s);
        double rho = unif(rng);
        auto p = policy::assemble_portfolio(rho, w);
        double direct = rl::reward_r1(delta, p);
        double long_leg = (delta.array() * w.long_weights.array()).sum();
        double short_leg = (delta.array() * w.short_weights.array()).sum();
        CHECK(direct == doctest::Approx(rho * long_leg + (1 - rho) * short_leg)
                            .epsilon(1e-12));
    }
}

TEST_CASE("aligned books make r1 positive") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        int n = 6;
        Vec v(n), delta(n);
        for (int i = 0; i < n; ++i) v(i) = unif(rng);
        auto [l, s] = policy::select_positions(v, policy::SelectionConfig(2, 2, n));
        auto w = policy::position_weights(v, l, s);
        for (int i = 0; i < n; ++i) delta(i) = 0.0;
        for (int i : l) delta(i) = 0.01 + 0.02 * unif(rng);   // longs rise
        for (int i : s) delta(i) = -0.01 - 0.02 * unif(rng);  // shorts fall
        auto p = policy::assemble_portfolio(0.25 + 0.5 * unif(rng), w);
        CHECK(rl::reward_r1(delta, p) > 0.0);
    }
}

TEST_CASE("step graph values agree with the plain reward path") {
    auto comps = lora_components(3, 6, 2, 17);
    std::mt19937_64 rng(7);
    Eigen::MatrixXd window =
        (oracles::random_mat(rng, 3, 6, 2.0).array() + 80.0).matrix();
    Vec delta = vec({0.01, -0.004, 0.002});
    RLConfig cfg;
    auto g = rl::build_step_graph(comps, window, delta, policy::RhoMode::Test, 0.0, cfg);

    auto d = rl::decide(comps, window, policy::RhoMode::Test, 0.0, "2020-01-02");
    CHECK(g.rho.item() == doctest::Approx(d.score.rho).epsilon(1e-12));
    CHECK(g.r1.item() ==
          doctest::Approx(rl::reward_r1(delta, d.portfolio)).epsilon(1e-10));
    CHECK(g.r2.item() == doctest::Approx(rl::reward_r2(delta, d.v)).epsilon(1e-10));
    CHECK(g.objective.item() ==
          doctest::Approx(rl::objective_value(d.score.rho, g.r1.item(), g.r2.item(), cfg))
              .epsilon(1e-10));
}

TEST_CASE("objective gradient w.r.t. the msm head matches finite differences") {
    auto comps = lora_components(3, 6, 2, 23);
    std::mt19937_64 rng(11);
    Eigen::MatrixXd window =
        (oracles::random_mat(rng, 3, 6, 2.0).array() + 80.0).matrix();
    Vec delta = vec({0.012, -0.007, 0.003});
    RLConfig cfg;
    double noise = 0.41;

    std::vector<std::pair<std::string, ad::Value>> head_params = {
        {"w_mu", comps.msm.w_mu},
        {"b_mu", comps.msm.b_mu},
        {"w_sigma", comps.msm.w_sigma},
        {"b_sigma", comps.msm.b_sigma}};
    auto graph = [&]() {
        return rl::build_step_graph(comps, window, delta, policy::RhoMode::Train, noise,
                                    cfg)
            .objective;
    };
    auto res = oracles::gradcheck(head_params, [&]() { return graph().item(); }, graph);
    INFO("worst " << res.worst_param << " analytic " << res.worst_analytic
                  << " numeric " << res.worst_numeric);
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("objective gradient reaches scorer and adapter factors") {
    auto comps = lora_components(4, 6, 2, 29);
    std::mt19937_64 rng(13);
    Eigen::MatrixXd window =
        (oracles::random_mat(rng, 4, 6, 2.0).array() + 90.0).matrix();
    Vec delta = vec({0.012, -0.007, 0.003, 0.001});
    RLConfig cfg;
    auto g = rl::build_step_graph(comps, window, delta, policy::RhoMode::Train, 0.2, cfg);
    ad::backward(g.objective);
    double scorer_grad = 0.0;
    for (const auto& v : comps.scorer.param_values())
        if (v.has_grad()) scorer_grad += v.grad().cwiseAbs().sum();
    CHECK(scorer_grad > 0.0);
    double adapter_grad = 0.0;
    for (const auto& [name, a] : comps.forecaster->adapters)
        if (a.down.has_grad()) adapter_grad += a.down.grad().cwiseAbs().sum();
    // up factors start at zero, so r1's path into down factors runs through
    // up's gradient first
    double up_grad = 0.0;
    for (const auto& [name, a] : comps.forecaster->adapters)
        if (a.up.has_grad()) up_grad += a.up.grad().cwiseAbs().sum();
    CHECK(up_grad > 0.0);
}

TEST_CASE("r2 has no path into the forecaster") {
    auto comps = lora_components(3, 6, 2, 31);
    std::mt19937_64 rng(17);
    Eigen::MatrixXd window =
        (oracles::random_mat(rng, 3, 6, 2.0).array() + 90.0).matrix();
    Vec delta = vec({0.01, -0.01, 0.002});
    RLConfig cfg;
    auto g = rl::build_step_graph(comps, window, delta, policy::RhoMode::Train, 0.1, cfg);
    ad::backward(g.r2);
    for (const auto& [name, a] : comps.forecaster->adapters) {
        CHECK(!a.up.has_grad());
        CHECK(!a.down.has_grad());
    }
    CHECK(!comps.msm.w_mu.has_grad());
}

TEST_CASE("finetune on a rising market pushes test-mode rho high") {
    auto series = trending_series(3, 200, 0.003, 0.006, 43);
    auto returns = data::rate_of_return(series);
    CHECK(returns.minCoeff() > 0.0);  // uniformly rising fixture

    auto comps = lora_components(3, 5, 2, 47);
    RLConfig cfg;
    cfg.epochs = 40;
    cfg.lr = 0.02;
    cfg.seed = 3;
    auto report = rl::finetune(comps, series, cfg);
    double rho_bar = rl::mean_test_rho(comps, series);
    INFO("mean test rho " << rho_bar);
    CHECK(rho_bar > 0.8);
    CHECK(report.base_hash_before == report.base_hash_after);
}

TEST_CASE("finetune on a falling market pushes test-mode rho low") {
    auto series = trending_series(3, 200, -0.006, -0.003, 53);
    auto returns = data::rate_of_return(series);
    CHECK(returns.maxCoeff() < 0.0);

    auto comps = lora_components(3, 5, 2, 59);
    RLConfig cfg;
    cfg.epochs = 40;
    cfg.lr = 0.02;
    cfg.seed = 3;
    rl::finetune(comps, series, cfg);
    double rho_bar = rl::mean_test_rho(comps, series);
    INFO("mean test rho " << rho_bar);
    CHECK(rho_bar < 0.2);
}

TEST_CASE("removed mode trains without any forecaster") {
    auto series = trending_series(3, 80, 0.001, 0.004, 61);
    auto comps = rl::make_components(rl::ForecastMode::Removed, std::nullopt, 3, 5, 2,
                                     policy::SelectionConfig(1, 1, 3), 8, 67);
    RLConfig cfg;
    cfg.epochs = 3;
    auto report = rl::finetune(comps, series, cfg);
    CHECK(report.epoch_mean_objective.size() == 3);
    CHECK(report.base_hash_before.empty());
    CHECK(std::isfinite(report.epoch_mean_objective.back()));
}

TEST_CASE("episode logs cover every epoch and day") {
    auto series = trending_series(2, 40, 0.001, 0.002, 71);
    auto comps = rl::make_components(rl::ForecastMode::Removed, std::nullopt, 2, 5, 2,
                                     policy::SelectionConfig(1, 1, 2), 8, 73);
    RLConfig cfg;
    cfg.epochs = 2;
    auto report = rl::finetune(comps, series, cfg);
    CHECK(report.logs.size() == static_cast<size_t>(2 * (40 - 5)));
    for (const auto& e : report.logs) {
        CHECK(e.rho >= policy::kRhoEps);
        CHECK(e.rho <= 1.0 - policy::kRhoEps);
        CHECK(std::isfinite(e.objective));
    }
    CHECK(report.logs.front().date == series.dates[5]);
}

TEST_CASE("finetune rejects too-short series and bad configs") {
    auto series = trending_series(2, 6, 0.001, 0.002, 79);
    auto comps = rl::make_components(rl::ForecastMode::Removed, std::nullopt, 2, 5, 2,
                                     policy::SelectionConfig(1, 1, 2), 8, 83);
    RLConfig cfg;
    CHECK_THROWS_AS(rl::finetune(comps, series, cfg), EpisodeTooShort);
    RLConfig bad;
    bad.alpha = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("same seed reproduces the same episode logs") {
    auto series = trending_series(3, 60, -0.002, 0.004, 89);
    auto run = [&]() {
        auto comps = lora_components(3, 5, 2, 97);
        RLConfig cfg;
        cfg.epochs = 2;
        cfg.seed = 7;
        auto report = rl::finetune(comps, series, cfg);
        std::vector<double> flat;
        for (const auto& e : report.logs) {
            flat.push_back(e.rho);
            flat.push_back(e.objective);
        }
        return flat;
    };
    CHECK(run() == run());
}
