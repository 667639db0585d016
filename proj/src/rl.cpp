#include "portcast/rl.hpp"

#include <cmath>
#include <random>

namespace portcast::rl {

using ad::Value;

void RLConfig::validate() const {
    if (alpha <= 0 || beta <= 0) throw ConfigError("rl: alpha and beta must be > 0");
    if (epochs < 1 || batch_days < 1) throw ConfigError("rl: counts must be >= 1");
    if (episode_length < 0) throw ConfigError("rl: episode_length must be >= 0");
    if (lr <= 0) throw ConfigError("rl: learning rate must be > 0");
}

ForecastMode parse_forecast_mode(const std::string& name) {
    if (name == "lora") return ForecastMode::LoRA;
    if (name == "removed") return ForecastMode::Removed;
    if (name == "frozen") return ForecastMode::Frozen;
    if (name == "finetuning") return ForecastMode::Finetuning;
    throw ConfigError("unknown forecast mode: " + name);
}

std::string forecast_mode_name(ForecastMode mode) {
    switch (mode) {
        case ForecastMode::LoRA: return "lora";
        case ForecastMode::Removed: return "removed";
        case ForecastMode::Frozen: return "frozen";
        case ForecastMode::Finetuning: return "finetuning";
    }
    return "?";
}

double reward_r1(const Vec& delta, const policy::PortfolioVector& portfolio) {
    if (delta.size() != portfolio.long_alloc.size())
        throw ShapeMismatch("reward_r1: delta and portfolio lengths differ");
    return (delta.array() * (portfolio.long_alloc + portfolio.short_alloc).array()).sum();
}

double reward_r2(const Vec& delta, const Vec& v) {
    if (delta.size() != v.size())
        throw ShapeMismatch("reward_r2: delta and confidence lengths differ");
    return (delta.array() * v.array()).sum();
}

double objective_value(double rho, double r1, double r2, const RLConfig& cfg) {
    return cfg.alpha * std::log(rho) * r1 + cfg.beta * r2;
}

std::vector<Value> PolicyComponents::trainable_values() const {
    std::vector<Value> out = scorer.param_values();
    for (const auto& v : msm.param_values()) out.push_back(v);
    if (forecaster)
        for (const auto& v : forecaster->trainable_values()) out.push_back(v);
    return out;
}

long PolicyComponents::trainable_count() const {
    long c = 0;
    for (const auto& v : trainable_values()) c += static_cast<long>(v.val().size());
    return c;
}

PolicyComponents make_components(ForecastMode mode,
                                 std::optional<lora::AdaptedForecaster> forecaster,
                                 int n, int w, int h,
                                 const policy::SelectionConfig& selection,
                                 int scorer_channels, unsigned long long seed) {
    if (mode != ForecastMode::Removed) {
        if (!forecaster) throw ConfigError("this forecast mode needs a forecaster");
        if (forecaster->base.cfg.n != n || forecaster->base.cfg.w != w)
            throw CheckpointMismatch("forecaster shape disagrees with the universe/window");
    }
    PolicyComponents c;
    c.mode = mode;
    c.forecaster = std::move(forecaster);
    c.selection = selection;
    c.w = w;
    c.scorer = policy::make_scorer({n, w, scorer_channels}, seed);
    int head_cols = mode == ForecastMode::Removed ? w : h;
    c.msm = policy::make_msm_head(n, head_cols, seed + 1);
    return c;
}

namespace {

Value msm_input_graph(const PolicyComponents& comps, const Mat& window) {
    if (comps.mode == ForecastMode::Removed) {
        // z-scored raw window stands in for the missing forecast
        auto stats = model::window_stats(window);
        Mat normalized =
            (window.colwise() - stats.mean).array().colwise() / stats.scale.array();
        return Value::constant(std::move(normalized));
    }
    auto g = model::forward_graph(comps.forecaster->base, window,
                                  comps.forecaster->resolver());
    return g.pred_norm;
}

}  // namespace

StepGraph build_step_graph(const PolicyComponents& comps, const Mat& window,
                           const Vec& delta, policy::RhoMode mode, double noise,
                           const RLConfig& cfg) {
    int n = static_cast<int>(window.rows());
    if (delta.size() != n) throw ShapeMismatch("step graph: delta length != assets");

    StepGraph g;
    g.v = policy::asset_scores_graph(comps.scorer, window);
    Vec v_now = g.v.val().col(0);
    auto [long_set, short_set] = policy::select_positions(v_now, comps.selection);
    g.weights = policy::position_weights(v_now, long_set, short_set);

    Value long_scores = ad::gather_rows(g.v, long_set);
    Value long_w = ad::softmax_col(long_scores);
    Value short_scores = ad::gather_rows(
        ad::sub(Value::constant(Mat::Ones(n, 1)), g.v), short_set);
    Value short_w = ad::softmax_col(short_scores);

    Mat dl(static_cast<Eigen::Index>(long_set.size()), 1);
    for (size_t i = 0; i < long_set.size(); ++i) dl(static_cast<Eigen::Index>(i), 0) = delta(long_set[i]);
    Mat ds(static_cast<Eigen::Index>(short_set.size()), 1);
    for (size_t i = 0; i < short_set.size(); ++i) ds(static_cast<Eigen::Index>(i), 0) = delta(short_set[i]);

    auto ms = policy::market_score_graph(comps.msm, msm_input_graph(comps, window),
                                         mode, noise);
    g.rho = ms.rho;
    Value one_minus_rho = ad::sub(Value::scalar(1.0), g.rho);
    Value long_ret = ad::dot(Value::constant(dl), long_w);
    Value short_ret = ad::dot(Value::constant(ds), short_w);
    g.r1 = ad::sub(ad::mul(g.rho, long_ret), ad::mul(one_minus_rho, short_ret));

    Mat dfull(n, 1);
    for (int i = 0; i < n; ++i) dfull(i, 0) = delta(i);
    g.r2 = ad::dot(Value::constant(dfull), g.v);

    g.objective = ad::add(ad::cmul(cfg.alpha, ad::mul(ad::log_act(g.rho), g.r1)),
                          ad::cmul(cfg.beta, g.r2));
    g.surrogate = ad::add(ad::cmul(cfg.alpha, g.r1), ad::cmul(cfg.beta, g.r2));
    return g;
}

Decision decide(const PolicyComponents& comps, const Mat& window, policy::RhoMode mode,
                double noise, const std::string& date) {
    Decision d;
    d.v = policy::asset_scores(comps.scorer, window);
    auto [long_set, short_set] = policy::select_positions(d.v, comps.selection);
    d.weights = policy::position_weights(d.v, long_set, short_set);
    Value input = msm_input_graph(comps, window);
    auto ms = policy::market_score_graph(comps.msm, input, mode, noise);
    d.score = policy::MarketScore{ms.mu.item(), ms.sigma.item(), ms.rho.item()};
    d.portfolio = policy::assemble_portfolio(d.score.rho, d.weights, date);
    return d;
}

FinetuneReport finetune(PolicyComponents& comps, const data::PriceSeries& train,
                        const RLConfig& cfg) {
    cfg.validate();
    int T = train.t();
    int w = comps.w;
    int days = T - w;
    if (cfg.episode_length > 0) days = std::min(days, cfg.episode_length);
    if (days < 2) throw EpisodeTooShort("training period has fewer than 2 decidable days");

    FinetuneReport report;
    report.base_hash_before =
        comps.forecaster ? model::forecaster_hash(comps.forecaster->base) : "";
    auto trainables = comps.trainable_values();
    report.trainable_count = comps.trainable_count();
    ad::Adam opt(trainables, cfg.lr, cfg.clip_norm);

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss;
    Mat returns = data::rate_of_return(train);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_obj = 0.0, epoch_reward = 0.0;
        int batch_start = 0;
        while (batch_start < days) {
            int batch = std::min(cfg.batch_days, days - batch_start);
            opt.zero_grad();
            Value batch_sum = Value::scalar(0.0);
            for (int k = 0; k < batch; ++k) {
                int t = w + batch_start + k;
                Mat window = train.prices.middleCols(t - w, w);
                Vec delta = returns.col(t - 1);
                double noise = gauss(rng);
                StepGraph g = build_step_graph(comps, window, delta,
                                               policy::RhoMode::Train, noise, cfg);
                report.logs.push_back({epoch, train.dates[static_cast<size_t>(t)],
                                       g.rho.item(), g.r1.item(), g.r2.item(),
                                       g.objective.item()});
                epoch_obj += g.objective.item();
                epoch_reward += g.surrogate.item();
                batch_sum = ad::add(batch_sum, g.surrogate);
            }
            Value loss = ad::cmul(-1.0 / batch, batch_sum);
            if (!std::isfinite(loss.item()))
                throw DivergedLoss("non-finite reward at epoch " + std::to_string(epoch));
            ad::backward(loss);
            opt.step();
            batch_start += batch;
        }
        report.epoch_mean_objective.push_back(epoch_obj / days);
        report.epoch_mean_reward.push_back(epoch_reward / days);
        if (!std::isfinite(epoch_obj))
            throw DivergedLoss("non-finite objective at epoch " + std::to_string(epoch));
    }

    report.base_hash_after =
        comps.forecaster ? model::forecaster_hash(comps.forecaster->base) : "";
    return report;
}

double mean_test_rho(const PolicyComponents& comps, const data::PriceSeries& series) {
    int T = series.t();
    if (T <= comps.w) throw SeriesTooShort("series shorter than the decision window");
    double acc = 0.0;
    int count = 0;
    for (int t = comps.w; t < T; ++t) {
        Mat window = series.prices.middleCols(t - comps.w, comps.w);
        Value input = msm_input_graph(comps, window);
        auto ms = policy::market_score_graph(comps.msm, input, policy::RhoMode::Test, 0.0);
        acc += ms.rho.item();
        ++count;
    }
    return acc / count;
}

bt::Strategy policy_strategy(const PolicyComponents& comps) {
    const PolicyComponents* c = &comps;
    return [c](const bt::MarketView& view, const std::string& date) {
        Mat window = view.window(c->w);
        Decision d = decide(*c, window, policy::RhoMode::Test, 0.0, date);
        return d.portfolio;
    };
}

}  // namespace portcast::rl
