#pragma once

#include <optional>
#include <string>
#include <vector>

#include "portcast/backtest.hpp"
#include "portcast/lora.hpp"
#include "portcast/market_data.hpp"
#include "portcast/policy.hpp"

namespace portcast::rl {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct RLConfig {
    double alpha = 0.05;
    double beta = 1.0;
    int epochs = 20;
    int episode_length = 0;  // days; 0 = the whole training period
    int batch_days = 32;
    double lr = 0.01;
    double clip_norm = 1.0;
    unsigned long long seed = 7;

    void validate() const;
};

// how the forecasting module participates in fine-tuning
enum class ForecastMode { LoRA, Removed, Frozen, Finetuning };
ForecastMode parse_forecast_mode(const std::string& name);
std::string forecast_mode_name(ForecastMode mode);

struct StepOutcome {
    std::string date;
    Vec delta;
    policy::PortfolioVector portfolio;
    double r1 = 0.0;
    double r2 = 0.0;
};

double reward_r1(const Vec& delta, const policy::PortfolioVector& portfolio);
double reward_r2(const Vec& delta, const Vec& v);
// per-step value alpha * log(rho) * r1 + beta * r2
double objective_value(double rho, double r1, double r2, const RLConfig& cfg);

// the full daily decision stack wired for one window size w
struct PolicyComponents {
    policy::Scorer scorer;
    std::optional<lora::AdaptedForecaster> forecaster;  // absent in Removed mode
    policy::MsmHead msm;
    ForecastMode mode = ForecastMode::LoRA;
    policy::SelectionConfig selection;
    int w = 5;

    std::vector<ad::Value> trainable_values() const;
    long trainable_count() const;
};

// scorer and head shapes derived from the mode and forecaster config
PolicyComponents make_components(ForecastMode mode,
                                 std::optional<lora::AdaptedForecaster> forecaster,
                                 int n, int w, int h,
                                 const policy::SelectionConfig& selection,
                                 int scorer_channels, unsigned long long seed);

struct StepGraph {
    ad::Value v;          // n x 1
    ad::Value rho;        // 1 x 1
    ad::Value r1, r2;     // 1 x 1
    ad::Value objective;  // literal alpha*log(rho)*r1 + beta*r2
    ad::Value surrogate;  // ascent target: alpha*r1 + beta*r2
    policy::PositionWeights weights;
};

StepGraph build_step_graph(const PolicyComponents& comps, const Mat& window,
                           const Vec& delta, policy::RhoMode mode, double noise,
                           const RLConfig& cfg);

struct Decision {
    Vec v;
    policy::PositionWeights weights;
    policy::MarketScore score;
    policy::PortfolioVector portfolio;
};

Decision decide(const PolicyComponents& comps, const Mat& window, policy::RhoMode mode,
                double noise, const std::string& date);

struct EpisodeLogEntry {
    int epoch = 0;
    std::string date;
    double rho, r1, r2, objective;
};

struct FinetuneReport {
    std::vector<EpisodeLogEntry> logs;          // every epoch, every day
    std::vector<double> epoch_mean_objective;   // literal objective, logged
    std::vector<double> epoch_mean_reward;      // surrogate actually ascended
    std::string base_hash_before, base_hash_after;
    long trainable_count = 0;
};

// Gradient ascent over scorer + msm head + (adapters | base per mode) on the
// reparameterized reward; the literal objective is evaluated and logged.
FinetuneReport finetune(PolicyComponents& comps, const data::PriceSeries& train,
                        const RLConfig& cfg);

// mean of the deterministic (test-mode) rho over all decidable days
double mean_test_rho(const PolicyComponents& comps, const data::PriceSeries& series);

// daily-rebalancing strategy view of the trained components (test mode)
bt::Strategy policy_strategy(const PolicyComponents& comps);

}  // namespace portcast::rl
