#pragma once

#include <vector>

#include "portcast/forecaster.hpp"
#include "portcast/market_data.hpp"

namespace portcast::train {

struct TrainConfig {
    int epochs = 50;
    int batch_size = 32;
    double learning_rate = 0.01;
    double clip_norm = 1.0;
    int patience = 10;  // epochs without dev MAE improvement before stopping
    unsigned long long seed = 7;

    void validate() const;
};

struct ForecastErrorReport {
    double mae = 0.0;
    double rmse = 0.0;
    double mape = 0.0;  // ratio, not percent
};

struct LossCurvePoint {
    int epoch = 0;
    double train_mse = 0.0;  // normalized scale
    double dev_mae = 0.0;    // price units
};

struct PretrainResult {
    std::vector<LossCurvePoint> curve;
    int best_epoch = -1;
    double best_dev_mae = 0.0;
};

// MSE regression of the normalized forecast against the normalized target;
// keeps the parameters from the epoch with the best dev MAE.
PretrainResult pretrain(model::Forecaster& model,
                        const std::vector<data::WindowSample>& train_samples,
                        const std::vector<data::WindowSample>& dev_samples,
                        const TrainConfig& cfg);

ForecastErrorReport evaluate_forecasts(const model::Forecaster& model,
                                       const std::vector<data::WindowSample>& samples);

}  // namespace portcast::train
