#include "portcast/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace portcast::train {

using ad::Value;
using model::Mat;

void TrainConfig::validate() const {
    if (epochs < 1 || batch_size < 1 || patience < 1)
        throw ConfigError("train config: counts must be >= 1");
    if (learning_rate <= 0) throw ConfigError("train config: learning rate must be > 0");
}

namespace {

Mat normalized_target(const data::WindowSample& s, const model::NormStats& stats) {
    Mat out = s.target;
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        out.row(i) = (out.row(i).array() - stats.mean(i)) / stats.scale(i);
    return out;
}

Value sample_loss(const model::Forecaster& m, const data::WindowSample& s) {
    auto g = model::forward_graph(m, s.window, model::plain_resolver());
    Mat target = normalized_target(s, g.stats);
    Value diff = ad::sub(g.pred_norm, Value::constant(target));
    return ad::mean(ad::mul(diff, diff));
}

}  // namespace

PretrainResult pretrain(model::Forecaster& model,
                        const std::vector<data::WindowSample>& train_samples,
                        const std::vector<data::WindowSample>& dev_samples,
                        const TrainConfig& cfg) {
    cfg.validate();
    if (train_samples.empty() || dev_samples.empty())
        throw DataError("pretrain needs at least one train and one dev sample");
    for (const auto& s : train_samples)
        if (s.window.rows() != model.cfg.n || s.window.cols() != model.cfg.w ||
            s.target.cols() != model.cfg.h)
            throw ShapeMismatch("pretrain: sample shapes disagree with the model config");

    auto params = model.param_values();
    ad::Adam opt(params, cfg.learning_rate, cfg.clip_norm);
    std::mt19937_64 rng(cfg.seed);

    std::vector<size_t> order(train_samples.size());
    std::iota(order.begin(), order.end(), 0);

    PretrainResult result;
    std::vector<Mat> best_params;
    double best_mae = std::numeric_limits<double>::infinity();
    int since_best = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_mse = 0.0;
        size_t pos = 0;
        while (pos < order.size()) {
            size_t batch = std::min<size_t>(cfg.batch_size, order.size() - pos);
            opt.zero_grad();
            Value batch_loss = Value::scalar(0.0);
            for (size_t k = 0; k < batch; ++k)
                batch_loss = ad::add(batch_loss, sample_loss(model, train_samples[order[pos + k]]));
            batch_loss = ad::cmul(1.0 / static_cast<double>(batch), batch_loss);
            double loss_now = batch_loss.item();
            if (!std::isfinite(loss_now))
                throw DivergedLoss("non-finite pretraining loss at epoch " +
                                   std::to_string(epoch));
            epoch_mse += loss_now * static_cast<double>(batch);
            ad::backward(batch_loss);
            opt.step();
            pos += batch;
        }
        epoch_mse /= static_cast<double>(order.size());

        double dev_mae = evaluate_forecasts(model, dev_samples).mae;
        result.curve.push_back({epoch, epoch_mse, dev_mae});
        if (dev_mae < best_mae) {
            best_mae = dev_mae;
            result.best_epoch = epoch;
            since_best = 0;
            best_params.clear();
            for (const auto& p : params) best_params.push_back(p.val());
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }

    for (size_t i = 0; i < params.size(); ++i) params[i].raw() = best_params[i];
    result.best_dev_mae = best_mae;
    for (const auto& p : params)
        if (!p.val().allFinite())
            throw DivergedLoss("pretrain produced non-finite parameters");
    return result;
}

ForecastErrorReport evaluate_forecasts(const model::Forecaster& model,
                                       const std::vector<data::WindowSample>& samples) {
    if (samples.empty()) throw DataError("evaluate_forecasts needs samples");
    double abs_sum = 0.0, sq_sum = 0.0, ape_sum = 0.0;
    long count = 0;
    for (const auto& s : samples) {
        Mat pred = model::forward(model, s.window).values;
        for (Eigen::Index i = 0; i < pred.rows(); ++i)
            for (Eigen::Index j = 0; j < pred.cols(); ++j) {
                double target = s.target(i, j);
                if (target == 0.0) throw ZeroTarget("zero target makes MAPE undefined");
                double err = pred(i, j) - target;
                abs_sum += std::abs(err);
                sq_sum += err * err;
                ape_sum += std::abs(err) / std::abs(target);
                ++count;
            }
    }
    ForecastErrorReport r;
    r.mae = abs_sum / count;
    r.rmse = std::sqrt(sq_sum / count);
    r.mape = ape_sum / count;
    return r;
}

}  // namespace portcast::train
