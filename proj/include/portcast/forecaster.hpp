#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "portcast/autodiff.hpp"
#include "portcast/seq_ops.hpp"

namespace portcast::model {

struct ModelConfig {
    int n = 0;          // assets (input/output channels)
    int w = 5;          // input window length
    int h = 5;          // forecast horizon
    int d_model = 32;
    int ff_dim = 64;
    int mode_count = 8;     // clamped per sequence length at use sites
    int decomp_kernel = 3;  // odd

    void validate() const;
    int dec_len() const { return w / 2 + h; }  // decoder sequence length
};

// Per-asset z-score over the input window; zero-variance rows fall back to
// unit scale so constant windows stay well-defined.
struct NormStats {
    Eigen::VectorXd mean;   // n
    Eigen::VectorXd scale;  // n
};
NormStats window_stats(const Mat& window);

struct Forecast {
    Mat values;  // n x h, price units
    std::string anchor_date;
};

// A parameterized window -> horizon forecaster. Two kinds share the embedding,
// normalization and projection scheme; they differ in the block internals:
//   Frequency: per-block truncated-DFT mixing + seasonal-trend decomposition,
//              decoder tied to the encoder through a frequency cross-attention.
//   Vanilla:   plain softmax self/cross attention, no decomposition.
struct Forecaster {
    enum class Kind { Frequency, Vanilla };

    Kind kind = Kind::Frequency;
    ModelConfig cfg;
    std::vector<std::pair<std::string, ad::Value>> params;  // ordered, named

    const ad::Value& param(const std::string& name) const;
    bool has_param(const std::string& name) const;
    std::vector<ad::Value> param_values() const;
    long param_count() const;
    void set_trainable(bool trainable);
    // bit-exact copy with fresh leaves (same trainability)
    Forecaster clone() const;

    int enc_modes() const { return std::min(cfg.mode_count, max_modes(cfg.w)); }
    int dec_modes() const { return std::min(cfg.mode_count, max_modes(cfg.dec_len())); }
    int fea_modes() const {
        return std::min({cfg.mode_count, max_modes(cfg.w), max_modes(cfg.dec_len())});
    }
};

Forecaster make_frequency_forecaster(const ModelConfig& cfg, unsigned long long seed);
Forecaster make_vanilla_forecaster(const ModelConfig& cfg, unsigned long long seed);

// Substitutes effective weights (e.g. low-rank-adapted) by parameter name.
using WeightResolver = std::function<ad::Value(const std::string&, const ad::Value&)>;
WeightResolver plain_resolver();

struct ForwardGraph {
    ad::Value pred_norm;  // n x h, normalized scale
    ad::Value prices;     // n x h, price units
    NormStats stats;
};

ForwardGraph forward_graph(const Forecaster& model, const Mat& window,
                           const WeightResolver& resolve);

Forecast forward(const Forecaster& model, const Mat& window,
                 const std::string& anchor_date = "");

// checkpoint container (versioned JSON)
void save_forecaster(const Forecaster& model, const std::vector<std::string>& asset_ids,
                     const std::string& path);
struct LoadedForecaster {
    Forecaster model;
    std::vector<std::string> asset_ids;
};
LoadedForecaster load_forecaster(const std::string& path);
std::string forecaster_hash(const Forecaster& model);

}  // namespace portcast::model
