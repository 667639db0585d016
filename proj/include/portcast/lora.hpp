#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "portcast/forecaster.hpp"

namespace portcast::lora {

using Mat = Eigen::MatrixXd;

struct LoRAAdapter {
    ad::Value down;  // rank x d_in, small random init
    ad::Value up;    // d_out x rank, zero init
    int rank = 0;
    double alpha = 0.0;
    double scale = 0.0;  // alpha / rank
};

enum class Target { Encoders, Decoder, FrequencyAttention, All };
enum class MatrixKind { Frequency, FeedForward, Attention };

struct InjectionPlan {
    Target target = Target::Encoders;
    std::set<MatrixKind> kinds = {MatrixKind::Frequency, MatrixKind::FeedForward,
                                  MatrixKind::Attention};

    static InjectionPlan parse(const std::string& target_name);
    std::string target_name() const;
};

// which (target, kind) a named weight matrix belongs to; biases and the
// embedding/projection maps are never adapted
std::optional<std::pair<Target, MatrixKind>> classify_param(const std::string& name);

// A forecaster with frozen base weights and trainable low-rank factors
// attached to the matrices selected by the plan.
struct AdaptedForecaster {
    model::Forecaster base;
    std::map<std::string, LoRAAdapter> adapters;  // by parameter name
    InjectionPlan plan;
    int requested_rank = 0;
    bool base_trainable = false;                 // full-finetuning ablation
    std::vector<std::string> warnings;           // e.g. rank clamps
    std::vector<std::pair<std::string, ad::Value>> extra_trainables;

    model::WeightResolver resolver() const;
    void register_trainable(const std::string& name, const ad::Value& v);
    std::vector<ad::Value> trainable_values() const;
    std::vector<std::pair<std::string, long>> trainable_listing() const;
    long trainable_count() const;
    // copy of the base with adapter updates folded into the weights
    model::Forecaster merged() const;
};

AdaptedForecaster inject(model::Forecaster base, const InjectionPlan& plan, int rank,
                         double alpha, unsigned long long seed);

// ablation wrappers: no adapters, base respectively frozen or fully trainable
AdaptedForecaster wrap_frozen(model::Forecaster base);
AdaptedForecaster wrap_trainable(model::Forecaster base);

Mat effective_weight(const Mat& base, const LoRAAdapter& adapter);

void save_adapters(const AdaptedForecaster& m, const std::string& base_hash,
                   const std::string& path);
// attaches stored factors to `base`; refuses when the recorded base hash differs
AdaptedForecaster load_adapters(model::Forecaster base, const std::string& base_hash,
                                const std::string& path);

}  // namespace portcast::lora
