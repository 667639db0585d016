#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "portcast/market_data.hpp"
#include "portcast/rl.hpp"
#include "portcast/training.hpp"

namespace portcast::cli {

using json = nlohmann::json;

// One config file drives the whole pipeline; every command reads its own
// section. Unknown keys are rejected so a config typo cannot silently fall
// back to a default. The field-by-field contract lives in docs/config.md.
struct ExperimentConfig {
    unsigned long long seed = 7;

    struct DataSection {
        std::string source = "synthetic";  // synthetic | csv
        std::string csv_path;
        data::CsvFormat csv_format = data::CsvFormat::Wide;
        std::vector<std::string> universe;  // optional csv subset, in order
        data::SynthSpec synth;
        unsigned long long synth_seed = 11;
        data::DataSplit split;
        bool has_split = false;
    } data;

    struct ForecasterSection {
        int w = 5, h = 5;
        int d_model = 32, ff_dim = 64, mode_count = 8, decomp_kernel = 3;
        int vanilla_d_model = 0, vanilla_ff_dim = 0;  // 0 = same as frequency model
        int stride = 1;
        std::vector<std::string> models = {"frequency", "vanilla"};
        train::TrainConfig train;
    } forecaster;

    struct LoraSection {
        std::string plan = "encoders";
        int rank = 4;
        double alpha = 8.0;
    } lora;

    struct PolicySection {
        int n_long = 0, n_short = 0;  // 0 = max(1, n/4)
        int channels = 16;
    } policy;

    struct RlSection {
        double alpha = 0.05;
        double beta = 1.0;
        int epochs = 20;
        int episode_length = 0;
        int batch_days = 32;
        double learning_rate = 0.01;
        std::string mode = "lora";  // lora | removed | frozen | finetuning
    } rl;

    struct BacktestSection {
        int warmup = 0;  // 0 = max(w, lookback + 1)
        int lookback = 20;
        std::vector<std::string> baselines = {"csm", "blsw", "benchmark"};
    } backtest;

    model::ModelConfig model_config(int n, bool vanilla) const;
    policy::SelectionConfig selection(int n) const;
    int effective_warmup() const;
};

ExperimentConfig parse_config(const json& j);
ExperimentConfig load_config_file(const std::string& path);
json config_to_json(const ExperimentConfig& cfg);  // canonical snapshot

// materializes the configured data source (synthetic or csv + universe filter)
data::PriceSeries load_series(const ExperimentConfig& cfg);
// content identity of the input data for manifests
std::string data_fingerprint(const ExperimentConfig& cfg);

}  // namespace portcast::cli
