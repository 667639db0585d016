#include "portcast/config.hpp"

#include <fstream>
#include <set>

#include "portcast/hashing.hpp"

namespace portcast::cli {

namespace {

void reject_unknown(const json& j, const std::string& path,
                    const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError(path + " must be an object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key))
            throw ConfigError("unknown config key " + path + "." + key);
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const std::exception&) {
        throw ConfigError("config field '" + key + "' has the wrong type");
    }
}

data::DateRange parse_range(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2)
        throw ConfigError(path + " must be [start, end]");
    try {
        return data::DateRange(j.at(0).get<std::string>(), j.at(1).get<std::string>());
    } catch (const DataError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
    reject_unknown(j, "config",
                   {"seed", "data", "forecaster", "lora", "policy", "rl", "backtest"});
    ExperimentConfig cfg;
    cfg.seed = get_or<unsigned long long>(j, "seed", cfg.seed);

    if (j.contains("data")) {
        const json& d = j.at("data");
        reject_unknown(d, "data",
                       {"source", "csv_path", "csv_format", "universe", "synthetic",
                        "split"});
        auto& out = cfg.data;
        out.source = get_or<std::string>(d, "source", out.source);
        if (out.source != "synthetic" && out.source != "csv")
            throw ConfigError("data.source must be 'synthetic' or 'csv'");
        out.csv_path = get_or<std::string>(d, "csv_path", out.csv_path);
        std::string fmt = get_or<std::string>(d, "csv_format", "wide");
        if (fmt == "wide")
            out.csv_format = data::CsvFormat::Wide;
        else if (fmt == "long")
            out.csv_format = data::CsvFormat::Long;
        else
            throw ConfigError("data.csv_format must be 'wide' or 'long'");
        out.universe = get_or<std::vector<std::string>>(d, "universe", {});
        if (out.source == "csv" && out.csv_path.empty())
            throw ConfigError("data.csv_path is required when data.source is 'csv'");
        if (d.contains("synthetic")) {
            const json& s = d.at("synthetic");
            reject_unknown(s, "data.synthetic",
                           {"n", "T", "trend_slopes", "seasonal_amplitudes",
                            "seasonal_periods", "noise_scale", "base_log_price",
                            "start_date", "seed"});
            out.synth.n = get_or<int>(s, "n", out.synth.n);
            out.synth.T = get_or<int>(s, "T", out.synth.T);
            out.synth.trend_slopes =
                get_or<std::vector<double>>(s, "trend_slopes", {});
            out.synth.seasonal_amplitudes =
                get_or<std::vector<double>>(s, "seasonal_amplitudes", {});
            out.synth.seasonal_periods =
                get_or<std::vector<double>>(s, "seasonal_periods", {});
            out.synth.noise_scale = get_or<double>(s, "noise_scale", 0.0);
            out.synth.base_log_price =
                get_or<double>(s, "base_log_price", out.synth.base_log_price);
            out.synth.start_date = get_or<std::string>(s, "start_date", out.synth.start_date);
            out.synth_seed = get_or<unsigned long long>(s, "seed", out.synth_seed);
        }
        if (d.contains("split")) {
            const json& s = d.at("split");
            reject_unknown(s, "data.split", {"train", "dev", "test"});
            if (!s.contains("train") || !s.contains("dev") || !s.contains("test"))
                throw ConfigError("data.split needs train, dev and test ranges");
            try {
                out.split = data::DataSplit(parse_range(s.at("train"), "data.split.train"),
                                            parse_range(s.at("dev"), "data.split.dev"),
                                            parse_range(s.at("test"), "data.split.test"));
            } catch (const DataError& e) {
                throw ConfigError(std::string("data.split: ") + e.what());
            }
            out.has_split = true;
        }
    }

    if (j.contains("forecaster")) {
        const json& f = j.at("forecaster");
        reject_unknown(f, "forecaster",
                       {"w", "h", "d_model", "ff_dim", "mode_count", "decomp_kernel",
                        "vanilla_d_model", "vanilla_ff_dim", "stride", "models", "train"});
        auto& out = cfg.forecaster;
        out.w = get_or<int>(f, "w", out.w);
        out.h = get_or<int>(f, "h", out.h);
        out.d_model = get_or<int>(f, "d_model", out.d_model);
        out.ff_dim = get_or<int>(f, "ff_dim", out.ff_dim);
        out.mode_count = get_or<int>(f, "mode_count", out.mode_count);
        out.decomp_kernel = get_or<int>(f, "decomp_kernel", out.decomp_kernel);
        out.vanilla_d_model = get_or<int>(f, "vanilla_d_model", 0);
        out.vanilla_ff_dim = get_or<int>(f, "vanilla_ff_dim", 0);
        out.stride = get_or<int>(f, "stride", out.stride);
        out.models = get_or<std::vector<std::string>>(f, "models", out.models);
        for (const auto& m : out.models)
            if (m != "frequency" && m != "vanilla")
                throw ConfigError("forecaster.models entries must be 'frequency' or 'vanilla'");
        if (f.contains("train")) {
            const json& t = f.at("train");
            reject_unknown(t, "forecaster.train",
                           {"epochs", "batch_size", "learning_rate", "clip_norm",
                            "patience"});
            out.train.epochs = get_or<int>(t, "epochs", out.train.epochs);
            out.train.batch_size = get_or<int>(t, "batch_size", out.train.batch_size);
            out.train.learning_rate =
                get_or<double>(t, "learning_rate", out.train.learning_rate);
            out.train.clip_norm = get_or<double>(t, "clip_norm", out.train.clip_norm);
            out.train.patience = get_or<int>(t, "patience", out.train.patience);
        }
    }

    if (j.contains("lora")) {
        const json& l = j.at("lora");
        reject_unknown(l, "lora", {"plan", "rank", "alpha"});
        cfg.lora.plan = get_or<std::string>(l, "plan", cfg.lora.plan);
        cfg.lora.rank = get_or<int>(l, "rank", cfg.lora.rank);
        cfg.lora.alpha = get_or<double>(l, "alpha", cfg.lora.alpha);
        lora::InjectionPlan::parse(cfg.lora.plan);  // validates the name
        if (cfg.lora.rank < 1) throw ConfigError("lora.rank must be >= 1");
    }

    if (j.contains("policy")) {
        const json& p = j.at("policy");
        reject_unknown(p, "policy", {"n_long", "n_short", "channels"});
        cfg.policy.n_long = get_or<int>(p, "n_long", 0);
        cfg.policy.n_short = get_or<int>(p, "n_short", 0);
        cfg.policy.channels = get_or<int>(p, "channels", cfg.policy.channels);
    }

    if (j.contains("rl")) {
        const json& r = j.at("rl");
        reject_unknown(r, "rl",
                       {"alpha", "beta", "epochs", "episode_length", "batch_days",
                        "learning_rate", "mode"});
        cfg.rl.alpha = get_or<double>(r, "alpha", cfg.rl.alpha);
        cfg.rl.beta = get_or<double>(r, "beta", cfg.rl.beta);
        cfg.rl.epochs = get_or<int>(r, "epochs", cfg.rl.epochs);
        cfg.rl.episode_length = get_or<int>(r, "episode_length", 0);
        cfg.rl.batch_days = get_or<int>(r, "batch_days", cfg.rl.batch_days);
        cfg.rl.learning_rate = get_or<double>(r, "learning_rate", cfg.rl.learning_rate);
        cfg.rl.mode = get_or<std::string>(r, "mode", cfg.rl.mode);
        rl::parse_forecast_mode(cfg.rl.mode);
    }

    if (j.contains("backtest")) {
        const json& b = j.at("backtest");
        reject_unknown(b, "backtest", {"warmup", "lookback", "baselines"});
        cfg.backtest.warmup = get_or<int>(b, "warmup", 0);
        cfg.backtest.lookback = get_or<int>(b, "lookback", cfg.backtest.lookback);
        cfg.backtest.baselines =
            get_or<std::vector<std::string>>(b, "baselines", cfg.backtest.baselines);
        for (const auto& s : cfg.backtest.baselines)
            if (s != "csm" && s != "blsw" && s != "benchmark")
                throw ConfigError("backtest.baselines entries must be csm/blsw/benchmark");
    }
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("config parse failure in " + path + ": " + e.what());
    }
    return parse_config(j);
}

json config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    json d;
    d["source"] = cfg.data.source;
    if (!cfg.data.csv_path.empty()) d["csv_path"] = cfg.data.csv_path;
    d["csv_format"] = cfg.data.csv_format == data::CsvFormat::Wide ? "wide" : "long";
    if (!cfg.data.universe.empty()) d["universe"] = cfg.data.universe;
    d["synthetic"] = {{"n", cfg.data.synth.n},
                      {"T", cfg.data.synth.T},
                      {"trend_slopes", cfg.data.synth.trend_slopes},
                      {"seasonal_amplitudes", cfg.data.synth.seasonal_amplitudes},
                      {"seasonal_periods", cfg.data.synth.seasonal_periods},
                      {"noise_scale", cfg.data.synth.noise_scale},
                      {"base_log_price", cfg.data.synth.base_log_price},
                      {"start_date", cfg.data.synth.start_date},
                      {"seed", cfg.data.synth_seed}};
    if (cfg.data.has_split)
        d["split"] = {{"train", {cfg.data.split.train.start, cfg.data.split.train.end}},
                      {"dev", {cfg.data.split.dev.start, cfg.data.split.dev.end}},
                      {"test", {cfg.data.split.test.start, cfg.data.split.test.end}}};
    j["data"] = std::move(d);
    j["forecaster"] = {{"w", cfg.forecaster.w},
                       {"h", cfg.forecaster.h},
                       {"d_model", cfg.forecaster.d_model},
                       {"ff_dim", cfg.forecaster.ff_dim},
                       {"mode_count", cfg.forecaster.mode_count},
                       {"decomp_kernel", cfg.forecaster.decomp_kernel},
                       {"vanilla_d_model", cfg.forecaster.vanilla_d_model},
                       {"vanilla_ff_dim", cfg.forecaster.vanilla_ff_dim},
                       {"stride", cfg.forecaster.stride},
                       {"models", cfg.forecaster.models},
                       {"train",
                        {{"epochs", cfg.forecaster.train.epochs},
                         {"batch_size", cfg.forecaster.train.batch_size},
                         {"learning_rate", cfg.forecaster.train.learning_rate},
                         {"clip_norm", cfg.forecaster.train.clip_norm},
                         {"patience", cfg.forecaster.train.patience}}}};
    j["lora"] = {{"plan", cfg.lora.plan}, {"rank", cfg.lora.rank}, {"alpha", cfg.lora.alpha}};
    j["policy"] = {{"n_long", cfg.policy.n_long},
                   {"n_short", cfg.policy.n_short},
                   {"channels", cfg.policy.channels}};
    j["rl"] = {{"alpha", cfg.rl.alpha},
               {"beta", cfg.rl.beta},
               {"epochs", cfg.rl.epochs},
               {"episode_length", cfg.rl.episode_length},
               {"batch_days", cfg.rl.batch_days},
               {"learning_rate", cfg.rl.learning_rate},
               {"mode", cfg.rl.mode}};
    j["backtest"] = {{"warmup", cfg.backtest.warmup},
                     {"lookback", cfg.backtest.lookback},
                     {"baselines", cfg.backtest.baselines}};
    return j;
}

model::ModelConfig ExperimentConfig::model_config(int n, bool vanilla) const {
    model::ModelConfig m;
    m.n = n;
    m.w = forecaster.w;
    m.h = forecaster.h;
    m.d_model = vanilla && forecaster.vanilla_d_model > 0 ? forecaster.vanilla_d_model
                                                          : forecaster.d_model;
    m.ff_dim = vanilla && forecaster.vanilla_ff_dim > 0 ? forecaster.vanilla_ff_dim
                                                        : forecaster.ff_dim;
    m.mode_count = forecaster.mode_count;
    m.decomp_kernel = forecaster.decomp_kernel;
    return m;
}

policy::SelectionConfig ExperimentConfig::selection(int n) const {
    if (policy.n_long == 0 && policy.n_short == 0)
        return policy::SelectionConfig::defaults(n);
    int nl = policy.n_long == 0 ? 1 : policy.n_long;
    int ns = policy.n_short == 0 ? 1 : policy.n_short;
    return policy::SelectionConfig(nl, ns, n);
}

int ExperimentConfig::effective_warmup() const {
    if (backtest.warmup > 0) return backtest.warmup;
    return std::max(forecaster.w, backtest.lookback + 1);
}

data::PriceSeries load_series(const ExperimentConfig& cfg) {
    data::PriceSeries series;
    if (cfg.data.source == "synthetic") {
        series = data::synth_market(cfg.data.synth, cfg.data.synth_seed);
    } else {
        series = data::load_prices(cfg.data.csv_path, cfg.data.csv_format);
    }
    if (!cfg.data.universe.empty()) {
        std::vector<int> rows;
        for (const auto& id : cfg.data.universe) {
            auto it = std::find(series.universe.asset_ids.begin(),
                                series.universe.asset_ids.end(), id);
            if (it == series.universe.asset_ids.end())
                throw DataError("configured universe asset not in data: " + id);
            rows.push_back(static_cast<int>(it - series.universe.asset_ids.begin()));
        }
        Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), series.t());
        for (size_t k = 0; k < rows.size(); ++k) sub.row(static_cast<Eigen::Index>(k)) = series.prices.row(rows[k]);
        series = data::PriceSeries(data::AssetUniverse(cfg.data.universe), series.dates,
                                   std::move(sub));
    }
    return series;
}

std::string data_fingerprint(const ExperimentConfig& cfg) {
    if (cfg.data.source == "csv") return run::file_hash(cfg.data.csv_path);
    json synth = config_to_json(cfg).at("data").at("synthetic");
    return run::fnv1a_hex(synth.dump());
}

}  // namespace portcast::cli
