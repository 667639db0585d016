#include "portcast/commands.hpp"

#include <chrono>
#include <fmt/core.h>
#include <fstream>

#include "CLI11.hpp"
#include "portcast/runstore.hpp"

namespace portcast::cli {

namespace fs = std::filesystem;

namespace {

std::string metric_cell(const std::optional<double>& v) {
    return v ? fmt::format("{:.6g}", *v) : "NA";
}

std::string metrics_row(const std::string& label, const bt::MetricsReport& m) {
    return fmt::format("{}\t{:.6g}\t{}\t{:.6g}\t{:.6g}\t{}\t{}", label, m.arr,
                       metric_cell(m.asr), m.avol, m.mdd, metric_cell(m.cr),
                       metric_cell(m.sor));
}

json metrics_json(const bt::MetricsReport& m) {
    json j;
    j["ARR"] = m.arr;
    j["AVol"] = m.avol;
    j["MDD"] = m.mdd;
    if (m.asr) j["ASR"] = *m.asr; else j["ASR"] = nullptr;
    if (m.cr) j["CR"] = *m.cr; else j["CR"] = nullptr;
    if (m.sor) j["SoR"] = *m.sor; else j["SoR"] = nullptr;
    return j;
}

bt::MetricsReport metrics_from_json(const json& j) {
    bt::MetricsReport m;
    m.arr = j.at("ARR").get<double>();
    m.avol = j.at("AVol").get<double>();
    m.mdd = j.at("MDD").get<double>();
    if (!j.at("ASR").is_null()) m.asr = j.at("ASR").get<double>();
    if (!j.at("CR").is_null()) m.cr = j.at("CR").get<double>();
    if (!j.at("SoR").is_null()) m.sor = j.at("SoR").get<double>();
    return m;
}

constexpr const char* kMetricsHeader = "strategy\tARR\tASR\tAVol\tMDD\tCR\tSoR";

// one command invocation: config, seed resolution, run dir, manifest
struct Session {
    ExperimentConfig cfg;
    json snapshot;
    unsigned long long seed;
    run::RunStore store;
    std::string run_id;
    fs::path dir;
    run::ManifestBuilder manifest;
    std::chrono::steady_clock::time_point started;

    Session(const CommandArgs& args, const std::string& command)
        : cfg(load_with_seed(args)),
          snapshot(config_to_json(cfg)),
          seed(cfg.seed),
          store(args.out_dir),
          run_id(args.run_id.empty() ? derive_run_id(command) : args.run_id),
          dir(store.create_run(run_id)),
          manifest(run_id, command, snapshot, seed),
          started(std::chrono::steady_clock::now()) {
        manifest.add_input("config_file", run::file_hash(args.config_path));
    }

    static ExperimentConfig load_with_seed(const CommandArgs& args) {
        ExperimentConfig c = load_config_file(args.config_path);
        if (args.seed) c.seed = *args.seed;
        return c;
    }

    std::string derive_run_id(const std::string& command) const {
        return command + "-" + run::fnv1a_hex(snapshot.dump()).substr(0, 8);
    }

    void finish() {
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                    started)
                          .count();
        manifest.write(dir, secs);
        fmt::print("run {} complete ({:.1f}s), artifacts in {}\n", run_id, secs,
                   dir.string());
    }
};

struct SplitSeries {
    data::PriceSeries train, dev, test;
};

SplitSeries load_split(const ExperimentConfig& cfg, const data::PriceSeries& series) {
    if (!cfg.data.has_split)
        throw ConfigError("this command needs data.split (train/dev/test date bounds)");
    auto [train, dev, test] = data::split_series(series, cfg.data.split);
    return {std::move(train), std::move(dev), std::move(test)};
}

void write_loss_curve(const fs::path& path, const train::PretrainResult& res) {
    std::ofstream out(path);
    for (const auto& p : res.curve) {
        json j = {{"epoch", p.epoch}, {"train_mse", p.train_mse}, {"dev_mae", p.dev_mae}};
        out << j.dump() << "\n";
    }
}

void write_episode_log(const fs::path& path, const rl::FinetuneReport& report) {
    std::ofstream out(path);
    for (const auto& e : report.logs) {
        json j = {{"epoch", e.epoch}, {"date", e.date},       {"rho", e.rho},
                  {"r1", e.r1},       {"r2", e.r2},           {"objective", e.objective}};
        out << j.dump() << "\n";
    }
}

void write_trajectory_csv(const fs::path& path, const bt::Trajectory& traj,
                          const std::vector<std::string>& asset_ids) {
    std::ofstream out(path);
    out << "date,r_p,equity,rho";
    for (const auto& id : asset_ids) out << ",long_" << id;
    for (const auto& id : asset_ids) out << ",short_" << id;
    out << "\n";
    for (size_t k = 0; k < traj.dates.size(); ++k) {
        out << traj.dates[k] << fmt::format(",{:.17g},{:.17g},{:.17g}", traj.returns[k],
                                            traj.equity[k], traj.rho[k]);
        const auto& p = traj.portfolios[k];
        for (int i = 0; i < p.long_alloc.size(); ++i)
            out << fmt::format(",{:.17g}", p.long_alloc(i));
        for (int i = 0; i < p.short_alloc.size(); ++i)
            out << fmt::format(",{:.17g}", p.short_alloc(i));
        out << "\n";
    }
}

void write_rho_series(const fs::path& path, const bt::Trajectory& policy_traj,
                      const bt::Trajectory& benchmark_traj) {
    std::ofstream out(path);
    out << "date\trho\tbenchmark_equity\n";
    for (size_t k = 0; k < policy_traj.dates.size(); ++k)
        out << policy_traj.dates[k]
            << fmt::format("\t{:.17g}\t{:.17g}\n", policy_traj.rho[k],
                           benchmark_traj.equity[k]);
}

model::Forecaster pretrain_one(const ExperimentConfig& cfg, const SplitSeries& split,
                               bool vanilla, unsigned long long seed,
                               train::PretrainResult& res_out,
                               train::ForecastErrorReport& report_out) {
    auto mcfg = cfg.model_config(split.train.n(), vanilla);
    auto wtrain = data::make_windows(split.train, mcfg.w, mcfg.h, cfg.forecaster.stride);
    auto wdev = data::make_windows(split.dev, mcfg.w, mcfg.h, cfg.forecaster.stride);
    auto wtest = data::make_windows(split.test, mcfg.w, mcfg.h, cfg.forecaster.stride);
    model::Forecaster f = vanilla ? model::make_vanilla_forecaster(mcfg, seed)
                                  : model::make_frequency_forecaster(mcfg, seed);
    train::TrainConfig tc = cfg.forecaster.train;
    tc.seed = seed;
    res_out = train::pretrain(f, wtrain, wdev, tc);
    report_out = train::evaluate_forecasts(f, wtest);
    return f;
}

struct LoadedComponents {
    rl::PolicyComponents comps;
    std::string base_hash;
};

// base checkpoint and mode wiring shared by finetune/ablate
rl::PolicyComponents build_components(const ExperimentConfig& cfg,
                                      rl::ForecastMode mode,
                                      std::optional<model::Forecaster> base, int n,
                                      unsigned long long seed) {
    std::optional<lora::AdaptedForecaster> adapted;
    if (mode != rl::ForecastMode::Removed) {
        if (!base) throw ConfigError("forecast mode '" + rl::forecast_mode_name(mode) +
                                     "' needs a pre-trained base checkpoint");
        switch (mode) {
            case rl::ForecastMode::LoRA:
                adapted = lora::inject(std::move(*base),
                                       lora::InjectionPlan::parse(cfg.lora.plan),
                                       cfg.lora.rank, cfg.lora.alpha, seed + 4);
                break;
            case rl::ForecastMode::Frozen:
                adapted = lora::wrap_frozen(std::move(*base));
                break;
            case rl::ForecastMode::Finetuning:
                adapted = lora::wrap_trainable(std::move(*base));
                break;
            default: break;
        }
    }
    return rl::make_components(mode, std::move(adapted), n, cfg.forecaster.w,
                               cfg.forecaster.h, cfg.selection(n), cfg.policy.channels,
                               seed + 2);
}

rl::RLConfig rl_config(const ExperimentConfig& cfg, unsigned long long seed) {
    rl::RLConfig rc;
    rc.alpha = cfg.rl.alpha;
    rc.beta = cfg.rl.beta;
    rc.epochs = cfg.rl.epochs;
    rc.episode_length = cfg.rl.episode_length;
    rc.batch_days = cfg.rl.batch_days;
    rc.lr = cfg.rl.learning_rate;
    rc.seed = seed + 5;
    return rc;
}

struct BacktestOutput {
    std::vector<std::pair<std::string, bt::MetricsReport>> rows;
    std::vector<std::pair<std::string, bt::Trajectory>> trajectories;  // rows order
    bt::Trajectory policy_traj, benchmark_traj;
};

BacktestOutput run_strategies(const ExperimentConfig& cfg,
                              const rl::PolicyComponents& comps,
                              const data::PriceSeries& test,
                              std::vector<json>* decisions_out) {
    int warmup = cfg.effective_warmup();
    BacktestOutput out;

    bt::Strategy recording = [&](const bt::MarketView& view, const std::string& date) {
        Eigen::MatrixXd window = view.window(comps.w);
        rl::Decision d = rl::decide(comps, window, policy::RhoMode::Test, 0.0, date);
        if (decisions_out) {
            json j;
            j["date"] = date;
            j["v"] = std::vector<double>(d.v.data(), d.v.data() + d.v.size());
            j["rho"] = d.score.rho;
            j["long_set"] = d.weights.long_set;
            j["short_set"] = d.weights.short_set;
            j["long_alloc"] = std::vector<double>(
                d.portfolio.long_alloc.data(),
                d.portfolio.long_alloc.data() + d.portfolio.long_alloc.size());
            j["short_alloc"] = std::vector<double>(
                d.portfolio.short_alloc.data(),
                d.portfolio.short_alloc.data() + d.portfolio.short_alloc.size());
            decisions_out->push_back(std::move(j));
        }
        return d.portfolio;
    };

    out.policy_traj = bt::run_backtest(recording, test, warmup);
    out.rows.emplace_back("policy", bt::compute_metrics(out.policy_traj.returns));
    out.trajectories.emplace_back("policy", out.policy_traj);

    auto sel = cfg.selection(test.n());
    for (const auto& name : cfg.backtest.baselines) {
        bt::Strategy s;
        if (name == "csm") s = bt::csm_strategy(cfg.backtest.lookback, sel);
        if (name == "blsw") s = bt::blsw_strategy(cfg.backtest.lookback, sel);
        if (name == "benchmark") s = bt::benchmark_index();
        bt::Trajectory traj = bt::run_backtest(s, test, warmup);
        if (name == "benchmark") out.benchmark_traj = traj;
        out.rows.emplace_back(name, bt::compute_metrics(traj.returns));
        out.trajectories.emplace_back(name, std::move(traj));
    }
    if (out.benchmark_traj.dates.empty())
        out.benchmark_traj = bt::run_backtest(bt::benchmark_index(), test, warmup);
    return out;
}

void write_metrics_files(const fs::path& dir,
                         const std::vector<std::pair<std::string, bt::MetricsReport>>& rows) {
    std::string tsv = std::string(kMetricsHeader) + "\n";
    json rows_json = json::array();
    for (const auto& [name, m] : rows) {
        tsv += metrics_row(name, m) + "\n";
        json r = metrics_json(m);
        r["strategy"] = name;
        rows_json.push_back(std::move(r));
    }
    run::write_text_file(dir / "metrics.tsv", tsv);
    run::write_text_file(dir / "metrics.json", rows_json.dump(1) + "\n");
    fmt::print("{}", tsv);
}

}  // namespace

void cmd_ingest(const CommandArgs& args) {
    Session s(args, "ingest");
    auto series = load_series(s.cfg);
    s.manifest.add_input("data", data_fingerprint(s.cfg));
    data::write_wide_csv(series, (s.dir / "data.csv").string());
    json summary = {{"assets", series.universe.asset_ids},
                    {"n", series.n()},
                    {"days", series.t()},
                    {"first_date", series.dates.front()},
                    {"last_date", series.dates.back()}};
    run::write_text_file(s.dir / "summary.json", summary.dump(1) + "\n");
    s.manifest.add_artifact(s.dir, "data.csv");
    s.manifest.add_artifact(s.dir, "summary.json");
    fmt::print("ingested {} assets x {} days ({}..{})\n", series.n(), series.t(),
               series.dates.front(), series.dates.back());
    s.finish();
}

void cmd_pretrain(const CommandArgs& args) {
    Session s(args, "pretrain");
    auto series = load_series(s.cfg);
    s.manifest.add_input("data", data_fingerprint(s.cfg));
    auto split = load_split(s.cfg, series);

    json models_report = json::object();
    for (const auto& name : s.cfg.forecaster.models) {
        bool vanilla = name == "vanilla";
        unsigned long long seed = vanilla ? s.seed + 1 : s.seed;
        train::PretrainResult res;
        train::ForecastErrorReport rep;
        model::Forecaster f = pretrain_one(s.cfg, split, vanilla, seed, res, rep);

        std::string ckpt = "checkpoint_" + name + ".json";
        model::save_forecaster(f, series.universe.asset_ids, (s.dir / ckpt).string());
        write_loss_curve(s.dir / ("loss_curve_" + name + ".jsonl"), res);
        s.manifest.add_artifact(s.dir, ckpt);
        s.manifest.add_artifact(s.dir, "loss_curve_" + name + ".jsonl");
        s.manifest.add_checkpoint_hash(name, model::forecaster_hash(f));

        models_report[name] = {{"mae", rep.mae},
                               {"rmse", rep.rmse},
                               {"mape", rep.mape},
                               {"best_epoch", res.best_epoch},
                               {"best_dev_mae", res.best_dev_mae},
                               {"param_count", f.param_count()}};
        fmt::print("{}: test MAE {:.6g}  RMSE {:.6g}  MAPE {:.6g}  ({} params)\n", name,
                   rep.mae, rep.rmse, rep.mape, f.param_count());
    }
    json report = {{"seed", s.seed}, {"models", models_report}};
    run::write_text_file(s.dir / "forecast_report.json", report.dump(1) + "\n");
    s.manifest.add_artifact(s.dir, "forecast_report.json");
    s.finish();
}

namespace {

struct FinetuneArtifacts {
    rl::FinetuneReport report;
    std::string base_hash;
};

FinetuneArtifacts finetune_into(const ExperimentConfig& cfg, rl::ForecastMode mode,
                                std::optional<model::Forecaster> base,
                                const data::PriceSeries& train_series,
                                const std::vector<std::string>& asset_ids,
                                unsigned long long seed, const fs::path& dir) {
    FinetuneArtifacts out;
    out.base_hash = base ? model::forecaster_hash(*base) : "";
    rl::PolicyComponents comps =
        build_components(cfg, mode, std::move(base), train_series.n(), seed);
    out.report = rl::finetune(comps, train_series, rl_config(cfg, seed));

    policy::save_scorer(comps.scorer, (dir / "scorer_checkpoint.json").string());
    policy::save_msm_head(comps.msm, (dir / "msm_checkpoint.json").string());
    if (mode == rl::ForecastMode::LoRA)
        lora::save_adapters(*comps.forecaster, out.base_hash,
                            (dir / "adapter_checkpoint.json").string());
    if (mode == rl::ForecastMode::Finetuning)
        model::save_forecaster(comps.forecaster->base, asset_ids,
                               (dir / "finetuned_base.json").string());
    write_episode_log(dir / "episode_log.jsonl", out.report);
    return out;
}

rl::PolicyComponents load_components(const ExperimentConfig& cfg, const json& summary,
                                     const run::RunStore& store,
                                     const data::PriceSeries& series,
                                     const fs::path& ft_dir) {
    rl::ForecastMode mode = rl::parse_forecast_mode(summary.at("mode").get<std::string>());
    policy::Scorer scorer =
        policy::load_scorer((ft_dir / "scorer_checkpoint.json").string());
    policy::MsmHead msm = policy::load_msm_head((ft_dir / "msm_checkpoint.json").string());

    std::optional<lora::AdaptedForecaster> adapted;
    if (mode != rl::ForecastMode::Removed) {
        std::string base_hash = summary.at("base_hash").get<std::string>();
        model::Forecaster base;
        if (mode == rl::ForecastMode::Finetuning) {
            auto loaded = model::load_forecaster((ft_dir / "finetuned_base.json").string());
            if (loaded.asset_ids != series.universe.asset_ids)
                throw CheckpointMismatch("finetuned checkpoint universe differs from the data");
            base = std::move(loaded.model);
        } else {
            fs::path base_dir = store.run_dir(summary.at("base_run").get<std::string>());
            auto loaded =
                model::load_forecaster((base_dir / "checkpoint_frequency.json").string());
            if (loaded.asset_ids != series.universe.asset_ids)
                throw CheckpointMismatch("base checkpoint universe differs from the data");
            if (model::forecaster_hash(loaded.model) != base_hash)
                throw CheckpointMismatch("base checkpoint content changed since finetune");
            base = std::move(loaded.model);
        }
        if (mode == rl::ForecastMode::LoRA)
            adapted = lora::load_adapters(std::move(base), base_hash,
                                          (ft_dir / "adapter_checkpoint.json").string());
        else if (mode == rl::ForecastMode::Frozen)
            adapted = lora::wrap_frozen(std::move(base));
        else
            adapted = lora::wrap_frozen(std::move(base));  // inference-only
    }

    rl::PolicyComponents comps;
    comps.mode = mode;
    comps.scorer = std::move(scorer);
    comps.forecaster = std::move(adapted);
    comps.msm = std::move(msm);
    comps.selection = cfg.selection(series.n());
    comps.w = cfg.forecaster.w;
    return comps;
}

}  // namespace

void cmd_finetune(const CommandArgs& args) {
    Session s(args, "finetune");
    auto series = load_series(s.cfg);
    s.manifest.add_input("data", data_fingerprint(s.cfg));
    auto split = load_split(s.cfg, series);

    rl::ForecastMode mode = rl::parse_forecast_mode(s.cfg.rl.mode);
    std::optional<model::Forecaster> base;
    if (mode != rl::ForecastMode::Removed) {
        if (args.base_run.empty())
            throw ConfigError("finetune needs --base-run (a pretrain run id)");
        fs::path base_dir = s.store.run_dir(args.base_run);
        auto loaded =
            model::load_forecaster((base_dir / "checkpoint_frequency.json").string());
        if (loaded.asset_ids != series.universe.asset_ids)
            throw CheckpointMismatch("base checkpoint universe differs from config data");
        s.manifest.add_input("base_checkpoint", model::forecaster_hash(loaded.model));
        base = std::move(loaded.model);
    }

    auto artifacts = finetune_into(s.cfg, mode, std::move(base), split.train, series.universe.asset_ids, s.seed, s.dir);

    json summary = {{"mode", rl::forecast_mode_name(mode)},
                    {"plan", s.cfg.lora.plan},
                    {"base_run", args.base_run},
                    {"base_hash", artifacts.base_hash},
                    {"trainable_count", artifacts.report.trainable_count},
                    {"epoch_mean_objective", artifacts.report.epoch_mean_objective},
                    {"epoch_mean_reward", artifacts.report.epoch_mean_reward},
                    {"base_hash_before", artifacts.report.base_hash_before},
                    {"base_hash_after", artifacts.report.base_hash_after}};
    run::write_text_file(s.dir / "finetune_summary.json", summary.dump(1) + "\n");

    for (const char* f : {"scorer_checkpoint.json", "msm_checkpoint.json",
                          "finetune_summary.json", "episode_log.jsonl"})
        s.manifest.add_artifact(s.dir, f);
    if (mode == rl::ForecastMode::LoRA) s.manifest.add_artifact(s.dir, "adapter_checkpoint.json");
    if (mode == rl::ForecastMode::Finetuning) s.manifest.add_artifact(s.dir, "finetuned_base.json");
    fmt::print("finetune mode={} trainables={} mean objective (last epoch) {:.6g}\n",
               rl::forecast_mode_name(mode), artifacts.report.trainable_count,
               artifacts.report.epoch_mean_objective.back());
    s.finish();
}

void cmd_backtest(const CommandArgs& args) {
    Session s(args, "backtest");
    if (args.components_run.empty())
        throw ConfigError("backtest needs --components-run (a finetune run id)");
    auto series = load_series(s.cfg);
    s.manifest.add_input("data", data_fingerprint(s.cfg));
    auto split = load_split(s.cfg, series);

    fs::path ft_dir = s.store.run_dir(args.components_run);
    json summary = run::read_json_file(ft_dir / "finetune_summary.json");
    rl::PolicyComponents comps = load_components(s.cfg, summary, s.store, series, ft_dir);

    std::vector<json> decisions;
    BacktestOutput out = run_strategies(s.cfg, comps, split.test, &decisions);
    write_metrics_files(s.dir, out.rows);
    write_trajectory_csv(s.dir / "trajectory_policy.csv", out.policy_traj,
                         series.universe.asset_ids);
    write_rho_series(s.dir / "rho_policy.tsv", out.policy_traj, out.benchmark_traj);
    {
        std::ofstream dj(s.dir / "decisions_policy.jsonl");
        for (const auto& d : decisions) dj << d.dump() << "\n";
    }
    for (const char* f : {"metrics.tsv", "metrics.json", "trajectory_policy.csv",
                          "rho_policy.tsv", "decisions_policy.jsonl"})
        s.manifest.add_artifact(s.dir, f);
    s.finish();
}

void cmd_ablate(const CommandArgs& args) {
    Session s(args, "ablate");
    auto series = load_series(s.cfg);
    s.manifest.add_input("data", data_fingerprint(s.cfg));
    auto split = load_split(s.cfg, series);

    // one shared pre-trained base for every variant that uses the forecaster
    model::Forecaster base;
    if (!args.base_run.empty()) {
        auto loaded = model::load_forecaster(
            (s.store.run_dir(args.base_run) / "checkpoint_frequency.json").string());
        if (loaded.asset_ids != series.universe.asset_ids)
            throw CheckpointMismatch("base checkpoint universe differs from config data");
        base = std::move(loaded.model);
    } else {
        train::PretrainResult res;
        train::ForecastErrorReport rep;
        base = pretrain_one(s.cfg, split, false, s.seed, res, rep);
        fmt::print("pretrained shared base: test MAE {:.6g}\n", rep.mae);
    }
    s.manifest.add_input("base_checkpoint", model::forecaster_hash(base));

    struct Variant {
        std::string name;
        rl::ForecastMode mode;
        std::string plan;  // lora placements
    };
    const std::vector<Variant> variants = {
        {"removed", rl::ForecastMode::Removed, ""},
        {"frozen", rl::ForecastMode::Frozen, ""},
        {"finetuning", rl::ForecastMode::Finetuning, ""},
        {"lora-encoders", rl::ForecastMode::LoRA, "encoders"},
        {"lora-decoder", rl::ForecastMode::LoRA, "decoder"},
        {"lora-frequency-attention", rl::ForecastMode::LoRA, "frequency-attention"},
        {"lora-all", rl::ForecastMode::LoRA, "all"},
    };

    std::string tsv = "variant\ttrainables\tmean_test_rho\tARR\tASR\tAVol\tMDD\tCR\tSoR\n";
    json rows_json = json::array();
    for (const auto& variant : variants) {
        ExperimentConfig vcfg = s.cfg;
        vcfg.rl.mode = rl::forecast_mode_name(variant.mode);
        if (!variant.plan.empty()) vcfg.lora.plan = variant.plan;

        fs::path vdir = s.dir / "variants" / variant.name;
        fs::create_directories(vdir);
        std::optional<model::Forecaster> vbase;
        if (variant.mode != rl::ForecastMode::Removed) vbase = base.clone();

        FinetuneArtifacts art =
            finetune_into(vcfg, variant.mode, std::move(vbase), split.train, series.universe.asset_ids, s.seed, vdir);

        // reload the trained components from the variant's own checkpoints
        rl::PolicyComponents live;
        live.mode = variant.mode;
        live.selection = vcfg.selection(series.n());
        live.w = vcfg.forecaster.w;
        live.scorer = policy::load_scorer((vdir / "scorer_checkpoint.json").string());
        live.msm = policy::load_msm_head((vdir / "msm_checkpoint.json").string());
        if (variant.mode == rl::ForecastMode::LoRA)
            live.forecaster = lora::load_adapters(base.clone(), art.base_hash,
                                                  (vdir / "adapter_checkpoint.json").string());
        else if (variant.mode == rl::ForecastMode::Finetuning)
            live.forecaster = lora::wrap_frozen(
                model::load_forecaster((vdir / "finetuned_base.json").string()).model);
        else if (variant.mode == rl::ForecastMode::Frozen)
            live.forecaster = lora::wrap_frozen(base.clone());

        BacktestOutput out = run_strategies(vcfg, live, split.test, nullptr);
        double rho_bar = rl::mean_test_rho(live, split.test);
        const auto& m = out.rows.front().second;
        tsv += fmt::format("{}\t{}\t{:.6g}\t", variant.name, art.report.trainable_count,
                           rho_bar) +
               metrics_row("", m).substr(1) + "\n";
        json row = metrics_json(m);
        row["variant"] = variant.name;
        row["trainables"] = art.report.trainable_count;
        row["mean_test_rho"] = rho_bar;
        rows_json.push_back(std::move(row));

        write_rho_series(vdir / "rho.tsv", out.policy_traj, out.benchmark_traj);
        write_trajectory_csv(vdir / "trajectory.csv", out.policy_traj,
                             series.universe.asset_ids);
        fmt::print("variant {} done (ARR {:.4g})\n", variant.name, m.arr);
    }
    run::write_text_file(s.dir / "ablation_metrics.tsv", tsv);
    run::write_text_file(s.dir / "ablation_metrics.json", rows_json.dump(1) + "\n");
    s.manifest.add_artifact(s.dir, "ablation_metrics.tsv");
    s.manifest.add_artifact(s.dir, "ablation_metrics.json");
    fmt::print("{}", tsv);
    s.finish();
}

void cmd_report(const CommandArgs& args) {
    if (args.report_runs.empty()) throw ConfigError("report needs at least one --run-id");
    run::RunStore store(args.out_dir);
    std::string report_id = "report-" +
                            run::fnv1a_hex(json(args.report_runs).dump()).substr(0, 8);
    fs::path dir = store.create_run(report_id);
    run::ManifestBuilder manifest(report_id, "report", json{{"runs", args.report_runs}},
                                  0);
    auto started = std::chrono::steady_clock::now();

    std::string tsv = "run\tlabel\tARR\tASR\tAVol\tMDD\tCR\tSoR\n";
    std::vector<std::string> artifacts;
    for (const auto& id : args.report_runs) {
        fs::path rdir = store.run_dir(id);
        json m = run::read_json_file(rdir / "manifest.json");
        std::string command = m.at("command").get<std::string>();
        if (command == "backtest") {
            json rows = run::read_json_file(rdir / "metrics.json");
            for (const auto& row : rows)
                tsv += id + "\t" +
                       metrics_row(row.at("strategy").get<std::string>(),
                                   metrics_from_json(row)) +
                       "\n";
            fs::copy_file(rdir / "rho_policy.tsv", dir / ("rho_" + id + ".tsv"));
            artifacts.push_back("rho_" + id + ".tsv");
        } else if (command == "ablate") {
            json rows = run::read_json_file(rdir / "ablation_metrics.json");
            for (const auto& row : rows) {
                std::string variant = row.at("variant").get<std::string>();
                tsv += id + "\t" + metrics_row(variant, metrics_from_json(row)) + "\n";
                fs::path src = rdir / "variants" / variant / "rho.tsv";
                std::string dst = "rho_" + id + "_" + variant + ".tsv";
                fs::copy_file(src, dir / dst);
                artifacts.push_back(dst);
            }
        } else {
            throw ConfigError("run '" + id + "' (" + command +
                              ") has no comparable metrics to report");
        }
    }
    run::write_text_file(dir / "comparison.tsv", tsv);
    artifacts.push_back("comparison.tsv");
    for (const auto& a : artifacts) manifest.add_artifact(dir, a);
    fmt::print("{}", tsv);
    double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    manifest.write(dir, secs);
    fmt::print("report {} written to {}\n", report_id, dir.string());
}

int run_cli(int argc, char** argv) {
    CLI::App app{"forecast-driven long/short portfolio research pipeline"};
    app.require_subcommand(1);

    CommandArgs args;
    auto add_common = [&](CLI::App* sub, bool needs_config = true) {
        auto* opt = sub->add_option("--config", args.config_path, "experiment config file");
        if (needs_config) opt->required();
        sub->add_option("--out-dir", args.out_dir, "run store directory");
        sub->add_option("--run-id", args.run_id, "explicit run id (create-only)");
        sub->add_option("--seed", args.seed, "override the config seed");
    };

    auto* ingest = app.add_subcommand("ingest", "load, validate and canonicalize data");
    add_common(ingest);
    auto* pretrain = app.add_subcommand("pretrain", "supervised forecaster pre-training");
    add_common(pretrain);
    auto* finetune = app.add_subcommand("finetune", "portfolio fine-tuning");
    add_common(finetune);
    finetune->add_option("--base-run", args.base_run, "pretrain run id with the base");
    auto* backtest = app.add_subcommand("backtest", "evaluate policy and baselines");
    add_common(backtest);
    backtest->add_option("--components-run", args.components_run, "finetune run id");
    auto* ablate = app.add_subcommand("ablate", "run the full ablation table");
    add_common(ablate);
    ablate->add_option("--base-run", args.base_run, "optional pretrain run id to reuse");
    auto* report = app.add_subcommand("report", "compare runs and export rho series");
    report->add_option("--out-dir", args.out_dir, "run store directory");
    report->add_option("--run-id", args.report_runs, "runs to compare (repeatable)")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (ingest->parsed()) cmd_ingest(args);
        if (pretrain->parsed()) cmd_pretrain(args);
        if (finetune->parsed()) cmd_finetune(args);
        if (backtest->parsed()) cmd_backtest(args);
        if (ablate->parsed()) cmd_ablate(args);
        if (report->parsed()) cmd_report(args);
    } catch (const ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return 2;
    } catch (const DivergedLoss& e) {
        fmt::print(stderr, "diverged: {}\n", e.what());
        return 4;
    } catch (const DataError& e) {
        fmt::print(stderr, "data error: {}\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}

}  // namespace portcast::cli
