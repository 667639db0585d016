#include "portcast/lora.hpp"

#include <fstream>
#include <random>

#include "json.hpp"
#include "portcast/hashing.hpp"
#include "portcast/json_mat.hpp"

namespace portcast::lora {

using ad::Value;
using json = nlohmann::json;

InjectionPlan InjectionPlan::parse(const std::string& target_name) {
    InjectionPlan p;
    if (target_name == "encoders")
        p.target = Target::Encoders;
    else if (target_name == "decoder")
        p.target = Target::Decoder;
    else if (target_name == "frequency-attention" || target_name == "fea")
        p.target = Target::FrequencyAttention;
    else if (target_name == "all")
        p.target = Target::All;
    else
        throw UnknownTarget("unknown injection target: " + target_name);
    return p;
}

std::string InjectionPlan::target_name() const {
    switch (target) {
        case Target::Encoders: return "encoders";
        case Target::Decoder: return "decoder";
        case Target::FrequencyAttention: return "frequency-attention";
        case Target::All: return "all";
    }
    return "?";
}

std::optional<std::pair<Target, MatrixKind>> classify_param(const std::string& name) {
    auto kind_of = [&]() -> std::optional<MatrixKind> {
        if (name.find(".freq.") != std::string::npos) return MatrixKind::Frequency;
        if (name.find(".ff.W") != std::string::npos) return MatrixKind::FeedForward;
        if (name.find(".attn.W") != std::string::npos ||
            name.find(".self.W") != std::string::npos ||
            name.find(".cross.W") != std::string::npos ||
            (name.rfind("fea.W", 0) == 0))
            return MatrixKind::Attention;
        return std::nullopt;
    };
    auto kind = kind_of();
    if (!kind) return std::nullopt;
    if (name.rfind("enc", 0) == 0) return std::make_pair(Target::Encoders, *kind);
    if (name.rfind("dec", 0) == 0) return std::make_pair(Target::Decoder, *kind);
    if (name.rfind("fea.", 0) == 0)
        return std::make_pair(Target::FrequencyAttention, *kind);
    return std::nullopt;
}

namespace {

bool plan_selects(const InjectionPlan& plan, Target t, MatrixKind k) {
    if (!plan.kinds.count(k)) return false;
    return plan.target == Target::All || plan.target == t;
}

}  // namespace

AdaptedForecaster inject(model::Forecaster base, const InjectionPlan& plan, int rank,
                         double alpha, unsigned long long seed) {
    if (rank < 1) throw RankTooLarge("adapter rank must be >= 1");
    AdaptedForecaster out;
    out.plan = plan;
    out.requested_rank = rank;
    base.set_trainable(false);
    out.base = std::move(base);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 0.02);

    bool any_target_exists = false;
    for (const auto& [name, v] : out.base.params) {
        auto cls = classify_param(name);
        if (!cls) continue;
        if (plan.target == Target::All || plan.target == cls->first)
            any_target_exists = true;
        if (!plan_selects(plan, cls->first, cls->second)) continue;

        int d_out = static_cast<int>(v.rows());
        int d_in = static_cast<int>(v.cols());
        int r = std::min(rank, std::min(d_in, d_out));
        if (r < rank)
            out.warnings.push_back("rank " + std::to_string(rank) + " clamped to " +
                                   std::to_string(r) + " for " + name);
        LoRAAdapter a;
        a.rank = r;
        a.alpha = alpha;
        a.scale = alpha / static_cast<double>(r);
        Mat down(r, d_in);
        for (Eigen::Index i = 0; i < down.rows(); ++i)
            for (Eigen::Index j = 0; j < down.cols(); ++j) down(i, j) = gauss(rng);
        a.down = Value::leaf(std::move(down), true);
        a.up = Value::leaf(Mat::Zero(d_out, r), true);
        out.adapters.emplace(name, std::move(a));
    }
    if (!any_target_exists)
        throw UnknownTarget("injection target '" + plan.target_name() +
                            "' does not exist in this model");
    return out;
}

AdaptedForecaster wrap_frozen(model::Forecaster base) {
    AdaptedForecaster out;
    base.set_trainable(false);
    out.base = std::move(base);
    return out;
}

AdaptedForecaster wrap_trainable(model::Forecaster base) {
    AdaptedForecaster out;
    base.set_trainable(true);
    out.base = std::move(base);
    out.base_trainable = true;
    return out;
}

Mat effective_weight(const Mat& base, const LoRAAdapter& adapter) {
    if (adapter.up.cols() != adapter.down.rows() || adapter.up.rows() != base.rows() ||
        adapter.down.cols() != base.cols())
        throw ShapeMismatch("effective_weight: adapter factors do not fit the base");
    return base + adapter.scale * (adapter.up.val() * adapter.down.val());
}

model::WeightResolver AdaptedForecaster::resolver() const {
    const auto* self = this;
    return [self](const std::string& name, const Value& v) -> Value {
        auto it = self->adapters.find(name);
        if (it == self->adapters.end()) return v;
        const LoRAAdapter& a = it->second;
        return ad::add(v, ad::cmul(a.scale, ad::matmul(a.up, a.down)));
    };
}

void AdaptedForecaster::register_trainable(const std::string& name, const Value& v) {
    extra_trainables.emplace_back(name, v);
}

std::vector<Value> AdaptedForecaster::trainable_values() const {
    std::vector<Value> out;
    for (const auto& [name, a] : adapters) {
        out.push_back(a.down);
        out.push_back(a.up);
    }
    if (base_trainable)
        for (const auto& [name, v] : base.params) out.push_back(v);
    for (const auto& [name, v] : extra_trainables) out.push_back(v);
    return out;
}

std::vector<std::pair<std::string, long>> AdaptedForecaster::trainable_listing() const {
    std::vector<std::pair<std::string, long>> out;
    for (const auto& [name, a] : adapters) {
        out.emplace_back(name + ".lora.down", static_cast<long>(a.down.val().size()));
        out.emplace_back(name + ".lora.up", static_cast<long>(a.up.val().size()));
    }
    if (base_trainable)
        for (const auto& [name, v] : base.params)
            out.emplace_back(name, static_cast<long>(v.val().size()));
    for (const auto& [name, v] : extra_trainables)
        out.emplace_back(name, static_cast<long>(v.val().size()));
    return out;
}

long AdaptedForecaster::trainable_count() const {
    long c = 0;
    for (const auto& [name, size] : trainable_listing()) c += size;
    return c;
}

model::Forecaster AdaptedForecaster::merged() const {
    model::Forecaster out = base.clone();
    for (auto& [name, v] : out.params) {
        auto it = adapters.find(name);
        if (it != adapters.end()) v.raw() = effective_weight(v.val(), it->second);
    }
    return out;
}

using run::mat_from_json;
using run::mat_to_json;

void save_adapters(const AdaptedForecaster& m, const std::string& base_hash,
                   const std::string& path) {
    json j;
    j["format"] = "portcast-adapters";
    j["version"] = 1;
    j["base_hash"] = base_hash;
    j["plan"] = m.plan.target_name();
    j["rank"] = m.requested_rank;
    json adapters = json::object();
    for (const auto& [name, a] : m.adapters)
        adapters[name] = {{"rank", a.rank},
                          {"alpha", a.alpha},
                          {"down", mat_to_json(a.down.val())},
                          {"up", mat_to_json(a.up.val())}};
    j["adapters"] = std::move(adapters);
    std::ofstream out(path);
    if (!out) throw DataError("cannot write adapter checkpoint: " + path);
    out << j.dump(1) << "\n";
}

AdaptedForecaster load_adapters(model::Forecaster base, const std::string& base_hash,
                                const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open adapter checkpoint: " + path);
    json j;
    in >> j;
    if (j.value("format", "") != "portcast-adapters")
        throw CheckpointMismatch("not an adapter checkpoint: " + path);
    if (j.at("base_hash").get<std::string>() != base_hash)
        throw CheckpointMismatch("adapter checkpoint was trained against a different base");

    InjectionPlan plan = InjectionPlan::parse(j.at("plan").get<std::string>());
    int rank = j.at("rank").get<int>();
    AdaptedForecaster out = inject(std::move(base), plan, rank, 1.0, 0);
    const auto& adapters = j.at("adapters");
    if (adapters.size() != out.adapters.size())
        throw CheckpointMismatch("adapter set does not match the plan");
    for (auto& [name, a] : out.adapters) {
        if (!adapters.contains(name))
            throw CheckpointMismatch("adapter checkpoint missing " + name);
        const auto& payload = adapters.at(name);
        a.alpha = payload.at("alpha").get<double>();
        a.rank = payload.at("rank").get<int>();
        a.scale = a.alpha / static_cast<double>(a.rank);
        Mat down = mat_from_json(payload.at("down"));
        Mat up = mat_from_json(payload.at("up"));
        if (down.rows() != a.down.rows() || down.cols() != a.down.cols() ||
            up.rows() != a.up.rows() || up.cols() != a.up.cols())
            throw CheckpointMismatch("adapter shapes do not fit " + name);
        a.down.raw() = std::move(down);
        a.up.raw() = std::move(up);
    }
    return out;
}

}  // namespace portcast::lora
