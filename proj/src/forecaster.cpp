#include "portcast/forecaster.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "json.hpp"
#include "portcast/hashing.hpp"
#include "portcast/json_mat.hpp"

namespace portcast::model {

using ad::Value;
using json = nlohmann::json;

void ModelConfig::validate() const {
    if (n < 1) throw ShapeMismatch("model config: n must be >= 1");
    if (w < 2) throw ShapeMismatch("model config: window must be >= 2");
    if (h < 1) throw ShapeMismatch("model config: horizon must be >= 1");
    if (d_model < 1 || ff_dim < 1) throw ShapeMismatch("model config: widths must be >= 1");
    if (mode_count < 1) throw ShapeMismatch("model config: mode_count must be >= 1");
    if (decomp_kernel < 1 || decomp_kernel % 2 == 0)
        throw InvalidKernel("model config: decomposition kernel must be odd and >= 1");
    if (decomp_kernel > std::min(w, dec_len()))
        throw InvalidKernel("model config: decomposition kernel exceeds sequence length");
}

NormStats window_stats(const Mat& window) {
    NormStats s;
    s.mean = window.rowwise().mean();
    s.scale.resize(window.rows());
    for (Eigen::Index i = 0; i < window.rows(); ++i) {
        double var =
            (window.row(i).array() - s.mean(i)).square().sum() / window.cols();
        double sd = std::sqrt(var);
        s.scale(i) = sd > 1e-8 ? sd : 1.0;
    }
    return s;
}

const Value& Forecaster::param(const std::string& name) const {
    for (const auto& [k, v] : params)
        if (k == name) return v;
    throw ShapeMismatch("no such parameter: " + name);
}

bool Forecaster::has_param(const std::string& name) const {
    for (const auto& [k, v] : params)
        if (k == name) return true;
    return false;
}

std::vector<Value> Forecaster::param_values() const {
    std::vector<Value> out;
    out.reserve(params.size());
    for (const auto& [k, v] : params) out.push_back(v);
    return out;
}

long Forecaster::param_count() const {
    long c = 0;
    for (const auto& [k, v] : params) c += static_cast<long>(v.val().size());
    return c;
}

void Forecaster::set_trainable(bool trainable) {
    for (auto& [k, v] : params) {
        v.node()->requires_grad = trainable;
        v.node()->needs_grad = trainable;
    }
}

Forecaster Forecaster::clone() const {
    Forecaster out;
    out.kind = kind;
    out.cfg = cfg;
    for (const auto& [k, v] : params)
        out.params.emplace_back(k, Value::leaf(v.val(), v.requires_grad()));
    return out;
}

namespace {

class Init {
  public:
    explicit Init(unsigned long long seed) : rng_(seed) {}

    Mat normal(Eigen::Index r, Eigen::Index c, double sd) {
        Mat m(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j) m(i, j) = sd * gauss_(rng_);
        return m;
    }
    Mat glorot(Eigen::Index r, Eigen::Index c) {
        return normal(r, c, std::sqrt(2.0 / static_cast<double>(r + c)));
    }

  private:
    std::mt19937_64 rng_;
    std::normal_distribution<double> gauss_;
};

void add_param(Forecaster& f, const std::string& name, Mat m) {
    f.params.emplace_back(name, Value::leaf(std::move(m), true));
}

void add_ff(Forecaster& f, const std::string& prefix, Init& init, int d, int ff) {
    add_param(f, prefix + ".ff.W1", init.glorot(d, ff));
    add_param(f, prefix + ".ff.b1", Mat::Zero(1, ff));
    add_param(f, prefix + ".ff.W2", init.glorot(ff, d));
    add_param(f, prefix + ".ff.b2", Mat::Zero(1, d));
}

void add_freq(Forecaster& f, const std::string& prefix, Init& init, int modes, int d) {
    // near-identity start keeps the block close to a pass-through
    for (int k = 0; k < modes; ++k)
        add_param(f, prefix + ".freq.re" + std::to_string(k),
                  Mat::Identity(d, d) + init.normal(d, d, 0.02));
    for (int k = 0; k < modes; ++k)
        add_param(f, prefix + ".freq.im" + std::to_string(k), init.normal(d, d, 0.02));
}

void add_attn(Forecaster& f, const std::string& prefix, Init& init, int d) {
    add_param(f, prefix + ".Wq", init.glorot(d, d));
    add_param(f, prefix + ".Wk", init.glorot(d, d));
    add_param(f, prefix + ".Wv", init.glorot(d, d));
    add_param(f, prefix + ".Wo", init.glorot(d, d));
}

void add_embed_proj(Forecaster& f, Init& init) {
    add_param(f, "embed.W", init.normal(f.cfg.n, f.cfg.d_model,
                                        1.0 / std::sqrt(static_cast<double>(f.cfg.n))));
    add_param(f, "embed.b", Mat::Zero(1, f.cfg.d_model));
    add_param(f, "proj.W", init.glorot(f.cfg.d_model, f.cfg.n));
    add_param(f, "proj.b", Mat::Zero(1, f.cfg.n));
}

}  // namespace

Forecaster make_frequency_forecaster(const ModelConfig& cfg, unsigned long long seed) {
    cfg.validate();
    Forecaster f;
    f.kind = Forecaster::Kind::Frequency;
    f.cfg = cfg;
    Init init(seed);
    add_embed_proj(f, init);
    for (int b = 0; b < 2; ++b) {
        std::string p = "enc" + std::to_string(b);
        add_freq(f, p, init, f.enc_modes(), cfg.d_model);
        add_ff(f, p, init, cfg.d_model, cfg.ff_dim);
    }
    add_freq(f, "dec", init, f.dec_modes(), cfg.d_model);
    add_ff(f, "dec", init, cfg.d_model, cfg.ff_dim);
    add_attn(f, "fea", init, cfg.d_model);
    return f;
}

Forecaster make_vanilla_forecaster(const ModelConfig& cfg, unsigned long long seed) {
    cfg.validate();
    Forecaster f;
    f.kind = Forecaster::Kind::Vanilla;
    f.cfg = cfg;
    Init init(seed);
    add_embed_proj(f, init);
    for (int b = 0; b < 2; ++b) {
        std::string p = "enc" + std::to_string(b);
        add_attn(f, p + ".attn", init, cfg.d_model);
        add_ff(f, p, init, cfg.d_model, cfg.ff_dim);
    }
    add_attn(f, "dec.self", init, cfg.d_model);
    add_attn(f, "dec.cross", init, cfg.d_model);
    add_ff(f, "dec", init, cfg.d_model, cfg.ff_dim);
    return f;
}

WeightResolver plain_resolver() {
    return [](const std::string&, const Value& v) { return v; };
}

namespace {

struct Ctx {
    const Forecaster& f;
    const WeightResolver& resolve;

    Value p(const std::string& name) const { return resolve(name, f.param(name)); }
};

Value feed_forward(const Ctx& ctx, const std::string& prefix, const Value& x) {
    Value hidden = ad::gelu(
        ad::add_rowvec(ad::matmul(x, ctx.p(prefix + ".ff.W1")), ctx.p(prefix + ".ff.b1")));
    return ad::add_rowvec(ad::matmul(hidden, ctx.p(prefix + ".ff.W2")),
                          ctx.p(prefix + ".ff.b2"));
}

Value freq_sublayer(const Ctx& ctx, const std::string& prefix, const Value& x,
                    const DftMatrices& dft) {
    std::vector<Value> wr, wi;
    for (int k = 0; k < dft.modes; ++k) {
        wr.push_back(ctx.p(prefix + ".freq.re" + std::to_string(k)));
        wi.push_back(ctx.p(prefix + ".freq.im" + std::to_string(k)));
    }
    return freq_block_graph(x, wr, wi, dft);
}

Value attention(const Ctx& ctx, const std::string& prefix, const Value& q_in,
                const Value& kv_in) {
    int d = ctx.f.cfg.d_model;
    Value q = ad::matmul(q_in, ctx.p(prefix + ".Wq"));
    Value k = ad::matmul(kv_in, ctx.p(prefix + ".Wk"));
    Value v = ad::matmul(kv_in, ctx.p(prefix + ".Wv"));
    Value scores = ad::cmul(1.0 / std::sqrt(static_cast<double>(d)),
                            ad::matmul(q, ad::transpose(k)));
    return ad::matmul(ad::matmul(ad::softmax_rows(scores), v), ctx.p(prefix + ".Wo"));
}

// cross attention computed on the retained frequency modes of both sequences
Value freq_cross_attention(const Ctx& ctx, const Value& dec_seq, const Value& enc_seq,
                           const DftMatrices& dft_dec, const DftMatrices& dft_enc) {
    int d = ctx.f.cfg.d_model;
    Value q = ad::matmul(dec_seq, ctx.p("fea.Wq"));
    Value k = ad::matmul(enc_seq, ctx.p("fea.Wk"));
    Value v = ad::matmul(enc_seq, ctx.p("fea.Wv"));
    Value qr = ad::matmul(Value::constant(dft_dec.forward_real), q);
    Value qi = ad::matmul(Value::constant(dft_dec.forward_imag), q);
    Value kr = ad::matmul(Value::constant(dft_enc.forward_real), k);
    Value ki = ad::matmul(Value::constant(dft_enc.forward_imag), k);
    Value vr = ad::matmul(Value::constant(dft_enc.forward_real), v);
    Value vi = ad::matmul(Value::constant(dft_enc.forward_imag), v);
    // real part of Q F_k^H, squashed
    Value scores = ad::cmul(1.0 / static_cast<double>(d),
                            ad::add(ad::matmul(qr, ad::transpose(kr)),
                                    ad::matmul(qi, ad::transpose(ki))));
    Value act = ad::tanh_act(scores);
    Value gr = ad::matmul(act, vr);
    Value gi = ad::matmul(act, vi);
    Value out = ad::add(ad::matmul(Value::constant(dft_dec.inverse_real), gr),
                        ad::matmul(Value::constant(dft_dec.inverse_imag), gi));
    return ad::matmul(out, ctx.p("fea.Wo"));
}

Value embed(const Ctx& ctx, const Mat& normalized) {
    return ad::add_rowvec(
        ad::matmul(Value::constant(normalized.transpose()), ctx.p("embed.W")),
        ctx.p("embed.b"));
}

Value project_tail(const Ctx& ctx, const Value& seq, int h) {
    Value out = ad::add_rowvec(ad::matmul(seq, ctx.p("proj.W")), ctx.p("proj.b"));
    return ad::transpose(ad::slice_rows(out, out.rows() - h, h));  // n x h
}

ForwardGraph frequency_forward(const Ctx& ctx, const Mat& window) {
    const ModelConfig& cfg = ctx.f.cfg;
    NormStats stats = window_stats(window);
    Mat normalized =
        (window.colwise() - stats.mean).array().colwise() / stats.scale.array();

    Mat k_enc = moving_average_matrix(cfg.w, cfg.decomp_kernel);
    Mat seas_enc = Mat::Identity(cfg.w, cfg.w) - k_enc;
    int dec_len = cfg.dec_len();
    Mat k_dec = moving_average_matrix(dec_len, cfg.decomp_kernel);
    Mat seas_dec = Mat::Identity(dec_len, dec_len) - k_dec;
    auto dft_enc = dft_matrices(cfg.w, ctx.f.enc_modes());
    auto dft_dec = dft_matrices(dec_len, ctx.f.dec_modes());
    auto dft_fea_dec = dft_matrices(dec_len, ctx.f.fea_modes());
    auto dft_fea_enc = dft_matrices(cfg.w, ctx.f.fea_modes());

    Value embedded = embed(ctx, normalized);  // w x d

    Value x = embedded;
    for (int b = 0; b < 2; ++b) {
        std::string p = "enc" + std::to_string(b);
        Value mixed = freq_sublayer(ctx, p, x, dft_enc);
        x = ad::matmul(Value::constant(seas_enc), ad::add(x, mixed));
        Value ff = feed_forward(ctx, p, x);
        x = ad::matmul(Value::constant(seas_enc), ad::add(x, ff));
    }
    Value enc_out = x;

    // decoder seed: trailing seasonal history extended by zeros over the
    // horizon; trend accumulator starts from the window-mean embedding
    int half = cfg.w / 2;
    Value seasonal_full = ad::matmul(Value::constant(seas_enc), embedded);
    Value seed = ad::vcat(ad::slice_rows(seasonal_full, cfg.w - half, half),
                          Value::constant(Mat::Zero(cfg.h, cfg.d_model)));
    Value trend = ad::repeat_row(ad::rows_mean(embedded), dec_len);

    Value s = seed;
    Value mixed = freq_sublayer(ctx, "dec", s, dft_dec);
    Value sum1 = ad::add(s, mixed);
    s = ad::matmul(Value::constant(seas_dec), sum1);
    trend = ad::add(trend, ad::matmul(Value::constant(k_dec), sum1));

    Value cross = freq_cross_attention(ctx, s, enc_out, dft_fea_dec, dft_fea_enc);
    Value sum2 = ad::add(s, cross);
    s = ad::matmul(Value::constant(seas_dec), sum2);
    trend = ad::add(trend, ad::matmul(Value::constant(k_dec), sum2));

    Value ff = feed_forward(ctx, "dec", s);
    Value sum3 = ad::add(s, ff);
    s = ad::matmul(Value::constant(seas_dec), sum3);
    trend = ad::add(trend, ad::matmul(Value::constant(k_dec), sum3));

    Value dec_out = ad::add(s, trend);
    ForwardGraph g;
    g.stats = stats;
    g.pred_norm = project_tail(ctx, dec_out, cfg.h);
    Mat scale_rep = stats.scale.replicate(1, cfg.h);
    Mat mean_rep = stats.mean.replicate(1, cfg.h);
    g.prices = ad::add(ad::mul(g.pred_norm, Value::constant(scale_rep)),
                       Value::constant(mean_rep));
    return g;
}

ForwardGraph vanilla_forward(const Ctx& ctx, const Mat& window) {
    const ModelConfig& cfg = ctx.f.cfg;
    NormStats stats = window_stats(window);
    Mat normalized =
        (window.colwise() - stats.mean).array().colwise() / stats.scale.array();

    Value embedded = embed(ctx, normalized);
    Value x = embedded;
    for (int b = 0; b < 2; ++b) {
        std::string p = "enc" + std::to_string(b);
        x = ad::add(x, attention(ctx, p + ".attn", x, x));
        x = ad::add(x, feed_forward(ctx, p, x));
    }
    Value enc_out = x;

    int half = cfg.w / 2;
    Value seed = ad::vcat(ad::slice_rows(embedded, cfg.w - half, half),
                          Value::constant(Mat::Zero(cfg.h, cfg.d_model)));
    Value s = seed;
    s = ad::add(s, attention(ctx, "dec.self", s, s));
    s = ad::add(s, attention(ctx, "dec.cross", s, enc_out));
    s = ad::add(s, feed_forward(ctx, "dec", s));

    ForwardGraph g;
    g.stats = stats;
    g.pred_norm = project_tail(ctx, s, cfg.h);
    Mat scale_rep = stats.scale.replicate(1, cfg.h);
    Mat mean_rep = stats.mean.replicate(1, cfg.h);
    g.prices = ad::add(ad::mul(g.pred_norm, Value::constant(scale_rep)),
                       Value::constant(mean_rep));
    return g;
}

}  // namespace

ForwardGraph forward_graph(const Forecaster& model, const Mat& window,
                           const WeightResolver& resolve) {
    if (window.rows() != model.cfg.n || window.cols() != model.cfg.w)
        throw ShapeMismatch("forward: window must be " + std::to_string(model.cfg.n) +
                            "x" + std::to_string(model.cfg.w) + ", got " +
                            std::to_string(window.rows()) + "x" +
                            std::to_string(window.cols()));
    Ctx ctx{model, resolve};
    return model.kind == Forecaster::Kind::Frequency ? frequency_forward(ctx, window)
                                                     : vanilla_forward(ctx, window);
}

Forecast forward(const Forecaster& model, const Mat& window,
                 const std::string& anchor_date) {
    auto resolver = plain_resolver();
    auto g = forward_graph(model, window, resolver);
    Forecast f;
    f.values = g.prices.val();
    f.anchor_date = anchor_date;
    return f;
}

// --- checkpoints -------------------------------------------------------------

namespace {

using run::mat_from_json;
using run::mat_to_json;

json forecaster_to_json(const Forecaster& f, const std::vector<std::string>& ids) {
    json j;
    j["format"] = "portcast-forecaster";
    j["version"] = 1;
    j["kind"] = f.kind == Forecaster::Kind::Frequency ? "frequency" : "vanilla";
    j["normalization"] = "per-window-zscore";
    j["asset_ids"] = ids;
    j["config"] = {{"n", f.cfg.n},         {"w", f.cfg.w},
                   {"h", f.cfg.h},         {"d_model", f.cfg.d_model},
                   {"ff_dim", f.cfg.ff_dim}, {"mode_count", f.cfg.mode_count},
                   {"decomp_kernel", f.cfg.decomp_kernel}};
    json params = json::object();
    for (const auto& [name, v] : f.params) params[name] = mat_to_json(v.val());
    j["params"] = std::move(params);
    return j;
}

}  // namespace

void save_forecaster(const Forecaster& model, const std::vector<std::string>& asset_ids,
                     const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out << forecaster_to_json(model, asset_ids).dump(1) << "\n";
}

LoadedForecaster load_forecaster(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw DataError("checkpoint parse failure in " + path + ": " + e.what());
    }
    if (j.value("format", "") != "portcast-forecaster" || j.value("version", 0) != 1)
        throw CheckpointMismatch("unrecognized checkpoint container: " + path);

    ModelConfig cfg;
    const auto& c = j.at("config");
    cfg.n = c.at("n").get<int>();
    cfg.w = c.at("w").get<int>();
    cfg.h = c.at("h").get<int>();
    cfg.d_model = c.at("d_model").get<int>();
    cfg.ff_dim = c.at("ff_dim").get<int>();
    cfg.mode_count = c.at("mode_count").get<int>();
    cfg.decomp_kernel = c.at("decomp_kernel").get<int>();

    std::string kind = j.at("kind").get<std::string>();
    Forecaster skeleton = kind == "frequency" ? make_frequency_forecaster(cfg, 0)
                                              : make_vanilla_forecaster(cfg, 0);
    const auto& params = j.at("params");
    for (auto& [name, v] : skeleton.params) {
        if (!params.contains(name))
            throw CheckpointMismatch("checkpoint missing parameter " + name);
        Mat m = mat_from_json(params.at(name));
        if (m.rows() != v.rows() || m.cols() != v.cols())
            throw CheckpointMismatch("checkpoint shape mismatch for " + name);
        v.raw() = std::move(m);
    }
    if (params.size() != skeleton.params.size())
        throw CheckpointMismatch("checkpoint has unexpected extra parameters");

    LoadedForecaster out;
    out.model = std::move(skeleton);
    out.asset_ids = j.at("asset_ids").get<std::vector<std::string>>();
    if (static_cast<int>(out.asset_ids.size()) != cfg.n)
        throw CheckpointMismatch("checkpoint universe size disagrees with config");
    return out;
}

std::string forecaster_hash(const Forecaster& model) {
    return run::fnv1a_hex(forecaster_to_json(model, {}).dump());
}

}  // namespace portcast::model
