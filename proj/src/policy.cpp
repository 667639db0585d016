#include "portcast/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "portcast/json_mat.hpp"
#include "portcast/runstore.hpp"

namespace portcast::policy {

using ad::Value;

SelectionConfig::SelectionConfig(int nl, int ns, int n) : n_long(nl), n_short(ns) {
    if (nl < 1 || ns < 1 || nl + ns > n)
        throw ConfigError("selection needs n_long >= 1, n_short >= 1, n_long+n_short <= n");
}

SelectionConfig SelectionConfig::defaults(int n) {
    int k = std::max(1, n / 4);
    return SelectionConfig(k, k, n);
}

const Value& Scorer::param(const std::string& name) const {
    for (const auto& [k, v] : params)
        if (k == name) return v;
    throw ShapeMismatch("scorer has no parameter " + name);
}

std::vector<Value> Scorer::param_values() const {
    std::vector<Value> out;
    for (const auto& [k, v] : params) out.push_back(v);
    return out;
}

Scorer Scorer::clone() const {
    Scorer s;
    s.cfg = cfg;
    for (const auto& [k, v] : params)
        s.params.emplace_back(k, Value::leaf(v.val(), v.requires_grad()));
    return s;
}

Scorer make_scorer(const ScorerConfig& cfg, unsigned long long seed) {
    if (cfg.n < 1 || cfg.w < 1 || cfg.channels < 1)
        throw ConfigError("scorer config: n, w, channels must be >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    auto normal = [&](Eigen::Index r, Eigen::Index c, double sd) {
        Mat m(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j) m(i, j) = sd * gauss(rng);
        return m;
    };
    int c = cfg.channels;
    Scorer s;
    s.cfg = cfg;
    auto add = [&](const std::string& name, Mat m) {
        s.params.emplace_back(name, Value::leaf(std::move(m), true));
    };
    add("conv.K", normal(3, c, std::sqrt(2.0 / (3 + c))));
    add("conv.b", Mat::Zero(1, c));
    add("graph.W", normal(c, c, std::sqrt(1.0 / c)));
    add("graph.b", Mat::Zero(1, c));
    add("attn.Wq", normal(c, c, std::sqrt(1.0 / c)));
    add("attn.Wk", normal(c, c, std::sqrt(1.0 / c)));
    add("attn.Wv", normal(c, c, std::sqrt(1.0 / c)));
    add("head.w", normal(c, 1, std::sqrt(1.0 / c)));
    add("head.b", Mat::Zero(1, 1));
    return s;
}

Mat scorer_adjacency(const Mat& window) {
    int n = static_cast<int>(window.rows());
    int w = static_cast<int>(window.cols());
    Mat adj = Mat::Identity(n, n);  // self-loops
    if (w >= 3) {
        Mat rets(n, w - 1);
        for (int i = 0; i < n; ++i)
            for (int t = 0; t < w - 1; ++t)
                rets(i, t) = (window(i, t + 1) - window(i, t)) / window(i, t);
        Eigen::VectorXd mu = rets.rowwise().mean();
        Eigen::VectorXd sd(n);
        for (int i = 0; i < n; ++i)
            sd(i) = std::sqrt((rets.row(i).array() - mu(i)).square().sum() / (w - 1));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                if (sd(i) < 1e-12 || sd(j) < 1e-12) continue;
                double cov = ((rets.row(i).array() - mu(i)) *
                              (rets.row(j).array() - mu(j))).sum() /
                             (w - 1);
                adj(i, j) = std::abs(cov / (sd(i) * sd(j)));
            }
    }
    for (int i = 0; i < n; ++i) adj.row(i) /= adj.row(i).sum();
    return adj;
}

ad::Value asset_scores_graph(const Scorer& scorer, const Mat& window) {
    const auto& cfg = scorer.cfg;
    if (window.rows() != cfg.n || window.cols() != cfg.w)
        throw ShapeMismatch("asset scores: window must be " + std::to_string(cfg.n) +
                            "x" + std::to_string(cfg.w));
    int n = cfg.n, w = cfg.w;

    Eigen::VectorXd mean = window.rowwise().mean();
    Eigen::VectorXd scale(n);
    for (int i = 0; i < n; ++i) {
        double sd = std::sqrt((window.row(i).array() - mean(i)).square().sum() / w);
        scale(i) = sd > 1e-8 ? sd : 1.0;
    }
    Mat normalized = (window.colwise() - mean).array().colwise() / scale.array();

    // kernel-3 temporal patches with replicated edges, rows ordered (asset, time)
    Mat patches(n * w, 3);
    for (int i = 0; i < n; ++i)
        for (int t = 0; t < w; ++t) {
            patches(i * w + t, 0) = normalized(i, std::max(0, t - 1));
            patches(i * w + t, 1) = normalized(i, t);
            patches(i * w + t, 2) = normalized(i, std::min(w - 1, t + 1));
        }
    Mat pool = Mat::Zero(n, n * w);  // mean over time per asset
    for (int i = 0; i < n; ++i)
        for (int t = 0; t < w; ++t) pool(i, i * w + t) = 1.0 / w;

    Value conv = ad::gelu(ad::add_rowvec(
        ad::matmul(Value::constant(patches), scorer.param("conv.K")),
        scorer.param("conv.b")));
    Value features = ad::matmul(Value::constant(pool), conv);  // n x C

    Mat adjacency = scorer_adjacency(window);
    Value mixed = ad::gelu(ad::add_rowvec(
        ad::matmul(ad::matmul(Value::constant(adjacency), features),
                   scorer.param("graph.W")),
        scorer.param("graph.b")));

    Value q = ad::matmul(mixed, scorer.param("attn.Wq"));
    Value k = ad::matmul(mixed, scorer.param("attn.Wk"));
    Value v = ad::matmul(mixed, scorer.param("attn.Wv"));
    Value att = ad::softmax_rows(ad::cmul(1.0 / std::sqrt(double(cfg.channels)),
                                          ad::matmul(q, ad::transpose(k))));
    Value attended = ad::add(mixed, ad::matmul(att, v));

    return ad::sigmoid(ad::add_rowvec(ad::matmul(attended, scorer.param("head.w")),
                                      scorer.param("head.b")));
}

Vec asset_scores(const Scorer& scorer, const Mat& window) {
    return asset_scores_graph(scorer, window).val().col(0);
}

std::pair<std::vector<int>, std::vector<int>> select_positions(
    const Vec& v, const SelectionConfig& cfg) {
    int n = static_cast<int>(v.size());
    if (cfg.n_long + cfg.n_short > n)
        throw ConfigError("selection config does not fit universe of size " +
                          std::to_string(n));
    std::vector<int> desc(static_cast<size_t>(n));
    std::iota(desc.begin(), desc.end(), 0);
    std::sort(desc.begin(), desc.end(), [&](int a, int b) {
        if (v(a) != v(b)) return v(a) > v(b);
        return a < b;
    });
    std::vector<int> long_set(desc.begin(), desc.begin() + cfg.n_long);
    std::vector<bool> taken(static_cast<size_t>(n), false);
    for (int i : long_set) taken[static_cast<size_t>(i)] = true;

    std::vector<int> asc(static_cast<size_t>(n));
    std::iota(asc.begin(), asc.end(), 0);
    std::sort(asc.begin(), asc.end(), [&](int a, int b) {
        if (v(a) != v(b)) return v(a) < v(b);
        return a < b;
    });
    std::vector<int> short_set;
    for (int i : asc) {
        if (taken[static_cast<size_t>(i)]) continue;  // contested indexes go long
        short_set.push_back(i);
        if (static_cast<int>(short_set.size()) == cfg.n_short) break;
    }
    std::sort(long_set.begin(), long_set.end());
    std::sort(short_set.begin(), short_set.end());
    return {long_set, short_set};
}

namespace {

Vec masked_softmax(const Vec& scores, const std::vector<int>& set, int n) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int i : set) mx = std::max(mx, scores(i));
    double denom = 0.0;
    for (int i : set) denom += std::exp(scores(i) - mx);
    Vec out = Vec::Zero(n);
    for (int i : set) out(i) = std::exp(scores(i) - mx) / denom;
    return out;
}

}  // namespace

PositionWeights position_weights(const Vec& v, const std::vector<int>& long_set,
                                 const std::vector<int>& short_set) {
    if (long_set.empty() || short_set.empty())
        throw ConfigError("position weights need nonempty long and short sets");
    for (int i : long_set)
        for (int j : short_set)
            if (i == j) throw ConfigError("long and short sets must be disjoint");
    int n = static_cast<int>(v.size());
    PositionWeights w;
    w.long_set = long_set;
    w.short_set = short_set;
    w.long_weights = masked_softmax(v, long_set, n);
    Vec flipped = (1.0 - v.array()).matrix();
    w.short_weights = -masked_softmax(flipped, short_set, n);
    return w;
}

std::vector<Value> MsmHead::param_values() const { return {w_mu, b_mu, w_sigma, b_sigma}; }

MsmHead MsmHead::clone() const {
    MsmHead h;
    h.rows = rows;
    h.cols = cols;
    h.w_mu = Value::leaf(w_mu.val(), w_mu.requires_grad());
    h.b_mu = Value::leaf(b_mu.val(), b_mu.requires_grad());
    h.w_sigma = Value::leaf(w_sigma.val(), w_sigma.requires_grad());
    h.b_sigma = Value::leaf(b_sigma.val(), b_sigma.requires_grad());
    return h;
}

MsmHead make_msm_head(int rows, int cols, unsigned long long seed) {
    if (rows < 1 || cols < 1) throw ShapeMismatch("msm head needs a nonempty input");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    double sd = 1.0 / std::sqrt(static_cast<double>(rows) * cols);
    auto normal = [&](int r, int c) {
        Mat m(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) m(i, j) = sd * gauss(rng);
        return m;
    };
    MsmHead h;
    h.rows = rows;
    h.cols = cols;
    h.w_mu = Value::leaf(normal(rows, cols), true);
    h.b_mu = Value::leaf(Mat::Zero(1, 1), true);
    h.w_sigma = Value::leaf(normal(rows, cols), true);
    h.b_sigma = Value::leaf(Mat::Zero(1, 1), true);
    return h;
}

double rho_from(double mu, double sigma, double noise, RhoMode mode) {
    double raw = mode == RhoMode::Train ? mu + sigma * noise : mu;
    return std::clamp(raw, kRhoEps, 1.0 - kRhoEps);
}

MarketScoreGraph market_score_graph(const MsmHead& head, const ad::Value& input,
                                    RhoMode mode, double noise) {
    if (input.rows() != head.rows || input.cols() != head.cols)
        throw ShapeMismatch("msm head expects " + std::to_string(head.rows) + "x" +
                            std::to_string(head.cols) + " input");
    MarketScoreGraph g;
    Value mu_raw = ad::add(ad::sum(ad::mul(input, head.w_mu)), head.b_mu);
    Value sigma_raw = ad::add(ad::sum(ad::mul(input, head.w_sigma)), head.b_sigma);
    g.mu = ad::sigmoid(mu_raw);
    g.sigma = ad::add(ad::softplus(sigma_raw), Value::scalar(1e-4));
    Value raw = mode == RhoMode::Train ? ad::add(g.mu, ad::cmul(noise, g.sigma)) : g.mu;
    g.rho = ad::clamp(raw, kRhoEps, 1.0 - kRhoEps);
    return g;
}

MarketScore market_score(const MsmHead& head, const Mat& input, RhoMode mode,
                         double noise) {
    auto g = market_score_graph(head, Value::constant(input), mode, noise);
    return MarketScore{g.mu.item(), g.sigma.item(), g.rho.item()};
}

PortfolioVector assemble_portfolio(double rho, const PositionWeights& weights,
                                   std::string date) {
    PortfolioVector p;
    p.rho = rho;
    p.date = std::move(date);
    p.long_alloc = rho * weights.long_weights;
    p.short_alloc = (1.0 - rho) * weights.short_weights;
    validate_portfolio(p);
    return p;
}

void validate_portfolio(const PortfolioVector& p) {
    if (p.long_alloc.size() != p.short_alloc.size())
        throw ShapeMismatch("portfolio books differ in length");
    bool all_cash = p.long_alloc.cwiseAbs().maxCoeff() == 0.0 &&
                    p.short_alloc.cwiseAbs().maxCoeff() == 0.0;
    if (!all_cash) {
        double ls = p.long_alloc.sum();
        double ss = p.short_alloc.sum();
        if (std::abs(ls - p.rho) > 1e-9 || std::abs(ss + (1.0 - p.rho)) > 1e-9)
            throw ShapeMismatch("portfolio books do not sum to rho / -(1-rho)");
    }
    double gross = p.long_alloc.cwiseAbs().sum() + p.short_alloc.cwiseAbs().sum();
    if (gross > 1.0 + 1e-9) throw ShapeMismatch("gross exposure exceeds 1");
}

void save_scorer(const Scorer& s, const std::string& path) {
    nlohmann::json j;
    j["format"] = "portcast-scorer";
    j["version"] = 1;
    j["config"] = {{"n", s.cfg.n}, {"w", s.cfg.w}, {"channels", s.cfg.channels}};
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [name, v] : s.params) params[name] = run::mat_to_json(v.val());
    j["params"] = std::move(params);
    std::ofstream out(path);
    if (!out) throw DataError("cannot write scorer checkpoint: " + path);
    out << j.dump(1) << "\n";
}

Scorer load_scorer(const std::string& path) {
    auto j = run::read_json_file(path);
    if (j.value("format", "") != "portcast-scorer")
        throw CheckpointMismatch("not a scorer checkpoint: " + path);
    ScorerConfig cfg{j.at("config").at("n").get<int>(), j.at("config").at("w").get<int>(),
                     j.at("config").at("channels").get<int>()};
    Scorer s = make_scorer(cfg, 0);
    for (auto& [name, v] : s.params) {
        if (!j.at("params").contains(name))
            throw CheckpointMismatch("scorer checkpoint missing " + name);
        Mat m = run::mat_from_json(j.at("params").at(name));
        if (m.rows() != v.rows() || m.cols() != v.cols())
            throw CheckpointMismatch("scorer checkpoint shape mismatch for " + name);
        v.raw() = std::move(m);
    }
    return s;
}

void save_msm_head(const MsmHead& h, const std::string& path) {
    nlohmann::json j;
    j["format"] = "portcast-msm";
    j["version"] = 1;
    j["rows"] = h.rows;
    j["cols"] = h.cols;
    j["w_mu"] = run::mat_to_json(h.w_mu.val());
    j["b_mu"] = run::mat_to_json(h.b_mu.val());
    j["w_sigma"] = run::mat_to_json(h.w_sigma.val());
    j["b_sigma"] = run::mat_to_json(h.b_sigma.val());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write msm checkpoint: " + path);
    out << j.dump(1) << "\n";
}

MsmHead load_msm_head(const std::string& path) {
    auto j = run::read_json_file(path);
    if (j.value("format", "") != "portcast-msm")
        throw CheckpointMismatch("not an msm checkpoint: " + path);
    MsmHead h = make_msm_head(j.at("rows").get<int>(), j.at("cols").get<int>(), 0);
    h.w_mu.raw() = run::mat_from_json(j.at("w_mu"));
    h.b_mu.raw() = run::mat_from_json(j.at("b_mu"));
    h.w_sigma.raw() = run::mat_from_json(j.at("w_sigma"));
    h.b_sigma.raw() = run::mat_from_json(j.at("b_sigma"));
    if (h.w_mu.rows() != h.rows || h.w_mu.cols() != h.cols)
        throw CheckpointMismatch("msm checkpoint shapes are inconsistent");
    return h;
}

}  // namespace portcast::policy
