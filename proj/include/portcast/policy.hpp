#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "portcast/autodiff.hpp"
#include "portcast/errors.hpp"

namespace portcast::policy {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline constexpr double kRhoEps = 1e-4;

struct SelectionConfig {
    int n_long = 1;
    int n_short = 1;

    SelectionConfig() = default;
    SelectionConfig(int nl, int ns, int n);
    static SelectionConfig defaults(int n);  // n_long = n_short = max(1, n/4)
};

struct PositionWeights {
    Vec long_weights;   // sums to 1, zero off the long set
    Vec short_weights;  // sums to -1, zero off the short set
    std::vector<int> long_set, short_set;  // ascending
};

struct MarketScore {
    double mu = 0.0;     // in (0,1)
    double sigma = 0.0;  // > 0
    double rho = 0.0;    // in [eps, 1-eps]
};

struct PortfolioVector {
    Vec long_alloc;   // rho * long weights
    Vec short_alloc;  // (1-rho) * short weights
    double rho = 0.0;
    std::string date;
};

// --- asset scoring -----------------------------------------------------------

struct ScorerConfig {
    int n = 0;
    int w = 5;
    int channels = 16;
};

// temporal conv -> graph conv over the return-correlation graph -> attention
// across assets -> sigmoid head; shares all parameters across assets, so it is
// permutation-equivariant by construction
struct Scorer {
    ScorerConfig cfg;
    std::vector<std::pair<std::string, ad::Value>> params;

    const ad::Value& param(const std::string& name) const;
    std::vector<ad::Value> param_values() const;
    Scorer clone() const;
};

Scorer make_scorer(const ScorerConfig& cfg, unsigned long long seed);

// row-normalized |correlation| of window returns with self-loops
Mat scorer_adjacency(const Mat& window);

ad::Value asset_scores_graph(const Scorer& scorer, const Mat& window);
Vec asset_scores(const Scorer& scorer, const Mat& window);

// --- selection and weighting --------------------------------------------------

// top n_long by score and bottom n_short, ties to the lower index; indexes
// contested by both books go long and the short book takes the next lowest
std::pair<std::vector<int>, std::vector<int>> select_positions(
    const Vec& v, const SelectionConfig& cfg);

PositionWeights position_weights(const Vec& v, const std::vector<int>& long_set,
                                 const std::vector<int>& short_set);

// --- market scoring ------------------------------------------------------------

enum class RhoMode { Train, Test };

// affine head over a (rows x cols) feature block producing (mu, sigma)
struct MsmHead {
    int rows = 0, cols = 0;
    ad::Value w_mu, b_mu, w_sigma, b_sigma;

    std::vector<ad::Value> param_values() const;
    MsmHead clone() const;
};

MsmHead make_msm_head(int rows, int cols, unsigned long long seed);

double rho_from(double mu, double sigma, double noise, RhoMode mode);

struct MarketScoreGraph {
    ad::Value mu, sigma, rho;  // 1x1 each
};

MarketScoreGraph market_score_graph(const MsmHead& head, const ad::Value& input,
                                    RhoMode mode, double noise);
MarketScore market_score(const MsmHead& head, const Mat& input, RhoMode mode,
                         double noise);

// --- assembly -------------------------------------------------------------------

PortfolioVector assemble_portfolio(double rho, const PositionWeights& weights,
                                   std::string date = "");

void validate_portfolio(const PortfolioVector& p);

// --- persistence -----------------------------------------------------------------

void save_scorer(const Scorer& s, const std::string& path);
Scorer load_scorer(const std::string& path);
void save_msm_head(const MsmHead& h, const std::string& path);
MsmHead load_msm_head(const std::string& path);

}  // namespace portcast::policy
