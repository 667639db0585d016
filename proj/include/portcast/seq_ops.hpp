#pragma once

#include <Eigen/Dense>
#include <vector>

#include "portcast/autodiff.hpp"
#include "portcast/errors.hpp"

namespace portcast::model {

using Mat = Eigen::MatrixXd;

struct DecompositionOutput {
    Mat trend;     // centered moving average, edges padded by replication
    Mat seasonal;  // input - trend
};

// L x L linear operator computing the centered moving average of each column
// of an L x d sequence, with boundary rows replicated for padding.
Mat moving_average_matrix(int length, int kernel);

// rows = time steps, columns = channels
DecompositionOutput decompose(const Mat& x, int kernel);

// Truncated real DFT of the lowest `modes` frequencies along the time axis.
// forward_real/imag are modes x L; inverse_* are L x modes and include the
// hermitian completion so inverse(forward(x)) == x for real x at full modes.
struct DftMatrices {
    Mat forward_real, forward_imag;
    Mat inverse_real, inverse_imag;
    int modes = 0;
    int length = 0;
};

int max_modes(int length);  // floor(L/2) + 1
DftMatrices dft_matrices(int length, int modes);

// Per-retained-mode complex d x d maps applied in the frequency domain.
struct FreqBlockParams {
    int mode_count = 0;
    std::vector<Mat> weight_real;
    std::vector<Mat> weight_imag;

    static FreqBlockParams identity(int mode_count, int d);
};

// DFT -> per-mode complex weighting -> inverse DFT (non-retained modes zeroed)
Mat freq_block(const Mat& x, const FreqBlockParams& params);

// graph version over already-materialized weight Values (one pair per mode)
ad::Value freq_block_graph(const ad::Value& x, const std::vector<ad::Value>& w_real,
                           const std::vector<ad::Value>& w_imag, const DftMatrices& dft);

}  // namespace portcast::model
