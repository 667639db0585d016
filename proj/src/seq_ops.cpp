#include "portcast/seq_ops.hpp"

#include <cmath>

namespace portcast::model {

Mat moving_average_matrix(int length, int kernel) {
    if (kernel < 1 || kernel % 2 == 0 || kernel > length)
        throw InvalidKernel("kernel must be odd and within [1, " +
                            std::to_string(length) + "], got " + std::to_string(kernel));
    Mat k = Mat::Zero(length, length);
    int half = kernel / 2;
    double w = 1.0 / kernel;
    for (int t = 0; t < length; ++t)
        for (int j = -half; j <= half; ++j) {
            int s = std::clamp(t + j, 0, length - 1);  // replicate boundary samples
            k(t, s) += w;
        }
    return k;
}

DecompositionOutput decompose(const Mat& x, int kernel) {
    Mat k = moving_average_matrix(static_cast<int>(x.rows()), kernel);
    DecompositionOutput out;
    out.trend = k * x;
    out.seasonal = x - out.trend;
    return out;
}

int max_modes(int length) { return length / 2 + 1; }

DftMatrices dft_matrices(int length, int modes) {
    if (length < 2) throw ShapeMismatch("dft: sequence length must be >= 2");
    if (modes < 1 || modes > max_modes(length))
        throw ShapeMismatch("dft: mode count " + std::to_string(modes) +
                            " outside [1, " + std::to_string(max_modes(length)) + "]");
    DftMatrices d;
    d.modes = modes;
    d.length = length;
    d.forward_real.resize(modes, length);
    d.forward_imag.resize(modes, length);
    d.inverse_real.resize(length, modes);
    d.inverse_imag.resize(length, modes);
    for (int k = 0; k < modes; ++k) {
        // weight 2 on interior modes accounts for the conjugate-symmetric half
        double scale = (k == 0 || (length % 2 == 0 && k == length / 2)) ? 1.0 : 2.0;
        for (int t = 0; t < length; ++t) {
            double theta = 2.0 * M_PI * k * t / length;
            d.forward_real(k, t) = std::cos(theta);
            d.forward_imag(k, t) = -std::sin(theta);
            d.inverse_real(t, k) = scale * std::cos(theta) / length;
            d.inverse_imag(t, k) = -scale * std::sin(theta) / length;
        }
    }
    return d;
}

FreqBlockParams FreqBlockParams::identity(int mode_count, int d) {
    FreqBlockParams p;
    p.mode_count = mode_count;
    for (int k = 0; k < mode_count; ++k) {
        p.weight_real.push_back(Mat::Identity(d, d));
        p.weight_imag.push_back(Mat::Zero(d, d));
    }
    return p;
}

Mat freq_block(const Mat& x, const FreqBlockParams& params) {
    int length = static_cast<int>(x.rows());
    if (params.mode_count < 1 || params.mode_count > max_modes(length))
        throw ShapeMismatch("freq_block: mode count outside [1, floor(L/2)+1]");
    if (params.weight_real.size() != static_cast<size_t>(params.mode_count) ||
        params.weight_imag.size() != static_cast<size_t>(params.mode_count))
        throw ShapeMismatch("freq_block: one complex weight per retained mode");
    auto dft = dft_matrices(length, params.mode_count);
    Mat fr = dft.forward_real * x;
    Mat fi = dft.forward_imag * x;
    Mat gr(params.mode_count, x.cols());
    Mat gi(params.mode_count, x.cols());
    for (int k = 0; k < params.mode_count; ++k) {
        gr.row(k) = fr.row(k) * params.weight_real[static_cast<size_t>(k)] -
                    fi.row(k) * params.weight_imag[static_cast<size_t>(k)];
        gi.row(k) = fr.row(k) * params.weight_imag[static_cast<size_t>(k)] +
                    fi.row(k) * params.weight_real[static_cast<size_t>(k)];
    }
    return dft.inverse_real * gr + dft.inverse_imag * gi;
}

ad::Value freq_block_graph(const ad::Value& x, const std::vector<ad::Value>& w_real,
                           const std::vector<ad::Value>& w_imag,
                           const DftMatrices& dft) {
    using namespace ad;
    Value fr = matmul(Value::constant(dft.forward_real), x);
    Value fi = matmul(Value::constant(dft.forward_imag), x);
    Value gr, gi;
    for (int k = 0; k < dft.modes; ++k) {
        Value frk = slice_rows(fr, k, 1);
        Value fik = slice_rows(fi, k, 1);
        Value grk = sub(matmul(frk, w_real[static_cast<size_t>(k)]),
                        matmul(fik, w_imag[static_cast<size_t>(k)]));
        Value gik = add(matmul(frk, w_imag[static_cast<size_t>(k)]),
                        matmul(fik, w_real[static_cast<size_t>(k)]));
        gr = k == 0 ? grk : vcat(gr, grk);
        gi = k == 0 ? gik : vcat(gi, gik);
    }
    return add(matmul(Value::constant(dft.inverse_real), gr),
               matmul(Value::constant(dft.inverse_imag), gi));
}

}  // namespace portcast::model
