#pragma once

#include <cstdint>
#include <vector>

#include "gridshield/admittance.hpp"

namespace gridshield {

// Fully connected network, swish hidden activations, identity output.
// Input [P,Q] (2n), output [P_hat,Q_hat,V_hat,theta_hat] (4n).
// Batches are row-major: one sample per row.
struct MlpParams {
    std::vector<Mat> w;  // w[l]: fan_in x fan_out
    std::vector<Vec> b;

    int n_layers() const { return static_cast<int>(w.size()); }
    int in_dim() const { return static_cast<int>(w.front().rows()); }
    int out_dim() const { return static_cast<int>(w.back().cols()); }
    int n_bus() const { return out_dim() / 4; }
    size_t parameter_count() const;
    bool all_finite() const;
};

// Glorot-uniform init, deterministic in seed. `hidden` hidden layers of
// uniform `width`.
MlpParams init_mlp(int n_bus, int hidden, int width, uint64_t seed);

inline double swish(double x) {
    return x / (1.0 + std::exp(-x));
}
inline double swish_grad(double x) {
    const double sig = 1.0 / (1.0 + std::exp(-x));
    return sig * (1.0 + x * (1.0 - sig));
}

struct ForwardCache {
    std::vector<Mat> pre;   // pre-activations per layer
    std::vector<Mat> post;  // post[0] = input, post[l] = activation output
};

// Batch forward pass; x is N x 2n, result N x 4n. Pass a cache to keep the
// intermediates needed for the backward pass.
Mat forward_batch(const MlpParams& params, const Mat& x, ForwardCache* cache = nullptr);

Vec forward(const MlpParams& params, const Vec& input);

struct OutputBlocks {
    Mat p, q, v, theta;  // each N x n
};
OutputBlocks split_outputs(const Mat& out, int n_bus);

}  // namespace gridshield
