#include "gridshield/mlp.hpp"

#include <cmath>

#include "gridshield/rng.hpp"

namespace gridshield {

size_t MlpParams::parameter_count() const {
    size_t c = 0;
    for (size_t l = 0; l < w.size(); ++l) c += w[l].size() + b[l].size();
    return c;
}

bool MlpParams::all_finite() const {
    for (size_t l = 0; l < w.size(); ++l)
        if (!w[l].allFinite() || !b[l].allFinite()) return false;
    return true;
}

MlpParams init_mlp(int n_bus, int hidden, int width, uint64_t seed) {
    if (n_bus < 1 || hidden < 1 || width < 1) throw ValidationError("bad MLP shape");
    std::vector<int> dims;
    dims.push_back(2 * n_bus);
    for (int l = 0; l < hidden; ++l) dims.push_back(width);
    dims.push_back(4 * n_bus);

    MlpParams p;
    auto eng = make_engine(seed, 0x6d6c70);
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        const int fan_in = dims[l], fan_out = dims[l + 1];
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        Mat w(fan_in, fan_out);
        for (int i = 0; i < fan_in; ++i)
            for (int j = 0; j < fan_out; ++j) w(i, j) = uniform(eng, -bound, bound);
        p.w.push_back(std::move(w));
        p.b.push_back(Vec::Zero(fan_out));
    }
    return p;
}

Mat forward_batch(const MlpParams& params, const Mat& x, ForwardCache* cache) {
    if (x.cols() != params.in_dim())
        throw ValidationError("forward: input dim " + std::to_string(x.cols()) + " != " +
                              std::to_string(params.in_dim()));
    const int layers = params.n_layers();
    if (cache) {
        cache->pre.assign(layers, {});
        cache->post.assign(layers + 1, {});
        cache->post[0] = x;
    }
    Mat h = x;
    for (int l = 0; l < layers; ++l) {
        Mat z = (h * params.w[l]).rowwise() + params.b[l].transpose();
        if (cache) cache->pre[l] = z;
        if (l + 1 < layers) {
            h = z.unaryExpr([](double v) { return swish(v); });
        } else {
            h = std::move(z);  // identity output head
        }
        if (cache) cache->post[l + 1] = h;
    }
    return h;
}

Vec forward(const MlpParams& params, const Vec& input) {
    Mat x = input.transpose();
    return forward_batch(params, x).row(0).transpose();
}

OutputBlocks split_outputs(const Mat& out, int n_bus) {
    OutputBlocks blocks;
    blocks.p = out.middleCols(0, n_bus);
    blocks.q = out.middleCols(n_bus, n_bus);
    blocks.v = out.middleCols(2 * n_bus, n_bus);
    blocks.theta = out.middleCols(3 * n_bus, n_bus);
    return blocks;
}

}  // namespace gridshield
