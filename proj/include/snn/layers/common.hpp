#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "snn/layers/batchnorm.hpp"
#include "snn/ops.hpp"
#include "snn/rng.hpp"

namespace snn {

/// Non-owning view of a trainable tensor plus its checkpoint name.
struct NamedTensor {
    std::string name;
    Tensor tensor;
};

/// Uniform in +-1/sqrt(fan_in).
inline Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> v(numel(shape));
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return Tensor(std::move(shape), std::move(v), true);
}

/// x [B,T,F] times W^T for W [H,F] -> [B,T,H].
inline Tensor project(const Tensor& x, const Tensor& W) {
    if (x.rank() != 3 || W.rank() != 2 || x.dim(2) != W.dim(1))
        throw ShapeError("project: input " + to_string(x.shape()) + " does not match weight " + to_string(W.shape()));
    const std::size_t B = x.dim(0), T = x.dim(1);
    Tensor flat = reshape(x, {B * T, x.dim(2)});
    return reshape(matmul(flat, transpose(W)), {B, T, W.dim(0)});
}

struct Linear {
    Tensor weight;  // [out, in]
    Tensor bias;    // [out]

    static Linear init(std::size_t in, std::size_t out, Rng& rng) {
        return {init_uniform({out, in}, in, rng), Tensor::zeros({out}, true)};
    }

    Tensor operator()(const Tensor& x) const { return add(project(x, weight), bias); }

    void collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
        out.push_back({prefix + ".weight", weight});
        out.push_back({prefix + ".bias", bias});
    }
};

inline void collect_bn(const BatchNormState& bn, const std::string& prefix, std::vector<NamedTensor>& out) {
    out.push_back({prefix + ".gamma", bn.gamma});
    out.push_back({prefix + ".beta", bn.beta});
}

inline Tensor deep_copy(const Tensor& t) { return Tensor(t.shape(), {t.values().begin(), t.values().end()}, t.requires_grad()); }

inline BatchNormState deep_copy(const BatchNormState& bn) {
    BatchNormState c = bn;
    c.gamma = deep_copy(bn.gamma);
    c.beta = deep_copy(bn.beta);
    return c;
}

/// Fraction of ones among the valid frames of a binary [B,T,H] tensor.
inline double spike_rate(const Tensor& spikes, const Lengths& lengths) {
    const std::size_t B = spikes.dim(0), T = spikes.dim(1), H = spikes.dim(2);
    const auto mask = detail::frame_mask(B, T, lengths);
    double ones = 0.0;
    std::size_t total = 0;
    const auto v = spikes.values();
    for (std::size_t r = 0; r < B * T; ++r) {
        if (!mask[r]) continue;
        for (std::size_t h = 0; h < H; ++h) ones += v[r * H + h];
        total += H;
    }
    return total == 0 ? 0.0 : ones / static_cast<double>(total);
}

}  // namespace snn
