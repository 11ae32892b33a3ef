#pragma once

// Strided 1-D convolution along time followed by ReLU. The stride performs the
// time pooling ahead of the recurrent stack.

#include <string>
#include <vector>

#include "snn/layers/common.hpp"

namespace snn {

struct ConvSpec {
    std::size_t channels = 64;
    std::size_t kernel = 3;
    std::size_t stride = 2;
};

struct ConvParams {
    Tensor weight;  // [channels, kernel, in]
    Tensor bias;    // [channels]
    std::size_t stride = 1;

    static ConvParams init(std::size_t in, const ConvSpec& spec, Rng& rng) {
        return {init_uniform({spec.channels, spec.kernel, in}, spec.kernel * in, rng),
                Tensor::zeros({spec.channels}, true), spec.stride};
    }

    std::size_t kernel() const { return weight.dim(1); }

    void collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
        out.push_back({prefix + ".weight", weight});
        out.push_back({prefix + ".bias", bias});
    }

    ConvParams clone() const { return {deep_copy(weight), deep_copy(bias), stride}; }
};

inline std::size_t conv_output_length(std::size_t length, std::size_t kernel, std::size_t stride) {
    if (length < kernel)
        throw ShapeError("conv: input of " + std::to_string(length) + " frames is shorter than kernel " + std::to_string(kernel));
    return (length - kernel) / stride + 1;
}

/// Linear strided convolution: x [B,T,F], weight [C,K,F] -> [B,T',C].
inline Tensor conv1d_time(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride) {
    if (x.rank() != 3 || weight.rank() != 3 || weight.dim(2) != x.dim(2) || bias.rank() != 1 ||
        bias.dim(0) != weight.dim(0))
        throw ShapeError("conv1d: input " + to_string(x.shape()) + " does not match weight " + to_string(weight.shape()));
    if (stride == 0) throw std::invalid_argument("conv1d: stride must be >= 1");
    const std::size_t B = x.dim(0), T = x.dim(1), F = x.dim(2), C = weight.dim(0), K = weight.dim(1);
    const std::size_t To = conv_output_length(T, K, stride);
    std::vector<double> out(B * To * C);
    const auto xv = x.values();
    const auto wv = weight.values();
    const auto bv = bias.values();
    const std::size_t window = K * F;  // contiguous in x for a given (b, start)
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t j = 0; j < To; ++j) {
            const double* win = xv.data() + (b * T + j * stride) * F;
            double* o = out.data() + (b * To + j) * C;
            for (std::size_t c = 0; c < C; ++c) {
                const double* w = wv.data() + c * window;
                double acc = bv[c];
                for (std::size_t i = 0; i < window; ++i) acc += w[i] * win[i];
                o[c] = acc;
            }
        }
    return make_result("conv1d_time", Shape{B, To, C}, std::move(out), {x, weight, bias},
                       [B, T, F, C, To, stride, window](Node& self) {
                           Node& nx = *self.inputs[0];
                           Node& nw = *self.inputs[1];
                           Node& nb = *self.inputs[2];
                           if (nx.requires_grad) nx.ensure_grad();
                           if (nw.requires_grad) nw.ensure_grad();
                           if (nb.requires_grad) nb.ensure_grad();
                           for (std::size_t b = 0; b < B; ++b)
                               for (std::size_t j = 0; j < To; ++j) {
                                   const std::size_t base = (b * T + j * stride) * F;
                                   const double* g = self.grad.data() + (b * To + j) * C;
                                   for (std::size_t c = 0; c < C; ++c) {
                                       const double gc = g[c];
                                       if (gc == 0.0) continue;
                                       if (nb.requires_grad) nb.grad[c] += gc;
                                       if (nw.requires_grad) {
                                           double* dw = nw.grad.data() + c * window;
                                           const double* win = nx.value.data() + base;
                                           for (std::size_t i = 0; i < window; ++i) dw[i] += gc * win[i];
                                       }
                                       if (nx.requires_grad) {
                                           double* dx = nx.grad.data() + base;
                                           const double* w = nw.value.data() + c * window;
                                           for (std::size_t i = 0; i < window; ++i) dx[i] += gc * w[i];
                                       }
                                   }
                               }
                       });
}

struct ConvOutput {
    Tensor features;  // [B,T',C]
    Lengths lengths;  // valid output frames per item
};

/// Convolution + ReLU, with per-item output lengths for a padded batch.
inline ConvOutput conv_front_end(const ConvParams& p, const Tensor& x, const Lengths& lengths = {}) {
    Lengths out_lengths;
    for (auto L : lengths) out_lengths.push_back(conv_output_length(L, p.kernel(), p.stride));
    return {relu(conv1d_time(x, p.weight, p.bias, p.stride)), std::move(out_lengths)};
}

}  // namespace snn
