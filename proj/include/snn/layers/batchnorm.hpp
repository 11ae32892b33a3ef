#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "snn/tensor.hpp"

namespace snn {

using Lengths = std::vector<std::size_t>;

enum class Mode { Train, Eval };

/// Per-feature batch normalization state. gamma and beta are trainable;
/// running statistics are buffers updated in train mode.
struct BatchNormState {
    Tensor gamma;
    Tensor beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double momentum = 0.1;
    double eps = 1e-5;
    Mode mode = Mode::Train;

    BatchNormState() = default;
    explicit BatchNormState(std::size_t features)
        : gamma(Tensor::full({features}, 1.0, true)),
          beta(Tensor::zeros({features}, true)),
          running_mean(features, 0.0),
          running_var(features, 1.0) {}

    std::size_t features() const { return running_mean.size(); }
};

namespace detail {
// Valid (b, t) frame flags for a [B,T,...] tensor; empty lengths means all valid.
inline std::vector<char> frame_mask(std::size_t B, std::size_t T, const Lengths& lengths) {
    std::vector<char> mask(B * T, 1);
    if (lengths.empty()) return mask;
    if (lengths.size() != B) throw ShapeError("mask: expected " + std::to_string(B) + " lengths, got " + std::to_string(lengths.size()));
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = lengths[b]; t < T; ++t) mask[b * T + t] = 0;
    return mask;
}
}  // namespace detail

/// Normalizes z [B,T,F] per feature. Train mode uses statistics over the
/// valid frames only and updates the running estimates; eval mode uses the
/// running estimates. Padded frames come out as zero and carry no gradient.
inline Tensor batchnorm_apply(BatchNormState& state, const Tensor& z, const Lengths& lengths = {}) {
    if (z.rank() != 3 || z.dim(2) != state.features())
        throw ShapeError("batchnorm: expected [B,T," + std::to_string(state.features()) + "], got " + to_string(z.shape()));
    if (!(state.eps >= 0.0)) throw std::invalid_argument("batchnorm: eps must be >= 0");
    const std::size_t B = z.dim(0), T = z.dim(1), F = z.dim(2);
    const auto mask = detail::frame_mask(B, T, lengths);
    std::size_t count = 0;
    for (char m : mask) count += m ? 1 : 0;

    std::vector<double> mean(F, 0.0), var(F, 0.0);
    const auto zv = z.values();
    const bool train = state.mode == Mode::Train;
    if (train) {
        if (count < 2) throw std::invalid_argument("batchnorm: train mode needs at least 2 valid frames, got " + std::to_string(count));
        for (std::size_t r = 0; r < B * T; ++r) {
            if (!mask[r]) continue;
            for (std::size_t f = 0; f < F; ++f) mean[f] += zv[r * F + f];
        }
        for (auto& m : mean) m /= static_cast<double>(count);
        for (std::size_t r = 0; r < B * T; ++r) {
            if (!mask[r]) continue;
            for (std::size_t f = 0; f < F; ++f) {
                const double d = zv[r * F + f] - mean[f];
                var[f] += d * d;
            }
        }
        for (auto& v : var) v /= static_cast<double>(count);
        const double unbias = static_cast<double>(count) / static_cast<double>(count - 1);
        for (std::size_t f = 0; f < F; ++f) {
            if (var[f] == 0.0 && state.eps == 0.0)
                throw DomainError("batchnorm: zero batch variance with eps = 0 in feature " + std::to_string(f));
            state.running_mean[f] = (1.0 - state.momentum) * state.running_mean[f] + state.momentum * mean[f];
            state.running_var[f] = (1.0 - state.momentum) * state.running_var[f] + state.momentum * var[f] * unbias;
        }
    } else {
        mean = state.running_mean;
        var = state.running_var;
    }

    std::vector<double> inv_std(F);
    for (std::size_t f = 0; f < F; ++f) inv_std[f] = 1.0 / std::sqrt(var[f] + state.eps);

    std::vector<double> xhat(z.size(), 0.0), out(z.size(), 0.0);
    const auto g = state.gamma.values();
    const auto b = state.beta.values();
    for (std::size_t r = 0; r < B * T; ++r) {
        if (!mask[r]) continue;
        for (std::size_t f = 0; f < F; ++f) {
            const std::size_t i = r * F + f;
            xhat[i] = (zv[i] - mean[f]) * inv_std[f];
            out[i] = g[f] * xhat[i] + b[f];
        }
    }

    const double n = static_cast<double>(count);
    return make_result(
        "batchnorm", z.shape(), std::move(out), {z, state.gamma, state.beta},
        [mask, xhat = std::move(xhat), inv_std, train, n, F](Node& self) {
            Node& nz = *self.inputs[0];
            Node& ng = *self.inputs[1];
            Node& nb = *self.inputs[2];
            const std::size_t rows = mask.size();
            std::vector<double> sum_dy(F, 0.0), sum_dy_xhat(F, 0.0);
            for (std::size_t r = 0; r < rows; ++r) {
                if (!mask[r]) continue;
                for (std::size_t f = 0; f < F; ++f) {
                    const std::size_t i = r * F + f;
                    sum_dy[f] += self.grad[i];
                    sum_dy_xhat[f] += self.grad[i] * xhat[i];
                }
            }
            if (ng.requires_grad) {
                ng.ensure_grad();
                for (std::size_t f = 0; f < F; ++f) ng.grad[f] += sum_dy_xhat[f];
            }
            if (nb.requires_grad) {
                nb.ensure_grad();
                for (std::size_t f = 0; f < F; ++f) nb.grad[f] += sum_dy[f];
            }
            if (!nz.requires_grad) return;
            nz.ensure_grad();
            for (std::size_t r = 0; r < rows; ++r) {
                if (!mask[r]) continue;
                for (std::size_t f = 0; f < F; ++f) {
                    const std::size_t i = r * F + f;
                    const double gamma = ng.value[f];
                    if (train) {
                        nz.grad[i] += gamma * inv_std[f] / n *
                                      (n * self.grad[i] - sum_dy[f] - xhat[i] * sum_dy_xhat[f]);
                    } else {
                        nz.grad[i] += gamma * inv_std[f] * self.grad[i];
                    }
                }
            }
        });
}

}  // namespace snn
