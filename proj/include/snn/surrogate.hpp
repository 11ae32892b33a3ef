#pragma once

#include <cmath>
#include <stdexcept>

#include "snn/tensor.hpp"

namespace snn {

/// Spike threshold and the boxcar pseudo-derivative used in its place on the
/// backward pass: slope where |u - threshold| <= half_width, zero elsewhere.
struct SurrogateSpec {
    double threshold = 1.0;
    double half_width = 0.5;
    double slope = 0.5;

    void validate() const {
        if (!(half_width > 0.0)) throw std::invalid_argument("surrogate: half_width must be > 0");
        if (!(slope >= 0.0)) throw std::invalid_argument("surrogate: slope must be >= 0");
        if (!std::isfinite(threshold)) throw std::invalid_argument("surrogate: threshold must be finite");
    }

    double forward(double u) const { return u >= threshold ? 1.0 : 0.0; }
    double derivative(double u) const { return std::abs(u - threshold) <= half_width ? slope : 0.0; }
};

/// Heaviside step on the forward pass, boxcar surrogate on the backward pass.
inline Tensor heaviside_surrogate(const Tensor& u, const SurrogateSpec& spec) {
    spec.validate();
    const std::size_t n = u.size();
    std::vector<double> out(n);
    const auto uv = u.values();
    for (std::size_t i = 0; i < n; ++i) out[i] = spec.forward(uv[i]);
    return make_result("heaviside_surrogate", u.shape(), std::move(out), {u}, [n, spec](Node& self) {
        Node& in = *self.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) in.grad[i] += self.grad[i] * spec.derivative(in.value[i]);
    });
}

}  // namespace snn
