#pragma once

// Central finite-difference validation of tape gradients. Only meaningful for
// graphs built from smooth primitives (no threshold nodes).

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "snn/tensor.hpp"

namespace snn {

namespace detail {
inline void check_epsilon(double epsilon) {
    if (!(epsilon >= 1e-7 && epsilon <= 1e-3))
        throw std::invalid_argument("finite_diff_check: epsilon must lie in [1e-7, 1e-3]");
}
inline double scalar_value(const Tensor& out) {
    if (out.size() != 1) throw ShapeError("finite_diff_check: function output must be scalar, got " + to_string(out.shape()));
    return out.item();
}
}  // namespace detail

/// max_i |analytic_i - central_i| / max(1, |analytic_i|) over every coordinate
/// of every parameter. `f` must rebuild its graph from the parameters on each
/// call; parameters are perturbed in place and restored.
inline double finite_diff_check(const std::function<Tensor()>& f, std::vector<Tensor> params, double epsilon = 1e-5) {
    detail::check_epsilon(epsilon);
    for (auto& p : params) {
        p.set_requires_grad(true);
        p.zero_grad();
    }
    Tensor out = f();
    detail::scalar_value(out);
    out.backward();

    double worst = 0.0;
    for (auto& p : params) {
        std::vector<double> analytic(p.size(), 0.0);
        if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), analytic.begin());
        auto vals = p.mutable_values();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double saved = vals[i];
            double plus = 0.0, minus = 0.0;
            {
                NoGradGuard guard;
                vals[i] = saved + epsilon;
                plus = detail::scalar_value(f());
                vals[i] = saved - epsilon;
                minus = detail::scalar_value(f());
            }
            vals[i] = saved;
            const double numeric = (plus - minus) / (2.0 * epsilon);
            const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

/// Single-input form: f maps `point` (a leaf) to a scalar.
inline double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, Tensor point, double epsilon = 1e-5) {
    return finite_diff_check([&]() { return f(point); }, std::vector<Tensor>{point}, epsilon);
}

}  // namespace snn
