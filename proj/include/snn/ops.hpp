#pragma once

// Differentiable primitives over snn::Tensor. Everything computes in float64.
//
// Binary elementwise ops accept either equal shapes or a right operand whose
// shape is a suffix of the left one (leading-axis broadcast, e.g. [B,H] + [H]).

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "snn/tensor.hpp"

namespace snn {

namespace detail {

inline bool is_suffix(const Shape& big, const Shape& small) {
    if (small.size() > big.size()) return false;
    return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

inline std::string shape_msg(const char* op, const Tensor& a, const Tensor& b) {
    return std::string(op) + ": incompatible shapes " + to_string(a.shape()) + " and " + to_string(b.shape());
}

// Shared skeleton for add/sub/mul with suffix broadcast of `b`.
template <class Fwd, class GradA, class GradB>
Tensor binary_broadcast(const char* op, const Tensor& a, const Tensor& b, Fwd fwd, GradA ga, GradB gb) {
    if (!is_suffix(a.shape(), b.shape())) throw ShapeError(shape_msg(op, a, b));
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    std::vector<double> out(n);
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[i], bv[i % m]);
    return make_result(op, a.shape(), std::move(out), {a, b}, [n, m, ga, gb](Node& self) {
        Node& na = *self.inputs[0];
        Node& nb = *self.inputs[1];
        if (na.requires_grad) {
            na.ensure_grad();
            for (std::size_t i = 0; i < n; ++i)
                na.grad[i] += ga(self.grad[i], na.value[i], nb.value[i % m]);
        }
        if (nb.requires_grad) {
            nb.ensure_grad();
            for (std::size_t i = 0; i < n; ++i)
                nb.grad[i % m] += gb(self.grad[i], na.value[i], nb.value[i % m]);
        }
    });
}

template <class Fwd, class Deriv>
Tensor unary(const char* op, const Tensor& x, Fwd fwd, Deriv deriv_from_in_out) {
    const std::size_t n = x.size();
    std::vector<double> out(n);
    const auto xv = x.values();
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(xv[i]);
    return make_result(op, x.shape(), std::move(out), {x}, [n, deriv_from_in_out](Node& self) {
        Node& in = *self.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        for (std::size_t i = 0; i < n; ++i)
            in.grad[i] += self.grad[i] * deriv_from_in_out(in.value[i], self.value[i]);
    });
}

inline std::size_t outer_count(const Shape& s, std::size_t axis) {
    std::size_t r = 1;
    for (std::size_t i = 0; i < axis; ++i) r *= s[i];
    return r;
}
inline std::size_t inner_count(const Shape& s, std::size_t axis) {
    std::size_t r = 1;
    for (std::size_t i = axis + 1; i < s.size(); ++i) r *= s[i];
    return r;
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
    return detail::binary_broadcast(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double g, double, double) { return g; }, [](double g, double, double) { return g; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    return detail::binary_broadcast(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double g, double, double) { return g; }, [](double g, double, double) { return -g; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    return detail::binary_broadcast(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double g, double, double y) { return g * y; }, [](double g, double x, double) { return g * x; });
}

/// scale * x + shift, with constant scalars.
inline Tensor affine(const Tensor& x, double scale, double shift = 0.0) {
    return detail::unary(
        "affine", x, [scale, shift](double v) { return scale * v + shift; },
        [scale](double, double) { return scale; });
}

inline Tensor sigmoid(const Tensor& x) {
    return detail::unary(
        "sigmoid", x,
        [](double v) {
            // Split by sign so exp never overflows.
            if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh(const Tensor& x) {
    return detail::unary(
        "tanh", x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

inline Tensor relu(const Tensor& x) {
    return detail::unary(
        "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Tensor exp(const Tensor& x) {
    return detail::unary(
        "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

inline Tensor log(const Tensor& x) {
    for (double v : x.values()) {
        if (!(v > 0.0)) throw DomainError("log: non-positive input " + std::to_string(v));
    }
    return detail::unary(
        "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

inline Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.values()) s += v;
    const std::size_t n = x.size();
    return make_result("sum", Shape{}, {s}, {x}, [n](Node& self) {
        Node& in = *self.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) in.grad[i] += self.grad[0];
    });
}

inline Tensor mean(const Tensor& x) {
    if (x.size() == 0) throw ShapeError("mean: empty tensor");
    return affine(sum(x), 1.0 / static_cast<double>(x.size()));
}

/// [M,K] x [K,N] -> [M,N].
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) throw ShapeError(detail::shape_msg("matmul", a, b));
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(m * n, 0.0);
    const double* av = a.values().data();
    const double* bv = b.values().data();
    for (std::size_t i = 0; i < m; ++i) {
        double* row = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = bv + p * n;
            for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
        }
    }
    return make_result("matmul", Shape{m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
        Node& na = *self.inputs[0];
        Node& nb = *self.inputs[1];
        const double* g = self.grad.data();
        if (na.requires_grad) {
            na.ensure_grad();
            // dA = G B^T
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double* brow = nb.value.data() + p * n;
                    const double* grow = g + i * n;
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    na.grad[i * k + p] += acc;
                }
        }
        if (nb.requires_grad) {
            nb.ensure_grad();
            // dB = A^T G
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double aip = na.value[i * k + p];
                    if (aip == 0.0) continue;
                    double* brow = nb.grad.data() + p * n;
                    const double* grow = g + i * n;
                    for (std::size_t j = 0; j < n; ++j) brow[j] += aip * grow[j];
                }
        }
    });
}

inline Tensor transpose(const Tensor& x) {
    if (x.rank() != 2) throw ShapeError("transpose: expected rank 2, got " + to_string(x.shape()));
    const std::size_t r = x.dim(0), c = x.dim(1);
    std::vector<double> out(r * c);
    const auto xv = x.values();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xv[i * c + j];
    return make_result("transpose", Shape{c, r}, std::move(out), {x}, [r, c](Node& self) {
        Node& in = *self.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) in.grad[i * c + j] += self.grad[j * r + i];
    });
}

inline Tensor reshape(const Tensor& x, Shape shape) {
    if (numel(shape) != x.size())
        throw ShapeError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
    std::vector<double> out(x.values().begin(), x.values().end());
    const std::size_t n = x.size();
    return make_result("reshape", std::move(shape), std::move(out), {x}, [n](Node& self) {
        Node& in = *self.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) in.grad[i] += self.grad[i];
    });
}

/// Elements [start, start+length) along `axis`.
inline Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
    if (axis >= x.rank() || start + length > x.dim(axis) || length == 0) {
        throw ShapeError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") on axis " + std::to_string(axis) + " of " + to_string(x.shape()));
    }
    const std::size_t outer = detail::outer_count(x.shape(), axis);
    const std::size_t inner = detail::inner_count(x.shape(), axis);
    const std::size_t extent = x.dim(axis);
    Shape shape = x.shape();
    shape[axis] = length;
    std::vector<double> out(outer * length * inner);
    const auto xv = x.values();
    for (std::size_t o = 0; o < outer; ++o)
        std::copy_n(xv.begin() + (o * extent + start) * inner, length * inner, out.begin() + o * length * inner);
    return make_result("slice", std::move(shape), std::move(out), {x},
                       [outer, inner, extent, start, length](Node& self) {
                           Node& in = *self.inputs[0];
                           if (!in.requires_grad) return;
                           in.ensure_grad();
                           for (std::size_t o = 0; o < outer; ++o) {
                               double* dst = in.grad.data() + (o * extent + start) * inner;
                               const double* src = self.grad.data() + o * length * inner;
                               for (std::size_t i = 0; i < length * inner; ++i) dst[i] += src[i];
                           }
                       });
}

/// Index `index` along `axis`, dropping that axis.
inline Tensor select(const Tensor& x, std::size_t axis, std::size_t index) {
    Tensor s = slice(x, axis, index, 1);
    Shape shape = x.shape();
    shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
    // Re-label the slice node's shape in place: same storage order, no copy.
    s.node()->shape = std::move(shape);
    return s;
}

inline Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape& ref = parts.front().shape();
    if (axis >= ref.size()) throw ShapeError("concat: axis out of range for " + to_string(ref));
    std::vector<std::size_t> extents;
    std::size_t total = 0;
    for (const auto& p : parts) {
        Shape a = p.shape(), b = ref;
        if (a.size() != b.size()) throw ShapeError(detail::shape_msg("concat", parts.front(), p));
        a[axis] = b[axis] = 0;
        if (a != b) throw ShapeError(detail::shape_msg("concat", parts.front(), p));
        extents.push_back(p.dim(axis));
        total += p.dim(axis);
    }
    const std::size_t outer = detail::outer_count(ref, axis);
    const std::size_t inner = detail::inner_count(ref, axis);
    Shape shape = ref;
    shape[axis] = total;
    std::vector<double> out(outer * total * inner);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto pv = parts[k].values();
        const std::size_t ext = extents[k];
        for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(pv.begin() + o * ext * inner, ext * inner, out.begin() + (o * total + offset) * inner);
        offset += ext;
    }
    return make_result("concat", std::move(shape), std::move(out), parts,
                       [outer, inner, total, extents](Node& self) {
                           std::size_t off = 0;
                           for (std::size_t k = 0; k < extents.size(); ++k) {
                               Node& in = *self.inputs[k];
                               const std::size_t ext = extents[k];
                               if (in.requires_grad) {
                                   in.ensure_grad();
                                   for (std::size_t o = 0; o < outer; ++o) {
                                       const double* src = self.grad.data() + (o * total + off) * inner;
                                       double* dst = in.grad.data() + o * ext * inner;
                                       for (std::size_t i = 0; i < ext * inner; ++i) dst[i] += src[i];
                                   }
                               }
                               off += ext;
                           }
                       });
}

/// Stacks equal-shaped tensors along a new axis.
inline Tensor stack(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("stack: no inputs");
    std::vector<Tensor> expanded;
    expanded.reserve(parts.size());
    for (const auto& p : parts) {
        Shape s = p.shape();
        if (axis > s.size()) throw ShapeError("stack: axis out of range for " + to_string(s));
        s.insert(s.begin() + static_cast<std::ptrdiff_t>(axis), 1);
        expanded.push_back(reshape(p, std::move(s)));
    }
    return concat(expanded, axis);
}

/// Numerically stable log-softmax over the last axis.
inline Tensor log_softmax(const Tensor& x) {
    if (x.rank() == 0) throw ShapeError("log_softmax: needs at least one axis");
    const std::size_t k = x.shape().back();
    const std::size_t rows = x.size() / k;
    std::vector<double> out(x.size());
    const auto xv = x.values();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = xv.data() + r * k;
        const double mx = *std::max_element(in, in + k);
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += std::exp(in[j] - mx);
        const double lse = mx + std::log(s);
        for (std::size_t j = 0; j < k; ++j) out[r * k + j] = in[j] - lse;
    }
    return make_result("log_softmax", x.shape(), std::move(out), {x}, [rows, k](Node& self) {
        Node& in = *self.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            const double* g = self.grad.data() + r * k;
            const double* y = self.value.data() + r * k;
            double gs = 0.0;
            for (std::size_t j = 0; j < k; ++j) gs += g[j];
            for (std::size_t j = 0; j < k; ++j) in.grad[r * k + j] += g[j] - std::exp(y[j]) * gs;
        }
    });
}

/// Reverses axis 1 of a [B,T,F] tensor within each item's first lengths[b]
/// frames; frames past the length stay where they are.
inline Tensor reverse_time(const Tensor& x, const std::vector<std::size_t>& lengths) {
    if (x.rank() != 3 || lengths.size() != x.dim(0))
        throw ShapeError("reverse_time: expected [B,T,F] with B lengths, got " + to_string(x.shape()));
    const std::size_t B = x.dim(0), T = x.dim(1), F = x.dim(2);
    std::vector<std::size_t> src(B * T);
    for (std::size_t b = 0; b < B; ++b) {
        const std::size_t L = std::min(lengths[b], T);
        for (std::size_t t = 0; t < T; ++t) src[b * T + t] = b * T + (t < L ? L - 1 - t : t);
    }
    std::vector<double> out(x.size());
    const auto xv = x.values();
    for (std::size_t r = 0; r < B * T; ++r) std::copy_n(xv.begin() + src[r] * F, F, out.begin() + r * F);
    return make_result("reverse_time", x.shape(), std::move(out), {x}, [src, F](Node& self) {
        Node& in = *self.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        for (std::size_t r = 0; r < src.size(); ++r)
            for (std::size_t f = 0; f < F; ++f) in.grad[src[r] * F + f] += self.grad[r * F + f];
    });
}

}  // namespace snn
