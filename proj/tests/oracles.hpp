#pragma once

// Test-only reference computations. Nothing here goes through the tape; each
// routine is a direct, scalar transcription of the quantity it checks.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct LifProblem {
    std::size_t T = 0, in = 0, H = 0;
    std::vector<double> x;          // [T][in]
    std::vector<double> W;          // [H][in]
    std::vector<double> V;          // [H][H]
    std::vector<double> alpha_raw;  // [H]
    std::vector<double> c;          // loss weight on s, [T][H]
    std::vector<double> d;          // loss weight on u, [T][H]
    double threshold = 1.0, half_width = 0.5, slope = 0.5;
    bool detach_reset = false;
};

struct LifGrads {
    double loss = 0.0;
    std::vector<double> s, u;  // forward traces [T][H]
    std::vector<double> dW, dV, dalpha_raw, dx;
};

/// Unrolled LIF recursion for one sequence (no batch norm) with loss
/// sum(c*s) + sum(d*u); adjoints written out by hand with the boxcar rule.
inline LifGrads lif_unrolled(const LifProblem& p) {
    const std::size_t T = p.T, in = p.in, H = p.H;
    LifGrads g;
    std::vector<double> I(T * H), a(H);
    g.s.assign(T * H, 0.0);
    g.u.assign(T * H, 0.0);
    for (std::size_t h = 0; h < H; ++h) a[h] = sigmoid(p.alpha_raw[h]);
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t h = 0; h < H; ++h) {
            double cur = 0.0;
            for (std::size_t i = 0; i < in; ++i) cur += p.W[h * in + i] * p.x[t * in + i];
            if (t > 0)
                for (std::size_t j = 0; j < H; ++j) cur += p.V[h * H + j] * g.s[(t - 1) * H + j];
            I[t * H + h] = cur;
            const double u_prev = t > 0 ? g.u[(t - 1) * H + h] : 0.0;
            const double s_prev = t > 0 ? g.s[(t - 1) * H + h] : 0.0;
            g.u[t * H + h] = a[h] * (u_prev - s_prev) + (1.0 - a[h]) * cur;
            g.s[t * H + h] = g.u[t * H + h] >= p.threshold ? 1.0 : 0.0;
            g.loss += p.c[t * H + h] * g.s[t * H + h] + p.d[t * H + h] * g.u[t * H + h];
        }

    auto surrogate = [&](double u) { return std::abs(u - p.threshold) <= p.half_width ? p.slope : 0.0; };
    g.dW.assign(H * in, 0.0);
    g.dV.assign(H * H, 0.0);
    g.dx.assign(T * in, 0.0);
    std::vector<double> da(H, 0.0);
    std::vector<double> gu_next(H, 0.0), gI_next(H, 0.0);
    for (std::size_t t = T; t-- > 0;) {
        std::vector<double> gu(H), gI(H);
        for (std::size_t h = 0; h < H; ++h) {
            double gs = p.c[t * H + h];
            if (t + 1 < T) {
                if (!p.detach_reset) gs += -a[h] * gu_next[h];
                for (std::size_t k = 0; k < H; ++k) gs += p.V[k * H + h] * gI_next[k];
            }
            gu[h] = p.d[t * H + h] + gs * surrogate(g.u[t * H + h]) + (t + 1 < T ? a[h] * gu_next[h] : 0.0);
            gI[h] = (1.0 - a[h]) * gu[h];
            const double u_prev = t > 0 ? g.u[(t - 1) * H + h] : 0.0;
            const double s_prev = t > 0 ? g.s[(t - 1) * H + h] : 0.0;
            da[h] += gu[h] * (u_prev - s_prev - I[t * H + h]);
            for (std::size_t i = 0; i < in; ++i) {
                g.dW[h * in + i] += gI[h] * p.x[t * in + i];
                g.dx[t * in + i] += p.W[h * in + i] * gI[h];
            }
            if (t > 0)
                for (std::size_t j = 0; j < H; ++j) g.dV[h * H + j] += gI[h] * g.s[(t - 1) * H + j];
        }
        gu_next = gu;
        gI_next = gI;
    }
    g.dalpha_raw.resize(H);
    for (std::size_t h = 0; h < H; ++h) g.dalpha_raw[h] = da[h] * a[h] * (1.0 - a[h]);
    return g;
}

/// Scalar LIF integration driven by a given stimulus sequence.
struct ScalarTrace {
    std::vector<double> u, s;
};
inline ScalarTrace lif_scalar(const std::vector<double>& stimulus, double alpha, double threshold = 1.0) {
    ScalarTrace tr;
    double u = 0.0, s = 0.0;
    for (double I : stimulus) {
        u = alpha * (u - s) + (1.0 - alpha) * I;
        s = u >= threshold ? 1.0 : 0.0;
        tr.u.push_back(u);
        tr.s.push_back(s);
    }
    return tr;
}

/// -log of the summed probability of every length-T path over V symbols that
/// collapses (merge repeats, drop blank 0) to `target`. lp is [T][V].
inline double ctc_bruteforce(const std::vector<double>& lp, std::size_t T, std::size_t V, const std::vector<int>& target) {
    std::vector<int> path(T, 0);
    double total = 0.0;
    std::size_t combos = 1;
    for (std::size_t t = 0; t < T; ++t) combos *= V;
    for (std::size_t code = 0; code < combos; ++code) {
        std::size_t rem = code;
        for (std::size_t t = 0; t < T; ++t) {
            path[t] = static_cast<int>(rem % V);
            rem /= V;
        }
        std::vector<int> collapsed;
        int prev = -1;
        for (int sym : path) {
            if (sym != prev && sym != 0) collapsed.push_back(sym);
            prev = sym;
        }
        if (collapsed != target) continue;
        double logp = 0.0;
        for (std::size_t t = 0; t < T; ++t) logp += lp[t * V + static_cast<std::size_t>(path[t])];
        total += std::exp(logp);
    }
    return -std::log(total);
}

template <class Seq>
std::size_t edit_distance_recursive(const Seq& a, std::size_t i, const Seq& b, std::size_t j) {
    if (i == 0) return j;
    if (j == 0) return i;
    const std::size_t sub = edit_distance_recursive(a, i - 1, b, j - 1) + (a[i - 1] == b[j - 1] ? 0 : 1);
    const std::size_t del = edit_distance_recursive(a, i - 1, b, j) + 1;
    const std::size_t ins = edit_distance_recursive(a, i, b, j - 1) + 1;
    return std::min({sub, del, ins});
}

/// |X[k]| for k = 0..n/2 by direct summation.
inline std::vector<double> dft_magnitude(const std::vector<double>& x, std::size_t n) {
    std::vector<double> mag(n / 2 + 1);
    for (std::size_t k = 0; k < mag.size(); ++k) {
        std::complex<double> acc = 0.0;
        for (std::size_t i = 0; i < x.size() && i < n; ++i)
            acc += x[i] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * i) / static_cast<double>(n));
        mag[k] = std::abs(acc);
    }
    return mag;
}

/// Central-difference derivative of a scalar function of a vector.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                                            double eps = 1e-6) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + eps;
        const double plus = f(x);
        x[i] = saved - eps;
        const double minus = f(x);
        x[i] = saved;
        g[i] = (plus - minus) / (2.0 * eps);
    }
    return g;
}

}  // namespace oracle
