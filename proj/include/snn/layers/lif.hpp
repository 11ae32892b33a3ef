#pragma once

// Recurrent leaky integrate-and-fire layer.
//
//   I[t] = BN(W x[t]) + V s[t-1]
//   u[t] = a (u[t-1] - s[t-1]) + (1 - a) I[t]
//   s[t] = 1[u[t] >= threshold]
//
// with a = sigmoid(alpha_raw) per unit and u, s starting at zero. The spike
// nonlinearity carries the boxcar surrogate on the backward pass, including
// where s[t-1] appears as the soft reset (unless detach_reset is set).

#include <cmath>
#include <string>
#include <vector>

#include "snn/layers/common.hpp"
#include "snn/surrogate.hpp"

namespace snn {

struct LIFParams {
    Tensor W;          // [out, in]
    Tensor V;          // [out, out]
    Tensor alpha_raw;  // [out]
    BatchNormState bn;
    bool use_bn = true;
    SurrogateSpec surrogate;
    bool detach_reset = false;

    static constexpr double kInitialLeak = 0.9;

    static LIFParams init(std::size_t in, std::size_t out, Rng& rng) {
        LIFParams p;
        p.W = init_uniform({out, in}, in, rng);
        p.V = init_uniform({out, out}, out, rng);
        p.alpha_raw = Tensor::full({out}, std::log(kInitialLeak / (1.0 - kInitialLeak)), true);
        p.bn = BatchNormState(out);
        return p;
    }

    std::size_t in_features() const { return W.dim(1); }
    std::size_t units() const { return W.dim(0); }

    std::vector<double> leak() const {
        std::vector<double> a;
        for (double r : alpha_raw.values()) a.push_back(1.0 / (1.0 + std::exp(-r)));
        return a;
    }

    void collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
        out.push_back({prefix + ".W", W});
        out.push_back({prefix + ".V", V});
        out.push_back({prefix + ".alpha_raw", alpha_raw});
        if (use_bn) collect_bn(bn, prefix + ".bn", out);
    }

    LIFParams clone() const {
        LIFParams c = *this;
        c.W = deep_copy(W);
        c.V = deep_copy(V);
        c.alpha_raw = deep_copy(alpha_raw);
        c.bn = deep_copy(bn);
        return c;
    }
};

struct LIFOutput {
    Tensor spikes;      // [B,T,out]
    Tensor potentials;  // [B,T,out], only when requested
};

inline LIFOutput lif_forward_traced(LIFParams& p, const Tensor& x, const Lengths& lengths = {},
                                    bool keep_potentials = true) {
    if (x.rank() != 3 || x.dim(2) != p.in_features())
        throw ShapeError("lif_forward: input " + to_string(x.shape()) + " does not match W " + to_string(p.W.shape()));
    const std::size_t B = x.dim(0), T = x.dim(1), H = p.units();

    Tensor drive = project(x, p.W);
    if (p.use_bn) drive = batchnorm_apply(p.bn, drive, lengths);

    const Tensor alpha = sigmoid(p.alpha_raw);
    const Tensor one_minus_alpha = affine(alpha, -1.0, 1.0);
    const Tensor Vt = transpose(p.V);

    Tensor u = Tensor::zeros({B, H});
    Tensor s = Tensor::zeros({B, H});
    std::vector<Tensor> spikes, potentials;
    spikes.reserve(T);
    potentials.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
        Tensor current = select(drive, 1, t);
        if (t > 0) current = add(current, matmul(s, Vt));
        const Tensor reset = p.detach_reset ? s.detach() : s;
        u = add(mul(sub(u, reset), alpha), mul(current, one_minus_alpha));
        s = heaviside_surrogate(u, p.surrogate);
        spikes.push_back(s);
        if (keep_potentials) potentials.push_back(u);
    }
    LIFOutput out{stack(spikes, 1), {}};
    if (keep_potentials) out.potentials = stack(potentials, 1);
    return out;
}

inline Tensor lif_forward(LIFParams& p, const Tensor& x, const Lengths& lengths = {}) {
    return lif_forward_traced(p, x, lengths, false).spikes;
}

}  // namespace snn
