#pragma once

// Non-gated, nonspiking recurrent layer: y[t] = g(BN(W x[t]) + V y[t-1]).

#include <stdexcept>
#include <string>
#include <vector>

#include "snn/layers/common.hpp"

namespace snn {

enum class Activation { Relu, Tanh, Sigmoid };

inline Activation parse_activation(const std::string& name) {
    if (name == "relu") return Activation::Relu;
    if (name == "tanh") return Activation::Tanh;
    if (name == "sigmoid") return Activation::Sigmoid;
    throw std::invalid_argument("unknown activation '" + name + "' (expected relu, tanh or sigmoid)");
}

inline const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Sigmoid: return "sigmoid";
    }
    return "?";
}

inline Tensor apply_activation(Activation a, const Tensor& x) {
    switch (a) {
        case Activation::Relu: return relu(x);
        case Activation::Tanh: return tanh(x);
        case Activation::Sigmoid: return sigmoid(x);
    }
    throw std::logic_error("bad activation");
}

struct RNNParams {
    Tensor W;  // [out, in]
    Tensor V;  // [out, out]
    BatchNormState bn;
    bool use_bn = true;
    Activation activation = Activation::Relu;

    static RNNParams init(std::size_t in, std::size_t out, Rng& rng, Activation g = Activation::Relu) {
        RNNParams p;
        p.W = init_uniform({out, in}, in, rng);
        p.V = init_uniform({out, out}, out, rng);
        p.bn = BatchNormState(out);
        p.activation = g;
        return p;
    }

    std::size_t in_features() const { return W.dim(1); }
    std::size_t units() const { return W.dim(0); }

    void collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
        out.push_back({prefix + ".W", W});
        out.push_back({prefix + ".V", V});
        if (use_bn) collect_bn(bn, prefix + ".bn", out);
    }

    RNNParams clone() const {
        RNNParams c = *this;
        c.W = deep_copy(W);
        c.V = deep_copy(V);
        c.bn = deep_copy(bn);
        return c;
    }
};

inline Tensor rnn_forward(RNNParams& p, const Tensor& x, const Lengths& lengths = {}) {
    if (x.rank() != 3 || x.dim(2) != p.in_features())
        throw ShapeError("rnn_forward: input " + to_string(x.shape()) + " does not match W " + to_string(p.W.shape()));
    const std::size_t T = x.dim(1);
    Tensor drive = project(x, p.W);
    if (p.use_bn) drive = batchnorm_apply(p.bn, drive, lengths);
    const Tensor Vt = transpose(p.V);

    std::vector<Tensor> outputs;
    outputs.reserve(T);
    Tensor y;
    for (std::size_t t = 0; t < T; ++t) {
        Tensor current = select(drive, 1, t);
        if (t > 0) current = add(current, matmul(y, Vt));
        y = apply_activation(p.activation, current);
        outputs.push_back(y);
    }
    return stack(outputs, 1);
}

}  // namespace snn
