#pragma once

#include <string>
#include <vector>

#include "snn/layers/common.hpp"

namespace snn {

/// Standard LSTM. Gate blocks are stacked [input, forget, cell, output] along
/// the rows of both weight matrices and the bias.
struct LSTMParams {
    Tensor W_ih;  // [4H, in]
    Tensor W_hh;  // [4H, H]
    Tensor bias;  // [4H]

    static LSTMParams init(std::size_t in, std::size_t hidden, Rng& rng) {
        LSTMParams p;
        p.W_ih = init_uniform({4 * hidden, in}, in, rng);
        p.W_hh = init_uniform({4 * hidden, hidden}, hidden, rng);
        p.bias = init_uniform({4 * hidden}, hidden, rng);
        return p;
    }

    std::size_t in_features() const { return W_ih.dim(1); }
    std::size_t units() const { return W_hh.dim(1); }

    void validate() const {
        const std::size_t H = W_hh.dim(1);
        if (W_ih.rank() != 2 || W_hh.rank() != 2 || bias.rank() != 1 || W_ih.dim(0) != 4 * H ||
            W_hh.dim(0) != 4 * H || bias.dim(0) != 4 * H)
            throw ShapeError("lstm: inconsistent parameter shapes " + to_string(W_ih.shape()) + ", " +
                             to_string(W_hh.shape()) + ", " + to_string(bias.shape()));
    }

    void collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
        out.push_back({prefix + ".W_ih", W_ih});
        out.push_back({prefix + ".W_hh", W_hh});
        out.push_back({prefix + ".bias", bias});
    }

    LSTMParams clone() const { return {deep_copy(W_ih), deep_copy(W_hh), deep_copy(bias)}; }
};

inline Tensor lstm_forward(const LSTMParams& p, const Tensor& x, const Lengths& = {}) {
    p.validate();
    if (x.rank() != 3 || x.dim(2) != p.in_features())
        throw ShapeError("lstm_forward: input " + to_string(x.shape()) + " does not match W_ih " + to_string(p.W_ih.shape()));
    const std::size_t B = x.dim(0), T = x.dim(1), H = p.units();
    const Tensor gates_x = add(project(x, p.W_ih), p.bias);
    const Tensor Ut = transpose(p.W_hh);

    Tensor h = Tensor::zeros({B, H});
    Tensor c = Tensor::zeros({B, H});
    std::vector<Tensor> outputs;
    outputs.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
        Tensor z = select(gates_x, 1, t);
        if (t > 0) z = add(z, matmul(h, Ut));
        const Tensor i = sigmoid(slice(z, 1, 0, H));
        const Tensor f = sigmoid(slice(z, 1, H, H));
        const Tensor g = tanh(slice(z, 1, 2 * H, H));
        const Tensor o = sigmoid(slice(z, 1, 3 * H, H));
        c = t > 0 ? add(mul(f, c), mul(i, g)) : mul(i, g);
        h = mul(o, tanh(c));
        outputs.push_back(h);
    }
    return stack(outputs, 1);
}

}  // namespace snn
