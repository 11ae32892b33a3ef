#pragma once

// Connectionist temporal classification loss over log-probabilities
// [B,T,V] with blank id 0. Forward/backward recursions run in log space over
// the blank-interleaved label sequence.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "snn/layers/batchnorm.hpp"
#include "snn/tensor.hpp"

namespace snn {

using TokenSeq = std::vector<int>;

inline constexpr int kBlank = 0;

namespace detail {
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}
}  // namespace detail

/// Frames needed to emit `target`: one per token plus a blank between repeats.
inline std::size_t ctc_min_frames(const TokenSeq& target) {
    std::size_t repeats = 0;
    for (std::size_t i = 1; i < target.size(); ++i) repeats += target[i] == target[i - 1] ? 1 : 0;
    return target.size() + repeats;
}

struct CTCItem {
    double loss = 0.0;  // +inf when infeasible
    bool feasible = true;
    std::vector<double> grad;  // d loss / d log_probs, [T,V] flattened, feasible items only
};

/// Negative log-likelihood and its gradient for one sequence. `lp` points at
/// T rows of V log-probabilities.
inline CTCItem ctc_item(const double* lp, std::size_t T, std::size_t V, const TokenSeq& target) {
    using detail::kNegInf;
    using detail::log_add;
    CTCItem item;
    if (T < ctc_min_frames(target) || (T == 0 && !target.empty())) {
        item.loss = std::numeric_limits<double>::infinity();
        item.feasible = false;
        return item;
    }
    item.grad.assign(T * V, 0.0);
    if (T == 0) return item;

    const std::size_t S = 2 * target.size() + 1;
    std::vector<int> ext(S, kBlank);
    for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
    auto can_skip = [&](std::size_t s) { return s >= 2 && ext[s] != kBlank && ext[s] != ext[s - 2]; };

    std::vector<double> alpha(T * S, kNegInf), beta(T * S, kNegInf);
    alpha[0] = lp[kBlank];
    if (S > 1) alpha[1] = lp[ext[1]];
    for (std::size_t t = 1; t < T; ++t) {
        const double* row = lp + t * V;
        for (std::size_t s = 0; s < S; ++s) {
            double a = alpha[(t - 1) * S + s];
            if (s >= 1) a = log_add(a, alpha[(t - 1) * S + s - 1]);
            if (can_skip(s)) a = log_add(a, alpha[(t - 1) * S + s - 2]);
            alpha[t * S + s] = a == kNegInf ? kNegInf : a + row[ext[s]];
        }
    }

    // beta[t][s]: log-probability of completing the labelling from state s
    // after frame t, excluding frame t's own emission.
    beta[(T - 1) * S + S - 1] = 0.0;
    if (S > 1) beta[(T - 1) * S + S - 2] = 0.0;
    for (std::size_t t = T - 1; t-- > 0;) {
        const double* next = lp + (t + 1) * V;
        for (std::size_t s = 0; s < S; ++s) {
            double b = beta[(t + 1) * S + s] + next[ext[s]];
            if (s + 1 < S) b = log_add(b, beta[(t + 1) * S + s + 1] + next[ext[s + 1]]);
            if (s + 2 < S && can_skip(s + 2)) b = log_add(b, beta[(t + 1) * S + s + 2] + next[ext[s + 2]]);
            beta[t * S + s] = b;
        }
    }

    double log_p = alpha[(T - 1) * S + S - 1];
    if (S > 1) log_p = log_add(log_p, alpha[(T - 1) * S + S - 2]);
    if (log_p == kNegInf) {
        item.loss = std::numeric_limits<double>::infinity();
        item.feasible = false;
        item.grad.clear();
        return item;
    }
    item.loss = -log_p;
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t s = 0; s < S; ++s) {
            const double occ = alpha[t * S + s] + beta[t * S + s];
            if (occ == kNegInf) continue;
            item.grad[t * V + ext[s]] -= std::exp(occ - log_p);
        }
    return item;
}

struct CTCResult {
    Tensor loss;                      // scalar: mean over feasible items
    std::vector<double> item_losses;  // +inf marks an infeasible item
    std::vector<bool> feasible;
    bool any_infeasible = false;
};

/// Batch-mean CTC loss. Infeasible targets are reported per item and left out
/// of the mean rather than aborting the batch. The mean sums item losses in
/// ascending order so it does not depend on batch order.
inline CTCResult ctc_loss(const Tensor& log_probs, const std::vector<TokenSeq>& targets, const Lengths& frame_lengths = {}) {
    if (log_probs.rank() != 3) throw ShapeError("ctc_loss: expected [B,T,V] log-probabilities, got " + to_string(log_probs.shape()));
    const std::size_t B = log_probs.dim(0), T = log_probs.dim(1), V = log_probs.dim(2);
    if (targets.size() != B) throw ShapeError("ctc_loss: " + std::to_string(targets.size()) + " targets for batch of " + std::to_string(B));
    if (!frame_lengths.empty() && frame_lengths.size() != B) throw ShapeError("ctc_loss: frame_lengths size mismatch");
    for (const auto& tgt : targets)
        for (int tok : tgt)
            if (tok <= kBlank || static_cast<std::size_t>(tok) >= V)
                throw std::invalid_argument("ctc_loss: token " + std::to_string(tok) + " outside [1, " + std::to_string(V - 1) + "]");

    CTCResult res;
    std::vector<CTCItem> items(B);
    const auto lp = log_probs.values();
    std::size_t feasible_count = 0;
    for (std::size_t b = 0; b < B; ++b) {
        const std::size_t Tb = frame_lengths.empty() ? T : frame_lengths[b];
        if (Tb > T) throw ShapeError("ctc_loss: frame length exceeds padded length");
        items[b] = ctc_item(lp.data() + b * T * V, Tb, V, targets[b]);
        res.item_losses.push_back(items[b].loss);
        res.feasible.push_back(items[b].feasible);
        res.any_infeasible = res.any_infeasible || !items[b].feasible;
        feasible_count += items[b].feasible ? 1 : 0;
    }

    std::vector<double> finite;
    for (std::size_t b = 0; b < B; ++b)
        if (items[b].feasible) finite.push_back(items[b].loss);
    std::sort(finite.begin(), finite.end());
    double total = 0.0;
    for (double v : finite) total += v;
    const double mean = feasible_count ? total / static_cast<double>(feasible_count) : 0.0;
    const double scale = feasible_count ? 1.0 / static_cast<double>(feasible_count) : 0.0;

    // Dense gradient buffer for the backward rule.
    std::vector<double> grad(B * T * V, 0.0);
    for (std::size_t b = 0; b < B; ++b) {
        if (!items[b].feasible) continue;
        const auto& g = items[b].grad;
        std::copy(g.begin(), g.end(), grad.begin() + static_cast<std::ptrdiff_t>(b * T * V));
    }
    res.loss = make_result("ctc_loss", Shape{}, {mean}, {log_probs}, [grad = std::move(grad), scale](Node& self) {
        Node& in = *self.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        const double up = self.grad[0] * scale;
        for (std::size_t i = 0; i < grad.size(); ++i) in.grad[i] += up * grad[i];
    });
    return res;
}

}  // namespace snn
