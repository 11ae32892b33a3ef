#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

#include "snn/data/synth.hpp"
#include "snn/layers/batchnorm.hpp"

namespace snn {

struct PaddedBatch {
    Tensor features;  // [B, T_max, dim], zero past each length
    Lengths frame_lengths;
    std::vector<TokenSeq> targets;
    std::vector<std::size_t> target_lengths;

    std::size_t size() const { return frame_lengths.size(); }
};

inline PaddedBatch pad_batch(std::span<const Utterance* const> items) {
    if (items.empty()) throw std::invalid_argument("pad_batch: no items");
    const std::size_t dim = items.front()->dim;
    std::size_t t_max = 0;
    for (const auto* u : items) {
        if (u->dim != dim) throw ShapeError("pad_batch: feature dims " + std::to_string(dim) + " and " + std::to_string(u->dim) + " differ");
        t_max = std::max(t_max, u->frames);
    }
    const std::size_t B = items.size();
    std::vector<double> values(B * t_max * dim, 0.0);
    PaddedBatch batch;
    for (std::size_t b = 0; b < B; ++b) {
        const auto* u = items[b];
        std::copy(u->features.begin(), u->features.end(), values.begin() + static_cast<std::ptrdiff_t>(b * t_max * dim));
        batch.frame_lengths.push_back(u->frames);
        batch.targets.push_back(u->tokens);
        batch.target_lengths.push_back(u->tokens.size());
    }
    batch.features = Tensor({B, t_max, dim}, std::move(values));
    return batch;
}

inline PaddedBatch pad_batch(const std::vector<Utterance>& items) {
    std::vector<const Utterance*> ptrs;
    for (const auto& u : items) ptrs.push_back(&u);
    return pad_batch(std::span<const Utterance* const>(ptrs));
}

inline std::vector<Utterance> unpad(const PaddedBatch& batch) {
    const std::size_t T = batch.features.dim(1), dim = batch.features.dim(2);
    const auto v = batch.features.values();
    std::vector<Utterance> out;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        Utterance u;
        u.frames = batch.frame_lengths[b];
        u.dim = dim;
        u.tokens = batch.targets[b];
        const auto begin = v.begin() + static_cast<std::ptrdiff_t>(b * T * dim);
        u.features.assign(begin, begin + static_cast<std::ptrdiff_t>(u.frames * dim));
        out.push_back(std::move(u));
    }
    return out;
}

}  // namespace snn
