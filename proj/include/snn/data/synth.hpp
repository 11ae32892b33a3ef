#pragma once

// Synthetic transcription task. Each token id owns a Gaussian prototype
// vector; an utterance is a random token sequence where every token emits a
// contiguous block of frames equal to its prototype plus isotropic noise.
//
// Reproducibility: prototypes come from Rng(seed); utterance i draws from
// Rng(seed XOR (i + 1)), consuming, in order, the token count, then per token
// its id and block length, then per frame the feature noise.

#include <stdexcept>
#include <string>
#include <vector>

#include "snn/config.hpp"
#include "snn/loss/ctc.hpp"
#include "snn/rng.hpp"

namespace snn {

struct SynthSpec {
    std::size_t vocab = 8;  // excluding blank; ids are 1..vocab
    std::size_t tokens_min = 3, tokens_max = 6;
    std::size_t frames_min = 4, frames_max = 8;  // per token
    std::size_t feature_dim = 40;
    double noise = 0.5;
    std::uint64_t seed = 1;

    void validate() const {
        if (vocab < 1 || feature_dim < 1) throw ConfigError("synth: vocab and feature_dim must be >= 1");
        if (tokens_min < 1 || tokens_min > tokens_max) throw ConfigError("synth: token range must be nonempty and positive");
        if (frames_min < 1 || frames_min > frames_max) throw ConfigError("synth: frame range must be nonempty and positive");
        if (!(noise >= 0.0)) throw ConfigError("synth: noise must be >= 0");
    }

    json to_json() const {
        return {{"vocab", vocab},
                {"tokens", {tokens_min, tokens_max}},
                {"frames_per_token", {frames_min, frames_max}},
                {"feature_dim", feature_dim},
                {"noise", noise},
                {"seed", seed}};
    }

    /// Reads the generator fields of `j`; the caller vets unknown keys.
    static SynthSpec from_json(const json& j) {
        SynthSpec s;
        const std::string where = "synth";
        read_opt(j, "vocab", s.vocab, where);
        read_opt(j, "feature_dim", s.feature_dim, where);
        read_opt(j, "noise", s.noise, where);
        read_opt(j, "seed", s.seed, where);
        auto range = [&](const char* key, std::size_t& lo, std::size_t& hi) {
            if (!j.contains(key)) return;
            const auto& r = j.at(key);
            if (!r.is_array() || r.size() != 2) throw ConfigError(where + "." + key + ": expected [min, max]");
            lo = r[0].get<std::size_t>();
            hi = r[1].get<std::size_t>();
        };
        range("tokens", s.tokens_min, s.tokens_max);
        range("frames_per_token", s.frames_min, s.frames_max);
        s.validate();
        return s;
    }
};

struct Utterance {
    std::vector<double> features;  // frames x dim, row-major
    std::size_t frames = 0;
    std::size_t dim = 0;
    TokenSeq tokens;
};

using Dataset = std::vector<Utterance>;

inline std::vector<std::vector<double>> synth_prototypes(const SynthSpec& spec) {
    Rng rng(spec.seed);
    std::vector<std::vector<double>> protos(spec.vocab + 1, std::vector<double>(spec.feature_dim, 0.0));
    for (std::size_t tok = 1; tok <= spec.vocab; ++tok)
        for (auto& v : protos[tok]) v = rng.normal();
    return protos;
}

inline Utterance synth_utterance(const SynthSpec& spec, const std::vector<std::vector<double>>& protos, std::size_t index) {
    Rng rng(spec.seed ^ static_cast<std::uint64_t>(index + 1));
    Utterance u;
    u.dim = spec.feature_dim;
    const auto n_tokens = rng.uniform_int(spec.tokens_min, spec.tokens_max);
    std::vector<std::size_t> blocks;
    for (std::uint64_t i = 0; i < n_tokens; ++i) {
        u.tokens.push_back(static_cast<int>(rng.uniform_int(1, spec.vocab)));
        blocks.push_back(rng.uniform_int(spec.frames_min, spec.frames_max));
    }
    for (std::size_t i = 0; i < u.tokens.size(); ++i) {
        const auto& proto = protos[static_cast<std::size_t>(u.tokens[i])];
        for (std::size_t f = 0; f < blocks[i]; ++f) {
            for (std::size_t d = 0; d < spec.feature_dim; ++d) {
                const double noise = spec.noise > 0.0 ? spec.noise * rng.normal() : 0.0;
                u.features.push_back(proto[d] + noise);
            }
            ++u.frames;
        }
    }
    return u;
}

inline Dataset generate_synthetic(const SynthSpec& spec, std::size_t count) {
    spec.validate();
    if (count < 1) throw std::invalid_argument("generate_synthetic: count must be >= 1");
    const auto protos = synth_prototypes(spec);
    Dataset data;
    data.reserve(count);
    for (std::size_t i = 0; i < count; ++i) data.push_back(synth_utterance(spec, protos, i));
    return data;
}

}  // namespace snn
