#pragma once

// Gradient-norm diagnostics on long sequences. Clipping is forced off and a
// crossed explosion bound is recorded rather than stopping the run, so the
// comparison between variants is not masked.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "snn/training/grid.hpp"

namespace snn {

enum class Variant { NonSpikingRNN, SpikingRNN, LSTM };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::NonSpikingRNN: return "rnn";
        case Variant::SpikingRNN: return "lif";
        case Variant::LSTM: return "lstm";
    }
    return "?";
}

inline Variant parse_variant(const std::string& s) {
    if (s == "rnn") return Variant::NonSpikingRNN;
    if (s == "lif") return Variant::SpikingRNN;
    if (s == "lstm") return Variant::LSTM;
    throw ConfigError("diagnostics: unknown variant '" + s + "' (expected rnn, lif or lstm)");
}

struct DiagnosticsConfig {
    SynthSpec synth = [] {
        SynthSpec s;
        s.tokens_min = s.tokens_max = 25;
        s.frames_min = s.frames_max = 20;  // 500 frames per utterance
        return s;
    }();
    std::size_t utterances = 32;
    std::size_t steps = 200;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::vector<Variant> variants{Variant::NonSpikingRNN, Variant::SpikingRNN, Variant::LSTM};
    TrainConfig train = [] {
        TrainConfig t;
        t.batch_size = 4;
        t.learning_rate = 0.01;  // CTC loss sums over ~250 pooled frames; norms start in the hundreds
        t.encoder.layers = {{LayerKind::LSTM, 32, false}, {LayerKind::LSTM, 32, false}};
        t.encoder.vocab = 9;
        return t;
    }();

    void validate() const {
        synth.validate();
        train.validate();
        if (steps < 1 || utterances < 1) throw ConfigError("diagnostics: steps and utterances must be >= 1");
        if (seeds.empty() || variants.empty()) throw ConfigError("diagnostics: need at least one seed and one variant");
        if (synth.feature_dim != train.encoder.input_dim)
            throw ConfigError("diagnostics: synth.feature_dim must equal encoder.input_dim");
    }

    /// Encoder for a variant: every layer of the base stack becomes that kind.
    EncoderConfig encoder_for(Variant v) const {
        const std::size_t L = train.encoder.layers.size();
        switch (v) {
            case Variant::NonSpikingRNN: return replacement_config(train.encoder, L, false);
            case Variant::SpikingRNN: return replacement_config(train.encoder, L, true);
            case Variant::LSTM: return replacement_config(train.encoder, 0, false);
        }
        throw std::logic_error("bad variant");
    }
};

struct DiagnosticRun {
    Variant variant = Variant::LSTM;
    std::uint64_t seed = 0;
    RunMetrics metrics;
    double initial_norm = 0.0;
    double max_norm = 0.0;
    double median_norm = 0.0;
    bool crossed_bound = false;  // some step norm > explosion_factor * initial
    bool non_finite = false;

    std::string slug() const { return std::string(variant_name(variant)) + "_seed" + std::to_string(seed); }
};

/// Median with NaN treated as +inf so a blown-up trace sorts last.
inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    for (auto& x : v)
        if (std::isnan(x)) x = std::numeric_limits<double>::infinity();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline DiagnosticRun summarize_diagnostic(Variant v, std::uint64_t seed, RunMetrics m, double explosion_factor) {
    DiagnosticRun r;
    r.variant = v;
    r.seed = seed;
    std::vector<double> norms;
    for (const auto& s : m.steps) norms.push_back(s.grad_norm);
    r.initial_norm = m.initial_grad_norm;
    r.max_norm = m.max_grad_norm();
    r.median_norm = median(norms);
    r.non_finite = m.diverged;
    r.crossed_bound = r.non_finite || std::any_of(norms.begin(), norms.end(), [&](double g) { return g > explosion_factor * r.initial_norm; });
    r.metrics = std::move(m);
    return r;
}

struct DiagnosticsResult {
    std::vector<DiagnosticRun> runs;

    const DiagnosticRun* find(Variant v, std::uint64_t seed) const {
        for (const auto& r : runs)
            if (r.variant == v && r.seed == seed) return &r;
        return nullptr;
    }

    /// Tab-separated summary, one line per (variant, seed).
    std::string table() const {
        std::string out = "variant\tseed\tsteps\tinitial_norm\tmedian_norm\tmax_norm\tcrossed_bound\tnon_finite\n";
        char buf[256];
        for (const auto& r : runs) {
            std::snprintf(buf, sizeof buf, "%s\t%llu\t%zu\t%.17g\t%.17g\t%.17g\t%d\t%d\n", variant_name(r.variant),
                          static_cast<unsigned long long>(r.seed), r.metrics.steps.size(), r.initial_norm, r.median_norm, r.max_norm,
                          r.crossed_bound ? 1 : 0, r.non_finite ? 1 : 0);
            out += buf;
        }
        return out;
    }
};

/// Every variant trains from the same seed on the same data (one dataset per
/// seed), without clipping, for at most cfg.steps steps.
inline DiagnosticsResult gradient_diagnostics(const DiagnosticsConfig& cfg, std::size_t jobs = 1) {
    cfg.validate();
    struct Task {
        Variant variant;
        std::size_t seed_index;
    };
    std::vector<Task> tasks;
    for (std::size_t s = 0; s < cfg.seeds.size(); ++s)
        for (Variant v : cfg.variants) tasks.push_back({v, s});

    std::vector<Dataset> data(cfg.seeds.size());
    parallel_for(cfg.seeds.size(), jobs, [&](std::size_t s) {
        SynthSpec spec = cfg.synth;
        spec.seed = cfg.seeds[s];
        data[s] = generate_synthetic(spec, cfg.utterances);
    });

    DiagnosticsResult result;
    result.runs.resize(tasks.size());
    parallel_for(tasks.size(), jobs, [&](std::size_t i) {
        const Task& t = tasks[i];
        TrainConfig tc = cfg.train;
        tc.encoder = cfg.encoder_for(t.variant);
        tc.seed = cfg.seeds[t.seed_index];
        tc.clip.reset();
        tc.stop_on_explosion = false;
        tc.max_steps = cfg.steps;
        const std::size_t per_epoch = (cfg.utterances + tc.batch_size - 1) / tc.batch_size;
        tc.epochs = (cfg.steps + per_epoch - 1) / per_epoch;
        result.runs[i] = summarize_diagnostic(t.variant, tc.seed, train_run(tc, data[t.seed_index]).metrics, tc.explosion_factor);
    });
    return result;
}

/// diagnostics.tsv plus traces/<variant>_seed<s>.txt (the metrics stream).
inline void write_diagnostics(const std::filesystem::path& dir, const DiagnosticsResult& result) {
    std::filesystem::create_directories(dir / "traces");
    std::ofstream table(dir / "diagnostics.tsv");
    table << result.table();
    if (!table) throw std::runtime_error("cannot write " + (dir / "diagnostics.tsv").string());
    for (const auto& r : result.runs) {
        std::ofstream t(dir / "traces" / (r.slug() + ".txt"));
        r.metrics.write_stream(t);
        if (!t) throw std::runtime_error("cannot write trace for " + r.slug());
    }
}

}  // namespace snn
