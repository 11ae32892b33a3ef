#pragma once

// Full-BPTT training with plain SGD and CTC loss, plus corpus evaluation.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "snn/data/batch.hpp"
#include "snn/layers/encoder.hpp"
#include "snn/loss/metrics.hpp"

namespace snn {

struct TrainConfig {
    double learning_rate = 1.0;
    std::size_t batch_size = 16;
    std::size_t epochs = 10;
    std::optional<double> clip;  // global L2 norm bound; off when empty
    std::uint64_t seed = 1;
    EncoderConfig encoder;
    double explosion_factor = 1e3;  // bound = factor * first-step grad norm
    bool stop_on_explosion = true;   // false: only non-finite values stop a run
    std::optional<std::size_t> max_steps;
    std::size_t eval_batch_size = 32;
    Prior prior = Prior::Uniform;

    void validate() const {
        if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
            throw ConfigError("train: learning_rate must be finite and >= 0");
        if (batch_size < 1 || eval_batch_size < 1) throw ConfigError("train: batch sizes must be >= 1");
        if (clip && !(*clip > 0.0)) throw ConfigError("train: clip must be > 0 when set");
        if (!(explosion_factor > 0.0)) throw ConfigError("train: explosion_factor must be > 0");
        encoder.validate();
    }

    /// Optimisation fields only; the encoder lives in its own config section.
    json to_json() const {
        json j{{"learning_rate", learning_rate},
               {"batch_size", batch_size},
               {"epochs", epochs},
               {"seed", seed},
               {"explosion_factor", explosion_factor},
               {"stop_on_explosion", stop_on_explosion},
               {"eval_batch_size", eval_batch_size},
               {"prior", prior == Prior::Uniform ? "uniform" : "jeffreys"}};
        j["clip"] = clip ? json(*clip) : json(nullptr);
        j["max_steps"] = max_steps ? json(*max_steps) : json(nullptr);
        return j;
    }

    /// Fills the optimisation fields from `j`, keeping `encoder` as is.
    void read_json(const json& j) {
        const std::string where = "train";
        check_keys(j, {"learning_rate", "batch_size", "epochs", "clip", "seed", "explosion_factor", "stop_on_explosion",
                       "max_steps", "eval_batch_size", "prior"},
                   where);
        read_opt(j, "learning_rate", learning_rate, where);
        read_opt(j, "batch_size", batch_size, where);
        read_opt(j, "epochs", epochs, where);
        read_opt(j, "seed", seed, where);
        read_opt(j, "explosion_factor", explosion_factor, where);
        read_opt(j, "stop_on_explosion", stop_on_explosion, where);
        read_opt(j, "eval_batch_size", eval_batch_size, where);
        auto nullable = [&](const char* key, auto& out) {
            if (!j.contains(key)) return;
            if (j.at(key).is_null()) {
                out.reset();
                return;
            }
            typename std::decay_t<decltype(out)>::value_type v{};
            read_opt(j, key, v, where);
            out = v;
        };
        nullable("clip", clip);
        nullable("max_steps", max_steps);
        if (j.contains("prior")) {
            std::string p;
            read_opt(j, "prior", p, where);
            if (p == "uniform") prior = Prior::Uniform;
            else if (p == "jeffreys") prior = Prior::Jeffreys;
            else throw ConfigError(where + ".prior: expected 'uniform' or 'jeffreys', got '" + p + "'");
        }
    }
};

struct StepMetrics {
    std::size_t step = 0;
    double loss = 0.0;
    double grad_norm = 0.0;
    double spike_rate = 0.0;  // mean over LIF layers, 0 without any
};

struct EpochMetrics {
    std::size_t epoch = 0;  // 0 is the untrained control evaluation
    std::size_t after_step = 0;
    double mean_loss = 0.0;
    std::optional<ErrorRateReport> eval;
};

struct RunMetrics {
    std::vector<StepMetrics> steps;
    std::vector<EpochMetrics> epochs;
    std::vector<double> layer_spike_rates;  // last step, per layer (NaN for non-LIF)
    bool diverged = false;
    std::string divergence_reason;
    double initial_grad_norm = 0.0;

    double max_grad_norm() const {
        double m = 0.0;
        for (const auto& s : steps) m = std::max(m, s.grad_norm);
        if (std::any_of(steps.begin(), steps.end(), [](const StepMetrics& s) { return !std::isfinite(s.grad_norm); }))
            return std::numeric_limits<double>::infinity();
        return m;
    }

    /// Metrics stream: `step loss grad_norm spike_rate` per step and
    /// `epoch e mean_loss k n rate low high` per epoch (e = 0 is the control).
    void write_stream(std::ostream& os) const {
        char buf[256];
        std::size_t next_epoch = 0;
        auto flush_epochs = [&](std::size_t upto_step) {
            while (next_epoch < epochs.size() && epochs[next_epoch].after_step <= upto_step) {
                const auto& e = epochs[next_epoch++];
                std::snprintf(buf, sizeof buf, "epoch %zu %.17g", e.epoch, e.mean_loss);
                os << buf;
                if (e.eval) os << ' ' << e.eval->to_line();
                os << '\n';
            }
        };
        flush_epochs(0);
        for (const auto& s : steps) {
            std::snprintf(buf, sizeof buf, "%zu %.17g %.17g %.17g\n", s.step, s.loss, s.grad_norm, s.spike_rate);
            os << buf;
            flush_epochs(s.step);
        }
        flush_epochs(std::numeric_limits<std::size_t>::max());
        if (diverged) os << "diverged " << divergence_reason << '\n';
    }
};

inline double global_grad_norm(const std::vector<NamedTensor>& params) {
    double sq = 0.0;
    for (const auto& p : params)
        for (double g : p.tensor.grad()) sq += g * g;
    return std::sqrt(sq);
}

struct SgdResult {
    double grad_norm = 0.0;  // before clipping
    double applied_norm = 0.0;
    bool diverged = false;
};

/// params <- params - lr * grads, after scaling grads to global norm <= clip.
/// Non-finite gradients leave every parameter untouched and flag divergence.
inline SgdResult sgd_step(std::vector<NamedTensor>& params, double lr, std::optional<double> clip = std::nullopt) {
    SgdResult r;
    r.grad_norm = global_grad_norm(params);
    if (!std::isfinite(r.grad_norm)) {
        r.diverged = true;
        r.applied_norm = r.grad_norm;
        return r;
    }
    double scale = 1.0;
    if (clip && r.grad_norm > *clip) scale = *clip / r.grad_norm;
    r.applied_norm = r.grad_norm * scale;
    for (auto& p : params) {
        if (!p.tensor.has_grad()) continue;
        auto v = p.tensor.mutable_values();
        const auto g = p.tensor.grad();
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * (scale * g[i]);
    }
    return r;
}

struct EvalResult {
    ErrorRateReport report;
    double mean_loss = 0.0;
    std::vector<TokenSeq> hypotheses;
};

inline EvalResult evaluate(Encoder& enc, const Dataset& data, std::size_t batch_size = 32, Prior prior = Prior::Uniform) {
    if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
    enc.set_mode(Mode::Eval);
    NoGradGuard no_grad;
    EvalResult res;
    std::vector<TokenSeq> refs;
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        std::vector<const Utterance*> items;
        for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) items.push_back(&data[i]);
        const PaddedBatch batch = pad_batch(items);
        const EncoderOutput out = encoder_forward(enc, batch.features, batch.frame_lengths);
        const CTCResult ctc = ctc_loss(out.log_probs, batch.targets, out.lengths);
        for (std::size_t b = 0; b < items.size(); ++b)
            if (ctc.feasible[b]) {
                loss_sum += ctc.item_losses[b];
                ++loss_count;
            }
        auto hyps = ctc_greedy_decode(out.log_probs, out.lengths);
        for (std::size_t b = 0; b < items.size(); ++b) {
            refs.push_back(items[b]->tokens);
            res.hypotheses.push_back(std::move(hyps[b]));
        }
    }
    enc.set_mode(Mode::Train);
    res.report = corpus_error_rate(refs, res.hypotheses, 0.95, prior);
    res.mean_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : std::numeric_limits<double>::infinity();
    return res;
}

struct TrainResult {
    RunMetrics metrics;
    Encoder encoder;  // final parameters (or the last finite ones on divergence)
};

using StepCallback = std::function<void(const StepMetrics&)>;

/// Trains from scratch. The untrained model is evaluated first (epoch 0) when
/// a test set is given, then once per epoch.
inline TrainResult train_run(const TrainConfig& config, const Dataset& train, const Dataset* test = nullptr,
                             const StepCallback& on_step = {}) {
    config.validate();
    if (train.empty()) throw std::invalid_argument("train_run: empty training set");
    for (const auto& u : train)
        if (u.dim != config.encoder.input_dim)
            throw std::invalid_argument("train_run: utterance dim " + std::to_string(u.dim) + " != encoder input_dim " +
                                        std::to_string(config.encoder.input_dim));

    Rng rng(config.seed);
    TrainResult result{RunMetrics{}, Encoder::init(config.encoder, rng)};
    Encoder& enc = result.encoder;
    RunMetrics& m = result.metrics;
    auto params = enc.parameters();

    if (test) {
        const auto control = evaluate(enc, *test, config.eval_batch_size, config.prior);
        m.epochs.push_back({0, 0, control.mean_loss, control.report});
    }

    std::vector<std::size_t> order(train.size());
    std::size_t step = 0;
    double explosion_bound = std::numeric_limits<double>::infinity();
    for (std::size_t epoch = 1; epoch <= config.epochs && !m.diverged; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(0, i - 1)]);

        double epoch_loss = 0.0;
        std::size_t epoch_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            if (config.max_steps && step >= *config.max_steps) break;
            std::vector<const Utterance*> items;
            for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) items.push_back(&train[order[i]]);
            const PaddedBatch batch = pad_batch(items);

            for (auto& p : params) p.tensor.zero_grad();
            const EncoderOutput out = encoder_forward(enc, batch.features, batch.frame_lengths);
            CTCResult ctc = ctc_loss(out.log_probs, batch.targets, out.lengths);
            const double loss = ctc.loss.item();
            ctc.loss.backward();

            StepMetrics sm;
            sm.step = ++step;
            sm.loss = loss;
            sm.grad_norm = global_grad_norm(params);
            double rate_sum = 0.0;
            std::size_t rate_layers = 0;
            m.layer_spike_rates.clear();
            for (const auto& r : out.spike_rates) {
                m.layer_spike_rates.push_back(r ? *r : std::numeric_limits<double>::quiet_NaN());
                if (r) {
                    rate_sum += *r;
                    ++rate_layers;
                }
            }
            sm.spike_rate = rate_layers ? rate_sum / static_cast<double>(rate_layers) : 0.0;
            m.steps.push_back(sm);
            if (on_step) on_step(sm);

            if (step == 1) {
                m.initial_grad_norm = sm.grad_norm;
                explosion_bound = config.explosion_factor * sm.grad_norm;
            }
            if (!std::isfinite(loss) || !std::isfinite(sm.grad_norm)) {
                m.diverged = true;
                m.divergence_reason = "non-finite loss or gradient at step " + std::to_string(step);
                break;
            }
            if (sm.grad_norm > explosion_bound) {
                if (config.stop_on_explosion) {
                    m.diverged = true;
                    m.divergence_reason = "gradient norm exceeded explosion bound at step " + std::to_string(step);
                    break;
                }
            }
            const SgdResult upd = sgd_step(params, config.learning_rate, config.clip);
            if (upd.diverged) {
                m.diverged = true;
                m.divergence_reason = "non-finite gradient at step " + std::to_string(step);
                break;
            }
            epoch_loss += loss;
            ++epoch_batches;
        }
        if (m.diverged) break;
        EpochMetrics em{epoch, step, epoch_batches ? epoch_loss / static_cast<double>(epoch_batches) : 0.0, std::nullopt};
        if (test) {
            const auto ev = evaluate(enc, *test, config.eval_batch_size, config.prior);
            em.eval = ev.report;
        }
        m.epochs.push_back(em);
        if (config.max_steps && step >= *config.max_steps) break;
    }
    return result;
}

}  // namespace snn
