#pragma once

// Conv front-end -> stack of (optionally bidirectional) recurrent layers ->
// linear head -> log-softmax over the output vocabulary (blank = 0).

#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "snn/checkpoint.hpp"
#include "snn/config.hpp"
#include "snn/layers/conv.hpp"
#include "snn/layers/lif.hpp"
#include "snn/layers/lstm.hpp"
#include "snn/layers/rnn.hpp"

namespace snn {

enum class LayerKind { LIF, RNN, LSTM };

inline LayerKind parse_layer_kind(const std::string& s) {
    if (s == "LIF") return LayerKind::LIF;
    if (s == "RNN") return LayerKind::RNN;
    if (s == "LSTM") return LayerKind::LSTM;
    throw ConfigError("unknown layer kind '" + s + "' (expected LIF, RNN or LSTM)");
}

inline const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::LIF: return "LIF";
        case LayerKind::RNN: return "RNN";
        case LayerKind::LSTM: return "LSTM";
    }
    return "?";
}

struct LayerSpec {
    LayerKind kind = LayerKind::LSTM;
    std::size_t hidden = 64;
    bool bidirectional = true;
};

struct EncoderConfig {
    std::size_t input_dim = 40;
    ConvSpec conv;
    std::vector<LayerSpec> layers;
    std::size_t vocab = 2;  // including blank
    Activation activation = Activation::Relu;
    bool batch_norm = true;
    SurrogateSpec surrogate;
    bool detach_reset = false;

    void validate() const {
        if (layers.empty()) throw ConfigError("encoder: at least one recurrent layer is required");
        for (const auto& l : layers)
            if (l.hidden == 0) throw ConfigError("encoder: hidden sizes must be positive");
        if (vocab < 2) throw ConfigError("encoder: vocabulary must hold blank plus at least one token");
        if (input_dim == 0 || conv.channels == 0 || conv.kernel == 0 || conv.stride == 0)
            throw ConfigError("encoder: input_dim and conv geometry must be positive");
        surrogate.validate();
    }

    /// "k RNN - m LSTM": k counts the non-gated (LIF or RNN) layers.
    std::string label() const {
        std::size_t plain = 0, gated = 0;
        for (const auto& l : layers) (l.kind == LayerKind::LSTM ? gated : plain)++;
        std::ostringstream os;
        os << plain << " RNN - " << gated << " LSTM";
        return os.str();
    }

    bool any_spiking() const {
        for (const auto& l : layers)
            if (l.kind == LayerKind::LIF) return true;
        return false;
    }

    json to_json() const {
        json j;
        j["input_dim"] = input_dim;
        j["conv"] = {{"channels", conv.channels}, {"kernel", conv.kernel}, {"stride", conv.stride}};
        j["layers"] = json::array();
        for (const auto& l : layers)
            j["layers"].push_back({{"kind", layer_kind_name(l.kind)}, {"hidden", l.hidden}, {"bidirectional", l.bidirectional}});
        j["vocab"] = vocab;
        j["activation"] = activation_name(activation);
        j["batch_norm"] = batch_norm;
        j["surrogate"] = {{"threshold", surrogate.threshold}, {"half_width", surrogate.half_width}, {"slope", surrogate.slope}};
        j["detach_reset"] = detach_reset;
        return j;
    }

    static EncoderConfig from_json(const json& j) {
        const std::string where = "encoder";
        check_keys(j, {"input_dim", "conv", "layers", "vocab", "activation", "batch_norm", "surrogate", "detach_reset"}, where);
        EncoderConfig c;
        read_opt(j, "input_dim", c.input_dim, where);
        read_opt(j, "vocab", c.vocab, where);
        read_opt(j, "batch_norm", c.batch_norm, where);
        read_opt(j, "detach_reset", c.detach_reset, where);
        if (j.contains("activation")) {
            try {
                c.activation = parse_activation(j.at("activation").get<std::string>());
            } catch (const std::exception& e) {
                throw ConfigError(where + ".activation: " + e.what());
            }
        }
        if (j.contains("conv")) {
            const auto& cj = j.at("conv");
            check_keys(cj, {"channels", "kernel", "stride"}, where + ".conv");
            read_opt(cj, "channels", c.conv.channels, where + ".conv");
            read_opt(cj, "kernel", c.conv.kernel, where + ".conv");
            read_opt(cj, "stride", c.conv.stride, where + ".conv");
        }
        if (j.contains("surrogate")) {
            const auto& sj = j.at("surrogate");
            check_keys(sj, {"threshold", "half_width", "slope"}, where + ".surrogate");
            read_opt(sj, "threshold", c.surrogate.threshold, where + ".surrogate");
            read_opt(sj, "half_width", c.surrogate.half_width, where + ".surrogate");
            read_opt(sj, "slope", c.surrogate.slope, where + ".surrogate");
        }
        if (j.contains("layers")) {
            if (!j.at("layers").is_array()) throw ConfigError(where + ".layers: expected an array");
            for (const auto& lj : j.at("layers")) {
                check_keys(lj, {"kind", "hidden", "bidirectional"}, where + ".layers[]");
                LayerSpec l;
                std::string kind = "LSTM";
                read_opt(lj, "kind", kind, where + ".layers[]");
                l.kind = parse_layer_kind(kind);
                read_opt(lj, "hidden", l.hidden, where + ".layers[]");
                read_opt(lj, "bidirectional", l.bidirectional, where + ".layers[]");
                c.layers.push_back(l);
            }
        }
        c.validate();
        return c;
    }
};

/// Copy of `base` whose first k recurrent layers become LIF (spiking) or RNN
/// (nonspiking) and the rest LSTM.
inline EncoderConfig replacement_config(const EncoderConfig& base, std::size_t k, bool spiking) {
    EncoderConfig c = base;
    for (std::size_t i = 0; i < c.layers.size(); ++i)
        c.layers[i].kind = i < k ? (spiking ? LayerKind::LIF : LayerKind::RNN) : LayerKind::LSTM;
    return c;
}

using RecurrentCell = std::variant<LIFParams, RNNParams, LSTMParams>;

struct CellOutput {
    Tensor output;
    std::optional<double> spike_rate;  // LIF cells only
};

inline CellOutput run_cell(RecurrentCell& cell, const Tensor& x, const Lengths& lengths) {
    return std::visit(
        [&](auto& p) -> CellOutput {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, LIFParams>) {
                Tensor s = lif_forward(p, x, lengths);
                const double rate = spike_rate(s, lengths);
                return {s, rate};
            } else if constexpr (std::is_same_v<P, RNNParams>) {
                return {rnn_forward(p, x, lengths), std::nullopt};
            } else {
                return {lstm_forward(p, x, lengths), std::nullopt};
            }
        },
        cell);
}

inline std::size_t cell_units(const RecurrentCell& cell) {
    return std::visit([](const auto& p) { return p.units(); }, cell);
}

/// Runs `forward` over x and `backward` over x reversed within each item's
/// valid length, re-reverses the latter, and concatenates on features.
inline CellOutput run_bidirectional(RecurrentCell& forward, RecurrentCell& backward, const Tensor& x,
                                    const Lengths& lengths = {}) {
    Lengths full = lengths;
    if (full.empty()) full.assign(x.dim(0), x.dim(1));
    CellOutput f = run_cell(forward, x, lengths);
    CellOutput b = run_cell(backward, reverse_time(x, full), lengths);
    CellOutput out{concat({f.output, reverse_time(b.output, full)}, 2), std::nullopt};
    if (f.spike_rate && b.spike_rate) out.spike_rate = 0.5 * (*f.spike_rate + *b.spike_rate);
    return out;
}

struct RecurrentLayer {
    LayerKind kind = LayerKind::LSTM;
    std::vector<RecurrentCell> directions;  // one or two

    std::size_t output_features() const { return cell_units(directions.front()) * directions.size(); }
};

struct EncoderOutput {
    Tensor log_probs;  // [B,T',vocab]
    Lengths lengths;   // valid frames per item after time pooling
    std::vector<std::optional<double>> spike_rates;  // per recurrent layer
};

class Encoder {
public:
    EncoderConfig config;
    ConvParams conv;
    std::vector<RecurrentLayer> layers;
    Linear head;

    static Encoder init(const EncoderConfig& config, Rng& rng) {
        config.validate();
        Encoder e;
        e.config = config;
        e.conv = ConvParams::init(config.input_dim, config.conv, rng);
        std::size_t in = config.conv.channels;
        for (const auto& spec : config.layers) {
            RecurrentLayer layer;
            layer.kind = spec.kind;
            const std::size_t dirs = spec.bidirectional ? 2 : 1;
            for (std::size_t d = 0; d < dirs; ++d) layer.directions.push_back(e.make_cell(spec, in, rng));
            in = layer.output_features();
            e.layers.push_back(std::move(layer));
        }
        e.head = Linear::init(in, config.vocab, rng);
        return e;
    }

    /// Deep copy; a plain copy would share parameter storage.
    Encoder clone() const {
        Encoder e;
        e.config = config;
        e.conv = conv.clone();
        e.head = Linear{deep_copy(head.weight), deep_copy(head.bias)};
        for (const auto& l : layers) {
            RecurrentLayer c;
            c.kind = l.kind;
            for (const auto& cell : l.directions)
                c.directions.push_back(std::visit([](const auto& p) -> RecurrentCell { return p.clone(); }, cell));
            e.layers.push_back(std::move(c));
        }
        return e;
    }

    void set_mode(Mode mode) {
        for (auto& l : layers)
            for (auto& cell : l.directions) {
                if (auto* p = std::get_if<LIFParams>(&cell)) p->bn.mode = mode;
                if (auto* p = std::get_if<RNNParams>(&cell)) p->bn.mode = mode;
            }
    }

    std::vector<NamedTensor> parameters() const {
        std::vector<NamedTensor> out;
        conv.collect("conv", out);
        for (std::size_t i = 0; i < layers.size(); ++i)
            for (std::size_t d = 0; d < layers[i].directions.size(); ++d) {
                const std::string prefix = "layers." + std::to_string(i) + (d == 0 ? ".fwd" : ".bwd");
                std::visit([&](const auto& p) { p.collect(prefix, out); }, layers[i].directions[d]);
            }
        head.collect("head", out);
        return out;
    }

    /// Parameters plus batch-norm running statistics.
    Container to_container() const {
        Container c;
        for (const auto& p : parameters()) c.put(p.name, p.tensor);
        visit_bn(*this, [&](const std::string& prefix, const BatchNormState& bn) {
            c.put(prefix + ".running_mean", Tensor({bn.features()}, bn.running_mean));
            c.put(prefix + ".running_var", Tensor({bn.features()}, bn.running_var));
        });
        return c;
    }

    /// Copies values from a container produced by an identically configured
    /// encoder; every record must be present with a matching shape.
    void load(const Container& c) {
        for (auto& p : parameters()) {
            const Tensor src = c.tensor(p.name);
            if (src.shape() != p.tensor.shape())
                throw FormatError("checkpoint: '" + p.name + "' has shape " + to_string(src.shape()) + ", expected " +
                                  to_string(p.tensor.shape()));
            auto dst = p.tensor.mutable_values();
            std::copy(src.values().begin(), src.values().end(), dst.begin());
        }
        visit_bn(*this, [&](const std::string& prefix, BatchNormState& bn) {
            const Tensor m = c.tensor(prefix + ".running_mean");
            const Tensor v = c.tensor(prefix + ".running_var");
            if (m.size() != bn.features() || v.size() != bn.features())
                throw FormatError("checkpoint: running statistics size mismatch at " + prefix);
            bn.running_mean.assign(m.values().begin(), m.values().end());
            bn.running_var.assign(v.values().begin(), v.values().end());
        });
    }

private:
    RecurrentCell make_cell(const LayerSpec& spec, std::size_t in, Rng& rng) const {
        switch (spec.kind) {
            case LayerKind::LIF: {
                LIFParams p = LIFParams::init(in, spec.hidden, rng);
                p.use_bn = config.batch_norm;
                p.surrogate = config.surrogate;
                p.detach_reset = config.detach_reset;
                return p;
            }
            case LayerKind::RNN: {
                RNNParams p = RNNParams::init(in, spec.hidden, rng, config.activation);
                p.use_bn = config.batch_norm;
                return p;
            }
            case LayerKind::LSTM: return LSTMParams::init(in, spec.hidden, rng);
        }
        throw std::logic_error("bad layer kind");
    }

    // Self is Encoder or const Encoder; f receives (prefix, BatchNormState&).
    template <class Self, class F>
    static void visit_bn(Self& self, F&& f) {
        for (std::size_t i = 0; i < self.layers.size(); ++i)
            for (std::size_t d = 0; d < self.layers[i].directions.size(); ++d) {
                const std::string prefix = "layers." + std::to_string(i) + (d == 0 ? ".fwd" : ".bwd") + ".bn";
                auto& cell = self.layers[i].directions[d];
                if (auto* p = std::get_if<LIFParams>(&cell); p && p->use_bn) f(prefix, p->bn);
                if (auto* p = std::get_if<RNNParams>(&cell); p && p->use_bn) f(prefix, p->bn);
            }
    }
};

/// Full encoder pass. `lengths` may be empty when every item spans all frames.
inline EncoderOutput encoder_forward(Encoder& enc, const Tensor& x, const Lengths& lengths = {}) {
    if (x.rank() != 3 || x.dim(2) != enc.config.input_dim)
        throw ShapeError("encoder: expected [B,T," + std::to_string(enc.config.input_dim) + "] input, got " + to_string(x.shape()));
    Lengths in_lengths = lengths;
    if (in_lengths.empty()) in_lengths.assign(x.dim(0), x.dim(1));
    ConvOutput front = conv_front_end(enc.conv, x, in_lengths);

    EncoderOutput out;
    out.lengths = front.lengths;
    Tensor h = front.features;
    for (auto& layer : enc.layers) {
        CellOutput co = layer.directions.size() == 2
                            ? run_bidirectional(layer.directions[0], layer.directions[1], h, out.lengths)
                            : run_cell(layer.directions[0], h, out.lengths);
        h = co.output;
        out.spike_rates.push_back(co.spike_rate);
    }
    out.log_probs = log_softmax(enc.head(h));
    return out;
}

}  // namespace snn
