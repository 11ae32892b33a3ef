#pragma once

// Command-line front end. Every subcommand reads one JSON config file
// (unknown keys rejected) and writes plain-text or container files into the
// output directory.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure
// (I/O, malformed input files, training divergence).

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "snn/data/dataset_io.hpp"
#include "snn/features/logmel.hpp"
#include "snn/features/wav.hpp"
#include "snn/layers/lif.hpp"
#include "snn/training/diagnostics.hpp"

namespace snn::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2 };

/// A failure already reported to the user that maps to exit code 2.
struct RuntimeFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    fs::path config;
    fs::path out = "snn-out";
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 1;
    std::ostream* log = &std::cerr;  // progress and diagnostics
};

inline json load_config(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path.string());
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
}

/// Relative paths inside a config are taken from the config file's directory.
inline fs::path resolve(const Options& opt, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : opt.config.parent_path() / path;
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path);
    f << text;
    if (!f) throw std::runtime_error("cannot write " + path.string());
}

struct Splits {
    Dataset train, test;
};

/// "data": {"train_dir", "test_dir"} or {"synth", "train_count", "test_count"}.
/// Synthetic test utterances follow the training ones in generation order.
inline Splits load_data(const Options& opt, const json& j) {
    const std::string where = "data";
    check_keys(j, {"train_dir", "test_dir", "synth", "train_count", "test_count"}, where);
    Splits s;
    if (j.contains("synth")) {
        if (j.contains("train_dir") || j.contains("test_dir")) throw ConfigError("data: give either synth or *_dir entries, not both");
        const json& sj = j.at("synth");
        check_keys(sj, {"vocab", "tokens", "frames_per_token", "feature_dim", "noise", "seed"}, where + ".synth");
        const SynthSpec spec = SynthSpec::from_json(sj);
        std::size_t n_train = 0, n_test = 0;
        read_opt(j, "train_count", n_train, where);
        read_opt(j, "test_count", n_test, where);
        if (n_train + n_test == 0) throw ConfigError("data: train_count + test_count must be >= 1");
        Dataset all = generate_synthetic(spec, n_train + n_test);
        s.train.assign(std::make_move_iterator(all.begin()), std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(n_train)));
        s.test.assign(std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(n_train)), std::make_move_iterator(all.end()));
        return s;
    }
    std::string train_dir, test_dir;
    read_opt(j, "train_dir", train_dir, where);
    read_opt(j, "test_dir", test_dir, where);
    if (!train_dir.empty()) s.train = read_dataset(resolve(opt, train_dir));
    if (!test_dir.empty()) s.test = read_dataset(resolve(opt, test_dir));
    return s;
}

/// Sections "train" and "encoder" into one TrainConfig; --seed wins.
inline TrainConfig read_train_config(const Options& opt, const json& root) {
    TrainConfig tc;
    if (root.contains("encoder")) tc.encoder = EncoderConfig::from_json(root.at("encoder"));
    else throw ConfigError("config: missing 'encoder' section");
    if (root.contains("train")) tc.read_json(root.at("train"));
    if (opt.seed) tc.seed = *opt.seed;
    tc.validate();
    return tc;
}

// ---------------------------------------------------------------- gen-data

inline int cmd_gen_data(const Options& opt) {
    const json root = load_config(opt.config);
    check_keys(root, {"synth", "train_count", "test_count"}, "config");
    SynthSpec spec;
    if (root.contains("synth")) {
        check_keys(root.at("synth"), {"vocab", "tokens", "frames_per_token", "feature_dim", "noise", "seed"}, "synth");
        spec = SynthSpec::from_json(root.at("synth"));
    }
    if (opt.seed) spec.seed = *opt.seed;
    std::size_t n_train = 100, n_test = 0;
    read_opt(root, "train_count", n_train, "config");
    read_opt(root, "test_count", n_test, "config");
    if (n_train == 0) throw ConfigError("config.train_count: must be >= 1");
    Dataset all = generate_synthetic(spec, n_train + n_test);
    Dataset test(std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(n_train)), std::make_move_iterator(all.end()));
    all.resize(n_train);
    write_dataset(opt.out / "train", all, spec);
    if (n_test) write_dataset(opt.out / "test", test, spec);
    *opt.log << "wrote " << n_train << " training and " << n_test << " test utterances to " << opt.out << "\n";
    return kOk;
}

// ---------------------------------------------------------------- train

inline void write_model(const fs::path& dir, const Encoder& enc) {
    enc.to_container().save((dir / "checkpoint.bin").string());
    write_text(dir / "encoder.json", enc.config.to_json().dump(2) + "\n");
}

inline int cmd_train(const Options& opt) {
    const json root = load_config(opt.config);
    check_keys(root, {"data", "train", "encoder"}, "config");
    if (!root.contains("data")) throw ConfigError("config: missing 'data' section");
    const TrainConfig tc = read_train_config(opt, root);
    const Splits data = load_data(opt, root.at("data"));
    if (data.train.empty()) throw ConfigError("data: no training utterances");
    fs::create_directories(opt.out);

    std::ofstream metrics(opt.out / "metrics.txt");
    TrainResult res = train_run(tc, data.train, data.test.empty() ? nullptr : &data.test, [&](const StepMetrics& s) {
        if (s.step % 50 == 0) *opt.log << "step " << s.step << " loss " << s.loss << "\n";
    });
    res.metrics.write_stream(metrics);
    if (!metrics) throw std::runtime_error("cannot write metrics.txt");
    write_model(opt.out, res.encoder);

    json resolved = root;
    resolved["train"] = tc.to_json();
    write_text(opt.out / "config.json", resolved.dump(2) + "\n");
    if (!res.metrics.epochs.empty() && res.metrics.epochs.back().eval) {
        const auto& rep = *res.metrics.epochs.back().eval;
        write_text(opt.out / "report.txt", rep.to_line() + "\n");
        *opt.log << "test token error rate " << rep.rate << " [" << rep.low << ", " << rep.high << "]\n";
    }
    if (res.metrics.diverged) {
        *opt.log << "error: training diverged: " << res.metrics.divergence_reason << " (partial outputs saved)\n";
        return kRuntime;
    }
    return kOk;
}

// ---------------------------------------------------------------- eval

inline Encoder load_model(const fs::path& dir) {
    std::ifstream f(dir / "encoder.json");
    if (!f) throw std::runtime_error("cannot open " + (dir / "encoder.json").string());
    json j;
    try {
        j = json::parse(f);
    } catch (const json::exception& e) {
        throw FormatError("encoder.json: " + std::string(e.what()));
    }
    Rng rng(0);
    Encoder enc = Encoder::init(EncoderConfig::from_json(j), rng);
    enc.load(Container::load((dir / "checkpoint.bin").string()));
    return enc;
}

inline int cmd_eval(const Options& opt) {
    const json root = load_config(opt.config);
    check_keys(root, {"model", "data", "batch_size", "prior"}, "config");
    std::string model;
    read_opt(root, "model", model, "config");
    if (model.empty()) throw ConfigError("config: missing 'model' (directory with encoder.json and checkpoint.bin)");
    if (!root.contains("data")) throw ConfigError("config: missing 'data' section");
    TrainConfig defaults;
    json train_bits = json::object();
    if (root.contains("batch_size")) train_bits["eval_batch_size"] = root.at("batch_size");
    if (root.contains("prior")) train_bits["prior"] = root.at("prior");
    defaults.read_json(train_bits);

    const Splits data = load_data(opt, root.at("data"));
    const Dataset& eval_set = data.test.empty() ? data.train : data.test;
    if (eval_set.empty()) throw ConfigError("data: nothing to evaluate");
    Encoder enc = load_model(resolve(opt, model));
    const EvalResult ev = evaluate(enc, eval_set, defaults.eval_batch_size, defaults.prior);
    fs::create_directories(opt.out);
    write_text(opt.out / "report.txt", ev.report.to_line() + "\n");
    std::string hyps;
    for (const auto& h : ev.hypotheses) {
        for (std::size_t k = 0; k < h.size(); ++k) hyps += (k ? " " : "") + std::to_string(h[k]);
        hyps += "\n";
    }
    write_text(opt.out / "hypotheses.txt", hyps);
    std::cout << ev.report.to_line() << "\n";
    return kOk;
}

// ---------------------------------------------------------------- grid

inline int cmd_grid(const Options& opt) {
    const json root = load_config(opt.config);
    check_keys(root, {"data", "train", "encoder"}, "config");
    if (!root.contains("data")) throw ConfigError("config: missing 'data' section");
    const TrainConfig tc = read_train_config(opt, root);
    const Splits data = load_data(opt, root.at("data"));
    if (data.train.empty()) throw ConfigError("data: no training utterances");
    const GridResult res = replacement_grid(tc, data.train, data.test.empty() ? nullptr : &data.test, opt.jobs);
    write_grid(opt.out, res);
    std::cout << res.table();
    return kOk;
}

// ---------------------------------------------------------------- diagnose

inline int cmd_diagnose(const Options& opt) {
    const json root = load_config(opt.config);
    check_keys(root, {"synth", "utterances", "steps", "seeds", "variants", "train", "encoder"}, "config");
    DiagnosticsConfig cfg;
    if (root.contains("synth")) {
        check_keys(root.at("synth"), {"vocab", "tokens", "frames_per_token", "feature_dim", "noise", "seed"}, "synth");
        cfg.synth = SynthSpec::from_json(root.at("synth"));
    }
    if (root.contains("encoder")) cfg.train.encoder = EncoderConfig::from_json(root.at("encoder"));
    if (root.contains("train")) cfg.train.read_json(root.at("train"));
    read_opt(root, "utterances", cfg.utterances, "config");
    read_opt(root, "steps", cfg.steps, "config");
    read_opt(root, "seeds", cfg.seeds, "config");
    if (root.contains("variants")) {
        std::vector<std::string> names;
        read_opt(root, "variants", names, "config");
        cfg.variants.clear();
        for (const auto& n : names) cfg.variants.push_back(parse_variant(n));
    }
    if (opt.seed)  // --seed s replaces the seed list by s, s+1, ...
        for (std::size_t i = 0; i < cfg.seeds.size(); ++i) cfg.seeds[i] = *opt.seed + i;
    const DiagnosticsResult res = gradient_diagnostics(cfg, opt.jobs);
    write_diagnostics(opt.out, res);
    std::cout << res.table();
    return kOk;
}

// ---------------------------------------------------------------- simulate

struct SimulationSpec {
    double alpha = 0.9;
    double threshold = 1.0;
    double weight = 1.0;
    std::vector<double> input;

    static SimulationSpec from_json(const json& j) {
        const std::string where = "simulate";
        check_keys(j, {"alpha", "threshold", "weight", "input", "constant", "steps"}, where);
        SimulationSpec s;
        read_opt(j, "alpha", s.alpha, where);
        read_opt(j, "threshold", s.threshold, where);
        read_opt(j, "weight", s.weight, where);
        if (j.contains("input") && j.contains("constant")) throw ConfigError(where + ": give either input or constant, not both");
        if (j.contains("input")) {
            read_opt(j, "input", s.input, where);
        } else if (j.contains("constant")) {
            double c = 0.0;
            std::size_t steps = 0;
            read_opt(j, "constant", c, where);
            read_opt(j, "steps", steps, where);
            s.input.assign(steps, c);
        }
        if (s.input.empty()) throw ConfigError(where + ": input is empty (give input [...] or constant + steps)");
        if (!(s.alpha > 0.0 && s.alpha < 1.0)) throw ConfigError(where + ".alpha: must lie strictly inside (0, 1)");
        if (!std::isfinite(s.threshold) || !std::isfinite(s.weight)) throw ConfigError(where + ": threshold and weight must be finite");
        for (double x : s.input)
            if (!std::isfinite(x)) throw ConfigError(where + ".input: values must be finite");
        return s;
    }
};

struct SimulationTrace {
    std::vector<double> I, u, s;
    double alpha = 0.0;  // effective leak actually used
};

/// One LIF unit driven by I[t] = weight * input[t], run through the layer code.
inline SimulationTrace simulate_neuron(const SimulationSpec& spec) {
    LIFParams p;
    p.W = Tensor({1, 1}, {spec.weight});
    p.V = Tensor({1, 1}, {0.0});
    p.alpha_raw = Tensor({1}, {std::log(spec.alpha) - std::log1p(-spec.alpha)});
    p.bn = BatchNormState(1);
    p.use_bn = false;
    p.surrogate.threshold = spec.threshold;
    NoGradGuard no_grad;
    const Tensor x({1, spec.input.size(), 1}, spec.input);
    const LIFOutput out = lif_forward_traced(p, x);
    SimulationTrace tr;
    tr.alpha = p.leak()[0];
    for (std::size_t t = 0; t < spec.input.size(); ++t) {
        tr.I.push_back(spec.weight * spec.input[t]);
        tr.u.push_back(out.potentials[t]);
        tr.s.push_back(out.spikes[t]);
    }
    return tr;
}

inline std::string trace_tsv(const SimulationTrace& tr) {
    std::string out = "t\tI\tu\ts\n";
    char buf[128];
    for (std::size_t t = 0; t < tr.u.size(); ++t) {
        std::snprintf(buf, sizeof buf, "%zu\t%.17g\t%.17g\t%d\n", t, tr.I[t], tr.u[t], tr.s[t] > 0.5 ? 1 : 0);
        out += buf;
    }
    return out;
}

inline int cmd_simulate(const Options& opt) {
    const SimulationTrace tr = simulate_neuron(SimulationSpec::from_json(load_config(opt.config)));
    fs::create_directories(opt.out);
    write_text(opt.out / "trace.tsv", trace_tsv(tr));
    std::size_t spikes = 0;
    for (double s : tr.s) spikes += s > 0.5 ? 1 : 0;
    *opt.log << tr.u.size() << " steps, " << spikes << " spikes\n";
    return kOk;
}

// ---------------------------------------------------------------- features

inline int cmd_features(const Options& opt) {
    const json root = load_config(opt.config);
    check_keys(root, {"wav", "features"}, "config");
    std::string wav;
    read_opt(root, "wav", wav, "config");
    if (wav.empty()) throw ConfigError("config: missing 'wav' path");
    FeatureConfig fc;
    if (root.contains("features")) {
        const json& fj = root.at("features");
        const std::string where = "features";
        check_keys(fj, {"sample_rate", "frame_ms", "hop_ms", "mel_bins", "fmin", "fmax", "dft_size", "log_floor"}, where);
        read_opt(fj, "sample_rate", fc.sample_rate, where);
        read_opt(fj, "frame_ms", fc.frame_ms, where);
        read_opt(fj, "hop_ms", fc.hop_ms, where);
        read_opt(fj, "mel_bins", fc.mel_bins, where);
        read_opt(fj, "fmin", fc.fmin, where);
        read_opt(fj, "fmax", fc.fmax, where);
        read_opt(fj, "dft_size", fc.dft_size, where);
        read_opt(fj, "log_floor", fc.log_floor, where);
    }
    try {
        fc.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const AudioClip clip = read_wav_file(resolve(opt, wav).string());
    Tensor feats;
    try {
        feats = log_mel(clip, fc);
    } catch (const std::invalid_argument& e) {
        throw RuntimeFailure(e.what());  // input file does not fit the configuration
    }
    fs::create_directories(opt.out);
    Container c;
    c.put("features", feats);
    c.save((opt.out / "features.bin").string());
    *opt.log << feats.dim(0) << " frames x " << feats.dim(1) << " mel bins\n";
    return kOk;
}

// ---------------------------------------------------------------- entry

/// Parses argv and runs one subcommand. Flags may also come from SNN_CONFIG,
/// SNN_OUT, SNN_SEED and SNN_JOBS.
inline int run_command(int argc, const char* const* argv, std::ostream& err = std::cerr) {
    CLI::App app{"Surrogate-gradient spiking recurrent encoders with CTC loss", "snn"};
    app.require_subcommand(1);
    app.fallthrough();
    Options opt;
    std::string config, out = opt.out.string();
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config, "JSON config file")->envname("SNN_CONFIG");
    app.add_option("--out", out, "output directory")->envname("SNN_OUT")->capture_default_str();
    app.add_option("--seed", seed, "seed override")->envname("SNN_SEED");
    app.add_option("--jobs", opt.jobs, "parallel runs for grid and diagnose")->envname("SNN_JOBS")->check(CLI::PositiveNumber)->capture_default_str();

    using Handler = int (*)(const Options&);
    const std::vector<std::tuple<const char*, const char*, Handler>> commands{
        {"gen-data", "write a synthetic dataset (train/ and test/)", cmd_gen_data},
        {"train", "train an encoder; writes metrics, checkpoint and report", cmd_train},
        {"eval", "evaluate a trained model on a dataset", cmd_eval},
        {"grid", "run the layer-replacement grid", cmd_grid},
        {"diagnose", "gradient-norm diagnostics on long sequences", cmd_diagnose},
        {"simulate", "integrate a single LIF neuron and write trace.tsv", cmd_simulate},
        {"features", "WAV to log-mel features", cmd_features},
    };
    for (const auto& [name, help, _] : commands) app.add_subcommand(name, help);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kUsage;
    }

    opt.out = out;
    opt.seed = seed;
    opt.log = &err;
    const CLI::App* chosen = app.get_subcommands().front();
    if (config.empty()) {
        err << "error: --config is required\n\n" << chosen->help();
        return kUsage;
    }
    opt.config = config;
    try {
        for (const auto& [name, _, handler] : commands)
            if (chosen->get_name() == name) return handler(opt);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kUsage;
    } catch (const RuntimeFailure& e) {
        err << "error: " << e.what() << "\n";
        return kRuntime;
    } catch (const WavError& e) {
        err << "wav error: " << e.what() << "\n";
        return kRuntime;
    } catch (const FormatError& e) {
        err << "format error: " << e.what() << "\n";
        return kRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return kUsage;
}

}  // namespace snn::cli
