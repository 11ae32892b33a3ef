#pragma once

// Dataset directory layout:
//   manifest.json  format tag, version, counts, generator spec (if any)
//   features.bin   checkpoint container, one [frames, dim] record per
//                  utterance named utt000000, utt000001, ...
//   targets.txt    one line of space-separated token ids per utterance

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "snn/checkpoint.hpp"
#include "snn/data/synth.hpp"

namespace snn {

inline constexpr const char* kDatasetFormat = "snn-dataset";
inline constexpr int kDatasetVersion = 1;

inline std::string utterance_id(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "utt%06zu", i);
    return buf;
}

inline void write_dataset(const std::filesystem::path& dir, const Dataset& data, const std::optional<SynthSpec>& spec = std::nullopt) {
    std::filesystem::create_directories(dir);
    Container features;
    json manifest;
    manifest["format"] = kDatasetFormat;
    manifest["version"] = kDatasetVersion;
    manifest["count"] = data.size();
    manifest["feature_dim"] = data.empty() ? 0 : data.front().dim;
    if (spec) manifest["generator"] = spec->to_json();
    manifest["utterances"] = json::array();
    std::ofstream targets(dir / "targets.txt");
    if (!targets) throw std::runtime_error("cannot write " + (dir / "targets.txt").string());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& u = data[i];
        const auto id = utterance_id(i);
        features.put(id, Tensor({u.frames, u.dim}, u.features));
        manifest["utterances"].push_back({{"id", id}, {"frames", u.frames}, {"tokens", u.tokens.size()}});
        for (std::size_t k = 0; k < u.tokens.size(); ++k) targets << (k ? " " : "") << u.tokens[k];
        targets << '\n';
    }
    features.save((dir / "features.bin").string());
    std::ofstream m(dir / "manifest.json");
    m << manifest.dump(2) << '\n';
    if (!m || !targets) throw std::runtime_error("failed writing dataset to " + dir.string());
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw std::runtime_error("cannot open " + (dir / "manifest.json").string());
    json manifest;
    try {
        manifest = json::parse(mf);
    } catch (const json::exception& e) {
        throw FormatError("dataset manifest: " + std::string(e.what()));
    }
    if (manifest.value("format", "") != kDatasetFormat || manifest.value("version", 0) != kDatasetVersion)
        throw FormatError("dataset manifest: unsupported format or version in " + dir.string());
    const auto features = Container::load((dir / "features.bin").string());
    std::ifstream tf(dir / "targets.txt");
    if (!tf) throw std::runtime_error("cannot open " + (dir / "targets.txt").string());

    Dataset data;
    const std::size_t count = manifest.at("count").get<std::size_t>();
    std::string line;
    for (std::size_t i = 0; i < count; ++i) {
        if (!std::getline(tf, line)) throw FormatError("targets.txt: expected " + std::to_string(count) + " lines");
        Utterance u;
        std::istringstream is(line);
        int tok;
        while (is >> tok) u.tokens.push_back(tok);
        const Tensor t = features.tensor(utterance_id(i));
        if (t.rank() != 2) throw FormatError("features.bin: utterance " + utterance_id(i) + " is not [frames, dim]");
        u.frames = t.dim(0);
        u.dim = t.dim(1);
        u.features.assign(t.values().begin(), t.values().end());
        data.push_back(std::move(u));
    }
    return data;
}

}  // namespace snn
