#pragma once

// RIFF/WAVE reader for 16-bit PCM. Multi-channel files keep the first channel.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace snn {

struct AudioClip {
    std::vector<double> samples;  // in [-1, 1)
    int sample_rate = 0;
};

struct WavError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MalformedHeader : WavError {
    using WavError::WavError;
};
struct UnsupportedCodec : WavError {
    using WavError::WavError;
};
struct TruncatedData : WavError {
    using WavError::WavError;
};

namespace detail {
inline std::uint32_t le32(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}
inline std::uint16_t le16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | p[1] << 8); }
}  // namespace detail

inline AudioClip read_wav(const std::vector<std::uint8_t>& bytes) {
    using detail::le16;
    using detail::le32;
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw MalformedHeader("wav: missing RIFF/WAVE signature");

    bool have_fmt = false;
    std::uint16_t channels = 0, bits = 0;
    std::uint32_t rate = 0;
    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const std::uint8_t* chunk = bytes.data() + pos;
        const std::uint32_t size = le32(chunk + 4);
        const std::size_t body = pos + 8;
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (size < 16 || body + 16 > bytes.size()) throw MalformedHeader("wav: fmt chunk too short");
            const std::uint16_t tag = le16(bytes.data() + body);
            channels = le16(bytes.data() + body + 2);
            rate = le32(bytes.data() + body + 4);
            bits = le16(bytes.data() + body + 14);
            if (tag != 1) throw UnsupportedCodec("wav: format tag " + std::to_string(tag) + " is not PCM");
            if (bits != 16) throw UnsupportedCodec("wav: " + std::to_string(bits) + "-bit samples are not supported");
            if (channels == 0 || rate == 0) throw MalformedHeader("wav: zero channels or sample rate");
            have_fmt = true;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            if (!have_fmt) throw MalformedHeader("wav: data chunk before fmt chunk");
            const std::size_t frame_bytes = 2u * channels;
            if (body + size > bytes.size() || size % frame_bytes != 0)
                throw TruncatedData("wav: data chunk declares " + std::to_string(size) + " bytes, " +
                                    std::to_string(bytes.size() - body) + " available");
            AudioClip clip;
            clip.sample_rate = static_cast<int>(rate);
            const std::size_t frames = size / frame_bytes;
            clip.samples.resize(frames);
            for (std::size_t i = 0; i < frames; ++i) {
                const auto raw = static_cast<std::int16_t>(le16(bytes.data() + body + i * frame_bytes));
                clip.samples[i] = static_cast<double>(raw) / 32768.0;
            }
            return clip;
        }
        pos = body + size + (size & 1u);
    }
    if (!have_fmt) throw MalformedHeader("wav: no fmt chunk");
    throw MalformedHeader("wav: no data chunk");
}

inline AudioClip read_wav_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return read_wav(bytes);
}

/// Mono PCM16 encoding of `samples` (clamped to [-1, 1]).
inline std::vector<std::uint8_t> encode_wav(const std::vector<double>& samples, int sample_rate) {
    std::vector<std::uint8_t> out;
    auto u32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    };
    auto u16 = [&](std::uint16_t v) {
        out.push_back(static_cast<std::uint8_t>(v));
        out.push_back(static_cast<std::uint8_t>(v >> 8));
    };
    const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    u32(36 + data_bytes);
    out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    u32(16);
    u16(1);
    u16(1);
    u32(static_cast<std::uint32_t>(sample_rate));
    u32(static_cast<std::uint32_t>(sample_rate) * 2);
    u16(2);
    u16(16);
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    u32(data_bytes);
    for (double s : samples) {
        const double c = std::max(-1.0, std::min(1.0, s));
        const auto v = static_cast<std::int16_t>(std::lround(std::max(-32768.0, std::min(32767.0, c * 32768.0))));
        u16(static_cast<std::uint16_t>(v));
    }
    return out;
}

}  // namespace snn
