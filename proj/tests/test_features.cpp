#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "snn/features/logmel.hpp"
#include "snn/features/wav.hpp"
#include "snn/rng.hpp"

using namespace snn;

namespace {

std::vector<double> tone(double hz, std::size_t n, int rate, double amp = 0.5) {
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / rate);
    return s;
}

// Mean log-mel energy per bin computed only from oracle pieces: direct DFT,
// the Hamming formula, and explicit triangles.
std::vector<double> oracle_mel_energy(const std::vector<double>& samples, const FeatureConfig& cfg) {
    const std::size_t win = cfg.frame_samples(), hop = cfg.hop_samples(), n = cfg.fft_size();
    const std::size_t frames = (samples.size() - win) / hop + 1;
    const double lo = 2595.0 * std::log10(1.0 + cfg.fmin / 700.0), hi = 2595.0 * std::log10(1.0 + cfg.upper_hz() / 700.0);
    auto edge = [&](std::size_t i) {
        const double mel = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cfg.mel_bins + 1);
        return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
    };
    std::vector<double> mean(cfg.mel_bins, 0.0);
    for (std::size_t f = 0; f < frames; ++f) {
        std::vector<double> frame(win);
        for (std::size_t i = 0; i < win; ++i)
            frame[i] = samples[f * hop + i] * (0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(win - 1)));
        const auto mag = oracle::dft_magnitude(frame, n);
        for (std::size_t m = 0; m < cfg.mel_bins; ++m) {
            const double l = edge(m), c = edge(m + 1), r = edge(m + 2);
            double e = 0.0;
            for (std::size_t k = 0; k < mag.size(); ++k) {
                const double hz = static_cast<double>(k) * cfg.sample_rate / static_cast<double>(n);
                if (hz > l && hz <= c) e += mag[k] * (hz - l) / (c - l);
                else if (hz > c && hz < r) e += mag[k] * (r - hz) / (r - c);
            }
            mean[m] += std::log(std::max(e, cfg.log_floor)) / static_cast<double>(frames);
        }
    }
    return mean;
}

std::size_t argmax(const std::vector<double>& v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

// ---------------------------------------------------------------- wav

TEST(Wav, OneSecondOfSilence) {
    const AudioClip clip = read_wav(encode_wav(std::vector<double>(16000, 0.0), 16000));
    EXPECT_EQ(clip.sample_rate, 16000);
    ASSERT_EQ(clip.samples.size(), 16000u);
    for (double s : clip.samples) EXPECT_EQ(s, 0.0);
}

TEST(Wav, FullScaleSampleScaling) {
    auto bytes = encode_wav({0.0}, 8000);
    bytes[bytes.size() - 2] = 0xff;  // 32767 little-endian
    bytes[bytes.size() - 1] = 0x7f;
    EXPECT_NEAR(read_wav(bytes).samples[0], 32767.0 / 32768.0, 1e-15);
    EXPECT_NEAR(read_wav(bytes).samples[0], 0.99997, 1e-5);
}

TEST(Wav, NonPcmTagIsUnsupportedCodec) {
    auto bytes = encode_wav({0.1, 0.2}, 8000);
    bytes[20] = 3;  // IEEE float tag
    EXPECT_THROW(read_wav(bytes), UnsupportedCodec);
}

TEST(Wav, DistinctErrorsForHeaderAndTruncation) {
    auto bytes = encode_wav({0.1, 0.2, 0.3}, 8000);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(read_wav(bad_magic), MalformedHeader);
    auto truncated = bytes;
    truncated.resize(truncated.size() - 3);
    EXPECT_THROW(read_wav(truncated), TruncatedData);
    EXPECT_THROW(read_wav({}), MalformedHeader);
}

TEST(Wav, TakesFirstChannelAndSkipsUnknownChunks) {
    std::vector<std::uint8_t> b;
    auto put = [&](std::initializer_list<int> xs) {
        for (int x : xs) b.push_back(static_cast<std::uint8_t>(x));
    };
    put({'R', 'I', 'F', 'F', 0, 0, 0, 0, 'W', 'A', 'V', 'E'});
    put({'L', 'I', 'S', 'T', 3, 0, 0, 0, 1, 2, 3, 0});  // odd-sized chunk plus pad byte
    put({'f', 'm', 't', ' ', 16, 0, 0, 0, 1, 0, 2, 0, 0x40, 0x1f, 0, 0, 0, 0, 0, 0, 4, 0, 16, 0});
    put({'d', 'a', 't', 'a', 8, 0, 0, 0, 0x00, 0x40, 0xff, 0x7f, 0x00, 0xc0, 0x01, 0x00});
    const AudioClip c = read_wav(b);
    EXPECT_EQ(c.sample_rate, 8000);
    ASSERT_EQ(c.samples.size(), 2u);
    EXPECT_EQ(c.samples[0], 0.5);
    EXPECT_EQ(c.samples[1], -0.5);
}

TEST(Wav, EncodeReadRoundTrip) {
    Rng rng(2);
    std::vector<double> s(500);
    for (auto& x : s) x = std::round(rng.uniform(-1.0, 1.0) * 32767.0) / 32768.0;
    const auto c = read_wav(encode_wav(s, 22050));
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(c.samples[i], s[i]);
}

// ---------------------------------------------------------------- spectrum

TEST(Spectrum, FftMatchesDirectDft) {
    Rng rng(3);
    for (std::size_t n : {1u, 2u, 8u, 64u, 512u}) {
        std::vector<double> x(n > 4 ? n - 3 : n);
        for (auto& v : x) v = rng.uniform(-1.0, 1.0);
        const auto fast = magnitude_spectrum(x, n);
        const auto slow = oracle::dft_magnitude(x, n);
        ASSERT_EQ(fast.size(), slow.size());
        for (std::size_t k = 0; k < fast.size(); ++k) EXPECT_NEAR(fast[k], slow[k], 1e-9) << n << " " << k;
    }
    std::vector<std::complex<double>> bad(6);
    EXPECT_THROW(fft(bad), std::invalid_argument);
}

TEST(Spectrum, ExactBinToneConcentratesEnergy) {
    const std::size_t n = 256;
    for (std::size_t bin : {3u, 17u, 64u, 100u}) {
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i)
            x[i] = std::cos(2.0 * std::numbers::pi * static_cast<double>(bin * i) / static_cast<double>(n));
        const auto mag = magnitude_spectrum(x, n);
        double total = 0.0;
        for (double m : mag) total += m * m;
        EXPECT_GE(mag[bin] * mag[bin] / total, 0.99) << bin;
    }
}

// ---------------------------------------------------------------- filterbank

TEST(Filterbank, NonNegativeWithoutHoles) {
    for (FeatureConfig cfg : {FeatureConfig{}, FeatureConfig{16000, 25, 10, 80, 60.0, 7600.0, 1024, 1e-10},
                              FeatureConfig{8000, 25, 10, 23, 0.0, 0.0, 0, 1e-10}}) {
        const auto fb = mel_filterbank(cfg);
        const std::size_t n = cfg.fft_size();
        ASSERT_EQ(fb.size(), cfg.mel_bins);
        for (std::size_t k = 0; k < n / 2 + 1; ++k) {
            const double hz = static_cast<double>(k) * cfg.sample_rate / static_cast<double>(n);
            double total = 0.0;
            for (const auto& row : fb) {
                EXPECT_GE(row[k], 0.0);
                total += row[k];
            }
            if (hz > cfg.fmin && hz < cfg.upper_hz()) {
                EXPECT_GT(total, 0.0) << "hole at " << hz << " Hz";
            }
        }
    }
}

TEST(Filterbank, MelScaleRoundTrip) {
    EXPECT_NEAR(hz_to_mel(700.0), 2595.0 * std::log10(2.0), 1e-12);
    for (double hz : {0.0, 100.0, 1000.0, 8000.0}) EXPECT_NEAR(mel_to_hz(hz_to_mel(hz)), hz, 1e-9);
}

// ---------------------------------------------------------------- log-mel

TEST(LogMel, FrameCountFormula) {
    FeatureConfig cfg;
    AudioClip clip{std::vector<double>(400 + 160 * 9, 0.01), 16000};
    EXPECT_EQ(log_mel(clip, cfg).shape(), (Shape{10, 40}));
    clip.samples.push_back(0.0);
    EXPECT_EQ(log_mel(clip, cfg).dim(0), 10u);
}

TEST(LogMel, SilenceHitsTheFloor) {
    const Tensor f = log_mel(AudioClip{std::vector<double>(4000, 0.0), 16000}, FeatureConfig{});
    for (double v : f.values()) EXPECT_EQ(v, std::log(1e-10));
}

TEST(LogMel, ToneAtCentreSelectsItsBin) {
    const FeatureConfig cfg;
    for (std::size_t j = 0; j < cfg.mel_bins; ++j) {
        const auto samples = tone(mel_centre_hz(cfg, j), 400 + 160 * 19, cfg.sample_rate);
        const Tensor feats = log_mel(AudioClip{samples, cfg.sample_rate}, cfg);
        std::vector<double> mean(cfg.mel_bins, 0.0);
        for (std::size_t t = 0; t < feats.dim(0); ++t)
            for (std::size_t m = 0; m < cfg.mel_bins; ++m) mean[m] += feats[t * cfg.mel_bins + m];
        const auto ref = oracle_mel_energy(samples, cfg);
        for (std::size_t m = 0; m < cfg.mel_bins; ++m)
            EXPECT_NEAR(mean[m] / static_cast<double>(feats.dim(0)), ref[m], 1e-8);
        EXPECT_EQ(argmax(ref), j) << "oracle, bin " << j;
        EXPECT_EQ(argmax(mean), j) << "bin " << j;
    }
}

TEST(LogMel, DeterministicAndRateChecked) {
    Rng rng(4);
    std::vector<double> s(3000);
    for (auto& x : s) x = rng.uniform(-0.5, 0.5);
    const FeatureConfig cfg;
    const Tensor a = log_mel(AudioClip{s, 16000}, cfg), b = log_mel(AudioClip{s, 16000}, cfg);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
    EXPECT_THROW(log_mel(AudioClip{s, 8000}, cfg), std::invalid_argument);
}

TEST(LogMel, ShortClipAndBadConfigRejected) {
    EXPECT_THROW(log_mel(AudioClip{std::vector<double>(399, 0.0), 16000}, FeatureConfig{}), std::invalid_argument);
    FeatureConfig bad;
    bad.fmax = 9000.0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = FeatureConfig{};
    bad.dft_size = 300;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = FeatureConfig{};
    bad.mel_bins = 0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}
