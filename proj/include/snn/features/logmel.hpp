#pragma once

// Log-mel filterbank features: Hamming-windowed frames, radix-2 FFT magnitude
// spectrum, triangular filters on the mel scale m = 2595 log10(1 + f/700),
// natural log with an absolute floor.

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "snn/features/wav.hpp"
#include "snn/tensor.hpp"

namespace snn {

struct FeatureConfig {
    int sample_rate = 16000;
    double frame_ms = 25.0;
    double hop_ms = 10.0;
    std::size_t mel_bins = 40;
    double fmin = 0.0;
    double fmax = 0.0;        // 0 means sample_rate / 2
    std::size_t dft_size = 0;  // 0 means next power of two >= frame length
    double log_floor = 1e-10;

    std::size_t frame_samples() const { return static_cast<std::size_t>(std::lround(sample_rate * frame_ms / 1000.0)); }
    std::size_t hop_samples() const { return static_cast<std::size_t>(std::lround(sample_rate * hop_ms / 1000.0)); }
    double upper_hz() const { return fmax > 0.0 ? fmax : sample_rate / 2.0; }
    std::size_t fft_size() const {
        if (dft_size) return dft_size;
        std::size_t n = 1;
        while (n < frame_samples()) n <<= 1;
        return n;
    }

    void validate() const {
        if (sample_rate <= 0) throw std::invalid_argument("features: sample_rate must be positive");
        if (mel_bins < 1) throw std::invalid_argument("features: need at least one mel bin");
        if (!(fmin >= 0.0 && fmin < upper_hz() && upper_hz() <= sample_rate / 2.0))
            throw std::invalid_argument("features: require 0 <= fmin < fmax <= sample_rate/2");
        if (frame_samples() == 0 || hop_samples() == 0) throw std::invalid_argument("features: frame and hop must span >= 1 sample");
        const std::size_t n = fft_size();
        if ((n & (n - 1)) != 0 || n < frame_samples())
            throw std::invalid_argument("features: dft_size must be a power of two >= the frame length");
    }
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// In-place iterative radix-2 FFT; size must be a power of two.
inline void fft(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft: size must be a power of two");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        for (std::size_t i = 0; i < n; i += len)
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> w = std::polar(1.0, ang * static_cast<double>(k));
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
            }
    }
}

/// |X[k]| for k = 0..n/2 of a real signal zero-padded to n samples.
inline std::vector<double> magnitude_spectrum(const std::vector<double>& frame, std::size_t n) {
    std::vector<std::complex<double>> buf(n);
    for (std::size_t i = 0; i < frame.size() && i < n; ++i) buf[i] = frame[i];
    fft(buf);
    std::vector<double> mag(n / 2 + 1);
    for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(buf[k]);
    return mag;
}

inline std::vector<double> hamming_window(std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (n == 1) return w;
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
    return w;
}

/// [mel_bins, n/2 + 1] triangular filters with peaks of 1 at the centre
/// frequencies, evenly spaced in mel between fmin and fmax.
inline std::vector<std::vector<double>> mel_filterbank(const FeatureConfig& cfg) {
    cfg.validate();
    const std::size_t n = cfg.fft_size();
    const std::size_t bins = n / 2 + 1;
    const double lo = hz_to_mel(cfg.fmin), hi = hz_to_mel(cfg.upper_hz());
    std::vector<double> edges(cfg.mel_bins + 2);
    for (std::size_t i = 0; i < edges.size(); ++i)
        edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cfg.mel_bins + 1));
    std::vector<std::vector<double>> fb(cfg.mel_bins, std::vector<double>(bins, 0.0));
    for (std::size_t m = 0; m < cfg.mel_bins; ++m) {
        const double left = edges[m], centre = edges[m + 1], right = edges[m + 2];
        for (std::size_t k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * cfg.sample_rate / static_cast<double>(n);
            double w = 0.0;
            if (f > left && f <= centre) w = (f - left) / (centre - left);
            else if (f > centre && f < right) w = (right - f) / (right - centre);
            fb[m][k] = w;
        }
    }
    return fb;
}

/// Centre frequency (Hz) of mel filter j.
inline double mel_centre_hz(const FeatureConfig& cfg, std::size_t j) {
    const double lo = hz_to_mel(cfg.fmin), hi = hz_to_mel(cfg.upper_hz());
    return mel_to_hz(lo + (hi - lo) * static_cast<double>(j + 1) / static_cast<double>(cfg.mel_bins + 1));
}

inline std::size_t frame_count(std::size_t samples, std::size_t win, std::size_t hop) {
    return samples < win ? 0 : (samples - win) / hop + 1;
}

/// Log-mel features [frames, mel_bins] for a clip recorded at cfg.sample_rate.
inline Tensor log_mel(const AudioClip& clip, const FeatureConfig& cfg) {
    cfg.validate();
    if (clip.sample_rate != cfg.sample_rate)
        throw std::invalid_argument("features: clip sample rate " + std::to_string(clip.sample_rate) +
                                    " Hz differs from configured " + std::to_string(cfg.sample_rate) + " Hz (no resampling)");
    const std::size_t win = cfg.frame_samples(), hop = cfg.hop_samples(), n = cfg.fft_size();
    const std::size_t frames = frame_count(clip.samples.size(), win, hop);
    if (frames == 0)
        throw std::invalid_argument("features: clip of " + std::to_string(clip.samples.size()) +
                                    " samples is shorter than one frame (" + std::to_string(win) + ")");
    const auto window = hamming_window(win);
    const auto fb = mel_filterbank(cfg);
    std::vector<double> out(frames * cfg.mel_bins);
    std::vector<double> frame(win);
    for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t i = 0; i < win; ++i) frame[i] = clip.samples[f * hop + i] * window[i];
        const auto mag = magnitude_spectrum(frame, n);
        for (std::size_t m = 0; m < cfg.mel_bins; ++m) {
            double e = 0.0;
            for (std::size_t k = 0; k < mag.size(); ++k) e += fb[m][k] * mag[k];
            out[f * cfg.mel_bins + m] = std::log(std::max(e, cfg.log_floor));
        }
    }
    return Tensor({frames, cfg.mel_bins}, std::move(out));
}

}  // namespace snn
