#pragma once

// Greedy CTC decoding, Levenshtein error rates and the `k n rate low high`
// report line.

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "snn/layers/batchnorm.hpp"
#include "snn/loss/credible.hpp"
#include "snn/loss/ctc.hpp"

namespace snn {

/// Per-frame argmax (lowest id on ties), collapse repeats, drop blanks.
inline std::vector<TokenSeq> ctc_greedy_decode(const Tensor& log_probs, const Lengths& frame_lengths = {}) {
    if (log_probs.rank() != 3) throw ShapeError("ctc_greedy_decode: expected [B,T,V], got " + to_string(log_probs.shape()));
    const std::size_t B = log_probs.dim(0), T = log_probs.dim(1), V = log_probs.dim(2);
    const auto lp = log_probs.values();
    std::vector<TokenSeq> out(B);
    for (std::size_t b = 0; b < B; ++b) {
        const std::size_t Tb = frame_lengths.empty() ? T : std::min(frame_lengths[b], T);
        int prev = kBlank;
        for (std::size_t t = 0; t < Tb; ++t) {
            const double* row = lp.data() + (b * T + t) * V;
            const int best = static_cast<int>(std::max_element(row, row + V) - row);
            if (best != kBlank && best != prev) out[b].push_back(best);
            prev = best;
        }
    }
    return out;
}

/// Minimal substitutions + insertions + deletions turning ref into hyp.
template <class Seq>
std::size_t edit_distance(const Seq& ref, const Seq& hyp) {
    const std::size_t n = ref.size(), m = hyp.size();
    std::vector<std::size_t> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
            cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

struct ErrorRate {
    std::size_t edits = 0;
    std::size_t ref_length = 0;
    double rate = 0.0;
    bool empty_reference = false;  // rate used max(1, n) as denominator
};

template <class Seq>
ErrorRate error_rate(const Seq& ref, const Seq& hyp) {
    ErrorRate r;
    r.edits = edit_distance(ref, hyp);
    r.ref_length = ref.size();
    r.empty_reference = ref.empty() && !hyp.empty();
    r.rate = static_cast<double>(r.edits) / static_cast<double>(std::max<std::size_t>(1, r.ref_length));
    return r;
}

struct ErrorRateReport {
    std::size_t edits = 0;
    std::size_t n = 0;
    double rate = 0.0;
    double low = 0.0;
    double high = 0.0;

    /// `k n rate low high`
    std::string to_line() const {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%zu %zu %.17g %.17g %.17g", edits, n, rate, low, high);
        return buf;
    }

    static ErrorRateReport from_line(const std::string& line) {
        std::istringstream is(line);
        ErrorRateReport r;
        if (!(is >> r.edits >> r.n >> r.rate >> r.low >> r.high))
            throw std::invalid_argument("error-rate report: malformed line '" + line + "'");
        return r;
    }
};

/// Corpus-level rate: total edits over total reference tokens, with the
/// credible interval of the Beta posterior. Edit counts above n (insertion
/// heavy hypotheses) are clamped to n for the interval only.
inline ErrorRateReport corpus_error_rate(const std::vector<TokenSeq>& refs, const std::vector<TokenSeq>& hyps,
                                         double mass = 0.95, Prior prior = Prior::Uniform) {
    if (refs.size() != hyps.size()) throw std::invalid_argument("corpus_error_rate: reference/hypothesis count mismatch");
    ErrorRateReport r;
    for (std::size_t i = 0; i < refs.size(); ++i) {
        r.edits += edit_distance(refs[i], hyps[i]);
        r.n += refs[i].size();
    }
    if (r.n == 0) throw std::invalid_argument("corpus_error_rate: references contain no tokens");
    r.rate = static_cast<double>(r.edits) / static_cast<double>(r.n);
    const auto ci = credible_interval(std::min(r.edits, r.n), r.n, mass, prior);
    r.low = ci.low;
    r.high = ci.high;
    return r;
}

}  // namespace snn
