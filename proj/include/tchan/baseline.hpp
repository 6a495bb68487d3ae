#pragma once

// The two comparison detectors: variance regularity over windows of the
// arrival-ordered series, and epsilon-similarity over the sorted series.
// Both run on the same candidate keys and interval series as the signature
// detector.

#include "tchan/detect.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace tchan {

struct BaselineConfig {
    size_t window_size = 100;           // intervals per non-overlapping window
    double epsilon = 0.1;               // relative-difference bound
    double similarity_threshold = 0.9;  // flag when similarity >= this
    double regularity_threshold = 1.0;  // flag when score <= this

    void validate() const {
        if (window_size < 2) throw SpecError("window_size must be >= 2");
        if (!(epsilon > 0.0 && epsilon < 1.0)) throw SpecError("epsilon must be in (0,1)");
        if (!(similarity_threshold > 0.0 && similarity_threshold <= 1.0))
            throw SpecError("similarity_threshold must be in (0,1]");
        if (!(regularity_threshold >= 0.0)) throw SpecError("regularity_threshold must be >= 0");
    }
};

namespace detail {

// Mixed zero/non-zero window deviations have no finite relative difference;
// they contribute this fixed cap instead.
constexpr double kZeroSigmaCap = 10.0;

inline double population_stddev(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(xs.size()));
}

} // namespace detail

/// Regularity of the arrival-ordered series: split into non-overlapping
/// windows, take each window's standard deviation, then the pairwise
/// relative differences d_ij = |s_i - s_j| / s_i for i < j, and return the
/// standard deviation of those. Near zero means the spread never changes,
/// the mark of a clocked channel. Pairs of constant windows contribute 0;
/// a constant window paired with a varying one contributes the cap.
inline double regularity_score(const IntervalSeries& ia, size_t window_size) {
    if (window_size < 2) throw SpecError("window_size must be >= 2");
    if (ia.values_ns.size() < 2 * window_size)
        throw SpecError("regularity_score needs at least two full windows");

    std::vector<double> sigmas;
    for (size_t i = 0; i + window_size <= ia.values_ns.size(); i += window_size) {
        std::vector<double> win(ia.values_ns.begin() + static_cast<long>(i),
                                ia.values_ns.begin() + static_cast<long>(i + window_size));
        sigmas.push_back(detail::population_stddev(win));
    }

    std::vector<double> diffs;
    diffs.reserve(sigmas.size() * (sigmas.size() - 1) / 2);
    for (size_t i = 0; i < sigmas.size(); ++i) {
        for (size_t j = i + 1; j < sigmas.size(); ++j) {
            if (sigmas[i] == 0.0)
                diffs.push_back(sigmas[j] == 0.0 ? 0.0 : detail::kZeroSigmaCap);
            else
                diffs.push_back(std::abs(sigmas[i] - sigmas[j]) / sigmas[i]);
        }
    }
    return detail::population_stddev(diffs);
}

/// Fraction of consecutive sorted-value relative differences strictly below
/// epsilon. A step-function series scores near 1.
inline double epsilon_similarity(const IntervalSeries& ia, double epsilon) {
    if (ia.values_ns.size() < 2) throw SpecError("epsilon_similarity needs at least 2 values");
    std::vector<int64_t> sorted = ia.values_ns;
    std::sort(sorted.begin(), sorted.end());
    size_t below = 0;
    for (size_t i = 1; i < sorted.size(); ++i) {
        double prev = static_cast<double>(sorted[i - 1]);
        double rel = (static_cast<double>(sorted[i]) - prev) / prev;
        if (rel < epsilon) ++below;
    }
    return static_cast<double>(below) / static_cast<double>(sorted.size() - 1);
}

struct BaselineVerdict {
    CandidateKey key;
    bool flagged = false;
    bool variance_fired = false;
    bool epsilon_fired = false;
    std::optional<double> regularity;  // absent when the series is too short
    std::optional<double> similarity;
    std::string skipped; // non-empty when a method could not run
};

/// Runs both baselines over every candidate key. Keys whose series cannot
/// fill two variance windows are still scored by epsilon-similarity; the
/// skip is recorded.
inline std::vector<BaselineVerdict> baseline_detect(const Trace& trace, const BaselineConfig& bcfg,
                                                    const DetectorConfig& dcfg) {
    bcfg.validate();
    dcfg.validate();
    std::vector<Candidate> cands;
    if (trace.size() != 0)
        cands = trace.kind == TraceKind::memory ? candidate_pages(trace, dcfg)
                                                : candidate_flows(trace, dcfg);

    std::vector<BaselineVerdict> out;
    out.reserve(cands.size());
    for (const auto& c : cands) {
        BaselineVerdict v;
        v.key = c.key;
        if (c.rejected) {
            v.skipped = to_string(*c.rejected);
            out.push_back(std::move(v));
            continue;
        }
        std::vector<int64_t> times;
        times.reserve(c.records.size());
        for (size_t idx : c.records) times.push_back(trace.timestamp_at(idx));
        IntervalSeries series = interarrival(times, c.key);

        if (series.values_ns.size() >= 2) {
            v.similarity = epsilon_similarity(series, bcfg.epsilon);
            v.epsilon_fired = *v.similarity >= bcfg.similarity_threshold;
        } else {
            v.skipped = "too_few_intervals";
        }
        if (series.values_ns.size() >= 2 * bcfg.window_size) {
            v.regularity = regularity_score(series, bcfg.window_size);
            v.variance_fired = *v.regularity <= bcfg.regularity_threshold;
        } else if (v.skipped.empty()) {
            v.skipped = "too_short_for_windows";
        }
        v.flagged = v.variance_fired || v.epsilon_fired;
        out.push_back(std::move(v));
    }
    std::sort(out.begin(), out.end(),
              [](const BaselineVerdict& a, const BaselineVerdict& b) { return a.key < b.key; });
    return out;
}

} // namespace tchan
