#pragma once

// Long-term behavior signature detector. Per candidate key (a repeatedly
// accessed page bound to one pid, or an exact 5-tuple flow) the pipeline is:
//
//   inter-arrival times -> sort -> group by relative difference (k1)
//   -> prune minor groups (min_group_frac) -> per-group smoothness (k2)
//   -> pattern match: 2 groups = DTC, >2 integer-multiple groups = STC.
//
// A key is rejected outright when any surviving group is not smooth.

#include "tchan/trace.hpp"
#include "tchan/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tchan {

struct DetectorConfig {
    size_t repeat_threshold = 100; // minimum event count per key
    double k1 = 0.1;               // grouping relative-difference bound
    double k2 = 0.01;              // smoothness slope bound
    double min_group_frac = 0.05;  // minor-group pruning fraction
    bool ignore_non_read = true;   // key memory traces on read accesses only

    void validate() const {
        if (repeat_threshold < 2) throw SpecError("repeat_threshold must be >= 2");
        if (!(k1 > 0.0 && k1 < 1.0)) throw SpecError("k1 must be in (0,1)");
        if (!(k2 > 0.0)) throw SpecError("k2 must be positive");
        if (!(min_group_frac >= 0.0 && min_group_frac < 1.0))
            throw SpecError("min_group_frac must be in [0,1)");
    }
};

/// Ordered positive inter-arrival times for one candidate key.
struct IntervalSeries {
    CandidateKey key;
    std::vector<int64_t> values_ns;
    size_t dropped_nonpositive = 0;
};

/// A contiguous run of sorted, mutually similar intervals.
struct IntervalGroup {
    std::vector<int64_t> values_ns; // ascending slice of the sorted series
    double mean_ns = 0.0;
    double slope = 0.0; // smoothness coefficient b, filled by detect()

    size_t count() const { return values_ns.size(); }
};

enum class ChannelType { none, STC, DTC };
enum class RejectReason { too_few_events, pid_inconsistent, not_smooth, no_pattern };

inline const char* to_string(ChannelType t) {
    switch (t) {
    case ChannelType::STC: return "STC";
    case ChannelType::DTC: return "DTC";
    default: return "none";
    }
}
inline const char* to_string(RejectReason r) {
    switch (r) {
    case RejectReason::too_few_events: return "too_few_events";
    case RejectReason::pid_inconsistent: return "pid_inconsistent";
    case RejectReason::not_smooth: return "not_smooth";
    default: return "no_pattern";
    }
}

struct DetectionVerdict {
    CandidateKey key;
    ChannelType channel_type = ChannelType::none;
    std::vector<IntervalGroup> groups; // surviving groups, ascending means
    double base_interval_ns = 0.0;     // min group mean (STC) or low level (DTC)
    std::vector<size_t> evidence;      // record indices for this key
    size_t dropped_nonpositive = 0;
    std::optional<RejectReason> rejected_reason;
    std::string note;
};

/// One repetitive key and the trace records behind it. Keys failing the
/// pid-consistency check are returned with rejected set.
struct Candidate {
    CandidateKey key;
    std::vector<size_t> records;
    std::optional<RejectReason> rejected;
};

/// Alg. line 3-8: pages with >= repeat_threshold accesses, all by one pid.
/// Only read accesses are considered unless the config admits all kinds.
inline std::vector<Candidate> candidate_pages(const Trace& trace, const DetectorConfig& cfg) {
    cfg.validate();
    if (trace.kind != TraceKind::memory) throw SpecError("candidate_pages requires a memory trace");

    struct PageAgg {
        std::vector<size_t> records;
        int32_t first_pid = 0;
        bool pid_consistent = true;
    };
    std::map<std::pair<int32_t, uint64_t>, PageAgg> pages; // (domain, page)
    for (size_t i = 0; i < trace.memory.size(); ++i) {
        const auto& r = trace.memory[i];
        if (cfg.ignore_non_read && r.access != AccessKind::read) continue;
        auto& agg = pages[{r.domain_id, r.page}];
        if (agg.records.empty()) agg.first_pid = r.pid;
        else if (r.pid != agg.first_pid) agg.pid_consistent = false;
        agg.records.push_back(i);
    }

    std::vector<Candidate> out;
    for (auto& [dompage, agg] : pages) {
        if (agg.records.size() < cfg.repeat_threshold) continue;
        Candidate c;
        c.key = PageKey{dompage.first, agg.first_pid, dompage.second};
        c.records = std::move(agg.records);
        if (!agg.pid_consistent) c.rejected = RejectReason::pid_inconsistent;
        out.push_back(std::move(c));
    }
    return out;
}

/// Fixed-endpoint rule: every exact 5-tuple with >= repeat_threshold packets.
inline std::vector<Candidate> candidate_flows(const Trace& trace, const DetectorConfig& cfg) {
    cfg.validate();
    if (trace.kind != TraceKind::packet) throw SpecError("candidate_flows requires a packet trace");

    std::map<FlowKey, std::vector<size_t>> flows;
    for (size_t i = 0; i < trace.packets.size(); ++i) {
        const auto& r = trace.packets[i];
        flows[FlowKey{r.src_ip, r.src_port, r.dst_ip, r.dst_port, r.protocol}].push_back(i);
    }

    std::vector<Candidate> out;
    for (auto& [key, records] : flows) {
        if (records.size() < cfg.repeat_threshold) continue;
        out.push_back(Candidate{key, std::move(records), std::nullopt});
    }
    return out;
}

/// Consecutive timestamp differences; non-positive intervals (timestamp ties)
/// are dropped and counted, since the grouping rule is undefined at zero.
inline IntervalSeries interarrival(std::span<const int64_t> timestamps, CandidateKey key = PageKey{}) {
    if (timestamps.size() < 2)
        throw SpecError("interarrival requires at least 2 records");
    IntervalSeries s;
    s.key = std::move(key);
    s.values_ns.reserve(timestamps.size() - 1);
    for (size_t i = 1; i < timestamps.size(); ++i) {
        int64_t d = timestamps[i] - timestamps[i - 1];
        if (d > 0) s.values_ns.push_back(d);
        else ++s.dropped_nonpositive;
    }
    return s;
}

/// Sorts the series ascending and splits it wherever the relative difference
/// to the previous value exceeds k1. The groups partition the sorted values.
inline std::vector<IntervalGroup> group_sorted_intervals(const IntervalSeries& series, double k1) {
    if (series.values_ns.empty()) throw SpecError("cannot group an empty interval series");
    std::vector<int64_t> sorted = series.values_ns;
    std::sort(sorted.begin(), sorted.end());

    std::vector<IntervalGroup> groups;
    groups.emplace_back();
    groups.back().values_ns.push_back(sorted.front());
    for (size_t i = 1; i < sorted.size(); ++i) {
        double prev = static_cast<double>(sorted[i - 1]);
        double rel = (static_cast<double>(sorted[i]) - prev) / prev;
        if (rel > k1) groups.emplace_back();
        groups.back().values_ns.push_back(sorted[i]);
    }
    for (auto& g : groups) {
        long double sum = 0;
        for (int64_t v : g.values_ns) sum += static_cast<long double>(v);
        g.mean_ns = static_cast<double>(sum / static_cast<long double>(g.values_ns.size()));
    }
    return groups;
}

/// Drops groups whose count is strictly below min_group_frac of the total.
inline std::vector<IntervalGroup> prune_minor_groups(std::vector<IntervalGroup> groups,
                                                     size_t total_count, double min_group_frac) {
    std::erase_if(groups, [&](const IntervalGroup& g) {
        return static_cast<double>(g.count()) < min_group_frac * static_cast<double>(total_count);
    });
    return groups;
}

/// Smoothness coefficient: |OLS slope| of the group's mean-normalized sorted
/// values against their rank index, i.e. the average relative increment per
/// step along the sorted run. A flat timing level scores near zero; a group
/// that climbs ~k2 of its mean per rank is a drift, not a level. Slope on the
/// mean-normalized values keeps the coefficient dimensionless, so the k2
/// bound is scale-free. Singleton groups are 0 by definition.
inline double smoothness_coefficient(const IntervalGroup& group) {
    const size_t n = group.count();
    if (n < 2) return 0.0;
    if (group.mean_ns <= 0.0) return 0.0;

    // x = 0..n-1, y = v/mean; slope = cov(x,y)/var(x)
    const double xbar = (static_cast<double>(n) - 1.0) / 2.0;
    double sxy = 0.0;
    double ybar = 0.0;
    for (size_t i = 0; i < n; ++i)
        ybar += static_cast<double>(group.values_ns[i]) / group.mean_ns;
    ybar /= static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) {
        double y = static_cast<double>(group.values_ns[i]) / group.mean_ns;
        sxy += (static_cast<double>(i) - xbar) * (y - ybar);
    }
    const double nn = static_cast<double>(n);
    const double sxx = nn * (nn * nn - 1.0) / 12.0;
    return std::abs(sxy / sxx);
}

/// Pattern match over smooth surviving groups: exactly two levels is DTC;
/// more than two whose means are all integer multiples of the smallest mean
/// (within relative tolerance k1) is STC. The integer-multiple check runs on
/// every group, not just the last one.
inline ChannelType classify_pattern(std::span<const IntervalGroup> groups, double k1) {
    if (groups.size() == 2) return ChannelType::DTC;
    if (groups.size() > 2) {
        double min_mean = groups.front().mean_ns;
        for (const auto& g : groups) min_mean = std::min(min_mean, g.mean_ns);
        if (min_mean <= 0.0) return ChannelType::none;
        for (const auto& g : groups) {
            double ratio = g.mean_ns / min_mean;
            if (std::abs(ratio - std::round(ratio)) > k1) return ChannelType::none;
        }
        return ChannelType::STC;
    }
    return ChannelType::none; // one constant-rate level is not a channel
}

namespace detail {

inline DetectionVerdict analyze_candidate(const Trace& trace, const Candidate& cand,
                                          const DetectorConfig& cfg) {
    DetectionVerdict v;
    v.key = cand.key;
    v.evidence = cand.records;
    if (cand.rejected) {
        v.rejected_reason = cand.rejected;
        return v;
    }

    std::vector<int64_t> times;
    times.reserve(cand.records.size());
    for (size_t idx : cand.records) times.push_back(trace.timestamp_at(idx));

    IntervalSeries series = interarrival(times, cand.key);
    v.dropped_nonpositive = series.dropped_nonpositive;
    if (series.values_ns.size() < 2) {
        v.rejected_reason = RejectReason::too_few_events;
        return v;
    }

    auto groups = group_sorted_intervals(series, cfg.k1);
    auto survivors = prune_minor_groups(std::move(groups), series.values_ns.size(), cfg.min_group_frac);
    if (survivors.empty()) {
        v.rejected_reason = RejectReason::no_pattern;
        return v;
    }

    bool smooth = true;
    for (auto& g : survivors) {
        g.slope = smoothness_coefficient(g);
        if (g.slope >= cfg.k2) smooth = false;
    }
    v.groups = std::move(survivors);
    if (!smooth) {
        v.rejected_reason = RejectReason::not_smooth;
        return v;
    }

    v.channel_type = classify_pattern(v.groups, cfg.k1);
    if (v.channel_type == ChannelType::none) {
        v.rejected_reason = RejectReason::no_pattern;
        return v;
    }

    double lo = v.groups.front().mean_ns;
    for (const auto& g : v.groups) lo = std::min(lo, g.mean_ns);
    v.base_interval_ns = lo;

    if (v.channel_type == ChannelType::DTC) {
        double hi = std::max(v.groups[0].mean_ns, v.groups[1].mean_ns);
        double ratio = hi / lo;
        if (std::abs(ratio - std::round(ratio)) <= cfg.k1 && std::round(ratio) >= 2.0)
            v.note = "group means are in integer ratio; an STC reading also fits";
    }
    return v;
}

} // namespace detail

/// Runs the full pipeline for every candidate key and returns a verdict for
/// each, including rejected candidates with their reasons. Results come back
/// in deterministic key order.
inline std::vector<DetectionVerdict> detect(const Trace& trace, const DetectorConfig& cfg) {
    cfg.validate();
    std::vector<Candidate> cands;
    if (trace.size() != 0)
        cands = trace.kind == TraceKind::memory ? candidate_pages(trace, cfg)
                                                : candidate_flows(trace, cfg);
    std::vector<DetectionVerdict> out;
    out.reserve(cands.size());
    for (const auto& c : cands) out.push_back(detail::analyze_candidate(trace, c, cfg));
    std::sort(out.begin(), out.end(),
              [](const DetectionVerdict& a, const DetectionVerdict& b) { return a.key < b.key; });
    return out;
}

} // namespace tchan
