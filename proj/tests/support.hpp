#pragma once

// Shared test fixtures and independent oracles. Oracles deliberately avoid
// the library's own code paths: the slot-walk oracle replays STC messages by
// hand, the OLS oracle evaluates the closed-form slope directly, and the
// trace generator builds records without the simulators.

#include "tchan/detect.hpp"
#include "tchan/sim.hpp"
#include "tchan/trace.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <vector>

namespace testsupport {

/// Expected STC inter-arrival multiset: walk the slot indices of 1 bits.
inline std::vector<int64_t> stc_slot_walk_oracle(const tchan::BitMessage& m, int64_t base) {
    std::vector<size_t> slots;
    for (size_t i = 0; i < m.bits.size(); ++i)
        if (m.bits[i]) slots.push_back(i);
    std::vector<int64_t> ia;
    for (size_t i = 1; i < slots.size(); ++i)
        ia.push_back(static_cast<int64_t>(slots[i] - slots[i - 1]) * base);
    return ia;
}

/// Expected DTC inter-arrival sequence: one interval per bit.
inline std::vector<int64_t> dtc_replay_oracle(const tchan::BitMessage& m, int64_t t0, int64_t t1) {
    std::vector<int64_t> ia;
    ia.reserve(m.bits.size());
    for (uint8_t b : m.bits) ia.push_back(b ? t1 : t0);
    return ia;
}

/// Closed-form OLS slope of y against x (no incremental accumulation).
inline double ols_slope_oracle(const std::vector<double>& xs, const std::vector<double>& ys) {
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxy = 0, sxx = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxy += xs[i] * ys[i];
        sxx += xs[i] * xs[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Smoothness per the detector's definition, computed independently.
inline double smoothness_oracle(const std::vector<int64_t>& group_values) {
    if (group_values.size() < 2) return 0.0;
    double mean = 0;
    for (int64_t v : group_values) mean += static_cast<double>(v);
    mean /= static_cast<double>(group_values.size());
    std::vector<double> xs, ys;
    for (size_t i = 0; i < group_values.size(); ++i) {
        xs.push_back(static_cast<double>(i));
        ys.push_back(static_cast<double>(group_values[i]) / mean);
    }
    return std::abs(ols_slope_oracle(xs, ys));
}

/// Zero-run histogram of a message: counts of each (run length + 1), the
/// slot multiples its STC trace will show.
inline std::map<size_t, size_t> slot_multiple_histogram(const tchan::BitMessage& m) {
    std::map<size_t, size_t> hist;
    long prev = -1;
    for (size_t i = 0; i < m.bits.size(); ++i) {
        if (!m.bits[i]) continue;
        if (prev >= 0) ++hist[i - static_cast<size_t>(prev)];
        prev = static_cast<long>(i);
    }
    return hist;
}

/// A valid random memory trace built record-by-record (no simulator).
inline tchan::Trace random_memory_trace(uint64_t seed, size_t n_records) {
    std::mt19937_64 rng(seed);
    tchan::Trace t;
    t.kind = tchan::TraceKind::memory;
    std::uniform_int_distribution<int64_t> step(0, 1'000'000);
    std::uniform_int_distribution<int32_t> pid(1, 500);
    std::uniform_int_distribution<uint64_t> page(0, 1 << 16);
    std::uniform_int_distribution<int> acc(0, 2);
    int64_t at = 0;
    for (size_t i = 0; i < n_records; ++i) {
        at += step(rng);
        t.memory.push_back({at, 1, pid(rng), page(rng) * tchan::kDefaultPageSize,
                            static_cast<tchan::AccessKind>(acc(rng))});
    }
    t.meta["generator"] = "test";
    t.meta["seed"] = std::to_string(seed);
    return t;
}

inline tchan::Trace random_packet_trace(uint64_t seed, size_t n_records) {
    std::mt19937_64 rng(seed);
    tchan::Trace t;
    t.kind = tchan::TraceKind::packet;
    std::uniform_int_distribution<int64_t> step(0, 1'000'000);
    std::uniform_int_distribution<uint32_t> ip(1, 0xffffff00u);
    std::uniform_int_distribution<int> port(1, 65535);
    std::uniform_int_distribution<uint32_t> len(0, 1500);
    int64_t at = 0;
    for (size_t i = 0; i < n_records; ++i) {
        at += step(rng);
        t.packets.push_back({at, ip(rng), static_cast<uint16_t>(port(rng)), ip(rng),
                             static_cast<uint16_t>(port(rng)),
                             (rng() & 1) ? tchan::Protocol::udp : tchan::Protocol::tcp, len(rng)});
    }
    t.meta["generator"] = "test";
    return t;
}

} // namespace testsupport
