#pragma once

// Seeded generators for the four timing channels, as traces:
//
//   STC: per-slot activity/silence. One event at slot i*base for each 1 bit;
//        inter-arrivals come out as integer multiples of the slot length.
//   DTC: two distinct inter-event intervals; long = 1, short = 0.
//
// shared_memory / cache / cpu_load channels emit memory traces on one
// (domain, pid, page); ip_timing emits packets on one 5-tuple. Jitter is
// Gaussian, clamped so event times stay strictly increasing. Identical
// (message, spec, seed) inputs produce byte-identical traces.

#include "tchan/detect.hpp"
#include "tchan/trace.hpp"
#include "tchan/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace tchan {

class DecodeError : public std::runtime_error {
public:
    explicit DecodeError(const std::string& what) : std::runtime_error(what) {}
};

enum class Channel { shared_memory, cache, cpu_load, ip_timing };
enum class Scheme { STC, DTC };

inline const char* to_string(Channel c) {
    switch (c) {
    case Channel::shared_memory: return "shm";
    case Channel::cache: return "cache";
    case Channel::cpu_load: return "load";
    default: return "ip";
    }
}
inline const char* to_string(Scheme s) { return s == Scheme::STC ? "stc" : "dtc"; }

struct BitMessage {
    std::vector<uint8_t> bits; // each 0 or 1

    bool empty() const { return bits.empty(); }
    size_t size() const { return bits.size(); }
    size_t ones() const { return static_cast<size_t>(std::count(bits.begin(), bits.end(), 1)); }

    std::string to_string() const {
        std::string s;
        s.reserve(bits.size());
        for (uint8_t b : bits) s.push_back(b ? '1' : '0');
        return s;
    }

    static BitMessage from_string(std::string_view s) {
        BitMessage m;
        m.bits.reserve(s.size());
        for (char c : s) {
            if (c == '0') m.bits.push_back(0);
            else if (c == '1') m.bits.push_back(1);
            else if (c == '\n' || c == '\r' || c == ' ') continue;
            else throw SpecError(std::string("bit messages may contain only 0/1, got '") + c + "'");
        }
        return m;
    }

    /// Uniform random bits. If framed, the first and last bits are forced to
    /// 1 so the STC round-trip identity holds (leading/trailing silence is
    /// unobservable in an event stream).
    static BitMessage random(size_t n, uint64_t seed, bool framed = false) {
        std::mt19937_64 rng(seed);
        BitMessage m;
        m.bits.resize(n);
        for (auto& b : m.bits) b = static_cast<uint8_t>(rng() & 1);
        if (framed && n > 0) {
            m.bits.front() = 1;
            m.bits.back() = 1;
        }
        return m;
    }

    bool operator==(const BitMessage&) const = default;
};

struct ChannelSpec {
    Channel channel = Channel::shared_memory;
    Scheme scheme = Scheme::DTC;
    int64_t base_interval_ns = 0; // STC slot length, or DTC short interval t0
    int64_t long_interval_ns = 0; // DTC long interval t1; unused for STC
    double jitter_sigma_ns = 0.0;
    CandidateKey key;
    int64_t start_ns = 0;

    /// Separation needed for the two DTC levels to land in distinct groups.
    static constexpr double kMinLevelSeparation = 0.1;

    void validate() const {
        if (base_interval_ns <= 0) throw SpecError("base_interval_ns must be positive");
        if (jitter_sigma_ns < 0.0) throw SpecError("jitter_sigma_ns must be >= 0");
        if (start_ns < 0) throw SpecError("start_ns must be >= 0");
        if (scheme == Scheme::DTC) {
            if (long_interval_ns <= base_interval_ns)
                throw SpecError("DTC requires long_interval_ns > base_interval_ns");
            double rel = static_cast<double>(long_interval_ns - base_interval_ns) /
                         static_cast<double>(base_interval_ns);
            if (rel <= kMinLevelSeparation)
                throw SpecError("DTC levels too close: (long-base)/base must exceed 0.1");
        }
        bool is_packet = channel == Channel::ip_timing;
        if (is_packet != std::holds_alternative<FlowKey>(key))
            throw SpecError("channel kind does not match key variant");
    }
};

/// Background processes: each gets a fresh pid and its own page pool, so
/// noise alone never puts two pids on one page.
struct NoiseSpec {
    size_t n_processes = 20;
    double mean_rate_hz = 50.0;
    size_t page_pool = 16;
    int64_t duration_ns = 60'000'000'000; // 60 s

    void validate() const {
        if (mean_rate_hz < 0.0) throw SpecError("mean_rate_hz must be >= 0");
        if (duration_ns < 0) throw SpecError("duration_ns must be >= 0");
    }
};

namespace detail {

inline void append_event(Trace& t, const ChannelSpec& spec, int64_t time_ns) {
    if (t.kind == TraceKind::memory) {
        const auto& k = std::get<PageKey>(spec.key);
        t.memory.push_back({time_ns, k.domain_id, k.pid, k.page, AccessKind::read});
    } else {
        const auto& k = std::get<FlowKey>(spec.key);
        t.packets.push_back({time_ns, k.src_ip, k.src_port, k.dst_ip, k.dst_port, k.protocol, 0});
    }
}

inline Trace make_channel_trace(const ChannelSpec& spec) {
    Trace t;
    t.kind = spec.channel == Channel::ip_timing ? TraceKind::packet : TraceKind::memory;
    t.meta["channel"] = to_string(spec.channel);
    t.meta["scheme"] = to_string(spec.scheme);
    t.meta["base_ns"] = std::to_string(spec.base_interval_ns);
    if (spec.scheme == Scheme::DTC) t.meta["long_ns"] = std::to_string(spec.long_interval_ns);
    char jbuf[64];
    std::snprintf(jbuf, sizeof(jbuf), "%.17g", spec.jitter_sigma_ns);
    t.meta["jitter_ns"] = jbuf;
    t.meta["key"] = to_string(spec.key);
    return t;
}

inline void stamp_seed_and_message(Trace& t, const char* generator, uint64_t seed,
                                   const BitMessage& message) {
    t.meta["generator"] = generator;
    t.meta["seed"] = std::to_string(seed);
    t.meta["message"] = message.to_string();
}

} // namespace detail

/// STC: activity is 1, silence is 0. Emits one event per 1 bit at its slot
/// boundary; a run of z zeros between two ones shows up as one inter-arrival
/// of (z+1)*base. Leading/trailing zero runs of the message produce no
/// events and are invisible to a decoder, so exact round-trips need messages
/// that start and end with 1.
inline Trace simulate_stc(const BitMessage& message, const ChannelSpec& spec, uint64_t seed) {
    spec.validate();
    if (spec.scheme != Scheme::STC) throw SpecError("simulate_stc requires an STC spec");
    if (spec.channel == Channel::cpu_load)
        throw SpecError("the cpu_load channel is interval-encoded (DTC), not slot-encoded");
    if (message.empty()) throw SpecError("message must be non-empty");
    if (message.ones() == 0) throw SpecError("all-zero STC message has no events to emit");

    std::mt19937_64 rng(derive_seed(seed, 0x57c0));
    std::normal_distribution<double> jitter(0.0, 1.0);

    Trace t = detail::make_channel_trace(spec);
    detail::stamp_seed_and_message(t, "stc", seed, message);

    int64_t prev = spec.start_ns - 1;
    for (size_t i = 0; i < message.size(); ++i) {
        if (!message.bits[i]) continue;
        double j = spec.jitter_sigma_ns > 0.0 ? jitter(rng) * spec.jitter_sigma_ns : 0.0;
        int64_t at = spec.start_ns + static_cast<int64_t>(i) * spec.base_interval_ns +
                     static_cast<int64_t>(std::llround(j));
        at = std::max(at, prev + 1); // keep event times strictly increasing
        detail::append_event(t, spec, at);
        prev = at;
    }
    return t;
}

/// DTC: first event at start, then one event per bit after the long (1) or
/// short (0) interval plus jitter.
inline Trace simulate_dtc(const BitMessage& message, const ChannelSpec& spec, uint64_t seed) {
    spec.validate();
    if (spec.scheme != Scheme::DTC) throw SpecError("simulate_dtc requires a DTC spec");
    if (message.empty()) throw SpecError("message must be non-empty");

    std::mt19937_64 rng(derive_seed(seed, 0xd7c0));
    std::normal_distribution<double> jitter(0.0, 1.0);

    Trace t = detail::make_channel_trace(spec);
    detail::stamp_seed_and_message(t, "dtc", seed, message);

    int64_t at = spec.start_ns;
    detail::append_event(t, spec, at);
    for (uint8_t b : message.bits) {
        int64_t gap = b ? spec.long_interval_ns : spec.base_interval_ns;
        if (spec.jitter_sigma_ns > 0.0)
            gap += static_cast<int64_t>(std::llround(jitter(rng) * spec.jitter_sigma_ns));
        gap = std::max<int64_t>(gap, 1);
        at += gap;
        detail::append_event(t, spec, at);
    }
    return t;
}

namespace detail {

// One pilot block contributes one inter-arrival at each of 1..5 slot lengths.
inline const std::vector<uint8_t>& stc_pilot_block() {
    static const std::vector<uint8_t> block = {1, 1, 0, 1, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 1};
    return block;
}

} // namespace detail

/// Pads a message so every slot multiple 1..5 holds a share of the interval
/// multiset well clear of the detector's default 5% pruning floor. Messages
/// with no zeros at all are left alone: a constant stream has one honest
/// level and nothing to disambiguate.
inline BitMessage pad_stc_message(const BitMessage& message) {
    if (message.empty()) throw SpecError("message must be non-empty");
    if (message.ones() == 0) throw SpecError("all-zero STC message has no events to emit");
    bool has_zero = message.ones() < message.size();
    if (!has_zero) return message;

    // Interval multiset of the raw message: gaps between consecutive 1 bits.
    size_t counts[6] = {0, 0, 0, 0, 0, 0};
    size_t total = 0;
    long prev = -1;
    for (size_t i = 0; i < message.size(); ++i) {
        if (!message.bits[i]) continue;
        if (prev >= 0) {
            size_t gap = i - static_cast<size_t>(prev);
            if (gap <= 5) ++counts[gap];
            ++total;
        }
        prev = static_cast<long>(i);
    }

    // Each block adds one interval at every multiple; size the block count so
    // each multiple ends up with at least an 8% share: (c_k + B) >= 0.08 *
    // (total + 5B)  =>  B >= (0.08*total - c_k) / 0.6.
    const double target = 0.08;
    double blocks = 1.0;
    for (size_t k = 1; k <= 5; ++k) {
        double need = (target * static_cast<double>(total) - static_cast<double>(counts[k])) /
                      (1.0 - 5.0 * target);
        blocks = std::max(blocks, std::ceil(need));
    }
    size_t b = static_cast<size_t>(blocks) + 2;

    BitMessage padded = message;
    const auto& block = detail::stc_pilot_block();
    padded.bits.reserve(padded.bits.size() + b * block.size());
    for (size_t i = 0; i < b; ++i)
        padded.bits.insert(padded.bits.end(), block.begin(), block.end());
    return padded;
}

/// Parameters of the flush-reload style preset: a cache probe stream at a
/// 200000 ns slot with 2000 ns jitter.
inline ChannelSpec cache_stc_preset_spec() {
    ChannelSpec spec;
    spec.channel = Channel::cache;
    spec.scheme = Scheme::STC;
    spec.base_interval_ns = 200'000;
    spec.jitter_sigma_ns = 2'000.0;
    spec.key = PageKey{1, 2301, 0x195a0000};
    return spec;
}

/// Flush-reload style cache probe stream; the message is padded so five slot
/// multiples survive detection.
inline Trace simulate_cache_stc_preset(const BitMessage& message, uint64_t seed) {
    Trace t = simulate_stc(pad_stc_message(message), cache_stc_preset_spec(), seed);
    t.meta["generator"] = "cache_stc_preset";
    return t;
}

namespace detail {

constexpr int32_t kNoisePidBase = 10'000;
constexpr uint64_t kNoisePageBase = 0x40000000;
constexpr uint32_t kNoiseSrcNet = 0x0a000000; // 10.0.0.0
constexpr uint32_t kNoiseDstNet = 0x0a010000; // 10.1.0.0

} // namespace detail

/// Background memory activity: per process, page accesses drawn from its own
/// pool at exponential inter-arrival times.
inline Trace simulate_noise(const NoiseSpec& noise, uint64_t seed) {
    noise.validate();
    Trace t;
    t.kind = TraceKind::memory;
    t.meta["generator"] = "noise";
    t.meta["seed"] = std::to_string(seed);
    t.meta["procs"] = std::to_string(noise.n_processes);

    for (size_t p = 0; p < noise.n_processes; ++p) {
        std::mt19937_64 rng(derive_seed(seed, 0x401, p));
        if (noise.mean_rate_hz <= 0.0 || noise.page_pool == 0) continue;
        std::exponential_distribution<double> gap(noise.mean_rate_hz / 1e9);
        std::uniform_int_distribution<size_t> pick(0, noise.page_pool - 1);
        int32_t pid = detail::kNoisePidBase + static_cast<int32_t>(p);
        double at = gap(rng);
        while (at < static_cast<double>(noise.duration_ns)) {
            uint64_t page = detail::kNoisePageBase +
                            (static_cast<uint64_t>(p) * noise.page_pool + pick(rng)) * kDefaultPageSize;
            t.memory.push_back({static_cast<int64_t>(at), 1, pid, page, AccessKind::read});
            at += gap(rng);
        }
    }
    t.sort_records();
    return t;
}

/// Packet-trace counterpart: each "process" is one background flow with
/// exponential inter-arrivals on its own 5-tuple.
inline Trace simulate_packet_noise(const NoiseSpec& noise, uint64_t seed) {
    noise.validate();
    Trace t;
    t.kind = TraceKind::packet;
    t.meta["generator"] = "packet_noise";
    t.meta["seed"] = std::to_string(seed);
    t.meta["flows"] = std::to_string(noise.n_processes);

    for (size_t p = 0; p < noise.n_processes; ++p) {
        std::mt19937_64 rng(derive_seed(seed, 0x402, p));
        if (noise.mean_rate_hz <= 0.0) continue;
        std::exponential_distribution<double> gap(noise.mean_rate_hz / 1e9);
        std::uniform_int_distribution<uint32_t> len(64, 1400);
        FlowKey key{detail::kNoiseSrcNet + static_cast<uint32_t>(p + 1),
                    static_cast<uint16_t>(40'000 + p),
                    detail::kNoiseDstNet + static_cast<uint32_t>(p + 1),
                    static_cast<uint16_t>(50'000 + p), Protocol::udp};
        double at = gap(rng);
        while (at < static_cast<double>(noise.duration_ns)) {
            t.packets.push_back({static_cast<int64_t>(at), key.src_ip, key.src_port, key.dst_ip,
                                 key.dst_port, key.protocol, len(rng)});
            at += gap(rng);
        }
    }
    t.sort_records();
    return t;
}

/// Merges two traces of the same kind into one time-ordered stream. Ties are
/// stable: records of `a` come first, and each parent keeps its own order.
inline Trace merge_traces(const Trace& a, const Trace& b) {
    if (a.kind != b.kind) throw SpecError("cannot merge traces of different kinds");
    if (a.kind == TraceKind::memory && a.page_size != b.page_size)
        throw SpecError("cannot merge memory traces with different page sizes");

    Trace out;
    out.kind = a.kind;
    out.page_size = a.page_size;
    auto by_time = [](const auto& x, const auto& y) { return x.timestamp_ns < y.timestamp_ns; };
    if (a.kind == TraceKind::memory) {
        out.memory.resize(a.memory.size() + b.memory.size());
        std::merge(a.memory.begin(), a.memory.end(), b.memory.begin(), b.memory.end(),
                   out.memory.begin(), by_time);
    } else {
        out.packets.resize(a.packets.size() + b.packets.size());
        std::merge(a.packets.begin(), a.packets.end(), b.packets.begin(), b.packets.end(),
                   out.packets.begin(), by_time);
    }
    // Union of both parents' meta; colliding keys from b move under merged.*
    // so merging with an empty trace is an exact identity.
    out.meta = a.meta;
    for (const auto& [k, v] : b.meta) {
        if (out.meta.contains(k)) out.meta["merged." + k] = v;
        else out.meta[k] = v;
    }
    return out;
}

/// Midpoint rule: an interval nearer t0 is 0, nearer t1 is 1. Values exactly
/// at the midpoint resolve to 0.
inline BitMessage decode_dtc(const IntervalSeries& ia, int64_t t0_ns, int64_t t1_ns) {
    if (t0_ns >= t1_ns) throw SpecError("decode_dtc requires t0 < t1");
    if (ia.values_ns.empty()) throw DecodeError("cannot decode an empty interval series");
    const double mid = (static_cast<double>(t0_ns) + static_cast<double>(t1_ns)) / 2.0;
    BitMessage m;
    m.bits.reserve(ia.values_ns.size());
    for (int64_t v : ia.values_ns)
        m.bits.push_back(static_cast<double>(v) > mid ? 1 : 0);
    return m;
}

/// Inverse of simulate_stc: an interval of k*base expands to (k-1) zeros and
/// a one; the decoded message always starts with 1 (the first event). An
/// interval that rounds to zero slots cannot be decoded.
inline BitMessage decode_stc(const IntervalSeries& ia, int64_t base_ns) {
    if (base_ns <= 0) throw SpecError("decode_stc requires a positive base interval");
    BitMessage m;
    m.bits.push_back(1);
    for (int64_t v : ia.values_ns) {
        int64_t k = std::llround(static_cast<double>(v) / static_cast<double>(base_ns));
        if (k < 1)
            throw DecodeError("interval " + std::to_string(v) + " ns rounds to zero slots of " +
                              std::to_string(base_ns) + " ns");
        for (int64_t z = 1; z < k; ++z) m.bits.push_back(0);
        m.bits.push_back(1);
    }
    return m;
}

/// Interval series of a whole single-key trace (convenience for decoding).
inline IntervalSeries trace_interarrival(const Trace& t, CandidateKey key = PageKey{}) {
    std::vector<int64_t> times;
    times.reserve(t.size());
    for (size_t i = 0; i < t.size(); ++i) times.push_back(t.timestamp_at(i));
    return interarrival(times, std::move(key));
}

} // namespace tchan
