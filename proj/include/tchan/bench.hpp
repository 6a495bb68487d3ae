#pragma once

// Benchmark harness: seeded scenario suites scored per detection method.
// A trial succeeds when the injected key is flagged (with the right STC/DTC
// type, for the signature detector); a trial is a false positive when any
// other key gets flagged. The two counts come from disjoint key populations.

#include "tchan/baseline.hpp"
#include "tchan/detect.hpp"
#include "tchan/sim.hpp"

#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tchan {

enum class Method { signature, variance, epsilon };

inline const char* to_string(Method m) {
    switch (m) {
    case Method::signature: return "signature";
    case Method::variance: return "variance";
    default: return "epsilon";
    }
}

struct Scenario {
    std::string name;
    std::optional<ChannelSpec> channel;
    bool cache_preset = false; // route through the flush-reload STC preset
    std::optional<NoiseSpec> noise;
    size_t message_bits = 1000;
    size_t trials = 200;

    void validate() const {
        if (!channel && !cache_preset && !noise)
            throw SpecError("scenario '" + name + "' has neither channel nor noise");
        if (trials < 1) throw SpecError("scenario '" + name + "' needs at least one trial");
        if ((channel || cache_preset) && message_bits == 0)
            throw SpecError("scenario '" + name + "' needs a non-empty message");
        if (channel) channel->validate();
        if (noise) noise->validate();
    }

    bool has_channel() const { return channel.has_value() || cache_preset; }
};

struct MethodStats {
    size_t trials = 0;
    size_t successes = 0;
    size_t type_confusions = 0; // signature only: right key, wrong type
    size_t false_positive_trials = 0;
    bool success_defined = true; // false for noise-only scenarios

    double success_rate() const {
        return trials ? static_cast<double>(successes) / static_cast<double>(trials) : 0.0;
    }
    double false_positive_rate() const {
        return trials ? static_cast<double>(false_positive_trials) / static_cast<double>(trials) : 0.0;
    }
};

struct BenchResult {
    std::string scenario;
    std::map<Method, MethodStats> per_method;
    size_t trial_errors = 0;
};

namespace detail {

struct TrialOutcome {
    bool injected_hit = false;
    bool type_confused = false;
    bool any_other_flagged = false;
};

inline bool same_key(const CandidateKey& a, const CandidateKey& b) { return a == b; }

inline TrialOutcome score_signature(const std::vector<DetectionVerdict>& verdicts,
                                    const std::optional<CandidateKey>& injected,
                                    ChannelType expected) {
    TrialOutcome o;
    for (const auto& v : verdicts) {
        bool is_injected = injected && same_key(v.key, *injected);
        if (is_injected) {
            if (v.channel_type == expected) o.injected_hit = true;
            else if (v.channel_type != ChannelType::none) o.type_confused = true;
        } else if (v.channel_type != ChannelType::none) {
            o.any_other_flagged = true;
        }
    }
    return o;
}

inline TrialOutcome score_baseline(const std::vector<BaselineVerdict>& verdicts,
                                   const std::optional<CandidateKey>& injected, Method m) {
    TrialOutcome o;
    for (const auto& v : verdicts) {
        bool fired = m == Method::variance ? v.variance_fired : v.epsilon_fired;
        if (injected && same_key(v.key, *injected)) {
            if (fired) o.injected_hit = true;
        } else if (fired) {
            o.any_other_flagged = true;
        }
    }
    return o;
}

} // namespace detail

/// Runs every scenario x trial with deterministically derived seeds and
/// aggregates per-method rates. Individual trial failures are counted and
/// never abort the suite.
inline std::vector<BenchResult> run_benchmark(const std::vector<Scenario>& scenarios,
                                              const DetectorConfig& dcfg, const BaselineConfig& bcfg,
                                              uint64_t base_seed,
                                              const std::vector<Method>& methods = {
                                                  Method::signature, Method::variance,
                                                  Method::epsilon}) {
    dcfg.validate();
    bcfg.validate();
    std::vector<BenchResult> results;
    results.reserve(scenarios.size());

    for (size_t si = 0; si < scenarios.size(); ++si) {
        const Scenario& sc = scenarios[si];
        sc.validate();
        BenchResult res;
        res.scenario = sc.name;
        for (Method m : methods) {
            res.per_method[m].success_defined = sc.has_channel();
        }

        for (size_t ti = 0; ti < sc.trials; ++ti) {
            uint64_t trial_seed = derive_seed(base_seed, si + 1, ti + 1);
            try {
                std::optional<CandidateKey> injected;
                ChannelType expected = ChannelType::none;
                std::optional<Trace> trace;

                if (sc.cache_preset) {
                    BitMessage msg =
                        BitMessage::random(sc.message_bits, derive_seed(trial_seed, 11), true);
                    trace = simulate_cache_stc_preset(msg, derive_seed(trial_seed, 12));
                    injected = cache_stc_preset_spec().key;
                    expected = ChannelType::STC;
                } else if (sc.channel) {
                    bool stc = sc.channel->scheme == Scheme::STC;
                    BitMessage msg =
                        BitMessage::random(sc.message_bits, derive_seed(trial_seed, 11), stc);
                    trace = stc ? simulate_stc(msg, *sc.channel, derive_seed(trial_seed, 12))
                                : simulate_dtc(msg, *sc.channel, derive_seed(trial_seed, 12));
                    injected = sc.channel->key;
                    expected = stc ? ChannelType::STC : ChannelType::DTC;
                }

                if (sc.noise) {
                    TraceKind kind = trace ? trace->kind : TraceKind::memory;
                    Trace noise = kind == TraceKind::memory
                                      ? simulate_noise(*sc.noise, derive_seed(trial_seed, 13))
                                      : simulate_packet_noise(*sc.noise, derive_seed(trial_seed, 13));
                    trace = trace ? merge_traces(*trace, noise) : std::move(noise);
                }

                std::optional<std::vector<DetectionVerdict>> sig_verdicts;
                std::optional<std::vector<BaselineVerdict>> base_verdicts;
                for (Method m : methods) {
                    detail::TrialOutcome o;
                    if (m == Method::signature) {
                        if (!sig_verdicts) sig_verdicts = detect(*trace, dcfg);
                        o = detail::score_signature(*sig_verdicts, injected, expected);
                    } else {
                        if (!base_verdicts) base_verdicts = baseline_detect(*trace, bcfg, dcfg);
                        o = detail::score_baseline(*base_verdicts, injected, m);
                    }
                    auto& st = res.per_method[m];
                    ++st.trials;
                    if (o.injected_hit) ++st.successes;
                    if (o.type_confused) ++st.type_confusions;
                    if (o.any_other_flagged) ++st.false_positive_trials;
                }
            } catch (const std::exception&) {
                ++res.trial_errors;
                for (Method m : methods) ++res.per_method[m].trials;
            }
        }
        results.push_back(std::move(res));
    }
    return results;
}

/// CSV table: scenario,method,success_rate,false_positive_rate,trials.
/// success_rate is empty for noise-only scenarios.
inline std::string bench_to_csv(const std::vector<BenchResult>& results) {
    std::string out = "scenario,method,success_rate,false_positive_rate,trials\n";
    char buf[160];
    for (const auto& r : results) {
        for (const auto& [m, st] : r.per_method) {
            if (st.success_defined)
                std::snprintf(buf, sizeof(buf), "%s,%s,%.4f,%.4f,%zu\n", r.scenario.c_str(),
                              to_string(m), st.success_rate(), st.false_positive_rate(), st.trials);
            else
                std::snprintf(buf, sizeof(buf), "%s,%s,,%.4f,%zu\n", r.scenario.c_str(),
                              to_string(m), st.false_positive_rate(), st.trials);
            out += buf;
        }
    }
    return out;
}

inline std::string bench_to_text(const std::vector<BenchResult>& results) {
    std::string out;
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%-24s %-10s %9s %9s %10s %7s\n", "scenario", "method",
                  "success", "fp", "confusion", "trials");
    out += buf;
    out += std::string(73, '-') + "\n";
    for (const auto& r : results) {
        for (const auto& [m, st] : r.per_method) {
            std::string succ = "-";
            if (st.success_defined) {
                char s[32];
                std::snprintf(s, sizeof(s), "%.2f%%", 100.0 * st.success_rate());
                succ = s;
            }
            std::string conf = "-";
            if (m == Method::signature && st.success_defined) {
                char s[32];
                std::snprintf(s, sizeof(s), "%zu", st.type_confusions);
                conf = s;
            }
            std::snprintf(buf, sizeof(buf), "%-24s %-10s %9s %8.2f%% %10s %7zu\n",
                          r.scenario.c_str(), to_string(m), succ.c_str(),
                          100.0 * st.false_positive_rate(), conf.c_str(), st.trials);
            out += buf;
        }
        if (r.trial_errors) {
            std::snprintf(buf, sizeof(buf), "%-24s %zu trial error(s)\n", r.scenario.c_str(),
                          r.trial_errors);
            out += buf;
        }
    }
    return out;
}

/// The built-in suite: five channel rows and their noisy variants, plus one
/// noise-only row for the false-positive baseline.
inline std::vector<Scenario> builtin_table1(size_t trials = 200) {
    NoiseSpec noise; // 20 processes, 50 Hz, 16-page pools, 60 s

    ChannelSpec cache;
    cache.channel = Channel::cache;
    cache.scheme = Scheme::STC;
    cache.base_interval_ns = 200'000;
    cache.jitter_sigma_ns = 2'000.0;
    cache.key = PageKey{1, 2301, 0x195a0000};

    ChannelSpec load;
    load.channel = Channel::cpu_load;
    load.scheme = Scheme::DTC;
    load.base_interval_ns = 30'000'000;
    load.long_interval_ns = 45'000'000;
    load.jitter_sigma_ns = 600'000.0;
    load.key = PageKey{1, 2302, 0x19600000};

    ChannelSpec shm;
    shm.channel = Channel::shared_memory;
    shm.scheme = Scheme::DTC;
    shm.base_interval_ns = 200'000;
    shm.long_interval_ns = 300'000;
    shm.jitter_sigma_ns = 4'000.0;
    shm.key = PageKey{1, 2303, 0x19700000};

    ChannelSpec ip;
    ip.channel = Channel::ip_timing;
    ip.scheme = Scheme::DTC;
    ip.base_interval_ns = 300'000'000;
    ip.long_interval_ns = 500'000'000;
    ip.jitter_sigma_ns = 6'000'000.0;
    ip.key = FlowKey{parse_ipv4("192.168.87.2"), 48628, parse_ipv4("192.168.87.4"), 6789,
                     Protocol::udp};

    std::vector<Scenario> suite;
    suite.push_back({"normal", {}, false, noise, 0, trials});
    suite.push_back({"cache", cache, false, {}, 1000, trials});
    suite.push_back({"load", load, false, {}, 1000, trials});
    suite.push_back({"share_memory", shm, false, {}, 1000, trials});
    suite.push_back({"ip_timing", ip, false, {}, 1000, trials});
    suite.push_back({"flush_reload", {}, true, {}, 1000, trials});
    suite.push_back({"cache_noise", cache, false, noise, 1000, trials});
    suite.push_back({"load_noise", load, false, noise, 1000, trials});
    suite.push_back({"share_memory_noise", shm, false, noise, 1000, trials});
    suite.push_back({"ip_timing_noise", ip, false, noise, 1000, trials});
    suite.push_back({"flush_reload_noise", {}, true, noise, 1000, trials});
    return suite;
}

} // namespace tchan
