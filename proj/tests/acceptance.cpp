// Acceptance suite. Each criterion prints exactly one PASS/FAIL line with
// its measured values; the process exits nonzero if any requested criterion
// fails. Run a single criterion with --criterion N.

#include "tchan/bench.hpp"
#include "tchan/report.hpp"

#include "support.hpp"

#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <string>

using namespace tchan;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::map<std::string, Scenario> table1_by_name(size_t trials) {
    std::map<std::string, Scenario> out;
    for (auto& sc : builtin_table1(trials)) out[sc.name] = sc;
    return out;
}

double signature_success(const BenchResult& r) {
    return r.per_method.at(Method::signature).success_rate();
}

// --- criterion 1: noiseless completeness -----------------------------------

Outcome criterion1() {
    auto rows = table1_by_name(200);
    std::vector<Scenario> scenarios = {rows.at("share_memory"), rows.at("load"),
                                       rows.at("ip_timing"), rows.at("flush_reload")};
    auto results =
        run_benchmark(scenarios, DetectorConfig{}, BaselineConfig{}, 1001, {Method::signature});
    Outcome o;
    o.pass = true;
    char buf[128];
    for (const auto& r : results) {
        double s = signature_success(r);
        std::snprintf(buf, sizeof(buf), "%s=%.3f ", r.scenario.c_str(), s);
        o.detail += buf;
        if (s < 0.98) o.pass = false;
    }
    o.detail += "(threshold 0.98, 200 trials each)";
    return o;
}

// --- criterion 2: noise robustness ------------------------------------------

Outcome criterion2() {
    auto rows = table1_by_name(200);
    std::vector<Scenario> scenarios = {rows.at("share_memory_noise"), rows.at("load_noise"),
                                       rows.at("ip_timing_noise"), rows.at("flush_reload_noise")};
    auto results =
        run_benchmark(scenarios, DetectorConfig{}, BaselineConfig{}, 2002, {Method::signature});
    Outcome o;
    o.pass = true;
    char buf[128];
    for (const auto& r : results) {
        double s = signature_success(r);
        std::snprintf(buf, sizeof(buf), "%s=%.3f ", r.scenario.c_str(), s);
        o.detail += buf;
        if (s < 0.95) o.pass = false;
    }
    o.detail += "(threshold 0.95, default noise: 20 procs x 50 Hz x 16 pages)";
    return o;
}

// --- criterion 3: false positives on pure noise ------------------------------

Outcome criterion3() {
    auto rows = table1_by_name(200);
    auto results =
        run_benchmark({rows.at("normal")}, DetectorConfig{}, BaselineConfig{}, 3003,
                      {Method::signature});
    double fp = results[0].per_method.at(Method::signature).false_positive_rate();
    Outcome o;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "signature flagged %.1f%% of 200 noise-only trials (limit 5%%)",
                  100.0 * fp);
    o.detail = buf;
    o.pass = fp <= 0.05;
    return o;
}

// --- criterion 4: cache STC case study ---------------------------------------

Outcome criterion4() {
    DetectorConfig cfg;
    size_t ok = 0;
    const size_t seeds = 20;
    double worst_base_err = 0.0;
    size_t min_groups = SIZE_MAX;
    for (uint64_t seed = 0; seed < seeds; ++seed) {
        BitMessage msg = BitMessage::random(1000, derive_seed(4004, seed), true);
        Trace t = simulate_cache_stc_preset(msg, derive_seed(4004, seed, 1));
        auto verdicts = detect(t, cfg);
        if (verdicts.size() != 1) continue;
        const auto& v = verdicts[0];
        if (v.channel_type != ChannelType::STC) continue;
        double base_err = std::abs(v.base_interval_ns - 200'000.0) / 200'000.0;
        worst_base_err = std::max(worst_base_err, base_err);
        min_groups = std::min(min_groups, v.groups.size());
        if (base_err > 0.10 || v.groups.size() < 5) continue;
        bool multiples_ok = true;
        for (const auto& g : v.groups) {
            double ratio = g.mean_ns / v.base_interval_ns;
            if (std::abs(ratio - std::round(ratio)) > cfg.k1) multiples_ok = false;
        }
        if (multiples_ok) ++ok;
    }
    Outcome o;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "%zu/%zu preset runs gave STC with >=5 integer-multiple groups; "
                  "worst base error %.2f%% (limit 10%%), fewest groups %zu",
                  ok, seeds, 100.0 * worst_base_err, min_groups == SIZE_MAX ? 0 : min_groups);
    o.detail = buf;
    o.pass = ok == seeds;
    return o;
}

// --- criterion 5: network DTC case study -------------------------------------

Outcome criterion5() {
    ChannelSpec spec;
    spec.channel = Channel::ip_timing;
    spec.scheme = Scheme::DTC;
    spec.base_interval_ns = 300'000'000;
    spec.long_interval_ns = 500'000'000;
    spec.jitter_sigma_ns = 0.0;
    spec.key = FlowKey{parse_ipv4("192.168.87.2"), 48628, parse_ipv4("192.168.87.4"), 6789,
                       Protocol::udp};
    DetectorConfig cfg;
    size_t ok = 0;
    const size_t seeds = 20;
    for (uint64_t seed = 0; seed < seeds; ++seed) {
        BitMessage msg = BitMessage::random(1000, derive_seed(5005, seed));
        Trace t = simulate_dtc(msg, spec, derive_seed(5005, seed, 1));
        auto verdicts = detect(t, cfg);
        if (verdicts.size() != 1 || verdicts[0].channel_type != ChannelType::DTC) continue;
        const auto& v = verdicts[0];
        double lo = std::min(v.groups[0].mean_ns, v.groups[1].mean_ns);
        double hi = std::max(v.groups[0].mean_ns, v.groups[1].mean_ns);
        if (std::abs(lo - 3.0e8) / 3.0e8 > 0.10 || std::abs(hi - 5.0e8) / 5.0e8 > 0.10) continue;
        ForensicReport rep = build_report(t, verdicts, cfg);
        if (rep.verdicts[0].decoded_bits && *rep.verdicts[0].decoded_bits == msg.to_string()) ++ok;
    }
    Outcome o;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "%zu/%zu runs: DTC verdict, levels within 10%% of 0.3s/0.5s, "
                  "decoded message identical at zero jitter",
                  ok, seeds);
    o.detail = buf;
    o.pass = ok == seeds;
    return o;
}

// --- criterion 6: baseline ordering on noisy scenarios ------------------------

Outcome criterion6() {
    auto rows = table1_by_name(200);
    std::vector<Scenario> scenarios = {rows.at("share_memory_noise"), rows.at("load_noise"),
                                       rows.at("ip_timing_noise"), rows.at("flush_reload_noise")};
    auto results = run_benchmark(scenarios, DetectorConfig{}, BaselineConfig{}, 6006);

    double succ[3] = {0, 0, 0};
    double fp[3] = {0, 0, 0};
    for (const auto& r : results) {
        for (auto [m, idx] : {std::pair{Method::signature, 0}, {Method::variance, 1},
                              {Method::epsilon, 2}}) {
            succ[idx] += r.per_method.at(m).success_rate();
            fp[idx] += r.per_method.at(m).false_positive_rate();
        }
    }
    for (int i = 0; i < 3; ++i) {
        succ[i] /= static_cast<double>(results.size());
        fp[i] /= static_cast<double>(results.size());
    }

    bool success_ordering = succ[1] < succ[0] && succ[2] < succ[0];
    bool fp_ordering = fp[1] > fp[0] && fp[2] > fp[0];
    Outcome o;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "success sig=%.4f var=%.4f eps=%.4f (ordering %s); "
                  "fp sig=%.4f var=%.4f eps=%.4f (ordering %s)",
                  succ[0], succ[1], succ[2], success_ordering ? "holds" : "violated", fp[0], fp[1],
                  fp[2], fp_ordering ? "holds" : "violated");
    o.detail = buf;
    o.pass = success_ordering && fp_ordering;
    return o;
}

// --- criterion 7: oracle and property suites ----------------------------------

bool partition_property() {
    std::mt19937_64 rng(7007);
    for (int c = 0; c < 1000; ++c) {
        size_t n = 1 + rng() % 300;
        IntervalSeries s;
        for (size_t i = 0; i < n; ++i)
            s.values_ns.push_back(1 + static_cast<int64_t>(rng() % 10'000'000));
        auto groups = group_sorted_intervals(s, 0.1);
        std::vector<int64_t> sorted = s.values_ns;
        std::sort(sorted.begin(), sorted.end());
        std::vector<int64_t> concat;
        for (const auto& g : groups)
            concat.insert(concat.end(), g.values_ns.begin(), g.values_ns.end());
        if (concat != sorted) return false;
        for (const auto& g : groups)
            for (size_t i = 1; i < g.values_ns.size(); ++i) {
                double prev = static_cast<double>(g.values_ns[i - 1]);
                if ((static_cast<double>(g.values_ns[i]) - prev) / prev > 0.1) return false;
            }
        for (size_t gi = 1; gi < groups.size(); ++gi) {
            double prev = static_cast<double>(groups[gi - 1].values_ns.back());
            double next = static_cast<double>(groups[gi].values_ns.front());
            if ((next - prev) / prev <= 0.1) return false;
        }
    }
    return true;
}

bool scale_invariance_property() {
    ChannelSpec spec;
    spec.channel = Channel::shared_memory;
    spec.scheme = Scheme::DTC;
    spec.base_interval_ns = 5'000;
    spec.long_interval_ns = 8'000;
    spec.jitter_sigma_ns = 100.0;
    spec.key = PageKey{2, 42, 0x195a0000};
    Trace base = simulate_dtc(BitMessage::random(500, 70), spec, 70);
    NoiseSpec noise;
    noise.duration_ns = 2'500'000;
    noise.mean_rate_hz = 100'000.0;
    Trace t = merge_traces(base, simulate_noise(noise, 70));

    auto reference = detect(t, DetectorConfig{});
    for (int64_t scale : {10, 1000}) {
        Trace scaled = t;
        for (auto& r : scaled.memory) r.timestamp_ns *= scale;
        auto verdicts = detect(scaled, DetectorConfig{});
        if (verdicts.size() != reference.size()) return false;
        for (size_t i = 0; i < verdicts.size(); ++i) {
            if (verdicts[i].key != reference[i].key) return false;
            if (verdicts[i].channel_type != reference[i].channel_type) return false;
            if (verdicts[i].rejected_reason != reference[i].rejected_reason) return false;
            if (verdicts[i].groups.size() != reference[i].groups.size()) return false;
            for (size_t g = 0; g < verdicts[i].groups.size(); ++g) {
                if (verdicts[i].groups[g].count() != reference[i].groups[g].count()) return false;
                if (std::abs(verdicts[i].groups[g].slope - reference[i].groups[g].slope) > 1e-9)
                    return false;
            }
        }
    }
    return true;
}

bool smoothness_oracle_property() {
    std::mt19937_64 rng(7117);
    for (int c = 0; c < 500; ++c) {
        size_t n = 2 + rng() % 100;
        std::vector<int64_t> vals;
        for (size_t i = 0; i < n; ++i) vals.push_back(1 + static_cast<int64_t>(rng() % 1'000'000));
        std::sort(vals.begin(), vals.end());
        IntervalSeries s;
        s.values_ns = vals;
        auto groups = group_sorted_intervals(s, 1e12); // one group
        double impl = smoothness_coefficient(groups[0]);
        double oracle = testsupport::smoothness_oracle(vals);
        if (std::abs(impl - oracle) > 1e-12) return false;
    }
    return true;
}

bool decode_identity_property() {
    ChannelSpec stc;
    stc.channel = Channel::shared_memory;
    stc.scheme = Scheme::STC;
    stc.base_interval_ns = 10'000;
    stc.key = PageKey{2, 42, 0x195a0000};
    ChannelSpec dtc;
    dtc.channel = Channel::shared_memory;
    dtc.scheme = Scheme::DTC;
    dtc.base_interval_ns = 3'000;
    dtc.long_interval_ns = 5'000;
    dtc.key = PageKey{2, 42, 0x195a0000};
    for (uint64_t seed = 0; seed < 1000; ++seed) {
        BitMessage m = BitMessage::random(64, derive_seed(7227, seed), true);
        Trace t = simulate_stc(m, stc, seed);
        if (!(decode_stc(trace_interarrival(t), stc.base_interval_ns) == m)) return false;

        BitMessage d = BitMessage::random(64, derive_seed(7337, seed));
        Trace td = simulate_dtc(d, dtc, seed);
        if (!(decode_dtc(trace_interarrival(td), dtc.base_interval_ns, dtc.long_interval_ns) == d))
            return false;
    }
    return true;
}

bool roundtrip_property() {
    Trace t = testsupport::random_memory_trace(7447, 10'000);
    t.meta["suite"] = "acceptance";
    std::string text = serialize_trace(t);
    if (serialize_trace(t) != text) return false;
    Trace back = parse_trace_string(text, TraceKind::memory);
    if (!(back == t)) return false;
    Trace p = testsupport::random_packet_trace(7557, 5'000);
    return parse_trace_string(serialize_trace(p), TraceKind::packet) == p;
}

Outcome criterion7() {
    struct Prop {
        const char* name;
        bool ok;
    };
    Prop props[] = {
        {"grouping-partition", partition_property()},
        {"scale-invariance", scale_invariance_property()},
        {"ols-oracle", smoothness_oracle_property()},
        {"decode-identity", decode_identity_property()},
        {"trace-roundtrip", roundtrip_property()},
    };
    Outcome o;
    o.pass = true;
    for (const auto& p : props) {
        o.detail += std::string(p.name) + (p.ok ? "=ok " : "=FAILED ");
        if (!p.ok) o.pass = false;
    }
    return o;
}

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) only = std::atoi(argv[i + 1]);
    }

    std::function<Outcome()> criteria[] = {criterion1, criterion2, criterion3, criterion4,
                                           criterion5, criterion6, criterion7};
    bool all_pass = true;
    for (int c = 1; c <= 7; ++c) {
        if (only != 0 && only != c) continue;
        Outcome o = criteria[c - 1]();
        std::printf("criterion %d: %s - %s\n", c, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) all_pass = false;
    }
    return all_pass ? 0 : 1;
}
