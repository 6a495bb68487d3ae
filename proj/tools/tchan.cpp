// Command-line surface: simulate covert timing channels into trace files,
// detect them, run benchmark suites, and build/verify forensic evidence.
//
// Exit codes: 0 = findings / success, 1 = clean / no findings, 2 = error.

#include "tchan/bench.hpp"
#include "tchan/report.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

using namespace tchan;
namespace fs = std::filesystem;

namespace {

void echo_config(const std::string& cmd, const nlohmann::ordered_json& cfg) {
    std::cerr << "config " << cmd << " " << cfg.dump() << "\n";
}

Channel parse_channel(const std::string& s) {
    if (s == "shm") return Channel::shared_memory;
    if (s == "cache") return Channel::cache;
    if (s == "load") return Channel::cpu_load;
    if (s == "ip") return Channel::ip_timing;
    throw CLI::ValidationError("--channel", "must be one of shm|cache|load|ip");
}

Scheme parse_scheme(const std::string& s) {
    if (s == "stc") return Scheme::STC;
    if (s == "dtc") return Scheme::DTC;
    throw CLI::ValidationError("--scheme", "must be stc or dtc");
}

struct SimulateArgs {
    std::string channel;
    std::string scheme = "dtc";
    std::string bits = "1024";
    int64_t base_ns = 0;
    int64_t long_ns = 0;
    double jitter_ns = 0.0;
    uint64_t seed = 1;
    int64_t start_ns = 0;
    int32_t dom = 1;
    int32_t pid = 2301;
    std::string page = "0x195a0000";
    std::string src = "192.168.87.2:48628";
    std::string dst = "192.168.87.4:6789";
    std::string proto = "udp";
    size_t noise_procs = 0;
    double noise_rate_hz = 50.0;
    size_t noise_pool = 16;
    int64_t noise_duration_ns = 0; // 0 = span of the channel, or 60 s noise-only
    std::string out;
};

BitMessage load_bits(const std::string& spec, uint64_t seed, bool framed) {
    if (!spec.empty() && spec[0] == '@') {
        std::ifstream f(spec.substr(1));
        if (!f) throw IoError("cannot open bits file: " + spec.substr(1));
        std::ostringstream ss;
        ss << f.rdbuf();
        return BitMessage::from_string(ss.str());
    }
    size_t n = std::stoull(spec);
    if (n == 0) throw SpecError("--bits must name a positive count or @file");
    return BitMessage::random(n, derive_seed(seed, 0xb175), framed);
}

int cmd_simulate(const SimulateArgs& a) {
    bool has_channel = !a.channel.empty();
    if (!has_channel && a.noise_procs == 0)
        throw SpecError("nothing to simulate: give --channel or --noise-procs");

    std::optional<Trace> trace;
    std::optional<CandidateKey> key;
    nlohmann::ordered_json cfg;

    if (has_channel) {
        ChannelSpec spec;
        spec.channel = parse_channel(a.channel);
        spec.scheme = parse_scheme(a.scheme);
        if (a.base_ns <= 0) throw SpecError("--base-ns is required with a channel");
        spec.base_interval_ns = a.base_ns;
        spec.jitter_sigma_ns = a.jitter_ns;
        spec.start_ns = a.start_ns;
        if (spec.scheme == Scheme::STC && a.long_ns != 0)
            throw SpecError("--long-ns applies only to DTC channels");
        if (spec.scheme == Scheme::DTC) {
            if (a.long_ns == 0) throw SpecError("DTC channels require --long-ns");
            spec.long_interval_ns = a.long_ns;
        }
        if (spec.channel == Channel::ip_timing) {
            auto [sip, sport] = parse_endpoint(a.src);
            auto [dip, dport] = parse_endpoint(a.dst);
            Protocol proto = a.proto == "tcp" ? Protocol::tcp : Protocol::udp;
            if (a.proto != "tcp" && a.proto != "udp")
                throw SpecError("--proto must be udp or tcp");
            spec.key = FlowKey{sip, sport, dip, dport, proto};
        } else {
            spec.key = PageKey{a.dom, a.pid, parse_page(a.page)};
        }

        BitMessage msg = load_bits(a.bits, a.seed, spec.scheme == Scheme::STC);
        trace = spec.scheme == Scheme::STC ? simulate_stc(msg, spec, a.seed)
                                           : simulate_dtc(msg, spec, a.seed);
        key = spec.key;

        cfg["channel"] = a.channel;
        cfg["scheme"] = a.scheme;
        cfg["base_ns"] = a.base_ns;
        if (spec.scheme == Scheme::DTC) cfg["long_ns"] = a.long_ns;
        cfg["jitter_ns"] = a.jitter_ns;
        cfg["bits"] = msg.size();
        cfg["key"] = to_string(spec.key);
    }

    if (a.noise_procs > 0) {
        NoiseSpec noise;
        noise.n_processes = a.noise_procs;
        noise.mean_rate_hz = a.noise_rate_hz;
        noise.page_pool = a.noise_pool;
        if (a.noise_duration_ns > 0) noise.duration_ns = a.noise_duration_ns;
        else if (trace && trace->size() > 0)
            noise.duration_ns = trace->timestamp_at(trace->size() - 1) + a.base_ns;
        TraceKind kind = trace ? trace->kind : TraceKind::memory;
        Trace n = kind == TraceKind::memory ? simulate_noise(noise, derive_seed(a.seed, 0x99))
                                            : simulate_packet_noise(noise, derive_seed(a.seed, 0x99));
        trace = trace ? merge_traces(*trace, n) : std::move(n);
        cfg["noise_procs"] = noise.n_processes;
        cfg["noise_rate_hz"] = noise.mean_rate_hz;
        cfg["noise_pool"] = noise.page_pool;
        cfg["noise_duration_ns"] = noise.duration_ns;
    }

    cfg["seed"] = a.seed;
    cfg["out"] = a.out;
    echo_config("simulate", cfg);

    write_trace(*trace, a.out);
    if (key) std::cout << "injected key: " << to_string(*key) << "\n";
    std::cout << "records: " << trace->size() << "\n";
    std::cout << "wrote " << a.out << "\n";
    return 0;
}

struct DetectArgs {
    std::string input;
    std::string method = "signature";
    size_t repeat_threshold = 100;
    double k1 = 0.1;
    double k2 = 0.01;
    double min_group_frac = 0.05;
    bool all_access = false;
    size_t window_size = 100;
    double epsilon = 0.1;
    double similarity_threshold = 0.9;
    double regularity_threshold = 1.0;
    std::string out;
    std::string timestamp = "1970-01-01T00:00:00Z";
};

std::string resolve_timestamp(const std::string& t) {
    if (t != "now") return t;
    auto now = std::chrono::system_clock::now();
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
    char buf[40];
    std::tm tmv{};
    time_t tt = static_cast<time_t>(secs);
    gmtime_r(&tt, &tmv);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tmv);
    return buf;
}

int cmd_detect(const DetectArgs& a) {
    DetectorConfig dcfg;
    dcfg.repeat_threshold = a.repeat_threshold;
    dcfg.k1 = a.k1;
    dcfg.k2 = a.k2;
    dcfg.min_group_frac = a.min_group_frac;
    dcfg.ignore_non_read = !a.all_access;
    BaselineConfig bcfg;
    bcfg.window_size = a.window_size;
    bcfg.epsilon = a.epsilon;
    bcfg.similarity_threshold = a.similarity_threshold;
    bcfg.regularity_threshold = a.regularity_threshold;

    bool run_sig = a.method == "signature" || a.method == "all";
    bool run_var = a.method == "variance" || a.method == "all";
    bool run_eps = a.method == "epsilon" || a.method == "all";
    if (!run_sig && !run_var && !run_eps)
        throw SpecError("--method must be one of signature|variance|epsilon|all");

    std::string out = a.out.empty() ? a.input + ".report.json" : a.out;
    nlohmann::ordered_json cfg;
    cfg["input"] = a.input;
    cfg["method"] = a.method;
    cfg["repeat_threshold"] = dcfg.repeat_threshold;
    cfg["k1"] = dcfg.k1;
    cfg["k2"] = dcfg.k2;
    cfg["min_group_frac"] = dcfg.min_group_frac;
    cfg["reads_only"] = dcfg.ignore_non_read;
    if (run_var || run_eps) {
        cfg["window_size"] = bcfg.window_size;
        cfg["epsilon"] = bcfg.epsilon;
        cfg["similarity_threshold"] = bcfg.similarity_threshold;
        cfg["regularity_threshold"] = bcfg.regularity_threshold;
    }
    cfg["out"] = out;
    echo_config("detect", cfg);

    Trace trace = parse_trace(a.input);

    std::vector<DetectionVerdict> verdicts;
    std::vector<BaselineVerdict> baselines;
    if (run_sig) verdicts = detect(trace, dcfg);
    if (run_var || run_eps) {
        baselines = baseline_detect(trace, bcfg, dcfg);
        for (auto& b : baselines) { // mask methods the user did not ask for
            if (!run_var) b.variance_fired = false;
            if (!run_eps) b.epsilon_fired = false;
            b.flagged = b.variance_fired || b.epsilon_fired;
        }
    }

    size_t findings = 0;
    for (const auto& v : verdicts) {
        if (v.channel_type == ChannelType::none) continue;
        ++findings;
        std::cout << to_string(v.channel_type) << " on " << to_string(v.key)
                  << " base_interval_ns=" << static_cast<int64_t>(v.base_interval_ns)
                  << " groups=" << v.groups.size() << "\n";
    }
    for (const auto& b : baselines) {
        if (!b.flagged) continue;
        ++findings;
        std::cout << "baseline hit on " << to_string(b.key)
                  << (b.variance_fired ? " variance" : "") << (b.epsilon_fired ? " epsilon" : "")
                  << "\n";
    }

    ForensicReport rep =
        build_report(trace, verdicts, dcfg, resolve_timestamp(a.timestamp), baselines);
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write report: " + out);
    f << rep.to_pretty_json();

    std::cout << "findings: " << findings << "\n";
    std::cout << "report: " << out << "\n";
    return findings > 0 ? 0 : 1;
}

struct BenchArgs {
    std::string builtin;
    std::string suite;
    size_t trials = 200;
    bool trials_given = false;
    uint64_t seed = 42;
    std::string out = "bench-out";
    std::string method = "all";
};

std::vector<Scenario> load_suite(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open suite file: " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(std::string("malformed suite file: ") + e.what());
    }
    if (!doc.is_array()) throw SpecError("suite file must hold a JSON array of scenarios");

    std::vector<Scenario> out;
    for (const auto& js : doc) {
        Scenario sc;
        sc.name = js.value("name", "scenario-" + std::to_string(out.size()));
        sc.trials = js.value("trials", size_t{200});
        sc.message_bits = js.value("message_bits", size_t{1000});
        sc.cache_preset = js.value("preset", false);
        if (js.contains("channel") && !js["channel"].is_null()) {
            const auto& jc = js["channel"];
            ChannelSpec spec;
            spec.channel = parse_channel(jc.value("channel", std::string("shm")));
            spec.scheme = parse_scheme(jc.value("scheme", std::string("dtc")));
            spec.base_interval_ns = jc.value("base_ns", int64_t{0});
            spec.long_interval_ns = jc.value("long_ns", int64_t{0});
            spec.jitter_sigma_ns = jc.value("jitter_ns", 0.0);
            spec.start_ns = jc.value("start_ns", int64_t{0});
            if (spec.channel == Channel::ip_timing) {
                auto [sip, sport] = parse_endpoint(jc.value("src", std::string("192.168.87.2:48628")));
                auto [dip, dport] = parse_endpoint(jc.value("dst", std::string("192.168.87.4:6789")));
                spec.key = FlowKey{sip, sport, dip, dport,
                                   jc.value("proto", std::string("udp")) == "tcp" ? Protocol::tcp
                                                                                  : Protocol::udp};
            } else {
                spec.key = PageKey{jc.value("dom", 1), jc.value("pid", 2301),
                                   parse_page(jc.value("page", std::string("0x195a0000")))};
            }
            sc.channel = spec;
        }
        if (js.contains("noise") && !js["noise"].is_null()) {
            const auto& jn = js["noise"];
            NoiseSpec n;
            n.n_processes = jn.value("procs", size_t{20});
            n.mean_rate_hz = jn.value("rate_hz", 50.0);
            n.page_pool = jn.value("pool", size_t{16});
            n.duration_ns = jn.value("duration_ns", int64_t{60'000'000'000});
            sc.noise = n;
        }
        sc.validate();
        out.push_back(std::move(sc));
    }
    return out;
}

int cmd_bench(const BenchArgs& a) {
    std::vector<Scenario> scenarios;
    if (!a.suite.empty()) scenarios = load_suite(a.suite);
    else if (a.builtin == "table1") scenarios = builtin_table1(a.trials);
    else throw SpecError("give --suite FILE or --builtin table1");
    if (!a.suite.empty() && a.trials_given)
        for (auto& sc : scenarios) sc.trials = a.trials;

    std::vector<Method> methods;
    if (a.method == "all") methods = {Method::signature, Method::variance, Method::epsilon};
    else if (a.method == "signature") methods = {Method::signature};
    else if (a.method == "variance") methods = {Method::variance};
    else if (a.method == "epsilon") methods = {Method::epsilon};
    else throw SpecError("--method must be one of signature|variance|epsilon|all");

    nlohmann::ordered_json cfg;
    cfg["suite"] = a.suite.empty() ? "builtin:" + a.builtin : a.suite;
    cfg["scenarios"] = scenarios.size();
    cfg["trials"] = a.trials;
    cfg["seed"] = a.seed;
    cfg["method"] = a.method;
    cfg["out"] = a.out;
    echo_config("bench", cfg);

    auto results = run_benchmark(scenarios, DetectorConfig{}, BaselineConfig{}, a.seed, methods);

    fs::create_directories(a.out);
    std::string csv = bench_to_csv(results);
    std::string text = bench_to_text(results);
    std::ofstream(fs::path(a.out) / "results.csv", std::ios::binary) << csv;
    std::ofstream(fs::path(a.out) / "results.txt", std::ios::binary) << text;
    std::cout << text;
    std::cout << "wrote " << (fs::path(a.out) / "results.csv").string() << "\n";
    return 0;
}

struct ReportArgs {
    std::string input;
    std::string out = "evidence";
    std::string timestamp = "1970-01-01T00:00:00Z";
    size_t repeat_threshold = 100;
    double k1 = 0.1;
    double k2 = 0.01;
    double min_group_frac = 0.05;
};

int cmd_report(const ReportArgs& a) {
    DetectorConfig dcfg;
    dcfg.repeat_threshold = a.repeat_threshold;
    dcfg.k1 = a.k1;
    dcfg.k2 = a.k2;
    dcfg.min_group_frac = a.min_group_frac;

    nlohmann::ordered_json cfg;
    cfg["input"] = a.input;
    cfg["out"] = a.out;
    cfg["timestamp"] = resolve_timestamp(a.timestamp);
    cfg["repeat_threshold"] = dcfg.repeat_threshold;
    cfg["k1"] = dcfg.k1;
    cfg["k2"] = dcfg.k2;
    cfg["min_group_frac"] = dcfg.min_group_frac;
    echo_config("report", cfg);

    Trace trace = parse_trace(a.input);
    auto verdicts = detect(trace, dcfg);
    ForensicReport rep = build_report(trace, verdicts, dcfg, resolve_timestamp(a.timestamp));
    StoredEvidence stored = store_evidence(rep, trace, a.out);
    std::cout << "report: " << stored.report_path << "\n";
    std::cout << "slice: " << stored.slice_path << "\n";
    std::cout << "manifest: " << stored.manifest_path << "\n";
    std::cout << "findings: " << rep.findings << "\n";
    return rep.findings > 0 ? 0 : 1;
}

int cmd_verify(const std::string& store) {
    nlohmann::ordered_json cfg;
    cfg["store"] = store;
    echo_config("verify", cfg);
    auto problems = verify_evidence(store);
    if (problems.empty()) {
        std::cout << "evidence store verified clean\n";
        return 0;
    }
    for (const auto& p : problems) std::cout << "mismatch: " << p << "\n";
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"covert timing channel simulation, detection and forensics"};
    app.require_subcommand(1);

    SimulateArgs sa;
    auto* sim = app.add_subcommand("simulate", "generate a seeded channel/noise trace");
    sim->add_option("--channel", sa.channel, "shm|cache|load|ip");
    sim->add_option("--scheme", sa.scheme, "stc|dtc");
    sim->add_option("--bits", sa.bits, "message bit count, or @file of 0/1 text");
    sim->add_option("--base-ns", sa.base_ns, "STC slot / DTC short interval (ns)");
    sim->add_option("--long-ns", sa.long_ns, "DTC long interval (ns)");
    sim->add_option("--jitter-ns", sa.jitter_ns, "Gaussian timing noise sigma (ns)");
    sim->add_option("--seed", sa.seed, "RNG seed");
    sim->add_option("--start-ns", sa.start_ns, "trace epoch offset (ns)");
    sim->add_option("--dom", sa.dom, "memory key: domain id");
    sim->add_option("--pid", sa.pid, "memory key: pid");
    sim->add_option("--page", sa.page, "memory key: page (hex)");
    sim->add_option("--src", sa.src, "flow key: src ip:port");
    sim->add_option("--dst", sa.dst, "flow key: dst ip:port");
    sim->add_option("--proto", sa.proto, "flow key: udp|tcp");
    sim->add_option("--noise-procs", sa.noise_procs, "background processes/flows");
    sim->add_option("--noise-rate-hz", sa.noise_rate_hz, "per-process access rate");
    sim->add_option("--noise-pool", sa.noise_pool, "pages per background process");
    sim->add_option("--noise-duration-ns", sa.noise_duration_ns, "noise span (ns)");
    sim->add_option("--out", sa.out, "output trace path")->required();

    DetectArgs da;
    auto* det = app.add_subcommand("detect", "run detectors over a trace file");
    det->add_option("--input", da.input, "trace file")->required();
    det->add_option("--method", da.method, "signature|variance|epsilon|all");
    det->add_option("--repeat-threshold", da.repeat_threshold, "min events per key");
    det->add_option("--k1", da.k1, "grouping relative-difference bound");
    det->add_option("--k2", da.k2, "smoothness slope bound");
    det->add_option("--min-group-frac", da.min_group_frac, "minor-group pruning fraction");
    det->add_flag("--all-access", da.all_access, "admit write/exec accesses too");
    det->add_option("--window-size", da.window_size, "variance baseline window");
    det->add_option("--epsilon", da.epsilon, "epsilon-similarity bound");
    det->add_option("--similarity-threshold", da.similarity_threshold, "epsilon flag threshold");
    det->add_option("--regularity-threshold", da.regularity_threshold, "variance flag threshold");
    det->add_option("--out", da.out, "report path (default <input>.report.json)");
    det->add_option("--timestamp", da.timestamp, "report timestamp, or 'now'");

    BenchArgs ba;
    auto* ben = app.add_subcommand("bench", "run a benchmark suite");
    ben->add_option("--builtin", ba.builtin, "builtin suite name (table1)");
    ben->add_option("--suite", ba.suite, "JSON scenario list");
    ben->add_option("--trials", ba.trials, "trials per scenario");
    ben->add_option("--seed", ba.seed, "base seed");
    ben->add_option("--out", ba.out, "output directory");
    ben->add_option("--method", ba.method, "signature|variance|epsilon|all");

    ReportArgs ra;
    auto* rep = app.add_subcommand("report", "detect and store forensic evidence");
    rep->add_option("--input", ra.input, "trace file")->required();
    rep->add_option("--out", ra.out, "evidence directory");
    rep->add_option("--timestamp", ra.timestamp, "report timestamp, or 'now'");
    rep->add_option("--repeat-threshold", ra.repeat_threshold, "min events per key");
    rep->add_option("--k1", ra.k1, "grouping relative-difference bound");
    rep->add_option("--k2", ra.k2, "smoothness slope bound");
    rep->add_option("--min-group-frac", ra.min_group_frac, "minor-group pruning fraction");

    std::string store_dir;
    auto* ver = app.add_subcommand("verify", "verify an evidence store against its manifest");
    ver->add_option("--store", store_dir, "evidence directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    ba.trials_given = ben->count("--trials") > 0;

    try {
        if (sim->parsed()) return cmd_simulate(sa);
        if (det->parsed()) return cmd_detect(da);
        if (ben->parsed()) return cmd_bench(ba);
        if (rep->parsed()) return cmd_report(ra);
        if (ver->parsed()) return cmd_verify(store_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
