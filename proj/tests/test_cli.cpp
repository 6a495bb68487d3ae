#include "tchan/trace.hpp"

#include <json.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;
};

fs::path work_dir() {
    auto dir = fs::temp_directory_path() / "tchan-cli-tests";
    fs::create_directories(dir);
    return dir;
}

RunResult run(const std::string& args) {
    auto out_file = work_dir() / "last-output.txt";
    std::string cmd = std::string(TCHAN_BIN) + " " + args + " >" + out_file.string() + " 2>&1";
    int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream f(out_file);
    std::ostringstream ss;
    ss << f.rdbuf();
    r.output = ss.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("simulate writes a network DTC trace at the 0.3s/0.5s levels") {
    auto out = work_dir() / "ip.jsonl";
    auto r = run("simulate --channel ip --scheme dtc --bits 200 --base-ns 300000000 "
                 "--long-ns 500000000 --seed 5 --out " + out.string());
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("injected key: flow 192.168.87.2:48628->192.168.87.4:6789 udp") !=
          std::string::npos);
    tchan::Trace t = tchan::parse_trace(out.string(), tchan::TraceKind::packet);
    CHECK(t.size() == 201);
}

TEST_CASE("simulate writes a cache STC trace at the 200000 ns slot") {
    auto out = work_dir() / "cache.jsonl";
    auto r = run("simulate --channel cache --scheme stc --bits 400 --base-ns 200000 "
                 "--jitter-ns 2000 --seed 3 --out " + out.string());
    REQUIRE(r.exit_code == 0);
    tchan::Trace t = tchan::parse_trace(out.string(), tchan::TraceKind::memory);
    CHECK(t.size() > 100);
    CHECK(t.meta.at("base_ns") == "200000");
}

TEST_CASE("identical flags and seed give identical files") {
    auto o1 = work_dir() / "det-a.jsonl";
    auto o2 = work_dir() / "det-b.jsonl";
    std::string flags = "simulate --channel shm --scheme dtc --bits 300 --base-ns 200000 "
                        "--long-ns 300000 --jitter-ns 4000 --seed 11 --out ";
    REQUIRE(run(flags + o1.string()).exit_code == 0);
    REQUIRE(run(flags + o2.string()).exit_code == 0);
    CHECK(slurp(o1) == slurp(o2));
}

TEST_CASE("stc with --long-ns is a usage error") {
    auto r = run("simulate --channel cache --scheme stc --bits 100 --base-ns 200000 "
                 "--long-ns 400000 --out " + (work_dir() / "bad.jsonl").string());
    CHECK(r.exit_code == 2);
}

TEST_CASE("dtc without --long-ns is a usage error") {
    auto r = run("simulate --channel shm --scheme dtc --bits 100 --base-ns 200000 --out " +
                 (work_dir() / "bad2.jsonl").string());
    CHECK(r.exit_code == 2);
}

TEST_CASE("unknown flags are rejected") {
    CHECK(run("simulate --frobnicate 1 --out x.jsonl").exit_code == 2);
    CHECK(run("nonsense-subcommand").exit_code == 2);
}

TEST_CASE("detect finds the injected DTC channel and exits 0") {
    auto trace = work_dir() / "dtc.jsonl";
    REQUIRE(run("simulate --channel shm --scheme dtc --bits 400 --base-ns 200000 "
                "--long-ns 300000 --seed 9 --out " + trace.string()).exit_code == 0);
    auto report = work_dir() / "dtc.report.json";
    auto r = run("detect --input " + trace.string() + " --out " + report.string());
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("DTC on mem dom=1 pid=2301") != std::string::npos);

    auto doc = nlohmann::json::parse(slurp(report));
    CHECK(doc["findings"] == 1);
    CHECK(doc["verdicts"][0]["channel_type"] == "DTC");
    CHECK(doc["config"]["repeat_threshold"] == 100);
}

TEST_CASE("detect on a channel-free trace exits 1 and still writes the report") {
    auto trace = work_dir() / "noise.jsonl";
    REQUIRE(run("simulate --noise-procs 4 --noise-rate-hz 20 --noise-duration-ns 4000000000 "
                "--seed 2 --out " + trace.string()).exit_code == 0);
    auto report = work_dir() / "noise.report.json";
    auto r = run("detect --input " + trace.string() + " --out " + report.string());
    CHECK(r.exit_code == 1);
    CHECK(fs::exists(report));
}

TEST_CASE("an oversized repeat threshold suppresses findings") {
    auto trace = work_dir() / "small.jsonl";
    REQUIRE(run("simulate --channel shm --scheme dtc --bits 300 --base-ns 200000 "
                "--long-ns 300000 --seed 4 --out " + trace.string()).exit_code == 0);
    auto r = run("detect --input " + trace.string() + " --repeat-threshold 1000000");
    CHECK(r.exit_code == 1);
}

TEST_CASE("detect on a missing file exits 2") {
    CHECK(run("detect --input /does/not/exist.jsonl").exit_code == 2);
}

TEST_CASE("detect on an empty trace exits 1") {
    auto trace = work_dir() / "empty.jsonl";
    std::ofstream(trace) << R"({"kind":"memory","page_size":4096,"meta":{}})" << "\n";
    auto r = run("detect --input " + trace.string());
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("findings: 0") != std::string::npos);
}

TEST_CASE("simulate reads a message from a bits file") {
    auto bits = work_dir() / "message.bits";
    std::ofstream(bits) << "10100111";
    auto out = work_dir() / "frombits.jsonl";
    auto r = run("simulate --channel shm --scheme dtc --bits @" + bits.string() +
                 " --base-ns 200000 --long-ns 300000 --out " + out.string());
    REQUIRE(r.exit_code == 0);
    tchan::Trace t = tchan::parse_trace(out.string());
    CHECK(t.size() == 9); // one event per bit plus the opening event
    CHECK(t.meta.at("message") == "10100111");
}

TEST_CASE("detect --method all reports baseline hits too") {
    auto trace = work_dir() / "all.jsonl";
    REQUIRE(run("simulate --channel shm --scheme dtc --bits 400 --base-ns 200000 "
                "--long-ns 300000 --seed 13 --out " + trace.string()).exit_code == 0);
    auto report = work_dir() / "all.report.json";
    auto r = run("detect --method all --input " + trace.string() + " --out " + report.string());
    REQUIRE(r.exit_code == 0);
    auto doc = nlohmann::json::parse(slurp(report));
    REQUIRE(doc.contains("baselines"));
    CHECK(doc["baselines"][0]["flagged"] == true);
}

TEST_CASE("bench runs a degenerate single-trial table1 suite deterministically") {
    auto out1 = work_dir() / "bench1";
    auto out2 = work_dir() / "bench2";
    auto r1 = run("bench --builtin table1 --trials 1 --seed 6 --out " + out1.string());
    REQUIRE(r1.exit_code == 0);
    auto r2 = run("bench --builtin table1 --trials 1 --seed 6 --out " + out2.string());
    REQUIRE(r2.exit_code == 0);

    std::string csv = slurp(out1 / "results.csv");
    CHECK(csv == slurp(out2 / "results.csv"));
    CHECK(csv.rfind("scenario,method,success_rate,false_positive_rate,trials\n", 0) == 0);
    // 11 scenarios x 3 methods + header
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 34);
    CHECK(csv.find("normal,signature,,") != std::string::npos);
    CHECK(fs::exists(out1 / "results.txt"));
}

TEST_CASE("bench rejects a malformed suite file") {
    auto suite = work_dir() / "bad-suite.json";
    std::ofstream(suite) << "{not json";
    CHECK(run("bench --suite " + suite.string() + " --trials 1").exit_code == 2);
}

TEST_CASE("bench accepts a custom suite file") {
    auto suite = work_dir() / "suite.json";
    std::ofstream(suite) << R"([{
        "name": "mini",
        "trials": 2,
        "message_bits": 300,
        "channel": {"channel":"shm","scheme":"dtc","base_ns":200000,"long_ns":300000,
                     "jitter_ns":1000,"dom":1,"pid":77,"page":"0x7000"}
    }])";
    auto out = work_dir() / "bench3";
    auto r = run("bench --suite " + suite.string() + " --trials 2 --out " + out.string());
    REQUIRE(r.exit_code == 0);
    CHECK(slurp(out / "results.csv").find("mini,signature,1.0000") != std::string::npos);
}

TEST_CASE("report stores evidence and verify checks it") {
    auto trace = work_dir() / "ev.jsonl";
    REQUIRE(run("simulate --channel shm --scheme dtc --bits 400 --base-ns 200000 "
                "--long-ns 300000 --seed 15 --out " + trace.string()).exit_code == 0);
    auto store = work_dir() / "evidence";
    fs::remove_all(store);
    auto r = run("report --input " + trace.string() + " --out " + store.string());
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(store / "report.json"));
    CHECK(fs::exists(store / "trace_slice.jsonl"));
    CHECK(fs::exists(store / "manifest.json"));

    CHECK(run("verify --store " + store.string()).exit_code == 0);

    // tamper with the slice; verification must now fail
    auto slice = store / "trace_slice.jsonl";
    std::string text = slurp(slice);
    text[text.size() / 2] = text[text.size() / 2] == '3' ? '4' : '3';
    std::ofstream(slice, std::ios::binary | std::ios::trunc) << text;
    auto v = run("verify --store " + store.string());
    CHECK(v.exit_code == 1);
    CHECK(v.output.find("mismatch") != std::string::npos);
}

TEST_CASE("every subcommand echoes its effective config") {
    auto out = work_dir() / "echo.jsonl";
    auto r = run("simulate --channel shm --scheme dtc --bits 120 --base-ns 200000 "
                 "--long-ns 300000 --out " + out.string());
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("config simulate {") != std::string::npos);
    CHECK(r.output.find("\"seed\":1") != std::string::npos); // defaults resolved
}
