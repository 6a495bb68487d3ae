#pragma once

// Forensic reports and the filesystem evidence store. A report captures the
// trace identity (content hash), the detector configuration, every verdict
// with its group statistics and evidence index ranges, and a decoded message
// attempt for each positive verdict. store_evidence writes the report, a
// trace slice around the evidence, and a manifest of content hashes; verify
// re-checks the hashes.

#include "tchan/baseline.hpp"
#include "tchan/detect.hpp"
#include "tchan/sim.hpp"
#include "tchan/trace.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tchan {

struct ReportVerdict {
    CandidateKey key;
    ChannelType channel_type = ChannelType::none;
    std::optional<RejectReason> rejected_reason;
    double base_interval_ns = 0.0;
    std::vector<IntervalGroup> groups;
    std::vector<std::pair<size_t, size_t>> evidence_ranges; // inclusive index ranges
    size_t evidence_count = 0;
    size_t dropped_nonpositive = 0;
    std::string note;
    std::optional<std::string> decoded_bits;
    std::optional<std::string> decode_error;
};

struct ForensicReport {
    std::string trace_source;
    TraceKind trace_kind = TraceKind::memory;
    uint64_t page_size = kDefaultPageSize;
    size_t record_count = 0;
    std::string trace_hash;
    DetectorConfig config;
    std::string generated_at;
    std::vector<ReportVerdict> verdicts;
    std::vector<BaselineVerdict> baselines;
    size_t findings = 0;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["trace"]["source"] = trace_source;
        j["trace"]["kind"] = to_string(trace_kind);
        if (trace_kind == TraceKind::memory) j["trace"]["page_size"] = page_size;
        j["trace"]["records"] = record_count;
        j["trace"]["hash"] = trace_hash;
        j["config"]["repeat_threshold"] = config.repeat_threshold;
        j["config"]["k1"] = config.k1;
        j["config"]["k2"] = config.k2;
        j["config"]["min_group_frac"] = config.min_group_frac;
        j["config"]["reads_only"] = config.ignore_non_read;
        j["generated_at"] = generated_at;
        j["findings"] = findings;
        j["verdicts"] = nlohmann::ordered_json::array();
        for (const auto& v : verdicts) {
            nlohmann::ordered_json vj;
            vj["key"] = to_string(v.key);
            vj["channel_type"] = to_string(v.channel_type);
            if (v.rejected_reason) vj["rejected_reason"] = to_string(*v.rejected_reason);
            if (v.channel_type != ChannelType::none) vj["base_interval_ns"] = v.base_interval_ns;
            vj["groups"] = nlohmann::ordered_json::array();
            for (const auto& g : v.groups) {
                nlohmann::ordered_json gj;
                gj["count"] = g.count();
                gj["mean_ns"] = g.mean_ns;
                gj["slope"] = g.slope;
                vj["groups"].push_back(gj);
            }
            vj["evidence"]["count"] = v.evidence_count;
            vj["evidence"]["ranges"] = nlohmann::ordered_json::array();
            for (const auto& [a, b] : v.evidence_ranges)
                vj["evidence"]["ranges"].push_back({a, b});
            if (v.dropped_nonpositive) vj["dropped_nonpositive"] = v.dropped_nonpositive;
            if (!v.note.empty()) vj["note"] = v.note;
            if (v.decoded_bits) vj["decoded_bits"] = *v.decoded_bits;
            if (v.decode_error) vj["decode_error"] = *v.decode_error;
            j["verdicts"].push_back(vj);
        }
        if (!baselines.empty()) {
            j["baselines"] = nlohmann::ordered_json::array();
            for (const auto& b : baselines) {
                nlohmann::ordered_json bj;
                bj["key"] = to_string(b.key);
                bj["flagged"] = b.flagged;
                bj["variance_fired"] = b.variance_fired;
                bj["epsilon_fired"] = b.epsilon_fired;
                if (b.regularity) bj["regularity"] = *b.regularity;
                if (b.similarity) bj["similarity"] = *b.similarity;
                if (!b.skipped.empty()) bj["skipped"] = b.skipped;
                j["baselines"].push_back(bj);
            }
        }
        return j;
    }

    std::string to_pretty_json() const { return to_json().dump(2) + "\n"; }
};

namespace detail {

inline std::vector<std::pair<size_t, size_t>> compress_ranges(const std::vector<size_t>& sorted) {
    std::vector<std::pair<size_t, size_t>> out;
    for (size_t idx : sorted) {
        if (!out.empty() && idx == out.back().second + 1) out.back().second = idx;
        else out.push_back({idx, idx});
    }
    return out;
}

/// Decode the message a positive verdict implies, using the detected group
/// means as symbol levels.
inline void attach_decode(ReportVerdict& rv, const Trace& trace,
                          const std::vector<size_t>& evidence) {
    std::vector<int64_t> times;
    times.reserve(evidence.size());
    for (size_t idx : evidence) times.push_back(trace.timestamp_at(idx));
    try {
        IntervalSeries series = interarrival(times, rv.key);
        if (rv.channel_type == ChannelType::DTC) {
            double lo = std::min(rv.groups[0].mean_ns, rv.groups[1].mean_ns);
            double hi = std::max(rv.groups[0].mean_ns, rv.groups[1].mean_ns);
            rv.decoded_bits = decode_dtc(series, static_cast<int64_t>(std::llround(lo)),
                                         static_cast<int64_t>(std::llround(hi)))
                                  .to_string();
        } else if (rv.channel_type == ChannelType::STC) {
            rv.decoded_bits =
                decode_stc(series, static_cast<int64_t>(std::llround(rv.base_interval_ns)))
                    .to_string();
        }
    } catch (const std::exception& e) {
        rv.decode_error = e.what();
    }
}

} // namespace detail

/// Builds the forensic report for a set of verdicts produced from `trace`.
/// Every evidence index must resolve to a record of the trace.
inline ForensicReport build_report(const Trace& trace, const std::vector<DetectionVerdict>& verdicts,
                                   const DetectorConfig& cfg,
                                   const std::string& generated_at = "1970-01-01T00:00:00Z",
                                   const std::vector<BaselineVerdict>& baselines = {}) {
    ForensicReport r;
    r.trace_source = trace.source_path.empty() ? "<memory>" : trace.source_path;
    r.trace_kind = trace.kind;
    r.page_size = trace.page_size;
    r.record_count = trace.size();
    r.trace_hash = fnv1a64_hex(serialize_trace(trace));
    r.config = cfg;
    r.generated_at = generated_at;
    r.baselines = baselines;

    for (const auto& v : verdicts) {
        ReportVerdict rv;
        rv.key = v.key;
        rv.channel_type = v.channel_type;
        rv.rejected_reason = v.rejected_reason;
        rv.base_interval_ns = v.base_interval_ns;
        rv.groups = v.groups;
        rv.evidence_count = v.evidence.size();
        rv.dropped_nonpositive = v.dropped_nonpositive;
        rv.note = v.note;
        for (size_t idx : v.evidence) {
            if (idx >= trace.size())
                throw SpecError("verdict evidence index " + std::to_string(idx) +
                                " outside the trace");
        }
        rv.evidence_ranges = detail::compress_ranges(v.evidence);
        if (v.channel_type != ChannelType::none) {
            ++r.findings;
            detail::attach_decode(rv, trace, v.evidence);
        }
        r.verdicts.push_back(std::move(rv));
    }
    return r;
}

struct StoredEvidence {
    std::string report_path;
    std::string slice_path;
    std::string manifest_path;
};

constexpr size_t kSliceMarginRecords = 32;

/// Writes report.json, a trace slice covering all positive-verdict evidence
/// (plus a margin of surrounding records), and a manifest of content hashes.
/// Re-running over identical inputs produces byte-identical files.
inline StoredEvidence store_evidence(const ForensicReport& report, const Trace& trace,
                                     const std::string& store_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(store_dir, ec);
    if (ec) throw IoError("cannot create evidence directory: " + store_dir);

    size_t lo = trace.size(), hi = 0;
    bool any = false;
    for (const auto& v : report.verdicts) {
        if (v.channel_type == ChannelType::none) continue;
        for (const auto& [a, b] : v.evidence_ranges) {
            lo = std::min(lo, a);
            hi = std::max(hi, b);
            any = true;
        }
    }

    Trace slice;
    slice.kind = trace.kind;
    slice.page_size = trace.page_size;
    slice.meta = trace.meta;
    slice.meta["slice_of"] = report.trace_hash;
    if (any) {
        size_t first = lo > kSliceMarginRecords ? lo - kSliceMarginRecords : 0;
        size_t last = std::min(hi + kSliceMarginRecords, trace.size() - 1);
        slice.meta["slice_first_index"] = std::to_string(first);
        slice.meta["slice_last_index"] = std::to_string(last);
        if (trace.kind == TraceKind::memory)
            slice.memory.assign(trace.memory.begin() + static_cast<long>(first),
                                trace.memory.begin() + static_cast<long>(last + 1));
        else
            slice.packets.assign(trace.packets.begin() + static_cast<long>(first),
                                 trace.packets.begin() + static_cast<long>(last + 1));
    }

    std::string report_text = report.to_pretty_json();
    std::string slice_text = serialize_trace(slice);

    nlohmann::ordered_json manifest;
    manifest["store_format"] = "evidence-store-1";
    manifest["trace_hash"] = report.trace_hash;
    manifest["files"]["report.json"] = fnv1a64_hex(report_text);
    manifest["files"]["trace_slice.jsonl"] = fnv1a64_hex(slice_text);
    std::string manifest_text = manifest.dump(2) + "\n";

    StoredEvidence out;
    out.report_path = (fs::path(store_dir) / "report.json").string();
    out.slice_path = (fs::path(store_dir) / "trace_slice.jsonl").string();
    out.manifest_path = (fs::path(store_dir) / "manifest.json").string();

    auto write_file = [](const std::string& path, const std::string& text) {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open for writing: " + path);
        f << text;
        if (!f) throw IoError("write failed: " + path);
    };
    write_file(out.report_path, report_text);
    write_file(out.slice_path, slice_text);
    write_file(out.manifest_path, manifest_text);
    return out;
}

/// Re-hashes every file named by the manifest. Returns one message per
/// problem; empty means the store verifies clean.
inline std::vector<std::string> verify_evidence(const std::string& store_dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> problems;

    auto slurp = [](const fs::path& p, std::string& out) {
        std::ifstream f(p, std::ios::binary);
        if (!f) return false;
        std::ostringstream ss;
        ss << f.rdbuf();
        out = ss.str();
        return true;
    };

    fs::path manifest_path = fs::path(store_dir) / "manifest.json";
    std::string manifest_text;
    if (!slurp(manifest_path, manifest_text)) {
        problems.push_back("missing manifest: " + manifest_path.string());
        return problems;
    }
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(manifest_text);
    } catch (const nlohmann::json::exception& e) {
        problems.push_back(std::string("unreadable manifest: ") + e.what());
        return problems;
    }
    if (!manifest.contains("files") || !manifest["files"].is_object()) {
        problems.push_back("manifest has no file table");
        return problems;
    }

    for (const auto& [name, expected] : manifest["files"].items()) {
        std::string text;
        fs::path p = fs::path(store_dir) / name;
        if (!slurp(p, text)) {
            problems.push_back("missing file: " + p.string());
            continue;
        }
        std::string actual = fnv1a64_hex(text);
        if (actual != expected.get<std::string>())
            problems.push_back("hash mismatch for " + name + ": manifest " +
                               expected.get<std::string>() + ", actual " + actual);
        if (name == "trace_slice.jsonl") {
            try {
                parse_trace_string(text, {}, p.string());
            } catch (const std::exception& e) {
                problems.push_back(std::string("slice does not parse as a trace: ") + e.what());
            }
        }
    }
    return problems;
}

} // namespace tchan
