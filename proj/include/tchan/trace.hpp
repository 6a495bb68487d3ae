#pragma once

// Trace model: page-level memory access records and packet records, with a
// JSON Lines file format. The first line of a trace file is a meta object
//   {"kind":"memory"|"packet","page_size":4096,"meta":{...}}
// and every following line is one record:
//   memory: {"t":<ns>,"dom":<int>,"pid":<int>,"page":"0x195a0000","acc":"r"}
//   packet: {"t":<ns>,"src":"192.168.87.2:48628","dst":"192.168.87.4:6789",
//            "proto":"udp","len":0}
// Writing is deterministic: identical traces serialize byte-identically.

#include "tchan/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <compare>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace tchan {

class ParseError : public std::runtime_error {
public:
    ParseError(size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    size_t line() const { return line_; }

private:
    size_t line_;
};

enum class TraceKind { memory, packet };
enum class AccessKind { read, write, exec };
enum class Protocol { udp, tcp };

inline const char* to_string(TraceKind k) { return k == TraceKind::memory ? "memory" : "packet"; }
inline const char* to_string(AccessKind a) {
    switch (a) {
    case AccessKind::read: return "r";
    case AccessKind::write: return "w";
    default: return "x";
    }
}
inline const char* to_string(Protocol p) { return p == Protocol::udp ? "udp" : "tcp"; }

struct MemoryAccessRecord {
    int64_t timestamp_ns = 0;
    int32_t domain_id = 0;
    int32_t pid = 0;
    uint64_t page = 0;
    AccessKind access = AccessKind::read;

    auto operator<=>(const MemoryAccessRecord&) const = default;
};

struct PacketRecord {
    int64_t timestamp_ns = 0;
    uint32_t src_ip = 0;
    uint16_t src_port = 0;
    uint32_t dst_ip = 0;
    uint16_t dst_port = 0;
    Protocol protocol = Protocol::udp;
    uint32_t payload_len = 0;

    auto operator<=>(const PacketRecord&) const = default;
};

/// (domain, pid, page): a page bound to one process in one VM.
struct PageKey {
    int32_t domain_id = 0;
    int32_t pid = 0;
    uint64_t page = 0;

    auto operator<=>(const PageKey&) const = default;
};

/// Exact 5-tuple flow.
struct FlowKey {
    uint32_t src_ip = 0;
    uint16_t src_port = 0;
    uint32_t dst_ip = 0;
    uint16_t dst_port = 0;
    Protocol protocol = Protocol::udp;

    auto operator<=>(const FlowKey&) const = default;
};

using CandidateKey = std::variant<PageKey, FlowKey>;

inline std::string to_string(const PageKey& k) {
    return "mem dom=" + std::to_string(k.domain_id) + " pid=" + std::to_string(k.pid) +
           " page=" + format_page(k.page);
}
inline std::string to_string(const FlowKey& k) {
    return std::string("flow ") + format_endpoint(k.src_ip, k.src_port) + "->" +
           format_endpoint(k.dst_ip, k.dst_port) + " " + to_string(k.protocol);
}
inline std::string to_string(const CandidateKey& k) {
    return std::visit([](const auto& v) { return to_string(v); }, k);
}

constexpr uint64_t kDefaultPageSize = 4096;

/// A time-ordered event trace of exactly one record kind. Immutable by
/// convention once built; all pipeline functions take it by const reference.
struct Trace {
    TraceKind kind = TraceKind::memory;
    uint64_t page_size = kDefaultPageSize; // memory traces only
    std::vector<MemoryAccessRecord> memory;
    std::vector<PacketRecord> packets;
    std::map<std::string, std::string> meta;
    std::string source_path; // set by parse_trace; not part of equality

    size_t size() const { return kind == TraceKind::memory ? memory.size() : packets.size(); }

    int64_t timestamp_at(size_t i) const {
        return kind == TraceKind::memory ? memory[i].timestamp_ns : packets[i].timestamp_ns;
    }

    bool operator==(const Trace& o) const {
        return kind == o.kind && (kind == TraceKind::packet || page_size == o.page_size) &&
               memory == o.memory && packets == o.packets && meta == o.meta;
    }

    void sort_records() {
        auto by_time = [](const auto& a, const auto& b) { return a.timestamp_ns < b.timestamp_ns; };
        std::stable_sort(memory.begin(), memory.end(), by_time);
        std::stable_sort(packets.begin(), packets.end(), by_time);
    }
};

struct Violation {
    size_t record_index = 0; // npos-like SIZE_MAX for trace-level violations
    std::string rule;

    bool operator==(const Violation&) const = default;
};

/// Checks every declared invariant; violations are data, not errors.
inline std::vector<Violation> validate_trace(const Trace& t) {
    std::vector<Violation> out;
    if (t.kind == TraceKind::memory) {
        if (!t.packets.empty())
            out.push_back({SIZE_MAX, "memory trace contains packet records"});
        if (t.page_size == 0)
            out.push_back({SIZE_MAX, "page_size must be positive"});
        for (size_t i = 0; i < t.memory.size(); ++i) {
            const auto& r = t.memory[i];
            if (r.timestamp_ns < 0)
                out.push_back({i, "timestamp_ns must be >= 0"});
            if (t.page_size != 0 && r.page % t.page_size != 0)
                out.push_back({i, "page not aligned to page_size"});
            if (i > 0 && r.timestamp_ns < t.memory[i - 1].timestamp_ns)
                out.push_back({i, "records out of timestamp order"});
        }
    } else {
        if (!t.memory.empty())
            out.push_back({SIZE_MAX, "packet trace contains memory records"});
        for (size_t i = 0; i < t.packets.size(); ++i) {
            const auto& r = t.packets[i];
            if (r.timestamp_ns < 0)
                out.push_back({i, "timestamp_ns must be >= 0"});
            if (i > 0 && r.timestamp_ns < t.packets[i - 1].timestamp_ns)
                out.push_back({i, "records out of timestamp order"});
        }
    }
    return out;
}

namespace detail {

using ojson = nlohmann::ordered_json;

inline AccessKind parse_access(const std::string& s, size_t line) {
    if (s == "r") return AccessKind::read;
    if (s == "w") return AccessKind::write;
    if (s == "x") return AccessKind::exec;
    throw ParseError(line, "unknown access kind '" + s + "'");
}

inline Protocol parse_protocol(const std::string& s, size_t line) {
    if (s == "udp") return Protocol::udp;
    if (s == "tcp") return Protocol::tcp;
    throw ParseError(line, "unknown protocol '" + s + "'");
}

inline int64_t get_timestamp(const nlohmann::json& j, size_t line) {
    if (!j.contains("t") || !j["t"].is_number_integer())
        throw ParseError(line, "record missing integer field 't'");
    int64_t t = j["t"].get<int64_t>();
    if (t < 0) throw ParseError(line, "negative timestamp");
    return t;
}

} // namespace detail

/// Serializes a trace to the JSON Lines wire format. Deterministic.
inline std::string serialize_trace(const Trace& t) {
    using detail::ojson;
    ojson header;
    header["kind"] = to_string(t.kind);
    if (t.kind == TraceKind::memory) header["page_size"] = t.page_size;
    header["meta"] = ojson::object();
    for (const auto& [k, v] : t.meta) header["meta"][k] = v;

    std::string out = header.dump();
    out.push_back('\n');
    if (t.kind == TraceKind::memory) {
        for (const auto& r : t.memory) {
            ojson j;
            j["t"] = r.timestamp_ns;
            j["dom"] = r.domain_id;
            j["pid"] = r.pid;
            j["page"] = format_page(r.page);
            j["acc"] = to_string(r.access);
            out += j.dump();
            out.push_back('\n');
        }
    } else {
        for (const auto& r : t.packets) {
            ojson j;
            j["t"] = r.timestamp_ns;
            j["src"] = format_endpoint(r.src_ip, r.src_port);
            j["dst"] = format_endpoint(r.dst_ip, r.dst_port);
            j["proto"] = to_string(r.protocol);
            j["len"] = r.payload_len;
            out += j.dump();
            out.push_back('\n');
        }
    }
    return out;
}

inline void write_trace(const Trace& t, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << serialize_trace(t);
    if (!f) throw IoError("write failed: " + path);
}

/// Parses one trace from a stream. Line numbers in errors are 1-based and
/// include the header line. Records are sorted by timestamp if the input is
/// not already ordered.
inline Trace parse_trace_stream(std::istream& in, std::optional<TraceKind> expected_kind,
                                const std::string& source_name) {
    std::string line;
    size_t lineno = 0;

    if (!std::getline(in, line)) throw ParseError(1, "empty trace file (missing header line)");
    ++lineno;

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(lineno, std::string("bad header JSON: ") + e.what());
    }
    if (!header.is_object() || !header.contains("kind") || !header["kind"].is_string())
        throw ParseError(lineno, "header must be an object with a 'kind' string");

    Trace t;
    std::string kind_s = header["kind"].get<std::string>();
    if (kind_s == "memory") t.kind = TraceKind::memory;
    else if (kind_s == "packet") t.kind = TraceKind::packet;
    else throw ParseError(lineno, "unknown trace kind '" + kind_s + "'");

    if (expected_kind && *expected_kind != t.kind)
        throw ParseError(lineno, std::string("trace kind is ") + to_string(t.kind) +
                                     ", expected " + to_string(*expected_kind));

    if (t.kind == TraceKind::memory) {
        t.page_size = header.value("page_size", kDefaultPageSize);
        if (t.page_size == 0) throw ParseError(lineno, "page_size must be positive");
    }
    if (header.contains("meta")) {
        if (!header["meta"].is_object()) throw ParseError(lineno, "'meta' must be an object");
        for (const auto& [k, v] : header["meta"].items()) {
            if (!v.is_string()) throw ParseError(lineno, "meta values must be strings");
            t.meta[k] = v.get<std::string>();
        }
    }
    t.source_path = source_name;

    bool sorted = true;
    int64_t prev = -1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(lineno, std::string("bad record JSON: ") + e.what());
        }
        if (!j.is_object()) throw ParseError(lineno, "record must be a JSON object");

        if (t.kind == TraceKind::memory) {
            if (j.contains("src") || j.contains("proto"))
                throw ParseError(lineno, "packet record in memory trace");
            MemoryAccessRecord r;
            r.timestamp_ns = detail::get_timestamp(j, lineno);
            if (!j.contains("dom") || !j.contains("pid") || !j.contains("page") || !j.contains("acc"))
                throw ParseError(lineno, "memory record requires t, dom, pid, page, acc");
            r.domain_id = j["dom"].get<int32_t>();
            r.pid = j["pid"].get<int32_t>();
            try {
                r.page = parse_page(j["page"].get<std::string>());
            } catch (const SpecError& e) {
                throw ParseError(lineno, e.what());
            }
            r.access = detail::parse_access(j["acc"].get<std::string>(), lineno);
            if (r.timestamp_ns < prev) sorted = false;
            prev = r.timestamp_ns;
            t.memory.push_back(r);
        } else {
            if (j.contains("page") || j.contains("acc"))
                throw ParseError(lineno, "memory record in packet trace");
            PacketRecord r;
            r.timestamp_ns = detail::get_timestamp(j, lineno);
            if (!j.contains("src") || !j.contains("dst") || !j.contains("proto") || !j.contains("len"))
                throw ParseError(lineno, "packet record requires t, src, dst, proto, len");
            try {
                auto [sip, sport] = parse_endpoint(j["src"].get<std::string>());
                auto [dip, dport] = parse_endpoint(j["dst"].get<std::string>());
                r.src_ip = sip;
                r.src_port = sport;
                r.dst_ip = dip;
                r.dst_port = dport;
            } catch (const SpecError& e) {
                throw ParseError(lineno, e.what());
            }
            r.protocol = detail::parse_protocol(j["proto"].get<std::string>(), lineno);
            r.payload_len = j["len"].get<uint32_t>();
            if (r.timestamp_ns < prev) sorted = false;
            prev = r.timestamp_ns;
            t.packets.push_back(r);
        }
    }

    if (!sorted) t.sort_records();
    return t;
}

inline Trace parse_trace(const std::string& path, std::optional<TraceKind> expected_kind = {}) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open trace file: " + path);
    return parse_trace_stream(f, expected_kind, path);
}

inline Trace parse_trace_string(const std::string& text, std::optional<TraceKind> expected_kind = {},
                                const std::string& source_name = "<string>") {
    std::istringstream ss(text);
    return parse_trace_stream(ss, expected_kind, source_name);
}

} // namespace tchan
