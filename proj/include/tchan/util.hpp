#pragma once

// Small shared helpers: seed mixing, content hashing, address formatting.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tchan {

/// Error raised for invalid parameter combinations and contract violations.
class SpecError : public std::runtime_error {
public:
    explicit SpecError(const std::string& what) : std::runtime_error(what) {}
};

/// I/O failure with the offending path in the message.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// splitmix64 step; used to derive independent sub-seeds from one seed.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Combine a base seed with stream indices into one engine seed.
inline uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b = 0) {
    return mix64(mix64(base ^ (a * 0x9e3779b97f4a7c15ULL)) ^ b);
}

/// FNV-1a 64-bit over a byte string; good enough for manifest integrity checks.
inline uint64_t fnv1a64(std::string_view data) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string fnv1a64_hex(std::string_view data) {
    static const char* digits = "0123456789abcdef";
    uint64_t h = fnv1a64(data);
    std::string out = "fnv1a64:";
    for (int i = 60; i >= 0; i -= 4) out.push_back(digits[(h >> i) & 0xf]);
    return out;
}

/// Page address rendered as lowercase hex with 0x prefix (wire format).
inline std::string format_page(uint64_t page) {
    static const char* digits = "0123456789abcdef";
    if (page == 0) return "0x0";
    char buf[16];
    int n = 0;
    while (page) {
        buf[n++] = digits[page & 0xf];
        page >>= 4;
    }
    std::string out = "0x";
    while (n) out.push_back(buf[--n]);
    return out;
}

inline uint64_t parse_page(std::string_view s) {
    if (s.size() < 3 || s[0] != '0' || (s[1] != 'x' && s[1] != 'X'))
        throw SpecError("page address must be 0x-prefixed hex: '" + std::string(s) + "'");
    uint64_t v = 0;
    for (char c : s.substr(2)) {
        int d;
        if (c >= '0' && c <= '9') d = c - '0';
        else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
        else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
        else throw SpecError("bad hex digit in page address: '" + std::string(s) + "'");
        v = (v << 4) | static_cast<uint64_t>(d);
    }
    return v;
}

/// IPv4 stored as host-order uint32.
inline std::string format_ipv4(uint32_t ip) {
    return std::to_string((ip >> 24) & 0xff) + '.' + std::to_string((ip >> 16) & 0xff) + '.' +
           std::to_string((ip >> 8) & 0xff) + '.' + std::to_string(ip & 0xff);
}

inline uint32_t parse_ipv4(std::string_view s) {
    uint32_t parts[4];
    int pi = 0;
    uint32_t cur = 0;
    bool any = false;
    for (char c : s) {
        if (c == '.') {
            if (!any || pi >= 3) throw SpecError("bad IPv4 address: '" + std::string(s) + "'");
            parts[pi++] = cur;
            cur = 0;
            any = false;
        } else if (c >= '0' && c <= '9') {
            cur = cur * 10 + static_cast<uint32_t>(c - '0');
            if (cur > 255) throw SpecError("bad IPv4 address: '" + std::string(s) + "'");
            any = true;
        } else {
            throw SpecError("bad IPv4 address: '" + std::string(s) + "'");
        }
    }
    if (!any || pi != 3) throw SpecError("bad IPv4 address: '" + std::string(s) + "'");
    parts[3] = cur;
    return (parts[0] << 24) | (parts[1] << 16) | (parts[2] << 8) | parts[3];
}

/// "a.b.c.d:port" endpoint pair, the form used by the packet wire format.
inline std::pair<uint32_t, uint16_t> parse_endpoint(std::string_view s) {
    auto colon = s.rfind(':');
    if (colon == std::string_view::npos)
        throw SpecError("endpoint must be ip:port: '" + std::string(s) + "'");
    uint32_t ip = parse_ipv4(s.substr(0, colon));
    uint64_t port = 0;
    auto ps = s.substr(colon + 1);
    if (ps.empty()) throw SpecError("endpoint must be ip:port: '" + std::string(s) + "'");
    for (char c : ps) {
        if (c < '0' || c > '9') throw SpecError("bad port in endpoint: '" + std::string(s) + "'");
        port = port * 10 + static_cast<uint64_t>(c - '0');
        if (port > 65535) throw SpecError("port out of range in endpoint: '" + std::string(s) + "'");
    }
    return {ip, static_cast<uint16_t>(port)};
}

inline std::string format_endpoint(uint32_t ip, uint16_t port) {
    return format_ipv4(ip) + ':' + std::to_string(port);
}

} // namespace tchan
