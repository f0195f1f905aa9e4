#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "cdmatch/util.hpp"

namespace cdmatch {

using Asn = std::uint32_t;

/// Reserved-for-private-use ASN ranges (16- and 32-bit blocks).
inline bool is_private_asn(Asn a) {
    return (a >= 64512u && a <= 65534u) || (a >= 4200000000u && a <= 4294967294u);
}

/// IPv4 address, host byte order.
struct Ipv4 {
    std::uint32_t v = 0;

    auto operator<=>(const Ipv4&) const = default;
};

inline std::optional<Ipv4> parse_ipv4(std::string_view s) {
    std::uint32_t acc = 0;
    int octets = 0;
    std::size_t i = 0;
    while (i < s.size()) {
        if (octets > 0) {
            if (s[i] != '.') return std::nullopt;
            ++i;
        }
        std::size_t j = i;
        std::uint32_t oct = 0;
        while (j < s.size() && s[j] >= '0' && s[j] <= '9') {
            oct = oct * 10 + static_cast<std::uint32_t>(s[j] - '0');
            if (oct > 255) return std::nullopt;
            ++j;
        }
        if (j == i || j - i > 3) return std::nullopt;
        acc = (acc << 8) | oct;
        ++octets;
        i = j;
    }
    if (octets != 4) return std::nullopt;
    return Ipv4{acc};
}

inline std::string format_ipv4(Ipv4 ip) {
    std::string out;
    out.reserve(15);
    for (int shift = 24; shift >= 0; shift -= 8) {
        out += std::to_string((ip.v >> shift) & 0xffu);
        if (shift) out += '.';
    }
    return out;
}

/// CIDR prefix. Host bits are always zero; construction enforces it.
struct Prefix {
    std::uint32_t net = 0;
    std::uint8_t len = 0;

    Prefix() = default;
    Prefix(Ipv4 address, std::uint8_t length) : len(length) {
        net = length == 0 ? 0 : (address.v & mask());
    }

    std::uint32_t mask() const {
        return len == 0 ? 0u : (0xffffffffu << (32u - len));
    }

    bool contains(Ipv4 ip) const { return (ip.v & mask()) == net; }

    /// True when `other` lies inside this prefix (equal counts as inside).
    bool covers(const Prefix& other) const {
        return other.len >= len && (other.net & mask()) == net;
    }

    auto operator<=>(const Prefix&) const = default;
};

inline std::optional<Prefix> parse_prefix(std::string_view s) {
    auto slash = s.find('/');
    if (slash == std::string_view::npos) return std::nullopt;
    auto ip = parse_ipv4(s.substr(0, slash));
    if (!ip) return std::nullopt;
    unsigned len = 0;
    if (!parse_uint(s.substr(slash + 1), len) || len > 32) return std::nullopt;
    Prefix p(*ip, static_cast<std::uint8_t>(len));
    if (p.net != ip->v) return std::nullopt;  // reject nonzero host bits
    return p;
}

inline std::string format_prefix(const Prefix& p) {
    return format_ipv4(Ipv4{p.net}) + "/" + std::to_string(p.len);
}

}  // namespace cdmatch
