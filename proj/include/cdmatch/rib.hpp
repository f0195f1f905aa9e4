#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cdmatch/net.hpp"
#include "cdmatch/registry.hpp"
#include "cdmatch/util.hpp"

namespace cdmatch {

using Timestamp = std::int64_t;

struct RibEntry {
    Timestamp timestamp = 0;
    Prefix prefix;
    std::vector<Asn> as_path;  // first hop = announcing collector's AS, last = origin

    Asn origin() const { return as_path.back(); }

    bool operator==(const RibEntry&) const = default;
};

/// Routing table with longest-prefix match over a binary trie.
///
/// Entries for one prefix are kept in (timestamp, insertion) order. A lookup
/// at time t returns the entry whose timestamp is closest to t; equidistant
/// ties resolve to the earlier timestamp, exact ties to the first loaded.
class RibTable {
public:
    struct LpmResult {
        const RibEntry* entry = nullptr;
        // >=2 distinct origins among this prefix's entries at the chosen instant
        bool multi_origin = false;
    };

    RibTable() { nodes_.emplace_back(); }

    void insert(const RibEntry& e) {
        if (e.as_path.empty()) throw std::invalid_argument("empty AS path");
        int n = 0;
        for (std::uint8_t d = 0; d < e.prefix.len; ++d) {
            int bit = (e.prefix.net >> (31 - d)) & 1;
            if (nodes_[n].child[bit] < 0) {
                nodes_[n].child[bit] = static_cast<int>(nodes_.size());
                nodes_.emplace_back();
            }
            n = nodes_[n].child[bit];
        }
        auto& v = nodes_[n].entries;
        auto pos = std::upper_bound(v.begin(), v.end(), e.timestamp,
                                    [](Timestamp t, const RibEntry& x) { return t < x.timestamp; });
        v.insert(pos, e);
        nodes_[n].prefix = e.prefix;
        ++size_;
    }

    LpmResult lpm(Ipv4 ip, Timestamp at) const {
        int best = -1;
        int n = 0;
        for (int d = 0; d <= 32; ++d) {
            if (!nodes_[n].entries.empty()) best = n;
            if (d == 32) break;
            int bit = (ip.v >> (31 - d)) & 1;
            int next = nodes_[n].child[bit];
            if (next < 0) break;
            n = next;
        }
        if (best < 0) return {};
        return select(nodes_[best].entries, at);
    }

    /// Closest-timestamp entry for an exact prefix, if present.
    LpmResult exact(const Prefix& p, Timestamp at) const {
        int n = 0;
        for (std::uint8_t d = 0; d < p.len; ++d) {
            int bit = (p.net >> (31 - d)) & 1;
            n = nodes_[n].child[bit];
            if (n < 0) return {};
        }
        if (nodes_[n].entries.empty() || nodes_[n].prefix != p) return {};
        return select(nodes_[n].entries, at);
    }

    void for_each_entry(const std::function<void(const RibEntry&)>& fn) const {
        for (const auto& node : nodes_)
            for (const auto& e : node.entries) fn(e);
    }

    std::size_t size() const { return size_; }

private:
    struct Node {
        int child[2] = {-1, -1};
        Prefix prefix;
        std::vector<RibEntry> entries;  // sorted by timestamp, stable
    };

    static LpmResult select(const std::vector<RibEntry>& v, Timestamp at) {
        auto ge = std::lower_bound(v.begin(), v.end(), at,
                                   [](const RibEntry& x, Timestamp t) { return x.timestamp < t; });
        const RibEntry* pick = nullptr;
        if (ge == v.end()) {
            pick = &v.back();
        } else if (ge == v.begin()) {
            pick = &*ge;
        } else {
            auto lt = ge - 1;
            // equidistant -> earlier timestamp
            pick = (at - lt->timestamp <= ge->timestamp - at) ? &*lt : &*ge;
        }
        // walk back to the first entry at the chosen instant, then check origins
        auto first = std::lower_bound(v.begin(), v.end(), pick->timestamp,
                                      [](const RibEntry& x, Timestamp t) { return x.timestamp < t; });
        bool multi = false;
        for (auto it = first; it != v.end() && it->timestamp == pick->timestamp; ++it)
            if (it->origin() != first->origin()) multi = true;
        return {&*first, multi};
    }

    std::vector<Node> nodes_;
    std::size_t size_ = 0;
};

// Sentinel for unresolvable set-style path hops; never a real assigned ASN.
inline constexpr Asn kAsSetMarker = 4294967295u;

/// Parses `timestamp|prefix|as_path` rows. Paths are kept verbatim; AS-path
/// hygiene is a separate cleansing pass.
inline std::vector<RibEntry> load_rib_raw(const std::string& path) {
    std::vector<RibEntry> out;
    for_each_data_line(path, [&](std::size_t lineno, std::string_view line) {
        auto f = split(line, '|');
        if (f.size() != 3) throw ParseError(path, lineno, "expected timestamp|prefix|as_path");
        RibEntry e;
        if (!parse_int(trim(f[0]), e.timestamp))
            throw ParseError(path, lineno, "bad timestamp");
        auto p = parse_prefix(trim(f[1]));
        if (!p) throw ParseError(path, lineno, "bad prefix");
        e.prefix = *p;
        for (auto tok : split(trim(f[2]), ' ')) {
            tok = trim(tok);
            if (tok.empty()) continue;
            Asn a = 0;
            if (tok.front() == '{') {
                // set-style hop: keep a marker hop so cleansing can reject the path
                e.as_path.push_back(kAsSetMarker);
                continue;
            }
            if (!parse_uint(tok, a)) throw ParseError(path, lineno, "bad AS path token");
            e.as_path.push_back(a);
        }
        if (e.as_path.empty()) throw ParseError(path, lineno, "empty AS path");
        out.push_back(std::move(e));
    });
    return out;
}

/// One mapping method's answer for a hop address.
struct MapAnswer {
    enum Kind : std::uint8_t { Concrete, Unmap, IxpWild } kind = Unmap;
    Asn asn = 0;

    static MapAnswer concrete(Asn a) { return {Concrete, a}; }
    static MapAnswer unmap() { return {Unmap, 0}; }
    static MapAnswer ixp() { return {IxpWild, 0}; }

    bool operator==(const MapAnswer&) const = default;
};

/// Address-to-AS mapping method.
class Mapper {
public:
    virtual ~Mapper() = default;
    virtual MapAnswer map(Ipv4 ip, Timestamp at) const = 0;
};

/// Owner of the longest matching announced prefix; ambiguous origins stay unmapped.
class RibMatchMapper : public Mapper {
public:
    explicit RibMatchMapper(const RibTable& rib) : rib_(rib) {}

    MapAnswer map(Ipv4 ip, Timestamp at) const override {
        auto r = rib_.lpm(ip, at);
        if (!r.entry || r.multi_origin) return MapAnswer::unmap();
        return MapAnswer::concrete(r.entry->origin());
    }

private:
    const RibTable& rib_;
};

/// RIB mapping with exchange-fabric awareness: fabric addresses and
/// exchange-operated origins are reported as neither-AS.
class RibIxpMapper : public Mapper {
public:
    RibIxpMapper(const RibTable& rib, const IxpDb& ixp) : rib_(rib), ixp_(ixp) {}

    MapAnswer map(Ipv4 ip, Timestamp at) const override {
        if (ixp_.covers_ip(ip)) return MapAnswer::ixp();
        auto r = rib_.lpm(ip, at);
        if (!r.entry || r.multi_origin) return MapAnswer::unmap();
        Asn origin = r.entry->origin();
        if (ixp_.is_ixp_asn(origin)) return MapAnswer::ixp();
        return MapAnswer::concrete(origin);
    }

private:
    const RibTable& rib_;
    const IxpDb& ixp_;
};

/// Explicit address table. A row is either a concrete ASN or a declared unmap;
/// addresses outside the table behave as unmapped on lookup.
class MappingTable : public Mapper {
public:
    void set(Ipv4 ip, MapAnswer a) { table_[ip.v] = a; }

    MapAnswer map(Ipv4 ip, Timestamp) const override {
        auto it = table_.find(ip.v);
        return it == table_.end() ? MapAnswer::unmap() : it->second;
    }

    bool contains(Ipv4 ip) const { return table_.count(ip.v) > 0; }
    std::size_t size() const { return table_.size(); }

    const std::unordered_map<std::uint32_t, MapAnswer>& rows() const { return table_; }

    /// Rows in ascending address order, for stable serialization.
    std::vector<std::pair<Ipv4, MapAnswer>> sorted_rows() const {
        std::vector<std::pair<Ipv4, MapAnswer>> v;
        v.reserve(table_.size());
        for (const auto& [ip, a] : table_) v.push_back({Ipv4{ip}, a});
        std::sort(v.begin(), v.end(),
                  [](const auto& x, const auto& y) { return x.first.v < y.first.v; });
        return v;
    }

private:
    std::unordered_map<std::uint32_t, MapAnswer> table_;
};

/// Base method plus per-address overrides; overrides win.
class OverlayMapper : public Mapper {
public:
    explicit OverlayMapper(const Mapper& base) : base_(base) {}

    void set(Ipv4 ip, MapAnswer a) { over_[ip.v] = a; }
    void clear(Ipv4 ip) { over_.erase(ip.v); }

    MapAnswer map(Ipv4 ip, Timestamp at) const override {
        auto it = over_.find(ip.v);
        return it == over_.end() ? base_.map(ip, at) : it->second;
    }

    const std::unordered_map<std::uint32_t, MapAnswer>& overrides() const { return over_; }

private:
    const Mapper& base_;
    std::unordered_map<std::uint32_t, MapAnswer> over_;
};

/// Loads `ip|asn` / `ip|-` rows. Duplicate addresses are rejected; unmap is
/// always written out explicitly, never implied by a missing row.
inline MappingTable load_mapping(const std::string& path) {
    MappingTable t;
    for_each_data_line(path, [&](std::size_t lineno, std::string_view line) {
        auto f = split(line, '|');
        if (f.size() != 2) throw ParseError(path, lineno, "expected ip|asn or ip|-");
        auto ip = parse_ipv4(trim(f[0]));
        if (!ip) throw ParseError(path, lineno, "bad address");
        if (t.contains(*ip))
            throw ParseError(path, lineno, "duplicate address " + format_ipv4(*ip));
        auto val = trim(f[1]);
        if (val == "-") {
            t.set(*ip, MapAnswer::unmap());
        } else {
            Asn a = 0;
            if (!parse_uint(val, a)) throw ParseError(path, lineno, "bad asn");
            t.set(*ip, MapAnswer::concrete(a));
        }
    });
    return t;
}

inline std::string format_mapping(const MappingTable& t) {
    std::string out;
    for (const auto& [ip, a] : t.sorted_rows()) {
        out += format_ipv4(ip);
        out += '|';
        out += a.kind == MapAnswer::Concrete ? std::to_string(a.asn) : "-";
        out += '\n';
    }
    return out;
}

}  // namespace cdmatch
