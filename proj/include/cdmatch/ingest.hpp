#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cdmatch/net.hpp"
#include "cdmatch/registry.hpp"
#include "cdmatch/rib.hpp"
#include "cdmatch/util.hpp"

namespace cdmatch {

/// One probe round-trip slot; empty answers means a timeout, several answers
/// means distinct addresses replied at the same TTL.
struct RawHop {
    std::vector<Ipv4> ips;
};

struct RawTrace {
    Timestamp timestamp = 0;
    Ipv4 src, dst;
    std::vector<RawHop> hops;
};

struct CleanHop {
    bool responsive = false;
    Ipv4 ip;

    static CleanHop timeout() { return {}; }
    static CleanHop at(Ipv4 ip) { return {true, ip}; }

    bool operator==(const CleanHop&) const = default;
};

/// Forwarding path that survived cleansing: one address per slot, adjacent
/// duplicates collapsed, no address repeated with anything in between.
struct CleanTrace {
    Timestamp timestamp = 0;
    Ipv4 src, dst;
    std::vector<CleanHop> hops;
    bool has_unresponsive = false;
    bool reached = false;  // last slot responded with the probed destination

    bool operator==(const CleanTrace&) const = default;
};

struct TraceCleanseReport {
    std::size_t raw_total = 0;
    std::size_t discarded_loop = 0;      // address repeats with a distinct slot between
    std::size_t discarded_mul_resp = 0;  // some slot answered with several addresses
    std::size_t retained = 0;
    std::size_t flagged_unresponsive = 0;  // retained traces with timeouts
    std::size_t flagged_incomplete = 0;    // retained traces that missed the destination
};

/// Parses `timestamp|src_ip|dst_ip|h1,h2,...` rows; a hop is an address, `*`,
/// or a `;`-joined address list.
inline std::vector<RawTrace> load_traces(const std::string& path) {
    std::vector<RawTrace> out;
    for_each_data_line(path, [&](std::size_t lineno, std::string_view line) {
        auto f = split(line, '|');
        if (f.size() != 4) throw ParseError(path, lineno, "expected timestamp|src|dst|hops");
        RawTrace t;
        if (!parse_int(trim(f[0]), t.timestamp)) throw ParseError(path, lineno, "bad timestamp");
        auto src = parse_ipv4(trim(f[1])), dst = parse_ipv4(trim(f[2]));
        if (!src || !dst) throw ParseError(path, lineno, "bad endpoint address");
        t.src = *src;
        t.dst = *dst;
        for (auto hop : split(trim(f[3]), ',')) {
            hop = trim(hop);
            RawHop h;
            if (hop != "*") {
                for (auto part : split(hop, ';')) {
                    auto ip = parse_ipv4(trim(part));
                    if (!ip) throw ParseError(path, lineno, "bad hop address");
                    if (std::find(h.ips.begin(), h.ips.end(), *ip) == h.ips.end())
                        h.ips.push_back(*ip);
                }
            }
            t.hops.push_back(std::move(h));
        }
        if (t.hops.empty()) throw ParseError(path, lineno, "empty hop list");
        out.push_back(std::move(t));
    });
    return out;
}

namespace detail {

// Slot sequence after collapsing adjacent identical single-address slots.
inline std::vector<const RawHop*> collapse_adjacent(const RawTrace& t) {
    std::vector<const RawHop*> out;
    for (const auto& h : t.hops) {
        if (!out.empty() && h.ips.size() == 1 && out.back()->ips.size() == 1 &&
            out.back()->ips[0] == h.ips[0])
            continue;  // same router answering twice
        out.push_back(&h);
    }
    return out;
}

inline bool has_address_loop(const std::vector<const RawHop*>& slots) {
    std::unordered_set<std::uint32_t> seen;
    for (const auto* s : slots)
        for (auto ip : s->ips)
            if (!seen.insert(ip.v).second) return true;
    return false;
}

}  // namespace detail

/// Drops looping and multi-answer traces; timeouts and unreached destinations
/// are kept but flagged. Loop outranks multi-answer when both apply.
inline std::vector<CleanTrace> cleanse_traces(const std::vector<RawTrace>& raw,
                                              TraceCleanseReport* report = nullptr) {
    TraceCleanseReport rep;
    rep.raw_total = raw.size();
    std::vector<CleanTrace> out;
    for (const auto& t : raw) {
        auto slots = detail::collapse_adjacent(t);
        if (detail::has_address_loop(slots)) {
            ++rep.discarded_loop;
            continue;
        }
        if (std::any_of(slots.begin(), slots.end(),
                        [](const RawHop* h) { return h->ips.size() > 1; })) {
            ++rep.discarded_mul_resp;
            continue;
        }
        CleanTrace c;
        c.timestamp = t.timestamp;
        c.src = t.src;
        c.dst = t.dst;
        for (const auto* s : slots)
            c.hops.push_back(s->ips.empty() ? CleanHop::timeout() : CleanHop::at(s->ips[0]));
        c.has_unresponsive = std::any_of(c.hops.begin(), c.hops.end(),
                                         [](const CleanHop& h) { return !h.responsive; });
        c.reached = c.hops.back().responsive && c.hops.back().ip == c.dst;
        if (c.has_unresponsive) ++rep.flagged_unresponsive;
        if (!c.reached) ++rep.flagged_incomplete;
        out.push_back(std::move(c));
    }
    rep.retained = out.size();
    if (report) *report = rep;
    return out;
}

inline std::string format_traces(const std::vector<CleanTrace>& traces) {
    std::string out;
    for (const auto& t : traces) {
        out += std::to_string(t.timestamp);
        out += '|';
        out += format_ipv4(t.src);
        out += '|';
        out += format_ipv4(t.dst);
        out += '|';
        for (std::size_t i = 0; i < t.hops.size(); ++i) {
            if (i) out += ',';
            out += t.hops[i].responsive ? format_ipv4(t.hops[i].ip) : "*";
        }
        out += '\n';
    }
    return out;
}

struct BgpCleanseReport {
    std::size_t raw_total = 0;
    std::size_t discarded_as_set = 0;
    std::size_t discarded_private = 0;
    std::size_t discarded_loop = 0;
    std::size_t discarded_empty = 0;
    std::size_t modified_dup_collapse = 0;  // entries with prepending removed
    std::size_t modified_ixp_removed = 0;   // entries with exchange hops removed
    std::size_t retained = 0;
};

/// AS-path hygiene for routing entries: set-style hops, reserved ASNs and
/// AS-level loops discard the entry; prepending is collapsed and
/// exchange-operated hops are cut out. Discard checks run in that order.
inline std::vector<RibEntry> cleanse_bgp(const std::vector<RibEntry>& raw, const IxpDb* ixp,
                                         BgpCleanseReport* report = nullptr) {
    BgpCleanseReport rep;
    rep.raw_total = raw.size();
    std::vector<RibEntry> out;
    for (const auto& e : raw) {
        if (std::find(e.as_path.begin(), e.as_path.end(), kAsSetMarker) != e.as_path.end()) {
            ++rep.discarded_as_set;
            continue;
        }
        if (std::any_of(e.as_path.begin(), e.as_path.end(), is_private_asn)) {
            ++rep.discarded_private;
            continue;
        }
        RibEntry c = e;
        c.as_path.clear();
        for (Asn a : e.as_path)
            if (c.as_path.empty() || c.as_path.back() != a) c.as_path.push_back(a);
        if (c.as_path.size() != e.as_path.size()) ++rep.modified_dup_collapse;
        if (ixp) {
            std::vector<Asn> kept;
            for (Asn a : c.as_path)
                if (!ixp->is_ixp_asn(a) && (kept.empty() || kept.back() != a)) kept.push_back(a);
            if (kept.size() != c.as_path.size()) ++rep.modified_ixp_removed;
            c.as_path = std::move(kept);
        }
        if (c.as_path.empty()) {
            ++rep.discarded_empty;
            continue;
        }
        std::unordered_set<Asn> seen(c.as_path.begin(), c.as_path.end());
        if (seen.size() != c.as_path.size()) {
            ++rep.discarded_loop;
            continue;
        }
        out.push_back(std::move(c));
    }
    rep.retained = out.size();
    if (report) *report = rep;
    return out;
}

/// A forwarding path joined with the covering routing entry from the
/// co-located collector at the nearest instant.
struct PathPair {
    std::uint32_t id = 0;
    std::string vp;    // vantage pair: collector + probe host sharing a network
    CleanTrace trace;  // observed forwarding path
    RibEntry route;    // selected control-plane path; first hop is the local AS
};

struct PairReport {
    std::size_t input = 0;
    std::size_t discarded_no_route = 0;  // destination outside every announced prefix
    std::size_t paired = 0;
    std::size_t discarded_second_hop = 0;  // filled by the divergence filter
};

/// Joins each trace with the longest-prefix routing entry for its destination
/// at the trace's time; traces whose destination no announced prefix covers
/// are dropped and counted.
inline std::vector<PathPair> pair_paths(const std::vector<CleanTrace>& traces, const RibTable& rib,
                                        const std::string& vp, PairReport* report = nullptr,
                                        std::uint32_t first_id = 0) {
    PairReport rep;
    rep.input = traces.size();
    std::vector<PathPair> out;
    for (const auto& t : traces) {
        auto r = rib.lpm(t.dst, t.timestamp);
        if (!r.entry) {
            ++rep.discarded_no_route;
            continue;
        }
        PathPair p;
        p.id = first_id + static_cast<std::uint32_t>(out.size());
        p.vp = vp;
        p.trace = t;
        p.route = *r.entry;
        out.push_back(std::move(p));
    }
    rep.paired = out.size();
    if (report) *report = rep;
    return out;
}

inline std::string format_pairs(const std::vector<PathPair>& pairs) {
    std::string out;
    for (const auto& p : pairs) {
        out += std::to_string(p.id);
        out += '|';
        out += p.vp;
        out += '|';
        out += std::to_string(p.route.timestamp);
        out += '|';
        out += format_prefix(p.route.prefix);
        out += '|';
        for (std::size_t i = 0; i < p.route.as_path.size(); ++i) {
            if (i) out += ' ';
            out += std::to_string(p.route.as_path[i]);
        }
        out += '|';
        out += std::to_string(p.trace.timestamp);
        out += '|';
        out += format_ipv4(p.trace.src);
        out += '|';
        out += format_ipv4(p.trace.dst);
        out += '|';
        for (std::size_t i = 0; i < p.trace.hops.size(); ++i) {
            if (i) out += ',';
            out += p.trace.hops[i].responsive ? format_ipv4(p.trace.hops[i].ip) : "*";
        }
        out += '\n';
    }
    return out;
}

inline std::vector<PathPair> load_pairs(const std::string& path) {
    std::vector<PathPair> out;
    for_each_data_line(path, [&](std::size_t lineno, std::string_view line) {
        auto f = split(line, '|');
        if (f.size() != 9) throw ParseError(path, lineno, "expected 9 pair fields");
        PathPair p;
        if (!parse_uint(trim(f[0]), p.id)) throw ParseError(path, lineno, "bad id");
        p.vp = std::string(trim(f[1]));
        if (!parse_int(trim(f[2]), p.route.timestamp))
            throw ParseError(path, lineno, "bad route timestamp");
        auto pre = parse_prefix(trim(f[3]));
        if (!pre) throw ParseError(path, lineno, "bad prefix");
        p.route.prefix = *pre;
        for (auto tok : split(trim(f[4]), ' ')) {
            Asn a = 0;
            if (!parse_uint(trim(tok), a)) throw ParseError(path, lineno, "bad AS path token");
            p.route.as_path.push_back(a);
        }
        if (p.route.as_path.empty()) throw ParseError(path, lineno, "empty AS path");
        if (!parse_int(trim(f[5]), p.trace.timestamp))
            throw ParseError(path, lineno, "bad trace timestamp");
        auto src = parse_ipv4(trim(f[6])), dst = parse_ipv4(trim(f[7]));
        if (!src || !dst) throw ParseError(path, lineno, "bad endpoint address");
        p.trace.src = *src;
        p.trace.dst = *dst;
        for (auto hop : split(trim(f[8]), ',')) {
            hop = trim(hop);
            if (hop == "*") {
                p.trace.hops.push_back(CleanHop::timeout());
            } else {
                auto ip = parse_ipv4(hop);
                if (!ip) throw ParseError(path, lineno, "bad hop address");
                p.trace.hops.push_back(CleanHop::at(*ip));
            }
        }
        if (p.trace.hops.empty()) throw ParseError(path, lineno, "empty hop list");
        p.trace.has_unresponsive =
            std::any_of(p.trace.hops.begin(), p.trace.hops.end(),
                        [](const CleanHop& h) { return !h.responsive; });
        p.trace.reached =
            p.trace.hops.back().responsive && p.trace.hops.back().ip == p.trace.dst;
        out.push_back(std::move(p));
    });
    return out;
}

}  // namespace cdmatch
