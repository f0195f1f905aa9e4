#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "cdmatch/compare.hpp"
#include "cdmatch/registry.hpp"
#include "cdmatch/rib.hpp"
#include "cdmatch/vote.hpp"

namespace cdmatch {

// ---------------------------------------------------------------------------
// Screening contradicted segments for ones the mapping alone cannot explain.

enum class RealRule : std::uint8_t {
    MoreThanTwoHops,
    VoteMajority,
    MultiPrefixCorroboration,
};

inline const char* real_rule_name(RealRule r) {
    switch (r) {
        case RealRule::MoreThanTwoHops: return "more_than_two_hops";
        case RealRule::VoteMajority: return "vote_majority";
        default: return "multi_prefix_corroboration";
    }
}

struct MatchTally {
    std::size_t matched = 0;
    std::size_t mismatched = 0;

    bool operator==(const MatchTally&) const = default;
};

/// Per-address agreement counts keyed by the raw IPv4 value.
using SegTallyMap = std::map<std::uint32_t, MatchTally>;

/// Counts, once per pair, whether each hop address sat strictly inside a
/// contradicted stretch. Hops on agreed stretches and on the shared anchor
/// positions count toward the matched side.
inline SegTallyMap collect_segment_tallies(
    const std::vector<PathPair>& pairs,
    const std::vector<std::optional<PairComparison>>& cmps) {
    SegTallyMap out;
    for (std::size_t i = 0; i < pairs.size() && i < cmps.size(); ++i) {
        if (!cmps[i]) continue;
        const PairComparison& cmp = *cmps[i];
        const auto& hops = pairs[i].trace.hops;
        std::map<std::uint32_t, bool> inside;
        for (std::size_t k = 0; k < hops.size() && k < cmp.d.hop_pos.size(); ++k) {
            if (!hops[k].responsive) continue;
            bool hit = false;
            if (const auto* s = detail::enclosing_segment(cmp.segs, cmp.d.hop_pos[k]))
                hit = s->label == SegLabel::Mismatch;
            auto [it, fresh] = inside.emplace(hops[k].ip.v, hit);
            if (!fresh) it->second = it->second || hit;
        }
        for (const auto& [ip, hit] : inside) {
            if (hit) ++out[ip].mismatched;
            else ++out[ip].matched;
        }
    }
    return out;
}

struct RealMismatchVerdict {
    std::size_t segment = 0;
    bool is_real = false;
    std::vector<RealRule> rules;

    bool operator==(const RealMismatchVerdict&) const = default;
};

/// Decides whether one contradicted segment reflects forwarding rather than a
/// wrong address mapping. Any of three observations settles it: the stretch
/// holds more than two resolved hops; some interior address agrees with routes
/// across the rest of the corpus; or one interior position is seen through
/// addresses from two announced blocks.
inline RealMismatchVerdict identify_real_mismatch(const PathPair& p, const PairComparison& cmp,
                                                  std::size_t seg_index, const SegTallyMap& tally,
                                                  const RibTable& rib) {
    RealMismatchVerdict v;
    v.segment = seg_index;
    const SegmentPair& s = cmp.segs.at(seg_index);
    if (s.label != SegLabel::Mismatch) return v;

    int resolved = 0;
    for (int q = s.d_lo + 1; q < s.d_hi; ++q)
        if (cmp.d.path[q].kind == AsHop::Concrete) ++resolved;
    if (resolved > 2) v.rules.push_back(RealRule::MoreThanTwoHops);

    std::map<int, std::set<std::uint32_t>> at_pos;
    for (std::size_t k = 0; k < p.trace.hops.size() && k < cmp.d.hop_pos.size(); ++k) {
        if (!p.trace.hops[k].responsive) continue;
        int pos = cmp.d.hop_pos[k];
        if (pos <= s.d_lo || pos >= s.d_hi) continue;
        at_pos[pos].insert(p.trace.hops[k].ip.v);
    }

    bool majority = false;
    for (const auto& [pos, ips] : at_pos) {
        if (cmp.d.path[pos].kind != AsHop::Concrete) continue;
        for (std::uint32_t ip : ips) {
            auto it = tally.find(ip);
            if (it != tally.end() && it->second.matched > it->second.mismatched) majority = true;
        }
    }
    if (majority) v.rules.push_back(RealRule::VoteMajority);

    bool corroborated = false;
    for (const auto& [pos, ips] : at_pos) {
        std::set<Prefix> blocks;
        for (std::uint32_t ip : ips) {
            auto r = rib.lpm(Ipv4{ip}, p.trace.timestamp);
            blocks.insert(r.entry ? r.entry->prefix : Prefix(Ipv4{ip}, 32));
        }
        if (blocks.size() >= 2) corroborated = true;
    }
    if (corroborated) v.rules.push_back(RealRule::MultiPrefixCorroboration);

    v.is_real = !v.rules.empty();
    return v;
}

/// One verdict per segment, in segment order.
inline std::vector<RealMismatchVerdict> real_mismatch_verdicts(const PathPair& p,
                                                               const PairComparison& cmp,
                                                               const SegTallyMap& tally,
                                                               const RibTable& rib) {
    std::vector<RealMismatchVerdict> out;
    out.reserve(cmp.segs.size());
    for (std::size_t i = 0; i < cmp.segs.size(); ++i)
        out.push_back(identify_real_mismatch(p, cmp, i, tally, rib));
    return out;
}

// ---------------------------------------------------------------------------
// Shape of the disagreement across the whole pair.

enum class MismatchPattern : std::uint8_t { Detouring, Branching, Protruding, Other };

inline const char* pattern_name(MismatchPattern p) {
    switch (p) {
        case MismatchPattern::Detouring: return "detouring";
        case MismatchPattern::Branching: return "branching";
        case MismatchPattern::Protruding: return "protruding";
        default: return "other";
    }
}

/// Detouring: forwarding leaves the announced path and rejoins it. Branching:
/// the final stretch disagrees while the announced side still has hops left.
/// Protruding: forwarding keeps going past a fully agreed announced path.
/// Pairs showing more than one of these shapes land in Other.
inline MismatchPattern classify_pattern(const PairComparison& cmp) {
    bool detour = false, branch = false, protrude = false;
    for (const SegmentPair& s : cmp.segs) {
        if (s.label != SegLabel::Mismatch) continue;
        if (!s.last) detour = true;
        else if (s.c_hi - s.c_lo <= 1) protrude = true;
        else branch = true;
    }
    if (detour && !branch && !protrude) return MismatchPattern::Detouring;
    if (branch && !detour && !protrude) return MismatchPattern::Branching;
    if (protrude && !detour && !branch) return MismatchPattern::Protruding;
    if (!detour && !branch && !protrude)
        throw std::invalid_argument("pair has no contradicted segment");
    return MismatchPattern::Other;
}

// ---------------------------------------------------------------------------
// Sub-prefix takeovers that stay invisible from the local vantage.

class MissingRoaDb : public std::runtime_error {
public:
    MissingRoaDb() : std::runtime_error("route-origin authorization data is required") {}
};

class MissingAltVpRibs : public std::runtime_error {
public:
    MissingAltVpRibs() : std::runtime_error("route tables from other vantages are required") {}
};

struct HhCandidate {
    Prefix parent;
    Asn victim = 0;
    Prefix sub;
    Asn hijacker = 0;
    std::vector<std::uint32_t> evidence;

    bool operator==(const HhCandidate&) const = default;
};

/// How many pairs survive each screening stage, in order.
struct HhFunnel {
    std::size_t input = 0;
    std::size_t avoids_origin = 0;
    std::size_t subprefix_seen = 0;
    std::size_t roa_mismatch = 0;
    std::size_t not_sibling = 0;

    bool operator==(const HhFunnel&) const = default;
};

struct HhDetection {
    std::vector<HhCandidate> candidates;
    HhFunnel funnel;
};

/// Flags pairs whose forwarding never touches the announced origin yet ends in
/// an AS that, from some other vantage, originates a strictly finer prefix
/// covering the destination. The finer announcement must lack authorization
/// while the local one holds it, and the two ASes must not share an operator.
/// Candidates aggregate evidence per (parent, victim, sub, hijacker) tuple.
inline HhDetection detect_hidden_hijack(const std::vector<PathPair>& pairs,
                                        const std::vector<std::optional<PairComparison>>& cmps,
                                        const std::vector<const RibTable*>& alt_ribs,
                                        const RoaDb* roa, const RelDb& rels) {
    if (alt_ribs.empty()) throw MissingAltVpRibs();
    if (!roa) throw MissingRoaDb();

    HhDetection out;
    std::map<std::tuple<Prefix, Asn, Prefix, Asn>, std::set<std::uint32_t>> found;
    for (std::size_t i = 0; i < pairs.size() && i < cmps.size(); ++i) {
        if (!cmps[i]) continue;
        ++out.funnel.input;
        const PairComparison& cmp = *cmps[i];
        const PathPair& p = pairs[i];
        if (p.route.as_path.empty()) continue;
        Asn victim = p.route.origin();

        bool touches = false;
        Asn last = 0;
        for (const AsHop& h : cmp.d.path) {
            if (h.kind != AsHop::Concrete) continue;
            if (h.asn == victim) touches = true;
            last = h.asn;
        }
        if (touches || last == 0) continue;
        ++out.funnel.avoids_origin;

        const Prefix parent = p.route.prefix;
        std::optional<Prefix> sub;
        for (const RibTable* rt : alt_ribs) {
            if (sub) break;
            rt->for_each_entry([&](const RibEntry& e) {
                if (sub) return;
                if (e.as_path.empty() || e.as_path.back() != last) return;
                if (e.prefix.len <= parent.len || !parent.covers(e.prefix)) return;
                if (!e.prefix.contains(p.trace.dst)) return;
                sub = e.prefix;
            });
        }
        if (!sub) continue;
        ++out.funnel.subprefix_seen;

        if (roa->origin_state(parent, victim) != RoaState::Valid) continue;
        if (roa->origin_state(*sub, last) == RoaState::Valid) continue;
        ++out.funnel.roa_mismatch;

        if (rels.lookup(victim, last) == Rel::Sibling) continue;
        ++out.funnel.not_sibling;
        found[{parent, victim, *sub, last}].insert(p.id);
    }

    for (const auto& [key, ids] : found) {
        HhCandidate c;
        c.parent = std::get<0>(key);
        c.victim = std::get<1>(key);
        c.sub = std::get<2>(key);
        c.hijacker = std::get<3>(key);
        c.evidence.assign(ids.begin(), ids.end());
        out.candidates.push_back(std::move(c));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Announced links contradicted by the forwarding interior between them.

enum class LinkStatus : std::uint8_t { Suspicious, PassiveCleared, NeedsProbe };

inline const char* link_status_name(LinkStatus s) {
    switch (s) {
        case LinkStatus::Suspicious: return "suspicious";
        case LinkStatus::PassiveCleared: return "passive_cleared";
        default: return "needs_probe";
    }
}

struct SuspiciousLink {
    Asn a = 0;
    Asn b = 0;
    std::vector<std::uint32_t> evidence;
    LinkStatus status = LinkStatus::Suspicious;

    bool operator==(const SuspiciousLink&) const = default;
};

/// Picks out flagged segments where the announced side is a bare two-AS link
/// yet forwarding resolves at least one other AS between the endpoints. Links
/// are undirected; endpoints are stored low to high.
inline std::vector<SuspiciousLink> detect_link_detour(
    const std::vector<PathPair>& pairs,
    const std::vector<std::optional<PairComparison>>& cmps,
    const std::vector<std::vector<RealMismatchVerdict>>& verdicts) {
    std::map<std::pair<Asn, Asn>, std::set<std::uint32_t>> found;
    std::size_t n = std::min(pairs.size(), std::min(cmps.size(), verdicts.size()));
    for (std::size_t i = 0; i < n; ++i) {
        if (!cmps[i]) continue;
        const PairComparison& cmp = *cmps[i];
        for (const RealMismatchVerdict& v : verdicts[i]) {
            if (!v.is_real || v.segment >= cmp.segs.size()) continue;
            const SegmentPair& s = cmp.segs[v.segment];
            if (s.c_lo < 0 || s.c_hi != s.c_lo + 1) continue;
            const AsHop& u = cmp.c[s.c_lo];
            const AsHop& w = cmp.c[s.c_hi];
            if (u.kind != AsHop::Concrete || w.kind != AsHop::Concrete) continue;
            if (u.asn == w.asn) continue;
            int inner = 0;
            for (int q = s.d_lo + 1; q < s.d_hi; ++q)
                if (cmp.d.path[q].kind == AsHop::Concrete) ++inner;
            if (inner == 0) continue;
            found[{std::min(u.asn, w.asn), std::max(u.asn, w.asn)}].insert(pairs[i].id);
        }
    }
    std::vector<SuspiciousLink> out;
    for (const auto& [key, ids] : found) {
        SuspiciousLink l;
        l.a = key.first;
        l.b = key.second;
        l.evidence.assign(ids.begin(), ids.end());
        out.push_back(std::move(l));
    }
    return out;
}

/// Every AS adjacency actually traversed by the given traces. Hops that stay
/// unresolved (or sit on exchange fabric) break the adjacency; links come out
/// undirected with endpoints low to high.
inline std::set<std::pair<Asn, Asn>> dataplane_links(const std::vector<CleanTrace>& traces,
                                                     const Mapper& m, const IxpDb& ixp) {
    std::set<std::pair<Asn, Asn>> out;
    for (const CleanTrace& t : traces) {
        std::optional<Asn> prev;
        for (const CleanHop& h : t.hops) {
            std::optional<Asn> cur;
            if (h.responsive) {
                auto a = m.map(h.ip, t.timestamp);
                if (a.kind == MapAnswer::Concrete && !ixp.is_ixp_asn(a.asn)) cur = a.asn;
            }
            if (prev && cur && *prev != *cur)
                out.insert({std::min(*prev, *cur), std::max(*prev, *cur)});
            prev = cur;
        }
    }
    return out;
}

/// A link seen in actual forwarding elsewhere is presumed fine; the rest need
/// active confirmation.
inline void passive_filter(std::vector<SuspiciousLink>& links,
                           const std::set<std::pair<Asn, Asn>>& observed) {
    for (SuspiciousLink& l : links) {
        auto key = std::make_pair(std::min(l.a, l.b), std::max(l.a, l.b));
        l.status = observed.count(key) ? LinkStatus::PassiveCleared : LinkStatus::NeedsProbe;
    }
}

struct ProbePlanRow {
    std::string probe;
    Asn src = 0;
    Asn dst = 0;
    std::string reason;

    bool operator==(const ProbePlanRow&) const = default;
};

/// Measurement plan for links still needing confirmation. A probe inside
/// either endpoint AS targets the other endpoint. Failing that, any probe in
/// an AS carrying the link on an announced path targets whichever endpoint
/// lies farther from it along that path. With several probes in one AS the
/// first in name order serves. Links nobody can reach get a placeholder row.
inline std::vector<ProbePlanRow> emit_probe_plan(
    const std::vector<SuspiciousLink>& links,
    const std::map<Asn, std::vector<std::string>>& probes,
    const std::vector<const RibTable*>& ribs) {
    auto probe_name = [&](Asn a) -> const std::string* {
        auto it = probes.find(a);
        if (it == probes.end() || it->second.empty()) return nullptr;
        return &*std::min_element(it->second.begin(), it->second.end());
    };

    std::vector<ProbePlanRow> out;
    for (const SuspiciousLink& l : links) {
        if (l.status != LinkStatus::NeedsProbe) continue;
        Asn lo = std::min(l.a, l.b), hi = std::max(l.a, l.b);
        std::vector<ProbePlanRow> rows;
        for (Asn src : {lo, hi})
            if (const std::string* name = probe_name(src))
                rows.push_back({*name, src, src == lo ? hi : lo, "endpoint"});

        if (rows.empty()) {
            std::set<std::pair<Asn, Asn>> seen;
            for (const RibTable* rt : ribs)
                rt->for_each_entry([&](const RibEntry& e) {
                    const auto& path = e.as_path;
                    for (std::size_t j = 0; j + 1 < path.size(); ++j) {
                        Asn u = path[j], v = path[j + 1];
                        if (!((u == lo && v == hi) || (u == hi && v == lo))) continue;
                        for (std::size_t k = 0; k < path.size(); ++k) {
                            Asn carrier = path[k];
                            if (carrier == lo || carrier == hi) continue;
                            const std::string* name = probe_name(carrier);
                            if (!name) continue;
                            std::size_t du = k > j ? k - j : j - k;
                            std::size_t dv = k > j + 1 ? k - j - 1 : j + 1 - k;
                            Asn target = du > dv ? u : v;
                            if (seen.insert({carrier, target}).second)
                                rows.push_back({*name, carrier, target, "path"});
                        }
                    }
                });
        }
        if (rows.empty()) rows.push_back({"-", l.a, l.b, "unverifiable"});
        std::sort(rows.begin(), rows.end(), [](const ProbePlanRow& x, const ProbePlanRow& y) {
            return std::tie(x.src, x.dst, x.probe) < std::tie(y.src, y.dst, y.probe);
        });
        out.insert(out.end(), rows.begin(), rows.end());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Report rows. Evidence ids join with ';'.

namespace detail {

inline std::string join_ids(const std::vector<std::uint32_t>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ';';
        out += std::to_string(ids[i]);
    }
    return out;
}

}  // namespace detail

inline std::string format_hh_report(const HhDetection& d) {
    std::string out = "f_p,V,f_s,H,evidence_pairs\n";
    for (const HhCandidate& c : d.candidates) {
        out += format_prefix(c.parent);
        out += ',';
        out += std::to_string(c.victim);
        out += ',';
        out += format_prefix(c.sub);
        out += ',';
        out += std::to_string(c.hijacker);
        out += ',';
        out += detail::join_ids(c.evidence);
        out += '\n';
    }
    return out;
}

inline std::string format_link_report(const std::vector<SuspiciousLink>& links) {
    std::string out = "asx,asy,status,evidence\n";
    for (const SuspiciousLink& l : links) {
        out += std::to_string(l.a);
        out += ',';
        out += std::to_string(l.b);
        out += ',';
        out += link_status_name(l.status);
        out += ',';
        out += detail::join_ids(l.evidence);
        out += '\n';
    }
    return out;
}

inline std::string format_probe_plan(const std::vector<ProbePlanRow>& plan) {
    std::string out = "probe_id,src_asn,dst_asn,reason\n";
    for (const ProbePlanRow& r : plan) {
        out += r.probe;
        out += ',';
        out += std::to_string(r.src);
        out += ',';
        out += std::to_string(r.dst);
        out += ',';
        out += r.reason;
        out += '\n';
    }
    return out;
}

}  // namespace cdmatch
