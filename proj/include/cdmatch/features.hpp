#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "cdmatch/ingest.hpp"
#include "cdmatch/registry.hpp"
#include "cdmatch/rib.hpp"

namespace cdmatch {

/// How an AS triple behaves under export rules: a route may climb customer
/// links, cross at most one peering link, then descend. Two shapes that break
/// this (peer-peer twice, and descending onto a peer) are common enough in
/// practice to deserve their own bucket.
enum class TripleShape : std::uint8_t { ValleyFree, PartValleyFree, NonValleyFree };

inline const char* triple_shape_name(TripleShape s) {
    switch (s) {
        case TripleShape::ValleyFree: return "valley_free";
        case TripleShape::PartValleyFree: return "part_valley_free";
        case TripleShape::NonValleyFree: return "non_valley_free";
    }
    return "?";
}

/// Classifies the triple x-s-y from the two link relationships. Sibling links
/// are transparent. Unresolvable links land in the non-free bucket; callers
/// that want them excluded must check the lookups first.
inline TripleShape classify_triple(const RelDb& rels, Asn x, Asn s, Asn y) {
    Rel a = rels.lookup(x, s);
    Rel b = rels.lookup(s, y);
    if (a == Rel::None || b == Rel::None) return TripleShape::NonValleyFree;
    if (a == Rel::Sibling || b == Rel::Sibling) return TripleShape::ValleyFree;
    if (a == Rel::C2P) return TripleShape::ValleyFree;
    if (a == Rel::P2P || a == Rel::P2C) {
        if (b == Rel::P2C) return TripleShape::ValleyFree;
        if (b == Rel::P2P) return TripleShape::PartValleyFree;
    }
    return TripleShape::NonValleyFree;
}

/// Read-only side data every scoring step needs.
struct Registries {
    const RibTable& rib;
    const RelDb& rels;
    const IxpDb& ixp;
};

inline constexpr std::size_t kFeatureCount = 21;

/// Path-context profile of one (address, AS) assignment.
///
/// Every rate comes in two flavors: _rel counts each distinct pattern once
/// (distinct announced prefixes, distinct neighbor ASes, distinct triples),
/// _abs counts every path occurrence. The categorical bdr_rib_rel slot encodes
/// how the assigned AS relates to whoever announces the address:
/// 0 same, 1 sibling, 2 provider, 3 customer, 4 peer, 5 unrelated,
/// 6 exchange-related, 7 unannounced.
struct FeatureVector {
    double bdr_rib_rel = 0.0;
    double prev_same_as_rel = 0.0, prev_same_as_abs = 0.0;
    double succ_same_as_rel = 0.0, succ_same_as_abs = 0.0;
    double succ_ip_uncertain_rel = 0.0, succ_ip_uncertain_abs = 0.0;
    double prev_as_uncertain_rel = 0.0, prev_as_uncertain_abs = 0.0;
    double succ_as_uncertain_rel = 0.0, succ_as_uncertain_abs = 0.0;
    double valley_normal_rel = 0.0, valley_normal_abs = 0.0;
    double valley_semi_rel = 0.0, valley_semi_abs = 0.0;
    double valley_abnormal_rel = 0.0, valley_abnormal_abs = 0.0;
    double prev_rel_unknown_rel = 0.0, prev_rel_unknown_abs = 0.0;
    double succ_rel_unknown_rel = 0.0, succ_rel_unknown_abs = 0.0;

    std::array<double, kFeatureCount> to_array() const {
        return {bdr_rib_rel,
                prev_same_as_rel,    prev_same_as_abs,    succ_same_as_rel,
                succ_same_as_abs,    succ_ip_uncertain_rel, succ_ip_uncertain_abs,
                prev_as_uncertain_rel, prev_as_uncertain_abs, succ_as_uncertain_rel,
                succ_as_uncertain_abs, valley_normal_rel,  valley_normal_abs,
                valley_semi_rel,     valley_semi_abs,     valley_abnormal_rel,
                valley_abnormal_abs, prev_rel_unknown_rel, prev_rel_unknown_abs,
                succ_rel_unknown_rel, succ_rel_unknown_abs};
    }

    static FeatureVector from_array(const std::array<double, kFeatureCount>& a) {
        FeatureVector f;
        f.bdr_rib_rel = a[0];
        f.prev_same_as_rel = a[1];
        f.prev_same_as_abs = a[2];
        f.succ_same_as_rel = a[3];
        f.succ_same_as_abs = a[4];
        f.succ_ip_uncertain_rel = a[5];
        f.succ_ip_uncertain_abs = a[6];
        f.prev_as_uncertain_rel = a[7];
        f.prev_as_uncertain_abs = a[8];
        f.succ_as_uncertain_rel = a[9];
        f.succ_as_uncertain_abs = a[10];
        f.valley_normal_rel = a[11];
        f.valley_normal_abs = a[12];
        f.valley_semi_rel = a[13];
        f.valley_semi_abs = a[14];
        f.valley_abnormal_rel = a[15];
        f.valley_abnormal_abs = a[16];
        f.prev_rel_unknown_rel = a[17];
        f.prev_rel_unknown_abs = a[18];
        f.succ_rel_unknown_rel = a[19];
        f.succ_rel_unknown_abs = a[20];
        return f;
    }

    static const std::array<const char*, kFeatureCount>& names() {
        static const std::array<const char*, kFeatureCount> n = {
            "bdr_rib_rel",
            "prev_same_as_rel",     "prev_same_as_abs",
            "succ_same_as_rel",     "succ_same_as_abs",
            "succ_ip_uncertain_rel", "succ_ip_uncertain_abs",
            "prev_as_uncertain_rel", "prev_as_uncertain_abs",
            "succ_as_uncertain_rel", "succ_as_uncertain_abs",
            "valley_normal_rel",    "valley_normal_abs",
            "valley_semi_rel",      "valley_semi_abs",
            "valley_abnormal_rel",  "valley_abnormal_abs",
            "prev_rel_unknown_rel", "prev_rel_unknown_abs",
            "succ_rel_unknown_rel", "succ_rel_unknown_abs",
        };
        return n;
    }
};

namespace detail {

// Pattern keys for the distinct-count variants. Announced prefixes, addresses,
// neighbor ASes and the wildcard/none sentinels live in disjoint key ranges.
inline std::uint64_t prefix_pattern(const RibTable& rib, Ipv4 ip, Timestamp at) {
    auto r = rib.lpm(ip, at);
    if (!r.entry) return std::uint64_t(ip.v);
    const Prefix& p = r.entry->prefix;
    return (1ull << 62) | (std::uint64_t(p.net) << 6) | p.len;
}

inline constexpr std::uint64_t kWildPattern = 1ull << 63;
inline constexpr std::uint64_t kNonePattern = (1ull << 63) | 1;

struct RateAcc {
    std::size_t hit = 0, seen = 0;
    std::map<std::uint64_t, bool> patterns;

    void add(std::uint64_t key, bool flag) {
        seen += 1;
        hit += flag ? 1 : 0;
        auto [it, fresh] = patterns.emplace(key, flag);
        if (!fresh) it->second = it->second || flag;
    }
    double abs_rate() const { return seen ? double(hit) / double(seen) : 0.0; }
    double rel_rate() const {
        if (patterns.empty()) return 0.0;
        std::size_t f = 0;
        for (const auto& [k, b] : patterns) f += b ? 1 : 0;
        return double(f) / double(patterns.size());
    }
};

// Working copy of a trace: hop list with the assignment under test substituted
// for the subject, and truncated paths extended by a timeout plus the probed
// destination so the last observed hop has both neighbors.
struct SlotView {
    std::vector<bool> responsive;
    std::vector<Ipv4> addr;
    std::vector<std::optional<Asn>> owner;

    std::size_t size() const { return responsive.size(); }
};

inline SlotView expand_trace(const CleanTrace& t, Ipv4 subject, std::optional<Asn> forced,
                             const Mapper& others) {
    SlotView v;
    auto push = [&](bool resp, Ipv4 ip) {
        v.responsive.push_back(resp);
        v.addr.push_back(ip);
        if (!resp) {
            v.owner.push_back(std::nullopt);
            return;
        }
        if (forced && ip == subject) {
            v.owner.push_back(*forced);
            return;
        }
        MapAnswer a = others.map(ip, t.timestamp);
        v.owner.push_back(a.kind == MapAnswer::Concrete ? std::optional<Asn>(a.asn)
                                                        : std::nullopt);
    };
    for (const auto& h : t.hops) push(h.responsive, h.ip);
    if (!t.reached) {
        push(false, Ipv4{0});
        push(true, t.dst);
    }
    return v;
}

struct Run {
    Asn as = 0;
    std::size_t lo = 0, hi = 0;
};

// Condensed AS path plus, per boundary, whether an unresolved slot sits in the
// gap. gap[i] flags the stretch before run i; gap[runs] the path tail.
struct Condensed {
    std::vector<Run> runs;
    std::vector<bool> gap;
};

inline Condensed condense(const SlotView& v) {
    Condensed c;
    bool pending = false;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v.owner[i]) {
            pending = true;
            continue;
        }
        Asn a = *v.owner[i];
        if (!c.runs.empty() && c.runs.back().as == a) {
            c.runs.back().hi = i;
        } else {
            c.runs.push_back({a, i, i});
            c.gap.push_back(pending);
        }
        pending = false;
    }
    c.gap.push_back(pending);
    return c;
}

inline std::size_t run_of(const Condensed& c, std::size_t slot) {
    for (std::size_t i = 0; i < c.runs.size(); ++i)
        if (c.runs[i].lo <= slot && slot <= c.runs[i].hi) return i;
    return c.runs.size();
}

}  // namespace detail

/// Categorical slot: how `assigned` relates to the AS announcing `ip`.
inline double rib_relation_code(Ipv4 ip, Asn assigned, Timestamp at, const Registries& reg) {
    if (reg.ixp.covers_ip(ip) || reg.ixp.is_ixp_asn(assigned)) return 6.0;
    auto r = reg.rib.lpm(ip, at);
    if (!r.entry || r.multi_origin) return 7.0;
    Asn origin = r.entry->origin();
    if (reg.ixp.is_ixp_asn(origin)) return 6.0;
    if (origin == assigned) return 0.0;
    switch (reg.rels.lookup(assigned, origin)) {
        case Rel::Sibling: return 1.0;
        case Rel::P2C: return 2.0;
        case Rel::C2P: return 3.0;
        case Rel::P2P: return 4.0;
        default: return 5.0;
    }
}

/// Profiles how well assigning `ip` to `assigned` fits the corpus, with every
/// other hop resolved through `others`.
inline FeatureVector extract_features(Ipv4 ip, Asn assigned,
                                      const std::vector<CleanTrace>& corpus,
                                      const Mapper& others, const Registries& reg) {
    using namespace detail;

    RateAcc prev_same, succ_same, succ_ip_unc, prev_as_unc, succ_as_unc;
    RateAcc prev_unknown, succ_unknown;
    std::map<std::pair<Asn, Asn>, TripleShape> contexts;
    std::array<std::size_t, 3> valley_occ{};
    Timestamp latest = 0;
    bool seen_any = false;

    for (const auto& t : corpus) {
        bool holds = false;
        for (const auto& h : t.hops)
            if (h.responsive && h.ip == ip) holds = true;
        if (!holds) continue;
        if (!seen_any || t.timestamp > latest) latest = t.timestamp;
        seen_any = true;

        SlotView view = expand_trace(t, ip, assigned, others);
        Condensed cond = condense(view);
        std::uint64_t own_prefix = prefix_pattern(reg.rib, ip, t.timestamp);

        for (std::size_t k = 0; k < view.size(); ++k) {
            if (!view.responsive[k] || !(view.addr[k] == ip)) continue;

            // Address-level neighbors: nearest resolved hop on each side.
            std::optional<std::size_t> pred, succ;
            for (std::size_t j = k; j-- > 0;)
                if (view.owner[j]) {
                    pred = j;
                    break;
                }
            for (std::size_t j = k + 1; j < view.size(); ++j)
                if (view.owner[j]) {
                    succ = j;
                    break;
                }
            if (pred) {
                std::uint64_t key = prefix_pattern(reg.rib, view.addr[*pred], t.timestamp);
                bool same = *view.owner[*pred] == assigned && key != own_prefix;
                prev_same.add(key, same);
            }
            if (succ) {
                std::uint64_t key = prefix_pattern(reg.rib, view.addr[*succ], t.timestamp);
                bool same = *view.owner[*succ] == assigned && key != own_prefix;
                succ_same.add(key, same);
            }
            if (k + 1 < view.size()) {
                bool unc = !view.owner[k + 1];
                std::uint64_t key = view.responsive[k + 1]
                                        ? std::uint64_t(view.addr[k + 1].v)
                                        : kWildPattern;
                succ_ip_unc.add(key, unc);
            }

            // AS-level neighbors of the run this occurrence sits in.
            std::size_t ri = run_of(cond, k);
            std::optional<Asn> pred_as, succ_as;
            if (ri > 0) pred_as = cond.runs[ri - 1].as;
            if (ri + 1 < cond.runs.size()) succ_as = cond.runs[ri + 1].as;
            prev_as_unc.add(pred_as ? std::uint64_t(*pred_as) : kNonePattern, cond.gap[ri]);
            succ_as_unc.add(succ_as ? std::uint64_t(*succ_as) : kNonePattern,
                            cond.gap[ri + 1]);
            if (pred_as)
                prev_unknown.add(std::uint64_t(*pred_as),
                                 reg.rels.lookup(*pred_as, assigned) == Rel::None);
            if (succ_as)
                succ_unknown.add(std::uint64_t(*succ_as),
                                 reg.rels.lookup(assigned, *succ_as) == Rel::None);
            if (pred_as && succ_as && reg.rels.lookup(*pred_as, assigned) != Rel::None &&
                reg.rels.lookup(assigned, *succ_as) != Rel::None) {
                TripleShape shape = classify_triple(reg.rels, *pred_as, assigned, *succ_as);
                contexts[{*pred_as, *succ_as}] = shape;
                valley_occ[std::size_t(shape)] += 1;
            }
        }
    }

    FeatureVector fv;
    fv.bdr_rib_rel = rib_relation_code(ip, assigned, latest, reg);
    fv.prev_same_as_rel = prev_same.rel_rate();
    fv.prev_same_as_abs = prev_same.abs_rate();
    fv.succ_same_as_rel = succ_same.rel_rate();
    fv.succ_same_as_abs = succ_same.abs_rate();
    fv.succ_ip_uncertain_rel = succ_ip_unc.rel_rate();
    fv.succ_ip_uncertain_abs = succ_ip_unc.abs_rate();
    fv.prev_as_uncertain_rel = prev_as_unc.rel_rate();
    fv.prev_as_uncertain_abs = prev_as_unc.abs_rate();
    fv.succ_as_uncertain_rel = succ_as_unc.rel_rate();
    fv.succ_as_uncertain_abs = succ_as_unc.abs_rate();
    fv.prev_rel_unknown_rel = prev_unknown.rel_rate();
    fv.prev_rel_unknown_abs = prev_unknown.abs_rate();
    fv.succ_rel_unknown_rel = succ_unknown.rel_rate();
    fv.succ_rel_unknown_abs = succ_unknown.abs_rate();

    std::array<std::size_t, 3> distinct{};
    for (const auto& [ctx, shape] : contexts) distinct[std::size_t(shape)] += 1;
    std::size_t d_total = distinct[0] + distinct[1] + distinct[2];
    std::size_t o_total = valley_occ[0] + valley_occ[1] + valley_occ[2];
    if (d_total > 0) {
        fv.valley_normal_rel = double(distinct[std::size_t(TripleShape::ValleyFree)]) / d_total;
        fv.valley_semi_rel =
            double(distinct[std::size_t(TripleShape::PartValleyFree)]) / d_total;
        fv.valley_abnormal_rel =
            double(distinct[std::size_t(TripleShape::NonValleyFree)]) / d_total;
    }
    if (o_total > 0) {
        fv.valley_normal_abs = double(valley_occ[std::size_t(TripleShape::ValleyFree)]) / o_total;
        fv.valley_semi_abs =
            double(valley_occ[std::size_t(TripleShape::PartValleyFree)]) / o_total;
        fv.valley_abnormal_abs =
            double(valley_occ[std::size_t(TripleShape::NonValleyFree)]) / o_total;
    }
    return fv;
}

}  // namespace cdmatch
