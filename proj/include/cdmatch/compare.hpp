#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "cdmatch/ingest.hpp"
#include "cdmatch/net.hpp"
#include "cdmatch/registry.hpp"
#include "cdmatch/rib.hpp"

namespace cdmatch {

/// AS-level path element. Wildcards stand for unresponsive, unmapped, or
/// exchange-fabric hops interchangeably; the end mark closes every path so a
/// missing tail is visible to the matcher.
struct AsHop {
    enum Kind : std::uint8_t { Concrete, Wildcard, EndMark } kind = Wildcard;
    Asn asn = 0;

    static AsHop concrete(Asn a) { return {Concrete, a}; }
    static AsHop wildcard() { return {Wildcard, 0}; }
    static AsHop end() { return {EndMark, 0}; }

    bool operator==(const AsHop&) const = default;
};

using AsLevelPath = std::vector<AsHop>;

inline std::string format_as_path(const AsLevelPath& p) {
    std::string out;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (i) out += ' ';
        switch (p[i].kind) {
            case AsHop::Concrete: out += std::to_string(p[i].asn); break;
            case AsHop::Wildcard: out += '*'; break;
            case AsHop::EndMark: out += '$'; break;
        }
    }
    return out;
}

/// Control-plane path as an AS-level path with the end mark appended.
inline AsLevelPath as_route_path(const RibEntry& e) {
    AsLevelPath p;
    p.reserve(e.as_path.size() + 1);
    for (Asn a : e.as_path) p.push_back(AsHop::concrete(a));
    p.push_back(AsHop::end());
    return p;
}

/// Forwarding path lifted to the AS level. hop_pos links every original trace
/// slot to its element in the condensed path (runs of one AS collapse to one
/// element; wildcards never collapse).
struct TranslatedTrace {
    AsLevelPath path;
    std::vector<int> hop_pos;
};

inline TranslatedTrace translate(const CleanTrace& t, const Mapper& m, const IxpDb& ixp) {
    TranslatedTrace out;
    out.hop_pos.reserve(t.hops.size());
    for (const auto& h : t.hops) {
        AsHop next = AsHop::wildcard();
        if (h.responsive) {
            auto a = m.map(h.ip, t.timestamp);
            if (a.kind == MapAnswer::Concrete && !ixp.is_ixp_asn(a.asn))
                next = AsHop::concrete(a.asn);
        }
        if (next.kind == AsHop::Concrete && !out.path.empty() && out.path.back() == next) {
            out.hop_pos.push_back(static_cast<int>(out.path.size()) - 1);
            continue;
        }
        out.path.push_back(next);
        out.hop_pos.push_back(static_cast<int>(out.path.size()) - 1);
    }
    out.path.push_back(AsHop::end());
    return out;
}

enum class SegLabel : std::uint8_t { Match, Mismatch };

/// One aligned stretch of the two paths. Slice bounds are inclusive anchor
/// positions; lo == -1 marks the virtual shared start used when the paths
/// begin with wildcards or disagreeing hops.
struct SegmentPair {
    int c_lo = -1, c_hi = -1;
    int d_lo = -1, d_hi = -1;
    bool last = false;
    SegLabel label = SegLabel::Mismatch;

    bool operator==(const SegmentPair&) const = default;
};

/// Raised when the forwarding path has no concrete AS hop to anchor on.
class DegenerateInput : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void interior_asns(const AsLevelPath& p, int lo, int hi,
                          std::unordered_set<Asn>& out) {
    for (int i = lo + 1; i < hi; ++i)
        if (p[i].kind == AsHop::Concrete) out.insert(p[i].asn);
}

inline bool interiors_disjoint(const AsLevelPath& c, const AsLevelPath& d, int c_lo, int c_hi,
                               int d_lo, int d_hi) {
    std::unordered_set<Asn> cs;
    interior_asns(c, c_lo, c_hi, cs);
    if (cs.empty()) return true;
    for (int i = d_lo + 1; i < d_hi; ++i)
        if (d[i].kind == AsHop::Concrete && cs.count(d[i].asn)) return false;
    return true;
}

}  // namespace detail

/// Splits the pair into the shortest consecutive segment pairs that agree at
/// both ends and never repeat an AS across the two interiors. The split scans
/// the forwarding path left to right, so among valid next anchors the one
/// earliest on the forwarding side wins, then earliest on the control side.
inline std::vector<SegmentPair> segment(const AsLevelPath& c, const AsLevelPath& d) {
    if (c.empty() || c.back().kind != AsHop::EndMark || d.empty() ||
        d.back().kind != AsHop::EndMark)
        throw std::invalid_argument("paths must close with the end mark");
    if (std::none_of(d.begin(), d.end(),
                     [](const AsHop& h) { return h.kind == AsHop::Concrete; }))
        throw DegenerateInput("forwarding path has no concrete hop");

    int c_end = static_cast<int>(c.size()) - 1;
    int d_end = static_cast<int>(d.size()) - 1;
    std::vector<SegmentPair> segs;
    int cx = -1, dy = -1;  // current anchors; -1 = virtual start
    while (cx != c_end || dy != d_end) {
        int next_c = -1, next_d = -1;
        for (int y = dy + 1; y < d_end && next_c < 0; ++y) {
            if (d[y].kind != AsHop::Concrete) continue;
            for (int x = cx + 1; x < c_end; ++x) {
                if (c[x].kind != AsHop::Concrete || c[x].asn != d[y].asn) continue;
                if (!detail::interiors_disjoint(c, d, cx, x, dy, y)) continue;
                next_c = x;
                next_d = y;
                break;
            }
        }
        if (next_c < 0) {
            next_c = c_end;  // no concrete anchor left: close at the end marks
            next_d = d_end;
        }
        SegmentPair s;
        s.c_lo = cx;
        s.c_hi = next_c;
        s.d_lo = dy;
        s.d_hi = next_d;
        s.last = next_c == c_end;
        // lead segment with nothing in it is the shared start itself, not a pair
        bool trivial_lead = cx == -1 && next_c == 0 && next_d == 0;
        if (!trivial_lead) segs.push_back(s);
        cx = next_c;
        dy = next_d;
    }
    return segs;
}

/// A segment pair matches when nothing concrete disagrees between the shared
/// ends: both interiors empty; or the forwarding interior is all wildcards and
/// at least as long a stretch as the control side; or it is the final segment
/// and the forwarding side ended cleanly (early termination).
inline SegLabel label_segment(const AsLevelPath&, const AsLevelPath& d, const SegmentPair& s) {
    int c_len = s.c_hi - std::max(s.c_lo, -1);  // slice length counting hops, not the virtual start
    int d_len = s.d_hi - std::max(s.d_lo, -1);
    bool c_int_empty = s.c_hi - s.c_lo <= 1;
    bool d_int_empty = s.d_hi - s.d_lo <= 1;
    bool d_int_all_wild = true;
    for (int i = s.d_lo + 1; i < s.d_hi; ++i)
        if (d[i].kind != AsHop::Wildcard) d_int_all_wild = false;
    if (c_int_empty && d_int_empty) return SegLabel::Match;
    if (d_int_all_wild && d_len >= c_len) return SegLabel::Match;
    if (s.last && d_int_empty) return SegLabel::Match;
    return SegLabel::Mismatch;
}

enum class PairLabel : std::uint8_t { Match, Mismatch };

struct PairComparison {
    AsLevelPath c;
    TranslatedTrace d;
    std::vector<SegmentPair> segs;
    PairLabel label = PairLabel::Match;
};

/// Full per-pair verdict: a pair mismatches when any of its segments does.
inline PairComparison compare_pair(const PathPair& p, const Mapper& m, const IxpDb& ixp) {
    PairComparison out;
    out.c = as_route_path(p.route);
    out.d = translate(p.trace, m, ixp);
    out.segs = segment(out.c, out.d.path);
    for (auto& s : out.segs) {
        s.label = label_segment(out.c, out.d.path, s);
        if (s.label == SegLabel::Mismatch) out.label = PairLabel::Mismatch;
    }
    return out;
}

struct DatasetCounts {
    std::size_t total = 0;
    std::size_t matched = 0;
    std::size_t mismatched = 0;
    std::size_t degenerate = 0;

    double ratio() const {
        std::size_t n = matched + mismatched;
        return n == 0 ? 0.0 : static_cast<double>(mismatched) / static_cast<double>(n);
    }
};

struct CompareReport {
    std::map<std::string, DatasetCounts> by_dataset;  // key = vantage pair id
    std::size_t seg_match = 0;
    std::size_t seg_mismatch = 0;

    DatasetCounts totals() const {
        DatasetCounts t;
        for (const auto& [k, v] : by_dataset) {
            t.total += v.total;
            t.matched += v.matched;
            t.mismatched += v.mismatched;
            t.degenerate += v.degenerate;
        }
        return t;
    }
};

inline CompareReport compare_corpus(const std::vector<PathPair>& pairs, const Mapper& m,
                                    const IxpDb& ixp,
                                    std::vector<std::optional<PairComparison>>* out = nullptr) {
    CompareReport rep;
    if (out) out->assign(pairs.size(), std::nullopt);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        auto& ds = rep.by_dataset[pairs[i].vp];
        ++ds.total;
        try {
            auto cmp = compare_pair(pairs[i], m, ixp);
            for (const auto& s : cmp.segs)
                (s.label == SegLabel::Match ? rep.seg_match : rep.seg_mismatch)++;
            (cmp.label == PairLabel::Match ? ds.matched : ds.mismatched)++;
            if (out) (*out)[i] = std::move(cmp);
        } catch (const DegenerateInput&) {
            ++ds.degenerate;
        }
    }
    return rep;
}

/// Drops pairs whose forwarding path provably leaves through a different
/// second AS under every supplied mapping method. A wildcard or missing
/// second hop counts as agreement, so only unanimous disagreement discards.
inline std::vector<PathPair> discard_second_hop_bifurcation(
    const std::vector<PathPair>& pairs, const std::vector<const Mapper*>& methods,
    const IxpDb& ixp, PairReport* report = nullptr) {
    std::vector<PathPair> out;
    std::size_t dropped = 0;
    for (const auto& p : pairs) {
        bool differs_everywhere = !methods.empty();
        for (const auto* m : methods) {
            bool differs = false;
            if (p.route.as_path.size() >= 2) {
                try {
                    auto t = translate(p.trace, *m, ixp);
                    if (t.path.size() >= 3 && t.path[1].kind == AsHop::Concrete &&
                        t.path[1].asn != p.route.as_path[1])
                        differs = true;
                } catch (...) {
                    differs = false;
                }
            }
            if (!differs) {
                differs_everywhere = false;
                break;
            }
        }
        if (differs_everywhere) {
            ++dropped;
            continue;
        }
        out.push_back(p);
    }
    if (report) report->discarded_second_hop = dropped;
    return out;
}

}  // namespace cdmatch
