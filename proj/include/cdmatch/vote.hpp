#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cdmatch/compare.hpp"
#include "cdmatch/ingest.hpp"
#include "cdmatch/net.hpp"
#include "cdmatch/registry.hpp"
#include "cdmatch/rib.hpp"
#include "cdmatch/util.hpp"

namespace cdmatch {

/// How one hop address sits in its pair: on a network boundary or surrounded
/// by its own network, inside an agreeing stretch or a disputed one.
enum class IpCategory : std::uint8_t {
    BorderMatch,
    InternalMatch,
    BorderMismatch,
    InternalMismatch,
};

inline const char* ip_category_name(IpCategory c) {
    switch (c) {
        case IpCategory::BorderMatch: return "border_match";
        case IpCategory::InternalMatch: return "internal_match";
        case IpCategory::BorderMismatch: return "border_mismatch";
        default: return "internal_mismatch";
    }
}

// One side of an occurrence context: a neighbouring address, or a sentinel
// when the hop sits at the first or last responsive slot.
using TripleSide = std::uint64_t;
inline constexpr TripleSide kTripleStart = 0;
inline constexpr TripleSide kTripleEnd = 1;

inline TripleSide triple_side(Ipv4 ip) { return (1ull << 32) | ip.v; }

using Triple = std::pair<TripleSide, TripleSide>;

/// Everything gathered about one address across a corpus: the networks it
/// could plausibly belong to and the distinct neighbour contexts it was seen
/// in.
struct CandidateSet {
    Ipv4 ip;
    std::set<Asn> candidates;
    std::set<Triple> triples;
};

namespace detail {

inline Triple occurrence_triple(const CleanTrace& t, std::size_t slot) {
    TripleSide pred = kTripleStart, succ = kTripleEnd;
    for (std::size_t k = slot; k-- > 0;)
        if (t.hops[k].responsive) {
            pred = triple_side(t.hops[k].ip);
            break;
        }
    for (std::size_t k = slot + 1; k < t.hops.size(); ++k)
        if (t.hops[k].responsive) {
            succ = triple_side(t.hops[k].ip);
            break;
        }
    return {pred, succ};
}

// Network of the nearest neighbour slot that resolved to a concrete AS;
// unresolved slots are looked through.
inline std::optional<Asn> side_asn(const PairComparison& cmp, const CleanTrace& t,
                                   std::size_t slot, int dir) {
    for (std::size_t k = slot;;) {
        if (dir < 0) {
            if (k == 0) break;
            --k;
        } else {
            ++k;
            if (k >= t.hops.size()) break;
        }
        if (!t.hops[k].responsive) continue;
        const AsHop& h = cmp.d.path[cmp.d.hop_pos[k]];
        if (h.kind == AsHop::Concrete) return h.asn;
    }
    return std::nullopt;
}

inline const SegmentPair* enclosing_segment(const std::vector<SegmentPair>& segs, int p) {
    for (const auto& s : segs)
        if (s.d_lo < p && p < s.d_hi) return &s;
    return nullptr;
}

// Control-path index shared with forwarding position p; p must be a segment
// boundary.
inline int anchor_index(const std::vector<SegmentPair>& segs, int p) {
    for (const auto& s : segs) {
        if (s.d_lo == p) return s.c_lo;
        if (s.d_hi == p) return s.c_hi;
    }
    return 0;  // lone suppressed lead anchor
}

inline void add_control_range(const AsLevelPath& c, int c_lo, int c_hi,
                              std::set<Asn>& out) {
    int last = static_cast<int>(c.size()) - 2;  // skip the end mark
    for (int i = std::max(c_lo, 0); i <= std::min(c_hi, last); ++i)
        if (c[i].kind == AsHop::Concrete) out.insert(c[i].asn);
}

inline bool pair_contains(const PathPair& p, Ipv4 who) {
    for (const auto& h : p.trace.hops)
        if (h.responsive && h.ip == who) return true;
    return false;
}

}  // namespace detail

/// Category of one responsive hop occurrence, or nothing when the slot did
/// not resolve to a concrete AS.
inline std::optional<IpCategory> categorize_occurrence(const PairComparison& cmp,
                                                       const CleanTrace& t,
                                                       std::size_t slot) {
    if (slot >= t.hops.size() || !t.hops[slot].responsive) return std::nullopt;
    int p = cmp.d.hop_pos[slot];
    if (cmp.d.path[p].kind != AsHop::Concrete) return std::nullopt;
    Asn own = cmp.d.path[p].asn;
    auto prev = detail::side_asn(cmp, t, slot, -1);
    auto next = detail::side_asn(cmp, t, slot, +1);
    bool internal = prev && next && *prev == own && *next == own;
    // concrete hops strictly inside a segment only occur in disputed ones
    if (detail::enclosing_segment(cmp.segs, p))
        return internal ? IpCategory::InternalMismatch : IpCategory::BorderMismatch;
    return internal ? IpCategory::InternalMatch : IpCategory::BorderMatch;
}

/// Gathers, per address, the plausible owner networks and the neighbour
/// contexts seen across the corpus. An agreeing boundary hop may belong to
/// the adjacent control-path network on each side that disagrees or is
/// absent; a disputed hop may belong to any network of its control slice; an
/// unresolved hop inherits its slice wholesale.
inline std::map<std::uint32_t, CandidateSet> collect_candidates(
    const std::vector<PathPair>& pairs, const Mapper& m, const IxpDb& ixp) {
    std::map<std::uint32_t, CandidateSet> out;
    for (const auto& p : pairs) {
        PairComparison cmp;
        try {
            cmp = compare_pair(p, m, ixp);
        } catch (const DegenerateInput&) {
            continue;
        }
        const auto& t = p.trace;
        for (std::size_t slot = 0; slot < t.hops.size(); ++slot) {
            if (!t.hops[slot].responsive) continue;
            auto& cs = out[t.hops[slot].ip.v];
            cs.ip = t.hops[slot].ip;
            cs.triples.insert(detail::occurrence_triple(t, slot));
            int pos = cmp.d.hop_pos[slot];
            if (cmp.d.path[pos].kind != AsHop::Concrete) {
                if (const auto* s = detail::enclosing_segment(cmp.segs, pos))
                    detail::add_control_range(cmp.c, s->c_lo, s->c_hi, cs.candidates);
                continue;
            }
            Asn own = cmp.d.path[pos].asn;
            if (const auto* s = detail::enclosing_segment(cmp.segs, pos)) {
                detail::add_control_range(cmp.c, s->c_lo, s->c_hi, cs.candidates);
                auto prev = detail::side_asn(cmp, t, slot, -1);
                auto next = detail::side_asn(cmp, t, slot, +1);
                if (prev && next && *prev == own && *next == own) cs.candidates.insert(own);
                continue;
            }
            cs.candidates.insert(own);
            int x = detail::anchor_index(cmp.segs, pos);
            auto prev = detail::side_asn(cmp, t, slot, -1);
            auto next = detail::side_asn(cmp, t, slot, +1);
            if (!prev || *prev != own) detail::add_control_range(cmp.c, x - 1, x - 1, cs.candidates);
            if (!next || *next != own) detail::add_control_range(cmp.c, x + 1, x + 1, cs.candidates);
        }
    }
    return out;
}

struct VoteCount {
    Asn candidate = 0;
    std::size_t pairs = 0;    // pairs holding this address that match under it
    std::size_t triples = 0;  // distinct neighbour contexts among those pairs
};

struct Verdict {
    Ipv4 ip;
    std::optional<Asn> result;
    std::vector<VoteCount> votes;  // ascending by candidate
};

/// Counts, for every candidate owner, how the corpus would look if this one
/// address were reassigned while everything else stays put. The address is
/// settled on the candidate that alone matches the most pairs and also ties
/// the best context count; a lone candidate wins outright.
inline Verdict vote(Ipv4 ip, const CandidateSet& cs, const std::vector<PathPair>& pairs,
                    const Mapper& frozen, const IxpDb& ixp) {
    Verdict v;
    v.ip = ip;
    for (Asn cand : cs.candidates) {
        OverlayMapper m(frozen);
        m.set(ip, MapAnswer::concrete(cand));
        VoteCount vc{cand, 0, 0};
        std::set<Triple> contexts;
        for (const auto& p : pairs) {
            if (!detail::pair_contains(p, ip)) continue;
            try {
                if (compare_pair(p, m, ixp).label != PairLabel::Match) continue;
            } catch (const DegenerateInput&) {
                continue;
            }
            ++vc.pairs;
            for (std::size_t slot = 0; slot < p.trace.hops.size(); ++slot)
                if (p.trace.hops[slot].responsive && p.trace.hops[slot].ip == ip)
                    contexts.insert(detail::occurrence_triple(p.trace, slot));
        }
        vc.triples = contexts.size();
        v.votes.push_back(vc);
    }
    if (cs.candidates.size() == 1) {
        v.result = *cs.candidates.begin();
        return v;
    }
    std::size_t best_pairs = 0, best_triples = 0;
    for (const auto& vc : v.votes) {
        best_pairs = std::max(best_pairs, vc.pairs);
        best_triples = std::max(best_triples, vc.triples);
    }
    const VoteCount* top = nullptr;
    int holders = 0;
    for (const auto& vc : v.votes)
        if (vc.pairs == best_pairs) {
            top = &vc;
            ++holders;
        }
    if (holders == 1 && top->triples == best_triples) v.result = top->candidate;
    return v;
}

/// Addresses settled by one method run.
struct DeterminedSet {
    std::string method;
    std::map<std::uint32_t, Asn> determined;

    MappingTable to_table() const {
        MappingTable t;
        for (const auto& [v, a] : determined) t.set(Ipv4{v}, MapAnswer::concrete(a));
        return t;
    }
};

struct VotingResult {
    DeterminedSet primitive;
    std::vector<std::size_t> real_mismatch;  // indices into the input pair list
    std::size_t iterations = 0;
    std::vector<Verdict> audit;  // final ballot per address, ascending
};

namespace detail {

// A disputed pair is confirmed once every responsive hop strictly inside a
// disagreeing slice has been settled; nothing left open could repair it.
inline bool all_disputed_settled(const PairComparison& cmp, const CleanTrace& t,
                                 const std::map<std::uint32_t, Asn>& det) {
    for (const auto& s : cmp.segs) {
        if (s.label != SegLabel::Mismatch) continue;
        for (std::size_t k = 0; k < t.hops.size(); ++k) {
            if (!t.hops[k].responsive) continue;
            int p = cmp.d.hop_pos[k];
            if (p > s.d_lo && p < s.d_hi && det.count(t.hops[k].ip.v) == 0) return false;
        }
    }
    return true;
}

}  // namespace detail

/// Alternating rounds of reassignment and removal. Each round votes every
/// unsettled address against the round's frozen table, applies winners one by
/// one in address order, then retires pairs whose disagreement survives with
/// every disputed hop settled. A winner whose application would leave more of
/// its own pairs disagreeing than before is deferred instead of applied, so
/// settling never makes the corpus worse. Rounds stop when nothing new
/// settles.
inline VotingResult run_voting(const std::vector<PathPair>& pairs, const Mapper& base,
                               const IxpDb& ixp, std::string method = "base",
                               unsigned jobs = 1) {
    VotingResult res;
    res.primitive.method = std::move(method);
    auto& det = res.primitive.determined;

    std::vector<PathPair> live = pairs;
    std::vector<std::size_t> orig(live.size());
    std::iota(orig.begin(), orig.end(), 0);
    std::map<std::uint32_t, Verdict> audit;

    while (true) {
        ++res.iterations;
        OverlayMapper frozen(base);
        for (const auto& [v, a] : det) frozen.set(Ipv4{v}, MapAnswer::concrete(a));

        auto cands = collect_candidates(live, frozen, ixp);
        std::vector<const CandidateSet*> open;
        for (const auto& [ipv, cs] : cands)
            if (det.count(ipv) == 0) open.push_back(&cs);

        auto verdicts = parallel_map<Verdict>(
            open.size(), jobs,
            [&](std::size_t i) { return vote(open[i]->ip, *open[i], live, frozen, ixp); });

        auto disagreeing = [&](const Mapper& m, Ipv4 who) {
            std::size_t n = 0;
            for (const auto& p : live) {
                if (!detail::pair_contains(p, who)) continue;
                try {
                    if (compare_pair(p, m, ixp).label == PairLabel::Mismatch) ++n;
                } catch (const DegenerateInput&) {
                }
            }
            return n;
        };

        std::size_t fresh = 0;
        for (auto& v : verdicts) {
            if (v.result) {
                OverlayMapper trial(frozen);
                trial.set(v.ip, MapAnswer::concrete(*v.result));
                if (disagreeing(trial, v.ip) <= disagreeing(frozen, v.ip)) {
                    frozen.set(v.ip, MapAnswer::concrete(*v.result));
                    det[v.ip.v] = *v.result;
                    ++fresh;
                } else {
                    v.result.reset();  // deferred; the ballot sheet stays honest
                }
            }
            audit[v.ip.v] = std::move(v);
        }
        if (fresh == 0) break;

        std::vector<PathPair> keep;
        std::vector<std::size_t> keep_orig;
        for (std::size_t i = 0; i < live.size(); ++i) {
            bool retire = false;
            try {
                auto cmp = compare_pair(live[i], frozen, ixp);
                retire = cmp.label == PairLabel::Mismatch &&
                         detail::all_disputed_settled(cmp, live[i].trace, det);
            } catch (const DegenerateInput&) {
            }
            if (retire) {
                res.real_mismatch.push_back(orig[i]);
            } else {
                keep.push_back(std::move(live[i]));
                keep_orig.push_back(orig[i]);
            }
        }
        live.swap(keep);
        orig.swap(keep_orig);
    }

    std::sort(res.real_mismatch.begin(), res.real_mismatch.end());
    res.audit.reserve(audit.size());
    for (auto& [ipv, v] : audit) res.audit.push_back(std::move(v));
    return res;
}

/// Keeps an address only when at least two runs settled it and no run
/// disagrees.
inline MappingTable merge_determined_sets(const std::vector<DeterminedSet>& sets) {
    if (sets.size() < 2)
        throw std::invalid_argument("consensus needs at least two result sets");
    std::map<std::uint32_t, std::set<Asn>> answers;
    std::map<std::uint32_t, int> confirmations;
    for (const auto& s : sets)
        for (const auto& [ipv, a] : s.determined) {
            answers[ipv].insert(a);
            ++confirmations[ipv];
        }
    MappingTable out;
    for (const auto& [ipv, ans] : answers)
        if (ans.size() == 1 && confirmations[ipv] >= 2)
            out.set(Ipv4{ipv}, MapAnswer::concrete(*ans.begin()));
    return out;
}

enum class EvalStatus : std::uint8_t { Right, Wrong, Unmap };

/// Raised when the scored table and the reference share no concrete answer.
class EmptyOverlap : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EvalRow {
    Ipv4 ip;
    Asn want = 0;
    MapAnswer got;
    EvalStatus status = EvalStatus::Unmap;
};

struct MappingEvaluation {
    std::size_t right = 0;
    std::size_t wrong = 0;
    std::size_t unmap = 0;
    std::vector<EvalRow> rows;  // ascending by address

    // unanswered addresses are reported but not scored
    double ratio() const { return static_cast<double>(wrong) / static_cast<double>(right + wrong); }
};

/// Scores a method against reference answers. Reference rows without a
/// concrete network are skipped; at least one row must be answerable.
inline MappingEvaluation evaluate_mapping(const Mapper& m, const MappingTable& truth,
                                          Timestamp at = 0) {
    MappingEvaluation ev;
    for (const auto& [ip, want] : truth.sorted_rows()) {
        if (want.kind != MapAnswer::Concrete) continue;
        EvalRow r;
        r.ip = ip;
        r.want = want.asn;
        r.got = m.map(ip, at);
        if (r.got.kind != MapAnswer::Concrete) {
            r.status = EvalStatus::Unmap;
            ++ev.unmap;
        } else if (r.got.asn == want.asn) {
            r.status = EvalStatus::Right;
            ++ev.right;
        } else {
            r.status = EvalStatus::Wrong;
            ++ev.wrong;
        }
        ev.rows.push_back(r);
    }
    if (ev.right + ev.wrong == 0)
        throw EmptyOverlap("no concrete answers overlap the reference");
    return ev;
}

enum class ErrorCategory : std::uint8_t { Ixp, Sibling, Neighbor, Unknown };

inline const char* error_category_name(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::Ixp: return "ixp";
        case ErrorCategory::Sibling: return "sibling";
        case ErrorCategory::Neighbor: return "neighbor";
        default: return "unknown";
    }
}

/// Why a wrong answer went wrong: exchange fabric involvement, two arms of
/// one organization, a directly connected network, or none of those.
inline ErrorCategory categorize_mapping_error(Ipv4 ip, Asn wrong, Asn right, const IxpDb& ixp,
                                              const RelDb& rels) {
    if (ixp.covers_ip(ip) || ixp.is_ixp_asn(wrong) || ixp.is_ixp_asn(right))
        return ErrorCategory::Ixp;
    switch (rels.lookup(wrong, right)) {
        case Rel::Sibling: return ErrorCategory::Sibling;
        case Rel::P2C:
        case Rel::C2P:
        case Rel::P2P: return ErrorCategory::Neighbor;
        default: return ErrorCategory::Unknown;
    }
}

/// Reference answers from paths that never leave one network: when source and
/// destination resolve to the same sole origin, every responsive hop belongs
/// to it.
inline MappingTable extract_intra_as_ground_truth(const std::vector<CleanTrace>& traces,
                                                  const RibTable& rib) {
    MappingTable out;
    for (const auto& t : traces) {
        auto s = rib.lpm(t.src, t.timestamp);
        auto d = rib.lpm(t.dst, t.timestamp);
        if (!s.entry || !d.entry || s.multi_origin || d.multi_origin) continue;
        if (s.entry->origin() != d.entry->origin()) continue;
        for (const auto& h : t.hops)
            if (h.responsive) out.set(h.ip, MapAnswer::concrete(s.entry->origin()));
    }
    return out;
}

struct FrequencyStats {
    std::size_t right_ips = 0;
    std::size_t wrong_ips = 0;
    std::size_t unmap_ips = 0;
    double right_mean = 0.0;
    double wrong_mean = 0.0;
    double unmap_mean = 0.0;
};

/// Mean number of distinct pairs each scored address appears in, grouped by
/// its score; addresses absent from the corpus are left out.
inline FrequencyStats frequency_stats(const std::vector<PathPair>& pairs,
                                      const MappingEvaluation& ev) {
    std::map<std::uint32_t, std::size_t> freq;
    for (const auto& r : ev.rows) freq[r.ip.v] = 0;
    for (const auto& p : pairs) {
        std::set<std::uint32_t> seen;
        for (const auto& h : p.trace.hops) {
            if (!h.responsive) continue;
            auto it = freq.find(h.ip.v);
            if (it != freq.end() && seen.insert(h.ip.v).second) ++it->second;
        }
    }
    FrequencyStats fs;
    std::size_t sums[3] = {0, 0, 0};
    std::size_t counts[3] = {0, 0, 0};
    for (const auto& r : ev.rows) {
        std::size_t n = freq[r.ip.v];
        if (n == 0) continue;
        auto b = static_cast<std::size_t>(r.status);
        sums[b] += n;
        ++counts[b];
    }
    fs.right_ips = counts[0];
    fs.wrong_ips = counts[1];
    fs.unmap_ips = counts[2];
    if (counts[0]) fs.right_mean = static_cast<double>(sums[0]) / static_cast<double>(counts[0]);
    if (counts[1]) fs.wrong_mean = static_cast<double>(sums[1]) / static_cast<double>(counts[1]);
    if (counts[2]) fs.unmap_mean = static_cast<double>(sums[2]) / static_cast<double>(counts[2]);
    return fs;
}

inline std::string format_vote_audit(const std::vector<Verdict>& verdicts) {
    std::string out = "ip,candidate,pairs,triples,status\n";
    for (const auto& v : verdicts)
        for (const auto& vc : v.votes) {
            out += format_ipv4(v.ip);
            out += ',';
            out += std::to_string(vc.candidate);
            out += ',';
            out += std::to_string(vc.pairs);
            out += ',';
            out += std::to_string(vc.triples);
            out += ',';
            out += (v.result && *v.result == vc.candidate) ? "determined" : "undetermined";
            out += '\n';
        }
    return out;
}

}  // namespace cdmatch
