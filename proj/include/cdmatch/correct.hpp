#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "cdmatch/features.hpp"
#include "cdmatch/gbdt.hpp"
#include "cdmatch/util.hpp"
#include "cdmatch/vote.hpp"

namespace cdmatch {

/// Raised when no replacement AS can be proposed for an address.
class EmptyCandidates : public std::runtime_error {
public:
    EmptyCandidates() : std::runtime_error("no correction candidates") {}
};

/// Replacement pools in falling order of trust: the announcing AS, the ASes
/// observed next to the address, relatives of the discarded answer, and ASes
/// that would keep every observed crossing valley-free.
struct CandidateGroups {
    std::array<std::vector<Asn>, 4> g;
};

namespace detail {

struct NeighborScan {
    std::set<Asn> neighbor_as;
    std::set<std::pair<Asn, Asn>> contexts;  // left and right AS around the address
    Timestamp latest = 0;
};

// Nearest concretely mapped hop on each side of every occurrence, looking
// through timeouts, unmapped hops and the subject's own addresses.
inline NeighborScan scan_neighbors(Ipv4 ip, const std::vector<CleanTrace>& corpus,
                                   const Mapper& others) {
    NeighborScan out;
    bool seen = false;
    for (const auto& t : corpus) {
        bool holds = false;
        for (const auto& h : t.hops)
            if (h.responsive && h.ip == ip) holds = true;
        if (!holds) continue;
        if (!seen || t.timestamp > out.latest) out.latest = t.timestamp;
        seen = true;

        SlotView view = expand_trace(t, ip, std::nullopt, others);
        auto usable = [&](std::size_t j) {
            return view.owner[j].has_value() && !(view.addr[j] == ip);
        };
        for (std::size_t k = 0; k < view.size(); ++k) {
            if (!view.responsive[k] || !(view.addr[k] == ip)) continue;
            std::optional<Asn> left, right;
            for (std::size_t j = k; j-- > 0;)
                if (usable(j)) {
                    left = *view.owner[j];
                    break;
                }
            for (std::size_t j = k + 1; j < view.size(); ++j)
                if (usable(j)) {
                    right = *view.owner[j];
                    break;
                }
            if (left) out.neighbor_as.insert(*left);
            if (right) out.neighbor_as.insert(*right);
            if (left && right) out.contexts.insert({*left, *right});
        }
    }
    return out;
}

}  // namespace detail

/// Builds the four replacement pools for `ip`, excluding the discarded answer
/// and keeping each AS only in the most trusted pool that produced it.
/// Raises EmptyCandidates when every pool comes up empty.
inline CandidateGroups collect_correction_candidates(Ipv4 ip, std::optional<Asn> wrong,
                                                     const std::vector<CleanTrace>& corpus,
                                                     const Mapper& others,
                                                     const Registries& reg) {
    detail::NeighborScan scan = detail::scan_neighbors(ip, corpus, others);

    std::array<std::set<Asn>, 4> pool;
    {
        RibIxpMapper origin(reg.rib, reg.ixp);
        MapAnswer a = origin.map(ip, scan.latest);
        if (a.kind == MapAnswer::Concrete) pool[0].insert(a.asn);
    }
    pool[1] = scan.neighbor_as;
    if (wrong) {
        for (Asn a : reg.rels.siblings_of(*wrong)) pool[2].insert(a);
        for (Asn a : reg.rels.providers_of(*wrong)) pool[2].insert(a);
        for (Asn a : reg.rels.customers_of(*wrong)) pool[2].insert(a);
    }
    if (!scan.contexts.empty()) {
        std::set<Asn> universe;
        for (const auto& [link, rel] : reg.rels.links()) {
            universe.insert(link.first);
            universe.insert(link.second);
        }
        for (Asn z : universe) {
            bool ok = true;
            for (const auto& [l, r] : scan.contexts) {
                if (z == l || z == r) continue;
                if (classify_triple(reg.rels, l, z, r) != TripleShape::ValleyFree) {
                    ok = false;
                    break;
                }
            }
            if (ok) pool[3].insert(z);
        }
    }

    CandidateGroups out;
    std::set<Asn> taken;
    if (wrong) taken.insert(*wrong);
    bool empty = true;
    for (std::size_t gi = 0; gi < 4; ++gi) {
        for (Asn a : pool[gi]) {
            if (!taken.insert(a).second) continue;
            out.g[gi].push_back(a);
        }
        if (!out.g[gi].empty()) empty = false;
    }
    if (empty) throw EmptyCandidates();
    return out;
}

struct ScoredCandidate {
    Asn asn = 0;
    int group = 0;
    double score = 0.0;
    std::size_t valley_free = 0;  // neighbor contexts this AS keeps legal
};

/// Scores every pooled candidate by substituting it for the subject address.
inline std::vector<ScoredCandidate> score_candidates(
    Ipv4 ip, const CandidateGroups& groups, const Scorer& scorer,
    const std::vector<CleanTrace>& corpus, const Mapper& mapping, const Registries& reg,
    unsigned jobs = 1) {
    detail::NeighborScan scan = detail::scan_neighbors(ip, corpus, mapping);
    std::vector<std::pair<Asn, int>> flat;
    for (int gi = 0; gi < 4; ++gi)
        for (Asn a : groups.g[std::size_t(gi)]) flat.push_back({a, gi});
    return parallel_map<ScoredCandidate>(flat.size(), jobs, [&](std::size_t i) {
        auto [a, gi] = flat[i];
        ScoredCandidate c{a, gi, 0.0, 0};
        c.score = scorer.score(extract_features(ip, a, corpus, mapping, reg));
        for (const auto& [l, r] : scan.contexts)
            if (a == l || a == r ||
                classify_triple(reg.rels, l, a, r) == TripleShape::ValleyFree)
                c.valley_free += 1;
        return c;
    });
}

/// Within one band of the best score, prefers the most trusted pool, then the
/// candidate keeping more crossings legal, then the lowest AS number. The
/// winner never depends on input order.
inline Asn select_candidate(const std::vector<ScoredCandidate>& pool, double band) {
    if (pool.empty()) throw EmptyCandidates();
    double best = pool.front().score;
    for (const auto& c : pool) best = std::max(best, c.score);
    const ScoredCandidate* win = nullptr;
    auto key = [](const ScoredCandidate& c) {
        return std::tuple<int, std::size_t, Asn>(c.group, ~c.valley_free, c.asn);
    };
    for (const auto& c : pool) {
        if (c.score < best - band) continue;
        if (!win || key(c) < key(*win)) win = &c;
    }
    return win->asn;
}

/// One turn of target selection. A flagged or unmapped hop corrects now only
/// if no occurrence asks it to wait: a hop waits for a worse-off predecessor,
/// and among equals the earlier hop moves first. Timeouts and unmapped hops
/// are invisible when looking for neighbors.
inline std::set<std::uint32_t> plan_turn(const std::vector<CleanTrace>& corpus,
                                         const std::map<std::uint32_t, EvalStatus>& status) {
    std::set<std::uint32_t> yes, no;
    for (const auto& t : corpus) {
        struct Slot {
            std::uint32_t ip = 0;
            bool visible = false;  // usable as a neighbor
            bool target = false;
            bool right = true;   // neighbor reads as in-order
            int cls = 0;
        };
        std::vector<Slot> slots;
        for (const auto& h : t.hops) {
            Slot s;
            if (!h.responsive) {
                slots.push_back(s);
                continue;
            }
            s.ip = h.ip.v;
            auto it = status.find(h.ip.v);
            EvalStatus st = it == status.end() ? EvalStatus::Right : it->second;
            switch (st) {
                case EvalStatus::Right: s.visible = true; break;
                case EvalStatus::Wrong:
                    s.visible = true;
                    s.target = true;
                    s.right = false;
                    break;
                case EvalStatus::Unmap: s.target = true; break;
            }
            slots.push_back(s);
        }

        auto nearest_visible = [&](std::size_t k, int dir) -> std::optional<std::size_t> {
            if (dir < 0) {
                for (std::size_t j = k; j-- > 0;)
                    if (slots[j].visible) return j;
            } else {
                for (std::size_t j = k + 1; j < slots.size(); ++j)
                    if (slots[j].visible) return j;
            }
            return std::nullopt;
        };

        // severity: fenced in by an in-order hop on some side, or not
        for (std::size_t k = 0; k < slots.size(); ++k) {
            if (!slots[k].target) continue;
            auto l = nearest_visible(k, -1);
            auto r = nearest_visible(k, +1);
            bool near_right = (l && slots[*l].right) || (r && slots[*r].right);
            slots[k].cls = near_right ? 1 : 2;
        }
        for (std::size_t k = 0; k < slots.size(); ++k) {
            if (!slots[k].target) continue;
            auto prio = [&](std::optional<std::size_t> j) {
                if (!j) return 0;
                return slots[*j].right ? 0 : slots[*j].cls;
            };
            int own = slots[k].cls;
            bool act = prio(nearest_visible(k, -1)) < own &&
                       prio(nearest_visible(k, +1)) <= own;
            (act ? yes : no).insert(slots[k].ip);
        }
    }
    std::set<std::uint32_t> out;
    for (std::uint32_t ip : yes)
        if (!no.count(ip)) out.insert(ip);
    return out;
}

struct CorrectionConfig {
    double band = 0.1;        // score slack when ranking candidates
    std::size_t floor_n = 0;  // stop below this many changes; 0 picks one per
                              // thousand addresses, minimum one
    std::size_t max_turns = 50;
    unsigned jobs = 1;
};

struct TurnRecord {
    struct Change {
        Ipv4 ip;
        std::optional<Asn> from;
        Asn to = 0;
        std::optional<double> score_before;
        int group = 0;
    };
    std::size_t turn = 0;
    std::vector<Change> changes;
};

struct CorrectionResult {
    MappingTable mapping;
    std::vector<TurnRecord> turns;
    std::set<std::uint32_t> corrected;
};

/// Iteratively rescores the table and replaces flagged or missing answers.
/// Each turn works against a frozen snapshot: statuses, targets and proposals
/// all see the table as it stood when the turn began, and the batch lands at
/// once. Stops when a turn falls below the change floor (that turn's changes
/// still land) or at the turn cap.
inline CorrectionResult run_correction(const std::vector<CleanTrace>& corpus,
                                       const MappingTable& base, const Scorer& scorer,
                                       const Registries& reg, CorrectionConfig cfg = {}) {
    CorrectionResult res;
    res.mapping = base;

    std::vector<Ipv4> universe;
    {
        std::set<std::uint32_t> seen;
        for (const auto& t : corpus)
            for (const auto& h : t.hops)
                if (h.responsive) seen.insert(h.ip.v);
        for (std::uint32_t v : seen) universe.push_back(Ipv4{v});
    }
    std::size_t floor_n =
        cfg.floor_n ? cfg.floor_n : std::max<std::size_t>(1, universe.size() / 1000);

    for (std::size_t turn = 1; turn <= cfg.max_turns; ++turn) {
        const MappingTable snap = res.mapping;

        struct Row {
            EvalStatus st = EvalStatus::Unmap;
            std::optional<double> score;
            std::optional<Asn> cur;
        };
        auto rows = parallel_map<Row>(universe.size(), cfg.jobs, [&](std::size_t i) {
            Ipv4 ip = universe[i];
            MapAnswer a = snap.map(ip, 0);
            if (a.kind != MapAnswer::Concrete) return Row{};
            double s = scorer.score(extract_features(ip, a.asn, corpus, snap, reg));
            return Row{s > 0.5 ? EvalStatus::Right : EvalStatus::Wrong, s, a.asn};
        });
        std::map<std::uint32_t, EvalStatus> status;
        for (std::size_t i = 0; i < universe.size(); ++i) status[universe[i].v] = rows[i].st;

        std::set<std::uint32_t> picks = plan_turn(corpus, status);
        std::vector<std::size_t> targets;
        for (std::size_t i = 0; i < universe.size(); ++i)
            if (picks.count(universe[i].v)) targets.push_back(i);

        using Proposal = std::optional<TurnRecord::Change>;
        auto proposals =
            parallel_map<Proposal>(targets.size(), cfg.jobs, [&](std::size_t k) -> Proposal {
                std::size_t i = targets[k];
                Ipv4 ip = universe[i];
                try {
                    CandidateGroups g =
                        collect_correction_candidates(ip, rows[i].cur, corpus, snap, reg);
                    auto scored = score_candidates(ip, g, scorer, corpus, snap, reg, 1);
                    Asn win = select_candidate(scored, cfg.band);
                    if (rows[i].cur && *rows[i].cur == win) return std::nullopt;
                    int grp = 0;
                    for (const auto& c : scored)
                        if (c.asn == win) {
                            grp = c.group;
                            break;
                        }
                    return TurnRecord::Change{ip, rows[i].cur, win, rows[i].score, grp};
                } catch (const EmptyCandidates&) {
                    return std::nullopt;
                }
            });

        TurnRecord rec;
        rec.turn = turn;
        for (auto& p : proposals)
            if (p) rec.changes.push_back(std::move(*p));
        for (const auto& ch : rec.changes) {
            res.mapping.set(ch.ip, MapAnswer::concrete(ch.to));
            res.corrected.insert(ch.ip.v);
        }
        std::size_t made = rec.changes.size();
        res.turns.push_back(std::move(rec));
        if (made < floor_n) break;
    }
    return res;
}

/// Scores the table's concrete answers and compares the flags against a
/// reference table. Positive class: the answer disagrees with the reference.
inline Metrics evaluate_against(const Scorer& scorer, const MappingTable& base,
                                const MappingTable& truth,
                                const std::vector<CleanTrace>& corpus, const Registries& reg,
                                unsigned jobs = 1) {
    std::vector<std::pair<Ipv4, MapAnswer>> rows;
    for (const auto& [ip, ans] : base.sorted_rows())
        if (ans.kind == MapAnswer::Concrete && truth.contains(ip)) rows.push_back({ip, ans});
    auto flags =
        parallel_map<std::array<bool, 2>>(rows.size(), jobs, [&](std::size_t i) {
            auto [ip, ans] = rows[i];
            bool actual = !(truth.map(ip, 0) == ans);
            bool flagged =
                !(scorer.score(extract_features(ip, ans.asn, corpus, base, reg)) > 0.5);
            return std::array<bool, 2>{actual, flagged};
        });
    Metrics m;
    for (const auto& [actual, flagged] : flags) {
        if (flagged && actual) m.tp += 1;
        else if (flagged && !actual) m.fp += 1;
        else if (!flagged && !actual) m.tn += 1;
        else m.fn += 1;
    }
    return m;
}

inline std::string format_correction_log(const CorrectionResult& res) {
    std::ostringstream os;
    os << "turn,ip,from,to,score_before,group\n";
    char buf[32];
    for (const auto& t : res.turns)
        for (const auto& ch : t.changes) {
            os << t.turn << ',' << format_ipv4(ch.ip) << ',';
            if (ch.from) os << *ch.from;
            else os << '-';
            os << ',' << ch.to << ',';
            if (ch.score_before) {
                std::snprintf(buf, sizeof buf, "%.6f", *ch.score_before);
                os << buf;
            } else {
                os << '-';
            }
            os << ',' << ch.group + 1 << '\n';
        }
    return os.str();
}

}  // namespace cdmatch
