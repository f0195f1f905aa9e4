#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "cdmatch/ingest.hpp"
#include "cdmatch/registry.hpp"
#include "cdmatch/rib.hpp"
#include "cdmatch/util.hpp"

namespace cdmatch {

enum class EventKind : std::uint8_t {
    HiddenHijack,
    BogusLinkInterception,
    Aggregation,
    DefaultRouteDetour,
};

inline const char* event_kind_name(EventKind k) {
    switch (k) {
        case EventKind::HiddenHijack: return "hidden_hijack";
        case EventKind::BogusLinkInterception: return "bogus_link";
        case EventKind::Aggregation: return "aggregation";
        case EventKind::DefaultRouteDetour: return "default_route_detour";
    }
    return "?";
}

struct EventSpec {
    EventKind kind = EventKind::HiddenHijack;
    std::size_t count = 1;
    double fraction = 0.25;  // detours: share of eligible destinations diverted
};

/// Knobs for one generated internet. The seed pins everything; two runs with
/// the same configuration emit identical corpora.
struct ScenarioConfig {
    std::uint64_t seed = 1;
    std::vector<std::size_t> tier_counts{3, 12, 60};  // top tier first
    double p2p_density = 0.05;  // chance of an extra same-tier peering
    std::size_t min_prefixes_per_as = 1;
    std::size_t max_prefixes_per_as = 3;
    double p_unresponsive = 0.0;  // a hop answer is lost
    double p_third_party = 0.0;   // an entry hop answers from another interface
    double p_borrow = 1.0;        // customer side numbered from provider space
    double p_internal_hop = 1.0;  // network exposes an interior router hop
    double p_ixp = 0.0;           // peering rides the shared exchange subnet
    double p_sibling = 0.0;       // org fusion and sibling-space numbering
    std::size_t vp_count = 3;
    std::vector<EventSpec> events;
};

inline void validate_config(const ScenarioConfig& c) {
    auto bad = [](const std::string& what) { throw std::invalid_argument(what); };
    if (c.tier_counts.empty()) bad("tier list is empty");
    std::size_t total = 0;
    for (std::size_t n : c.tier_counts) {
        if (n == 0) bad("tier with zero networks");
        total += n;
    }
    if (total > 2048) bad("more than 2048 networks");
    for (double p : {c.p2p_density, c.p_unresponsive, c.p_third_party, c.p_borrow,
                     c.p_internal_hop, c.p_ixp, c.p_sibling})
        if (!(p >= 0.0 && p <= 1.0)) bad("probability outside [0,1]");
    if (c.min_prefixes_per_as < 1) bad("minimum prefixes per network must be positive");
    if (c.max_prefixes_per_as < c.min_prefixes_per_as) bad("prefix range inverted");
    if (c.max_prefixes_per_as > 8) bad("more than 8 prefixes per network");
    if (c.vp_count < 1 || c.vp_count > 64) bad("vantage count outside [1,64]");
    for (const auto& e : c.events) {
        if (e.count < 1) bad("event with zero count");
        if (e.kind == EventKind::DefaultRouteDetour && !(e.fraction > 0.0 && e.fraction <= 1.0))
            bad("detour fraction outside (0,1]");
    }
}

enum class TruthLabel : std::uint8_t { Clean, Detouring, Branching, Protruding };

inline const char* truth_label_name(TruthLabel l) {
    switch (l) {
        case TruthLabel::Clean: return "clean";
        case TruthLabel::Detouring: return "detouring";
        case TruthLabel::Branching: return "branching";
        case TruthLabel::Protruding: return "protruding";
    }
    return "?";
}

struct SynthAs {
    Asn asn = 0;
    std::size_t tier = 0;
    std::string org;
    std::vector<Prefix> prefixes;  // announced; the first doubles as the house block
    Ipv4 gateway, probe, internal;
    bool emits_internal = true;
};

/// Undirected adjacency; endpoints are stored low to high. `provider` names
/// the transit seller, zero for a peering. Interface addresses are the
/// operating side's, regardless of whose block they were carved from.
struct SynthLink {
    Asn u = 0, v = 0;
    Asn provider = 0;
    bool fabric = false;
    Ipv4 if_u, if_v;
};

struct IxpFabric {
    Asn asn = 0;
    Prefix prefix;
    std::map<Asn, Ipv4> member_addr;
};

struct HijackPlan {
    Prefix parent, sub;
    Asn victim = 0, hijacker = 0, waypoint = 0;
    std::size_t polluted = 0;  // vantage whose table carries the finer route
    std::vector<std::vector<Asn>> vp_paths;
    std::vector<bool> diverted;
};

struct BogusPlan {
    Asn x = 0, m = 0, y = 0;  // control claims x-y while forwarding rides x-m-y
};

struct AggPlan {
    Prefix deleg;
    Asn top = 0, mid = 0, leaf = 0;
};

struct DetourPlan {
    std::size_t vp = 0;
    Asn via = 0;  // static next hop overriding the advertised choice
    std::set<std::uint32_t> dsts;
};

struct EventRecord {
    EventKind kind = EventKind::HiddenHijack;
    Asn a = 0, b = 0, c = 0;
    std::optional<Prefix> p1, p2;
    std::string vp;
    std::size_t count = 0;
};

namespace detail {

struct RouteCell {
    Asn dn = 0, pr = 0, up = 0;  // next hop per learning class, zero when absent
    std::int16_t dn_len = -1, pr_len = -1, up_len = -1;
};

inline std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    return splitmix(a * 0x2545F4914F6CDD1DULL ^ splitmix(b));
}

}  // namespace detail

struct SynthWorld {
    ScenarioConfig cfg;
    std::vector<SynthAs> ases;  // ascending ASN, tier-major
    std::map<Asn, std::size_t> index;
    std::vector<SynthLink> links;
    std::map<std::pair<Asn, Asn>, std::size_t> link_at;
    std::vector<IxpFabric> fabrics;
    std::vector<std::pair<std::string, Asn>> vps;
    std::vector<HijackPlan> hijacks;
    std::vector<BogusPlan> bogus;
    std::vector<AggPlan> aggs;
    std::vector<DetourPlan> detours;
    std::vector<std::pair<Prefix, Asn>> announced;  // ascending network address
    std::set<std::pair<std::string, std::uint32_t>> undisturbed;  // staged probes
    // per-index neighbor lists
    std::vector<std::vector<std::size_t>> providers_of, customers_of, peers_of;
    std::vector<detail::RouteCell> route;  // origin-major n*n lattice
};

struct GroundTruth {
    MappingTable mapping;  // operator of every materialized address
    std::map<std::pair<std::string, std::uint32_t>, TruthLabel> labels;
    std::vector<EventRecord> events;
};

struct SynthOutput {
    SynthWorld world;
    GroundTruth truth;
};

namespace detail {

inline const RouteCell& cell(const SynthWorld& w, std::size_t origin, std::size_t at) {
    return w.route[origin * w.ases.size() + at];
}

inline int best_class(const RouteCell& c) {
    if (c.dn_len >= 0) return 0;
    if (c.pr_len >= 0) return 1;
    if (c.up_len >= 0) return 2;
    return -1;
}

inline int best_len(const RouteCell& c) {
    int b = best_class(c);
    if (b == 0) return c.dn_len;
    if (b == 1) return c.pr_len;
    if (b == 2) return c.up_len;
    return -1;
}

}  // namespace detail

/// Selected policy path from `from` toward the networks of `origin`, both
/// endpoints included. Empty when unreachable.
inline std::vector<Asn> control_path(const SynthWorld& w, Asn from, Asn origin) {
    auto fi = w.index.find(from);
    auto oi = w.index.find(origin);
    if (fi == w.index.end() || oi == w.index.end()) return {};
    std::size_t cur = fi->second, dst = oi->second;
    std::vector<Asn> out{from};
    int mode = detail::best_class(detail::cell(w, dst, cur));
    if (mode < 0) return {};
    while (cur != dst) {
        const auto& c = detail::cell(w, dst, cur);
        Asn nxt = 0;
        if (mode == 0) {
            nxt = c.dn;
        } else if (mode == 1) {
            nxt = c.pr;
            mode = 0;  // a peer hands over only customer-learned routes
        } else {
            nxt = c.up;
            mode = detail::best_class(detail::cell(w, dst, w.index.at(nxt)));
        }
        out.push_back(nxt);
        cur = w.index.at(nxt);
        if (out.size() > w.ases.size() + 1) return {};
    }
    return out;
}

/// Announcing network of the covering block, zero when none covers.
inline Asn announced_origin(const SynthWorld& w, Ipv4 ip) {
    for (const auto& [p, a] : w.announced)
        if (p.contains(ip)) return a;
    return 0;
}

inline RelDb rel_db(const SynthWorld& w) {
    RelDb db;
    for (const auto& l : w.links) {
        if (l.provider == 0) db.add_p2p(l.u, l.v);
        else db.add_p2c(l.provider, l.provider == l.u ? l.v : l.u);
    }
    for (const auto& a : w.ases) db.add_org(a.asn, a.org);
    return db;
}

inline IxpDb fabric_db(const SynthWorld& w) {
    IxpDb db;
    for (const auto& f : w.fabrics) {
        db.add_prefix(f.prefix);
        db.add_asn(f.asn);
    }
    return db;
}

inline RoaDb roa_db(const SynthWorld& w) {
    RoaDb db;
    for (const auto& [p, a] : w.announced) db.add(RoaRecord{p, p.len, a});
    return db;
}

/// Every probed host address, ascending.
inline std::vector<Ipv4> trace_targets(const SynthWorld& w) {
    std::vector<Ipv4> out;
    for (const auto& a : w.ases)
        for (const auto& p : a.prefixes) out.push_back(Ipv4{p.net + 7});
    std::sort(out.begin(), out.end());
    return out;
}

namespace detail {

// Forwarding AS walk for one probe, honoring staged diversions. Returns the
// path and whether the last network sinks the probe.
inline std::pair<std::vector<Asn>, bool> forward_path(const SynthWorld& w, std::size_t vp,
                                                      Ipv4 dst) {
    for (const auto& h : w.hijacks)
        if (h.sub.contains(dst)) return {h.vp_paths[vp], h.diverted[vp]};
    Asn a0 = w.vps[vp].second;
    for (const auto& d : w.detours)
        if (d.vp == vp && d.dsts.count(dst.v)) {
            std::vector<Asn> out{a0};
            auto rest = control_path(w, d.via, announced_origin(w, dst));
            out.insert(out.end(), rest.begin(), rest.end());
            return {out, false};
        }
    for (const auto& g : w.aggs)
        if (g.deleg.contains(dst)) {
            auto out = control_path(w, a0, g.top);
            out.push_back(g.mid);
            out.push_back(g.leaf);
            return {out, false};
        }
    return {control_path(w, a0, announced_origin(w, dst)), false};
}

inline Ipv4 entry_interface(const SynthWorld& w, Asn from, Asn into) {
    const SynthLink& l = w.links[w.link_at.at({std::min(from, into), std::max(from, into)})];
    return into == l.u ? l.if_u : l.if_v;
}

}  // namespace detail

/// Simulates one probe run. Hop answers walk the probing network's gateway,
/// then each entered network's entry interface and optional interior router,
/// and close on the host itself unless the path ends in a sink.
inline RawTrace simulate_traceroute(const SynthWorld& w, std::size_t vp, Ipv4 dst) {
    auto [path, sink] = detail::forward_path(w, vp, dst);
    if (path.empty()) throw std::logic_error("probe target outside the world");
    const SynthAs& first = w.ases[w.index.at(path[0])];

    struct Slot {
        Ipv4 ip;
        Asn entered = 0;  // nonzero marks an entry interface
    };
    std::vector<Slot> slots{{first.gateway, 0}};
    for (std::size_t i = 1; i < path.size(); ++i) {
        const SynthAs& b = w.ases[w.index.at(path[i])];
        slots.push_back({detail::entry_interface(w, path[i - 1], path[i]), b.asn});
        if (b.emits_internal) slots.push_back({b.internal, 0});
    }

    RawTrace t;
    t.timestamp = 0;
    t.src = first.probe;
    t.dst = dst;

    bool noisy = (w.cfg.p_unresponsive > 0.0 || w.cfg.p_third_party > 0.0) &&
                 w.undisturbed.count({w.vps[vp].first, dst.v}) == 0;
    std::mt19937_64 rng(detail::mix(detail::mix(w.cfg.seed, vp), dst.v));
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    std::set<std::uint32_t> used;
    for (const auto& s : slots) used.insert(s.ip.v);
    used.insert(dst.v);

    // the destination network's interior router always answers; were it to
    // drop out between its entry hop and the host, the run would read as two
    // separate visits to that network
    std::size_t keep = slots.size();
    if (!sink && path.size() >= 2 && w.ases[w.index.at(path.back())].emits_internal)
        keep = slots.size() - 1;

    for (std::size_t si = 0; si < slots.size(); ++si) {
        const auto& s = slots[si];
        RawHop h;
        Ipv4 answer = s.ip;
        bool drop = noisy && u01(rng) < w.cfg.p_unresponsive && si != keep;
        if (!drop && noisy && s.entered != 0 && u01(rng) < w.cfg.p_third_party) {
            // the border router replies from one of its other interfaces
            const SynthAs& b = w.ases[w.index.at(s.entered)];
            std::vector<Ipv4> alt;
            if (b.emits_internal) alt.push_back(b.internal);
            for (const auto& l : w.links) {
                Ipv4 side;
                if (l.u == b.asn) side = l.if_u;
                else if (l.v == b.asn) side = l.if_v;
                else continue;
                if (side != s.ip) alt.push_back(side);
            }
            if (!alt.empty()) {
                Ipv4 pick = alt[rng() % alt.size()];
                if (used.insert(pick.v).second) answer = pick;
            }
        }
        if (!drop) h.ips.push_back(answer);
        t.hops.push_back(std::move(h));
    }

    RawHop last;
    if (!sink) {
        bool drop = noisy && u01(rng) < w.cfg.p_unresponsive;
        if (!drop) last.ips.push_back(dst);
    }
    t.hops.push_back(std::move(last));
    return t;
}

inline std::vector<RawTrace> simulate_all(const SynthWorld& w, std::size_t vp,
                                          unsigned jobs = 1) {
    auto targets = trace_targets(w);
    return parallel_map<RawTrace>(targets.size(), jobs, [&](std::size_t i) {
        return simulate_traceroute(w, vp, targets[i]);
    });
}

/// Control table of one vantage: a route for every announced block, plus any
/// staged pollution, minus networks scrubbed by a forged shortcut.
inline std::vector<RibEntry> compute_routes(const SynthWorld& w, std::size_t vp) {
    Asn a0 = w.vps[vp].second;
    std::vector<RibEntry> out;
    for (const auto& as : w.ases)
        for (const auto& p : as.prefixes) {
            auto path = control_path(w, a0, as.asn);
            if (path.empty()) continue;
            for (const auto& b : w.bogus) {
                if (as.asn != b.y) continue;
                for (std::size_t i = 0; i + 2 < path.size(); ++i)
                    if (path[i] == b.x && path[i + 1] == b.m && path[i + 2] == b.y) {
                        path.erase(path.begin() + static_cast<std::ptrdiff_t>(i) + 1);
                        break;
                    }
            }
            out.push_back(RibEntry{0, p, std::move(path)});
        }
    for (const auto& h : w.hijacks)
        if (h.polluted == vp)
            out.push_back(RibEntry{0, h.sub, control_path(w, a0, h.hijacker)});
    return out;
}

/// Corrupts an exact share of rows: most flips reassign the address to a
/// related network of the true operator, the rest drop to unmapped. Row
/// choice and replacements depend only on the seed.
inline MappingTable noisy_mapping(const MappingTable& truth, const RelDb& rels,
                                  double fraction, std::uint64_t seed) {
    auto rows = truth.sorted_rows();
    std::vector<std::size_t> idx(rows.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    std::size_t flips = static_cast<std::size_t>(fraction * static_cast<double>(rows.size()) + 1e-9);
    MappingTable out;
    for (const auto& [ip, ans] : rows) out.set(ip, ans);
    for (std::size_t k = 0; k < flips && k < idx.size(); ++k) {
        const auto& [ip, ans] = rows[idx[k]];
        if (ans.kind != MapAnswer::Concrete || u01(rng) < 0.15) {
            out.set(ip, MapAnswer::unmap());
            continue;
        }
        std::set<Asn> near;
        for (Asn a : rels.providers_of(ans.asn)) near.insert(a);
        for (Asn a : rels.customers_of(ans.asn)) near.insert(a);
        for (Asn a : rels.peers_of(ans.asn)) near.insert(a);
        for (Asn a : rels.siblings_of(ans.asn)) near.insert(a);
        near.erase(ans.asn);
        if (near.empty()) {
            out.set(ip, MapAnswer::unmap());
            continue;
        }
        auto it = near.begin();
        std::advance(it, static_cast<std::ptrdiff_t>(rng() % near.size()));
        out.set(ip, MapAnswer::concrete(*it));
    }
    return out;
}

namespace detail {

class WorldBuilder {
public:
    explicit WorldBuilder(const ScenarioConfig& cfg) : rng_(cfg.seed) {
        w_.cfg = cfg;
        out_.world.cfg = cfg;
    }

    SynthOutput build() {
        make_ases();
        make_links();
        make_prefixes();
        make_addresses();
        make_routes();
        make_vps();
        make_events();
        make_labels();
        out_.world = std::move(w_);
        return std::move(out_);
    }

private:
    double roll() { return u01_(rng_); }

    std::size_t pick(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }

    Prefix alloc_block() {
        if (next_block_ >= 65536) throw std::runtime_error("address space exhausted");
        Prefix p(Ipv4{0x0a000000u | (static_cast<std::uint32_t>(next_block_) << 8)}, 24);
        ++next_block_;
        return p;
    }

    void make_ases() {
        const auto& tiers = w_.cfg.tier_counts;
        Asn next = 101;
        for (std::size_t t = 0; t < tiers.size(); ++t)
            for (std::size_t i = 0; i < tiers[t]; ++i) {
                SynthAs a;
                a.asn = next++;
                a.tier = t;
                a.org = "org" + std::to_string(a.asn);
                w_.ases.push_back(std::move(a));
            }
        for (std::size_t i = 0; i < w_.ases.size(); ++i) w_.index[w_.ases[i].asn] = i;
        // org fusion: a network may share its operator with an earlier
        // same-tier one
        std::vector<std::vector<std::size_t>> by_tier(tiers.size());
        for (std::size_t i = 0; i < w_.ases.size(); ++i) by_tier[w_.ases[i].tier].push_back(i);
        for (std::size_t i = 0; i < w_.ases.size(); ++i) {
            double r = roll();
            auto& mates = by_tier[w_.ases[i].tier];
            if (w_.ases[i].tier == 0 || mates.front() == i) continue;
            if (r < w_.cfg.p_sibling) {
                std::size_t j = mates[pick(static_cast<std::size_t>(
                    std::find(mates.begin(), mates.end(), i) - mates.begin()))];
                w_.ases[i].org = w_.ases[j].org;
            }
        }
    }

    void add_link(std::size_t i, std::size_t j, Asn provider) {
        Asn a = w_.ases[i].asn, b = w_.ases[j].asn;
        SynthLink l;
        l.u = std::min(a, b);
        l.v = std::max(a, b);
        l.provider = provider;
        auto key = std::make_pair(l.u, l.v);
        if (w_.link_at.count(key)) return;
        w_.link_at[key] = w_.links.size();
        w_.links.push_back(l);
    }

    void make_links() {
        const auto& tiers = w_.cfg.tier_counts;
        std::vector<std::vector<std::size_t>> by_tier(tiers.size());
        for (std::size_t i = 0; i < w_.ases.size(); ++i) by_tier[w_.ases[i].tier].push_back(i);
        // full mesh at the top
        for (std::size_t a = 0; a < by_tier[0].size(); ++a)
            for (std::size_t b = a + 1; b < by_tier[0].size(); ++b)
                add_link(by_tier[0][a], by_tier[0][b], 0);
        // one or two transit sellers from the tier directly above
        for (std::size_t t = 1; t < tiers.size(); ++t) {
            const auto& upper = by_tier[t - 1];
            for (std::size_t i : by_tier[t]) {
                std::size_t count = 1;
                if (roll() < 0.35 && upper.size() >= 2) count = 2;
                std::set<std::size_t> chosen;
                while (chosen.size() < count) chosen.insert(upper[pick(upper.size())]);
                for (std::size_t p : chosen) add_link(i, p, w_.ases[p].asn);
            }
        }
        // extra same-tier peerings below the top
        for (std::size_t t = 1; t < tiers.size(); ++t) {
            const auto& mates = by_tier[t];
            for (std::size_t a = 0; a < mates.size(); ++a)
                for (std::size_t b = a + 1; b < mates.size(); ++b)
                    if (roll() < w_.cfg.p2p_density) add_link(mates[a], mates[b], 0);
        }
        // canonical order, then rebuild the lookup
        std::sort(w_.links.begin(), w_.links.end(),
                  [](const SynthLink& x, const SynthLink& y) {
                      return std::tie(x.u, x.v) < std::tie(y.u, y.v);
                  });
        w_.link_at.clear();
        for (std::size_t i = 0; i < w_.links.size(); ++i)
            w_.link_at[{w_.links[i].u, w_.links[i].v}] = i;
        w_.providers_of.assign(w_.ases.size(), {});
        w_.customers_of.assign(w_.ases.size(), {});
        w_.peers_of.assign(w_.ases.size(), {});
        for (const auto& l : w_.links) {
            std::size_t iu = w_.index[l.u], iv = w_.index[l.v];
            if (l.provider == 0) {
                w_.peers_of[iu].push_back(iv);
                w_.peers_of[iv].push_back(iu);
            } else if (l.provider == l.u) {
                w_.providers_of[iv].push_back(iu);
                w_.customers_of[iu].push_back(iv);
            } else {
                w_.providers_of[iu].push_back(iv);
                w_.customers_of[iv].push_back(iu);
            }
        }
        for (auto* lists : {&w_.providers_of, &w_.customers_of, &w_.peers_of})
            for (auto& v : *lists) std::sort(v.begin(), v.end());
    }

    void make_prefixes() {
        std::size_t span = w_.cfg.max_prefixes_per_as - w_.cfg.min_prefixes_per_as + 1;
        for (auto& a : w_.ases) {
            std::size_t n = w_.cfg.min_prefixes_per_as + pick(span);
            for (std::size_t i = 0; i < n; ++i) a.prefixes.push_back(alloc_block());
        }
        if (w_.cfg.p_ixp > 0.0) {
            IxpFabric f;
            f.asn = 64000;
            f.prefix = alloc_block();
            w_.fabrics.push_back(std::move(f));
        }
    }

    Ipv4 fabric_addr(Asn member) {
        IxpFabric& f = w_.fabrics[0];
        auto it = f.member_addr.find(member);
        if (it != f.member_addr.end()) return it->second;
        Ipv4 ip{f.prefix.net + 1 + static_cast<std::uint32_t>(f.member_addr.size())};
        f.member_addr[member] = ip;
        set_truth(ip, member);
        return ip;
    }

    // next /30 inside the network's house space, growing it when full
    Ipv4 slot30(std::size_t idx) {
        auto& cur = cursor_[idx];
        if (cur.first == 0 || cur.second > 244) {
            SynthAs& a = w_.ases[idx];
            if (cur.first == 0) {
                cur.first = a.prefixes[0].net;
            } else {
                Prefix fresh = alloc_block();
                a.prefixes.push_back(fresh);
                cur.first = fresh.net;
            }
            cur.second = 4;
        }
        Ipv4 base{cur.first + cur.second};
        cur.second += 4;
        return base;
    }

    void set_truth(Ipv4 ip, Asn owner) { out_.truth.mapping.set(ip, MapAnswer::concrete(owner)); }

    void make_addresses() {
        for (std::size_t i = 0; i < w_.ases.size(); ++i) {
            SynthAs& a = w_.ases[i];
            a.gateway = Ipv4{a.prefixes[0].net + 254};
            a.probe = Ipv4{a.prefixes[0].net + 250};
            a.emits_internal = roll() < w_.cfg.p_internal_hop;
            // interior router address, sometimes numbered from sibling space
            double sib = roll();
            std::size_t home = i;
            if (sib < w_.cfg.p_sibling) {
                for (std::size_t j = 0; j < w_.ases.size(); ++j)
                    if (j != i && w_.ases[j].org == a.org) {
                        home = j;
                        break;
                    }
            }
            a.internal = Ipv4{slot30(home).v + 1};
            set_truth(a.gateway, a.asn);
            set_truth(a.probe, a.asn);
            set_truth(a.internal, a.asn);
        }
        for (auto& l : w_.links) {
            double fab = roll();
            double borrow = roll();
            if (l.provider == 0 && !w_.fabrics.empty() && fab < w_.cfg.p_ixp) {
                l.fabric = true;
                l.if_u = fabric_addr(l.u);
                l.if_v = fabric_addr(l.v);
                continue;
            }
            Asn owner = l.provider == 0 ? l.u : l.provider;
            Asn other = owner == l.u ? l.v : l.u;
            if (l.provider != 0 && borrow >= w_.cfg.p_borrow) {
                // no borrowing: each side numbers its own end
                Ipv4 own_side{slot30(w_.index[owner]).v + 1};
                Ipv4 far_side{slot30(w_.index[other]).v + 1};
                l.if_u = l.u == owner ? own_side : far_side;
                l.if_v = l.v == owner ? own_side : far_side;
            } else {
                Ipv4 base = slot30(w_.index[owner]);
                Ipv4 own_side{base.v + 1}, far_side{base.v + 2};
                l.if_u = l.u == owner ? own_side : far_side;
                l.if_v = l.v == owner ? own_side : far_side;
            }
            set_truth(l.if_u, l.u);
            set_truth(l.if_v, l.v);
        }
        for (const auto& a : w_.ases)
            for (const auto& p : a.prefixes) w_.announced.push_back({p, a.asn});
        std::sort(w_.announced.begin(), w_.announced.end());
    }

    void make_routes() {
        std::size_t n = w_.ases.size();
        w_.route.assign(n * n, RouteCell{});
        for (std::size_t o = 0; o < n; ++o) {
            RouteCell* cells = &w_.route[o * n];
            cells[o].dn_len = 0;
            // customer-learned: climb provider edges breadth-first, lowest
            // next-hop ASN winning each layer
            std::vector<std::size_t> frontier{o};
            for (std::int16_t len = 1; !frontier.empty(); ++len) {
                std::map<std::size_t, Asn> staged;
                for (std::size_t x : frontier)
                    for (std::size_t p : w_.providers_of[x]) {
                        if (cells[p].dn_len >= 0) continue;
                        Asn via = w_.ases[x].asn;
                        auto [it, fresh] = staged.emplace(p, via);
                        if (!fresh && via < it->second) it->second = via;
                    }
                frontier.clear();
                for (const auto& [p, via] : staged) {
                    cells[p].dn_len = len;
                    cells[p].dn = via;
                    frontier.push_back(p);
                }
            }
            // peer-learned: one hop over a peering into the customer lattice
            for (std::size_t x = 0; x < n; ++x) {
                for (std::size_t u : w_.peers_of[x]) {
                    if (cells[u].dn_len < 0) continue;
                    std::int16_t len = static_cast<std::int16_t>(cells[u].dn_len + 1);
                    Asn via = w_.ases[u].asn;
                    if (cells[x].pr_len < 0 || len < cells[x].pr_len ||
                        (len == cells[x].pr_len && via < cells[x].pr))
                        cells[x].pr_len = len, cells[x].pr = via;
                }
            }
            // provider-learned: walk tiers downward, providers already final
            for (std::size_t x = 0; x < n; ++x) {
                for (std::size_t v : w_.providers_of[x]) {
                    int bl = best_len(cells[v]);
                    if (bl < 0) continue;
                    std::int16_t len = static_cast<std::int16_t>(bl + 1);
                    Asn via = w_.ases[v].asn;
                    if (cells[x].up_len < 0 || len < cells[x].up_len ||
                        (len == cells[x].up_len && via < cells[x].up))
                        cells[x].up_len = len, cells[x].up = via;
                }
            }
        }
    }

    void make_vps() {
        if (w_.cfg.vp_count > w_.ases.size())
            throw std::invalid_argument("more vantages than networks");
        std::vector<std::size_t> pool;
        for (std::size_t t = w_.cfg.tier_counts.size(); t-- > 0;)
            for (std::size_t i = 0; i < w_.ases.size(); ++i)
                if (w_.ases[i].tier == t) pool.push_back(i);
        std::size_t bottom = 0;
        for (std::size_t i = 0; i < w_.ases.size(); ++i)
            if (w_.ases[i].tier + 1 == w_.cfg.tier_counts.size()) ++bottom;
        std::vector<std::size_t> chosen;
        if (bottom >= w_.cfg.vp_count) {
            for (std::size_t k = 0; k < w_.cfg.vp_count; ++k)
                chosen.push_back(pool[k * bottom / w_.cfg.vp_count]);
        } else {
            for (std::size_t k = 0; k < w_.cfg.vp_count; ++k) chosen.push_back(pool[k]);
        }
        std::sort(chosen.begin(), chosen.end());
        for (std::size_t k = 0; k < chosen.size(); ++k)
            w_.vps.push_back({"vp" + std::to_string(k), w_.ases[chosen[k]].asn});
    }

    bool is_stub(std::size_t i) const { return w_.customers_of[i].empty(); }

    bool is_vp_as(Asn a) const {
        for (const auto& [name, asn] : w_.vps)
            if (asn == a) return true;
        return false;
    }

    void claim_targets(const Prefix& p) {
        claimed_.insert(p);
        for (const auto& [name, asn] : w_.vps) w_.undisturbed.insert({name, p.net + 7});
    }

    bool prefix_free(const Prefix& p) const {
        for (const auto& c : claimed_)
            if (c.covers(p) || p.covers(c)) return false;
        for (const auto& d : w_.detours)
            if (d.dsts.count(p.net + 7)) return false;
        return true;
    }

    // vps whose route to the bait runs entry -> middleman -> bait, i.e. the
    // ones whose table shows the doctored hop once the middleman is spliced out
    std::vector<std::size_t> bogus_affected(Asn x, Asn m, Asn y) const {
        std::vector<std::size_t> hit;
        for (std::size_t k = 0; k < w_.vps.size(); ++k) {
            auto path = control_path(w_, w_.vps[k].second, y);
            for (std::size_t j = 0; j + 2 < path.size(); ++j)
                if (path[j] == x && path[j + 1] == m && path[j + 2] == y) {
                    hit.push_back(k);
                    break;
                }
        }
        return hit;
    }

    void make_events() {
        for (const auto& spec : w_.cfg.events)
            for (std::size_t k = 0; k < spec.count; ++k) place(spec);
    }

    void place(const EventSpec& spec) {
        switch (spec.kind) {
            case EventKind::HiddenHijack: return place_hijack();
            case EventKind::BogusLinkInterception: return place_bogus();
            case EventKind::Aggregation: return place_agg();
            case EventKind::DefaultRouteDetour: return place_detour(spec.fraction);
        }
    }

    [[noreturn]] void unplaceable(const char* what) {
        throw std::runtime_error(std::string("cannot place ") + what +
                                 " event in this world");
    }

    // The victim and the impostor are single-provider stubs under the same
    // waypoint, so any route to either one runs through the waypoint unless
    // it is a direct peering hop. Probes crossing a network that carries the
    // finer forged route get pulled over; their forwarding then shadows the
    // advertised path until the final network swap.
    void place_hijack() {
        if (w_.vps.size() < 2) unplaceable("takeover");
        std::size_t n = w_.ases.size();
        std::size_t start = pick(n);
        std::size_t polluted = pick(w_.vps.size());
        for (std::size_t s = 0; s < n; ++s) {
            std::size_t vi = (start + s) % n;
            const SynthAs& victim = w_.ases[vi];
            if (!is_stub(vi) || w_.providers_of[vi].size() != 1) continue;
            if (is_vp_as(victim.asn) || used_.count(victim.asn)) continue;
            if (!prefix_free(victim.prefixes[0])) continue;
            std::size_t xi = w_.providers_of[vi][0];
            Asn x = w_.ases[xi].asn;
            Asn hijacker = 0;
            for (std::size_t hc : w_.customers_of[xi]) {
                const SynthAs& h = w_.ases[hc];
                if (!is_stub(hc) || w_.providers_of[hc].size() != 1) continue;
                if (h.asn == victim.asn || is_vp_as(h.asn)) continue;
                if (used_.count(h.asn) || h.org == victim.org) continue;
                hijacker = h.asn;
                break;
            }
            if (hijacker == 0) continue;

            std::set<Asn> holders{x};
            for (Asn a : control_path(w_, w_.vps[polluted].second, hijacker))
                holders.insert(a);

            HijackPlan plan;
            plan.parent = victim.prefixes[0];
            plan.sub = Prefix(Ipv4{plan.parent.net}, 25);
            plan.victim = victim.asn;
            plan.hijacker = hijacker;
            plan.waypoint = x;
            plan.polluted = polluted;
            std::size_t witnesses = 0;
            for (std::size_t k = 0; k < w_.vps.size(); ++k) {
                auto vroute = control_path(w_, w_.vps[k].second, victim.asn);
                std::size_t f = 0;
                while (f < vroute.size() && !holders.count(vroute[f])) ++f;
                if (f == vroute.size()) {  // never meets the forged route
                    plan.vp_paths.push_back(std::move(vroute));
                    plan.diverted.push_back(false);
                    continue;
                }
                std::vector<Asn> walk(vroute.begin(),
                                      vroute.begin() + static_cast<std::ptrdiff_t>(f));
                auto tail = control_path(w_, vroute[f], hijacker);
                walk.insert(walk.end(), tail.begin(), tail.end());
                plan.vp_paths.push_back(std::move(walk));
                plan.diverted.push_back(true);
                if (k != polluted) ++witnesses;
            }
            if (witnesses == 0) continue;  // nobody left to notice

            used_.insert(victim.asn);
            used_.insert(hijacker);
            claim_targets(plan.parent);
            out_.truth.events.push_back({EventKind::HiddenHijack, plan.victim, plan.hijacker,
                                         plan.waypoint, plan.parent, plan.sub,
                                         w_.vps[plan.polluted].first, 0});
            w_.hijacks.push_back(std::move(plan));
            return;
        }
        unplaceable("takeover");
    }

    void place_bogus() {
        std::size_t witness = pick(w_.vps.size());
        Asn w_as = w_.vps[witness].second;
        std::size_t n = w_.ases.size();
        std::size_t start = pick(n);
        for (std::size_t s = 0; s < n; ++s) {
            std::size_t mi = (start + s) % n;
            const SynthAs& m = w_.ases[mi];
            if (w_.providers_of[mi].empty() || w_.customers_of[mi].empty()) continue;
            if (used_.count(m.asn) || is_vp_as(m.asn)) continue;
            if (m.asn == w_as) continue;
            auto wpath = control_path(w_, w_as, m.asn);
            if (wpath.size() < 2) continue;
            Asn x = wpath[wpath.size() - 2];
            // its interior hop is shared by every transit, so that address is
            // what keeps the doctored pairs outvoted
            if (!m.emits_internal) continue;
            std::size_t transit = 0;
            for (const auto& [vn, a0] : w_.vps)
                for (const auto& o : w_.ases) {
                    if (o.prefixes.empty()) continue;
                    auto path = control_path(w_, a0, o.asn);
                    if (std::find(path.begin(), path.end(), m.asn) != path.end())
                        transit += o.prefixes.size();
                }
            for (std::size_t yi : w_.customers_of[mi]) {
                // the claimed shortcut must not exist for real
                Asn ylo = std::min(x, w_.ases[yi].asn), yhi = std::max(x, w_.ases[yi].asn);
                if (w_.link_at.count({ylo, yhi})) continue;
                const SynthAs& y = w_.ases[yi];
                if (!is_stub(yi) || w_.providers_of[yi].size() != 1) continue;
                if (is_vp_as(y.asn) || used_.count(y.asn)) continue;
                bool free = true;
                for (const auto& p : y.prefixes) free = free && prefix_free(p);
                if (!free) continue;
                // someone must actually advertise the doctored route, and the
                // honest transits must outnumber those pairs by enough to
                // survive probe loss and the other planted anomalies
                auto affected = bogus_affected(x, m.asn, y.asn);
                if (affected.empty()) continue;
                std::size_t bait = affected.size() * y.prefixes.size();
                if (transit - bait <= 2 * bait + 8) continue;
                used_.insert(m.asn);
                used_.insert(y.asn);
                for (const auto& p : y.prefixes) claim_targets(p);
                w_.bogus.push_back({x, m.asn, y.asn});
                out_.truth.events.push_back({EventKind::BogusLinkInterception, x, m.asn,
                                             y.asn, std::nullopt, std::nullopt, "", 0});
                return;
            }
        }
        unplaceable("forged shortcut");
    }

    void place_agg() {
        std::size_t n = w_.ases.size();
        std::size_t start = pick(n);
        std::size_t provider_roll = pick(64);
        for (std::size_t s = 0; s < n; ++s) {
            std::size_t mi = (start + s) % n;
            const SynthAs& m = w_.ases[mi];
            if (w_.providers_of[mi].empty() || w_.customers_of[mi].empty()) continue;
            if (used_.count(m.asn) || is_vp_as(m.asn)) continue;
            std::size_t np = w_.providers_of[mi].size();
            for (std::size_t pr = 0; pr < np; ++pr) {
                Asn top = w_.ases[w_.providers_of[mi][(provider_roll + pr) % np]].asn;
                // no vantage may route to the announcer through the middleman,
                // or its forwarding to the delegated block would revisit it
                bool tainted = false;
                for (const auto& [name, a0] : w_.vps) {
                    auto path = control_path(w_, a0, top);
                    if (std::find(path.begin(), path.end(), m.asn) != path.end())
                        tainted = true;
                }
                if (tainted) continue;
                for (std::size_t ci : w_.customers_of[mi]) {
                    const SynthAs& c = w_.ases[ci];
                    if (is_vp_as(c.asn) || used_.count(c.asn)) continue;
                    if (!is_stub(ci)) continue;
                    AggPlan plan;
                    plan.deleg = alloc_block();
                    plan.top = top;
                    plan.mid = m.asn;
                    plan.leaf = c.asn;
                    std::size_t ti = w_.index[top];
                    w_.ases[ti].prefixes.push_back(plan.deleg);
                    w_.announced.push_back({plan.deleg, top});
                    std::sort(w_.announced.begin(), w_.announced.end());
                    used_.insert(m.asn);
                    used_.insert(c.asn);
                    claim_targets(plan.deleg);
                    out_.truth.events.push_back({EventKind::Aggregation, top, m.asn, c.asn,
                                                 plan.deleg, std::nullopt, "", 0});
                    w_.aggs.push_back(std::move(plan));
                    return;
                }
            }
        }
        unplaceable("delegated announcement");
    }

    void place_detour(double fraction) {
        std::size_t start = pick(w_.vps.size());
        for (std::size_t s = 0; s < w_.vps.size(); ++s) {
            std::size_t vi = (start + s) % w_.vps.size();
            bool taken = false;
            for (const auto& d : w_.detours) taken = taken || d.vp == vi;
            if (taken) continue;
            Asn a0 = w_.vps[vi].second;
            std::size_t ai = w_.index[a0];
            std::vector<std::size_t> nbrs = w_.providers_of[ai];
            nbrs.insert(nbrs.end(), w_.peers_of[ai].begin(), w_.peers_of[ai].end());
            if (nbrs.size() < 2) continue;

            std::map<Asn, std::size_t> usage;
            std::vector<std::pair<Ipv4, Asn>> nexts;
            for (Ipv4 t : trace_targets(w_)) {
                Asn o = announced_origin(w_, t);
                auto path = control_path(w_, a0, o);
                if (path.size() < 2) continue;
                usage[path[1]] += 1;
                nexts.push_back({t, path[1]});
            }
            // the override target must keep carrying a clear majority of its
            // advertised routes, or single-point screening would tip over
            Asn via = 0;
            std::size_t via_count = 0;
            for (std::size_t pi : nbrs) {
                Asn p = w_.ases[pi].asn;
                auto it = usage.find(p);
                std::size_t c = it == usage.end() ? 0 : it->second;
                if (c >= 2 && c > via_count) via = p, via_count = c;
            }
            if (via == 0) continue;

            std::vector<std::uint32_t> eligible;
            for (const auto& [t, nx] : nexts) {
                if (nx == via) continue;
                bool banned = false;
                for (const auto& c : claimed_) banned = banned || c.contains(t);
                if (banned || w_.undisturbed.count({w_.vps[vi].first, t.v})) continue;
                auto alt = control_path(w_, via, announced_origin(w_, t));
                if (std::find(alt.begin(), alt.end(), a0) != alt.end()) continue;
                eligible.push_back(t.v);
            }
            std::size_t want = static_cast<std::size_t>(
                fraction * static_cast<double>(eligible.size()) + 1e-9);
            std::size_t k = std::min({std::max<std::size_t>(want, 1), via_count - 1,
                                      eligible.size()});
            if (k == 0) continue;
            std::shuffle(eligible.begin(), eligible.end(), rng_);
            DetourPlan plan;
            plan.vp = vi;
            plan.via = via;
            plan.dsts.insert(eligible.begin(), eligible.begin() +
                                                   static_cast<std::ptrdiff_t>(k));
            for (std::uint32_t d : plan.dsts) w_.undisturbed.insert({w_.vps[vi].first, d});
            out_.truth.events.push_back({EventKind::DefaultRouteDetour, a0, via, 0,
                                         std::nullopt, std::nullopt, w_.vps[vi].first, k});
            w_.detours.push_back(std::move(plan));
            return;
        }
        unplaceable("static detour");
    }

    void make_labels() {
        auto targets = trace_targets(w_);
        for (Ipv4 t : targets) {
            Asn owner = announced_origin(w_, t);
            for (const auto& g : w_.aggs)
                if (g.deleg.contains(t)) owner = g.leaf;
            set_truth(t, owner);
        }
        for (const auto& [name, a0] : w_.vps)
            for (Ipv4 t : targets) out_.truth.labels[{name, t.v}] = TruthLabel::Clean;
        for (const auto& g : w_.aggs)
            for (const auto& [name, a0] : w_.vps)
                out_.truth.labels[{name, g.deleg.net + 7}] = TruthLabel::Protruding;
        for (const auto& b : w_.bogus) {
            const SynthAs& y = w_.ases[w_.index[b.y]];
            for (std::size_t k : bogus_affected(b.x, b.m, b.y))
                for (const auto& p : y.prefixes)
                    out_.truth.labels[{w_.vps[k].first, p.net + 7}] = TruthLabel::Detouring;
        }
        for (const auto& d : w_.detours)
            for (std::uint32_t t : d.dsts)
                out_.truth.labels[{w_.vps[d.vp].first, t}] = TruthLabel::Detouring;
        // the polluted vantage is the one place the forged route is visible,
        // so its table agrees with its forwarding and the pair stays clean
        for (const auto& h : w_.hijacks)
            for (std::size_t i = 0; i < w_.vps.size(); ++i)
                out_.truth.labels[{w_.vps[i].first, h.parent.net + 7}] =
                    h.diverted[i] && i != h.polluted ? TruthLabel::Branching
                                                     : TruthLabel::Clean;
    }

    SynthWorld w_;
    SynthOutput out_;
    std::mt19937_64 rng_;
    std::uniform_real_distribution<double> u01_{0.0, 1.0};
    std::size_t next_block_ = 0;
    std::map<std::size_t, std::pair<std::uint32_t, std::uint32_t>> cursor_;
    std::set<Asn> used_;
    std::set<Prefix> claimed_;
};

}  // namespace detail

inline SynthOutput generate_world(const ScenarioConfig& cfg) {
    validate_config(cfg);
    detail::WorldBuilder b(cfg);
    return b.build();
}

namespace detail {

inline std::string format_raw_traces(const std::vector<RawTrace>& traces) {
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
            if (t.hops[i].ips.empty()) {
                out += '*';
            } else {
                for (std::size_t k = 0; k < t.hops[i].ips.size(); ++k) {
                    if (k) out += ';';
                    out += format_ipv4(t.hops[i].ips[k]);
                }
            }
        }
        out += '\n';
    }
    return out;
}

inline std::string format_rib(const std::vector<RibEntry>& entries) {
    std::string out;
    for (const auto& e : entries) {
        out += std::to_string(e.timestamp);
        out += '|';
        out += format_prefix(e.prefix);
        out += '|';
        for (std::size_t i = 0; i < e.as_path.size(); ++i) {
            if (i) out += ' ';
            out += std::to_string(e.as_path[i]);
        }
        out += '\n';
    }
    return out;
}

}  // namespace detail

/// Writes the full corpus: a routing table and probe file per vantage, the
/// relationship, org, authorization and exchange registries, the operator
/// truth table, and the staged-event ledger.
inline void write_world(const SynthOutput& out, const std::string& dir, unsigned jobs = 1) {
    namespace fs = std::filesystem;
    const SynthWorld& w = out.world;
    fs::create_directories(dir);
    auto at = [&](const std::string& name) { return (fs::path(dir) / name).string(); };

    for (std::size_t i = 0; i < w.vps.size(); ++i) {
        const std::string& name = w.vps[i].first;
        write_file(at("rib_" + name + ".txt"), detail::format_rib(compute_routes(w, i)));
        write_file(at("traces_" + name + ".txt"),
                   detail::format_raw_traces(simulate_all(w, i, jobs)));
    }

    std::string rel;
    for (const auto& l : w.links) {
        if (l.provider == 0) {
            rel += std::to_string(l.u) + "|" + std::to_string(l.v) + "|0\n";
        } else {
            Asn cust = l.provider == l.u ? l.v : l.u;
            rel += std::to_string(l.provider) + "|" + std::to_string(cust) + "|-1\n";
        }
    }
    write_file(at("rel.txt"), rel);

    std::string orgs;
    for (const auto& a : w.ases) orgs += std::to_string(a.asn) + "|" + a.org + "\n";
    write_file(at("orgs.txt"), orgs);

    std::string roa;
    for (const auto& [p, a] : w.announced)
        roa += format_prefix(p) + "|" + std::to_string(p.len) + "|" + std::to_string(a) + "\n";
    write_file(at("roa.txt"), roa);

    std::string ixp;
    for (const auto& f : w.fabrics) {
        ixp += "P|" + format_prefix(f.prefix) + "\n";
        ixp += "A|" + std::to_string(f.asn) + "\n";
    }
    write_file(at("ixp.txt"), ixp);

    write_file(at("truth_mapping.txt"), format_mapping(out.truth.mapping));

    std::string vps;
    for (const auto& [name, asn] : w.vps) vps += name + "|" + std::to_string(asn) + "\n";
    write_file(at("vps.txt"), vps);

    std::string ev = "kind,as_a,as_b,as_c,prefix_a,prefix_b,vp,count\n";
    for (const auto& e : out.truth.events) {
        ev += event_kind_name(e.kind);
        ev += ',' + std::to_string(e.a) + ',' + std::to_string(e.b) + ',' +
              std::to_string(e.c);
        ev += ',';
        ev += e.p1 ? format_prefix(*e.p1) : "-";
        ev += ',';
        ev += e.p2 ? format_prefix(*e.p2) : "-";
        ev += ',';
        ev += e.vp.empty() ? "-" : e.vp;
        ev += ',' + std::to_string(e.count) + '\n';
    }
    write_file(at("events.csv"), ev);
}

}  // namespace cdmatch
