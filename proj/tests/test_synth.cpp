#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "cdmatch/compare.hpp"
#include "cdmatch/features.hpp"
#include "cdmatch/ingest.hpp"
#include "cdmatch/mismatch.hpp"
#include "cdmatch/synth.hpp"

using namespace cdmatch;

namespace {

ScenarioConfig base_cfg(std::uint64_t seed, std::vector<std::size_t> tiers) {
    ScenarioConfig cfg;
    cfg.seed = seed;
    cfg.tier_counts = std::move(tiers);
    return cfg;
}

// Independent reference for route selection: iterate BGP-style export and
// selection to a fixed point. An AS exports its customer-learned and own
// routes to everyone but passes peer- or provider-learned routes only to
// customers; selection prefers customer over peer over provider routes, then
// shorter paths, then the lower next-hop ASN.
struct RefRoute {
    int cls = 3;  // 0 via customer, 1 via peer, 2 via provider, 3 unreachable
    std::vector<Asn> path;
};

int import_class(const SynthWorld& w, Asn x, Asn v) {
    auto it = w.link_at.find({std::min(x, v), std::max(x, v)});
    if (it == w.link_at.end()) return -1;
    const SynthLink& l = w.links[it->second];
    if (l.provider == 0) return 1;
    return l.provider == x ? 0 : 2;
}

std::map<Asn, RefRoute> ref_routes(const SynthWorld& w, Asn origin) {
    std::map<Asn, std::vector<Asn>> nbrs;
    for (const auto& l : w.links) {
        nbrs[l.u].push_back(l.v);
        nbrs[l.v].push_back(l.u);
    }
    for (auto& [a, v] : nbrs) std::sort(v.begin(), v.end());
    std::map<Asn, RefRoute> r;
    r[origin] = RefRoute{0, {origin}};
    auto key = [](const RefRoute& q) {
        return std::tuple<int, std::size_t, Asn>(q.cls, q.path.size(),
                                                 q.path.size() > 1 ? q.path[1] : 0);
    };
    for (int round = 0; round < 4096; ++round) {
        bool changed = false;
        for (const auto& as : w.ases) {
            Asn x = as.asn;
            if (x == origin) continue;
            for (Asn v : nbrs[x]) {
                auto it = r.find(v);
                if (it == r.end()) continue;
                RefRoute rv = it->second;
                if (v != origin && rv.cls != 0 && import_class(w, v, x) != 0)
                    continue;  // not exported to a peer or provider
                if (std::find(rv.path.begin(), rv.path.end(), x) != rv.path.end()) continue;
                RefRoute cand{import_class(w, x, v), {}};
                cand.path.push_back(x);
                cand.path.insert(cand.path.end(), rv.path.begin(), rv.path.end());
                auto& cur = r[x];
                if (cur.cls == 3 || key(cand) < key(cur)) {
                    cur = cand;
                    changed = true;
                }
            }
        }
        if (!changed) return r;
    }
    FAIL("route reference failed to converge");
    return r;
}

struct Corpus {
    std::vector<RibTable> ribs;
    std::vector<std::vector<CleanTrace>> traces;
    std::vector<PathPair> pairs;
};

Corpus build_corpus(const SynthWorld& w) {
    Corpus c;
    c.ribs.resize(w.vps.size());
    for (std::size_t i = 0; i < w.vps.size(); ++i) {
        for (const auto& e : compute_routes(w, i)) c.ribs[i].insert(e);
        TraceCleanseReport rep;
        auto clean = cleanse_traces(simulate_all(w, i), &rep);
        REQUIRE(rep.discarded_loop == 0);
        REQUIRE(rep.discarded_mul_resp == 0);
        PairReport prep;
        auto pp = pair_paths(clean, c.ribs[i], w.vps[i].first, &prep,
                             static_cast<std::uint32_t>(i) * 100000u);
        REQUIRE(prep.discarded_no_route == 0);
        c.traces.push_back(std::move(clean));
        c.pairs.insert(c.pairs.end(), pp.begin(), pp.end());
    }
    return c;
}

MismatchPattern expected_pattern(TruthLabel l) {
    switch (l) {
        case TruthLabel::Detouring: return MismatchPattern::Detouring;
        case TruthLabel::Branching: return MismatchPattern::Branching;
        case TruthLabel::Protruding: return MismatchPattern::Protruding;
        default: FAIL("clean label has no pattern");
    }
    return MismatchPattern::Other;
}

// Every pair's comparison outcome must agree with the generator's ledger.
void check_ledger_agreement(const SynthOutput& out) {
    const auto& w = out.world;
    auto corpus = build_corpus(w);
    IxpDb ixp = fabric_db(w);
    REQUIRE(!corpus.pairs.empty());
    for (const auto& p : corpus.pairs) {
        auto it = out.truth.labels.find({p.vp, p.trace.dst.v});
        REQUIRE(it != out.truth.labels.end());
        PairComparison cmp = compare_pair(p, out.truth.mapping, ixp);
        INFO(p.vp << " -> " << format_ipv4(p.trace.dst));
        if (it->second == TruthLabel::Clean) {
            CHECK(cmp.label == PairLabel::Match);
        } else {
            CHECK(cmp.label == PairLabel::Mismatch);
            if (cmp.label == PairLabel::Mismatch)
                CHECK(classify_pattern(cmp) == expected_pattern(it->second));
        }
    }
}

std::string slurp(const std::filesystem::path& p) { return read_file(p.string()); }

}  // namespace

TEST_CASE("scenario validation rejects malformed configurations", "[synth]") {
    ScenarioConfig ok = base_cfg(1, {1, 2, 4});
    validate_config(ok);

    ScenarioConfig c = ok;
    c.tier_counts.clear();
    CHECK_THROWS_AS(validate_config(c), std::invalid_argument);

    c = ok;
    c.tier_counts = {2, 0, 3};
    CHECK_THROWS_AS(validate_config(c), std::invalid_argument);

    c = ok;
    c.p_unresponsive = 1.5;
    CHECK_THROWS_AS(validate_config(c), std::invalid_argument);

    c = ok;
    c.p_borrow = -0.1;
    CHECK_THROWS_AS(validate_config(c), std::invalid_argument);

    c = ok;
    c.min_prefixes_per_as = 3;
    c.max_prefixes_per_as = 2;
    CHECK_THROWS_AS(validate_config(c), std::invalid_argument);

    c = ok;
    c.min_prefixes_per_as = 0;
    CHECK_THROWS_AS(validate_config(c), std::invalid_argument);

    c = ok;
    c.vp_count = 0;
    CHECK_THROWS_AS(validate_config(c), std::invalid_argument);

    c = ok;
    c.events.push_back({EventKind::HiddenHijack, 0, 0.5});
    CHECK_THROWS_AS(validate_config(c), std::invalid_argument);

    c = ok;
    c.events.push_back({EventKind::DefaultRouteDetour, 1, 0.0});
    CHECK_THROWS_AS(validate_config(c), std::invalid_argument);

    c = ok;
    c.tier_counts = {5000};
    CHECK_THROWS_AS(validate_config(c), std::invalid_argument);
}

TEST_CASE("numbering follows tier order and a single-homed chain routes through it",
          "[synth]") {
    ScenarioConfig cfg = base_cfg(5, {1, 1, 1});
    cfg.vp_count = 1;
    auto out = generate_world(cfg);
    const auto& w = out.world;
    REQUIRE(w.ases.size() == 3);
    CHECK(w.ases[0].asn == 101);
    CHECK(w.ases[0].tier == 0);
    CHECK(w.ases[1].asn == 102);
    CHECK(w.ases[1].tier == 1);
    CHECK(w.ases[2].asn == 103);
    CHECK(w.ases[2].tier == 2);
    REQUIRE(w.links.size() == 2);

    CHECK(control_path(w, 101, 103) == std::vector<Asn>{101, 102, 103});
    CHECK(control_path(w, 103, 101) == std::vector<Asn>{103, 102, 101});
    CHECK(control_path(w, 102, 102) == std::vector<Asn>{102});

    REQUIRE(w.vps.size() == 1);
    CHECK(w.vps[0].first == "vp0");
    CHECK(w.vps[0].second == 103);  // drawn from the bottom tier
}

TEST_CASE("route selection matches an independent fixed-point reference", "[synth]") {
    for (auto [seed, tiers, density] :
         {std::tuple<std::uint64_t, std::vector<std::size_t>, double>{42, {2, 4, 8}, 0.3},
          std::tuple<std::uint64_t, std::vector<std::size_t>, double>{7, {3, 8, 30}, 0.1}}) {
        ScenarioConfig cfg = base_cfg(seed, tiers);
        cfg.p2p_density = density;
        cfg.vp_count = 2;
        auto out = generate_world(cfg);
        const auto& w = out.world;
        for (const auto& origin : w.ases) {
            auto ref = ref_routes(w, origin.asn);
            for (const auto& src : w.ases) {
                auto it = ref.find(src.asn);
                REQUIRE(it != ref.end());
                INFO("src " << src.asn << " origin " << origin.asn);
                CHECK(control_path(w, src.asn, origin.asn) == it->second.path);
            }
        }
    }
}

TEST_CASE("every control path is valley-free", "[synth]") {
    ScenarioConfig cfg = base_cfg(11, {2, 5, 12});
    cfg.p2p_density = 0.25;
    cfg.vp_count = 3;
    auto out = generate_world(cfg);
    const auto& w = out.world;
    RelDb rels = rel_db(w);
    for (std::size_t i = 0; i < w.vps.size(); ++i)
        for (const auto& e : compute_routes(w, i))
            for (std::size_t k = 0; k + 2 < e.as_path.size(); ++k)
                CHECK(classify_triple(rels, e.as_path[k], e.as_path[k + 1],
                                      e.as_path[k + 2]) == TripleShape::ValleyFree);
}

TEST_CASE("provider-allocated link numbering keeps operator and announcer apart",
          "[synth]") {
    SECTION("neighbor side drawn from the provider block") {
        ScenarioConfig cfg = base_cfg(3, {1, 1});
        cfg.vp_count = 1;
        cfg.p_borrow = 1.0;
        auto out = generate_world(cfg);
        const auto& w = out.world;
        REQUIRE(w.links.size() == 1);
        const SynthLink& l = w.links[0];
        REQUIRE(l.provider == 101);
        CHECK(out.truth.mapping.map(l.if_u, 0) == MapAnswer::concrete(l.u));
        CHECK(out.truth.mapping.map(l.if_v, 0) == MapAnswer::concrete(l.v));
        CHECK(announced_origin(w, l.if_u) == 101);
        CHECK(announced_origin(w, l.if_v) == 101);
    }
    SECTION("each side numbers from its own block when borrowing is off") {
        ScenarioConfig cfg = base_cfg(3, {1, 1});
        cfg.vp_count = 1;
        cfg.p_borrow = 0.0;
        auto out = generate_world(cfg);
        const auto& w = out.world;
        const SynthLink& l = w.links[0];
        CHECK(announced_origin(w, l.if_u) == l.u);
        CHECK(announced_origin(w, l.if_v) == l.v);
        CHECK(out.truth.mapping.map(l.if_v, 0) == MapAnswer::concrete(l.v));
    }
}

TEST_CASE("announced blocks never overlap except for an injected sub-prefix", "[synth]") {
    ScenarioConfig cfg = base_cfg(19, {2, 4, 10});
    cfg.vp_count = 3;
    cfg.events.push_back({EventKind::HiddenHijack, 1, 0.0});
    auto out = generate_world(cfg);
    const auto& w = out.world;
    REQUIRE(w.hijacks.size() == 1);
    std::vector<std::pair<Prefix, Asn>> blocks;
    for (const auto& as : w.ases)
        for (const auto& p : as.prefixes) blocks.push_back({p, as.asn});
    std::set<std::pair<std::uint32_t, std::uint8_t>> subs{
        {w.hijacks[0].sub.net, w.hijacks[0].sub.len}};
    for (std::size_t i = 0; i < blocks.size(); ++i)
        for (std::size_t j = i + 1; j < blocks.size(); ++j) {
            bool overlap = blocks[i].first.covers(blocks[j].first) ||
                           blocks[j].first.covers(blocks[i].first);
            INFO(format_prefix(blocks[i].first) << " vs " << format_prefix(blocks[j].first));
            CHECK(!overlap);
        }
    // the forged sub-prefix lies inside the victim block and belongs to no AS
    CHECK(w.hijacks[0].parent.covers(w.hijacks[0].sub));
    for (const auto& [p, a] : blocks) CHECK(subs.count({p.net, p.len}) == 0);
}

TEST_CASE("topology honors tiering and stays connected", "[synth]") {
    ScenarioConfig cfg = base_cfg(23, {3, 6, 20});
    cfg.p2p_density = 0.15;
    cfg.vp_count = 4;
    auto out = generate_world(cfg);
    const auto& w = out.world;
    std::map<Asn, std::size_t> tier;
    for (const auto& a : w.ases) tier[a.asn] = a.tier;
    std::map<Asn, std::size_t> provider_count;
    for (const auto& l : w.links) {
        if (l.provider == 0) {
            CHECK(tier[l.u] == tier[l.v]);  // peering stays within a tier
        } else {
            Asn cust = l.provider == l.u ? l.v : l.u;
            CHECK(tier[l.provider] + 1 == tier[cust]);
            ++provider_count[cust];
        }
    }
    for (const auto& a : w.ases) {
        if (a.tier == 0) continue;
        CHECK(provider_count[a.asn] >= 1);
    }
    // connectivity: every AS can route to the first one
    for (const auto& a : w.ases) CHECK(!control_path(w, a.asn, w.ases[0].asn).empty());
}

TEST_CASE("probe paths walk gateway, entry interfaces, router hops, then the host",
          "[synth]") {
    ScenarioConfig cfg = base_cfg(3, {1, 1});
    cfg.vp_count = 1;
    cfg.max_prefixes_per_as = 1;
    auto out = generate_world(cfg);
    const auto& w = out.world;
    REQUIRE(w.vps.size() == 1);
    REQUIRE(w.vps[0].second == 102);
    const SynthLink& l = w.links[0];
    Ipv4 dst{w.ases[0].prefixes[0].net + 7};

    RawTrace t = simulate_traceroute(w, 0, dst);
    REQUIRE(t.hops.size() == 4);
    CHECK(t.hops[0].ips == std::vector<Ipv4>{w.ases[1].gateway});
    CHECK(t.hops[1].ips == std::vector<Ipv4>{l.if_u});  // provider-side entry
    CHECK(t.hops[2].ips == std::vector<Ipv4>{w.ases[0].internal});
    CHECK(t.hops[3].ips == std::vector<Ipv4>{dst});
    CHECK(t.src == w.ases[1].probe);
    CHECK(t.dst == dst);

    // destination inside the probing network: gateway then host
    Ipv4 self{w.ases[1].prefixes[0].net + 7};
    RawTrace s = simulate_traceroute(w, 0, self);
    REQUIRE(s.hops.size() == 2);
    CHECK(s.hops[0].ips == std::vector<Ipv4>{w.ases[1].gateway});
    CHECK(s.hops[1].ips == std::vector<Ipv4>{self});

    ScenarioConfig flat = cfg;
    flat.p_internal_hop = 0.0;
    auto out2 = generate_world(flat);
    RawTrace u = simulate_traceroute(out2.world, 0, Ipv4{out2.world.ases[0].prefixes[0].net + 7});
    REQUIRE(u.hops.size() == 3);  // no router hop between entry and host
}

TEST_CASE("generation and emission are reproducible and thread-count invariant",
          "[synth]") {
    ScenarioConfig cfg = base_cfg(77, {2, 4, 10});
    cfg.p2p_density = 0.2;
    cfg.vp_count = 3;
    cfg.p_unresponsive = 0.1;
    cfg.p_third_party = 0.15;
    cfg.p_sibling = 0.3;
    cfg.p_ixp = 0.5;
    cfg.events = {{EventKind::HiddenHijack, 1, 0.0},
                  {EventKind::Aggregation, 1, 0.0},
                  {EventKind::DefaultRouteDetour, 1, 0.3}};

    namespace fs = std::filesystem;
    fs::path a = fs::temp_directory_path() / "cdmatch_synth_a";
    fs::path b = fs::temp_directory_path() / "cdmatch_synth_b";
    fs::remove_all(a);
    fs::remove_all(b);

    auto o1 = generate_world(cfg);
    auto o2 = generate_world(cfg);
    write_world(o1, a.string(), 1);
    write_world(o2, b.string(), 3);

    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(a)) names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    REQUIRE(names.size() >= 10);
    for (const auto& n : names) {
        INFO(n);
        REQUIRE(fs::exists(b / n));
        CHECK(slurp(a / n) == slurp(b / n));
    }
    // distinct seed, distinct corpus
    ScenarioConfig other = cfg;
    other.seed = 78;
    auto o3 = generate_world(other);
    CHECK(format_mapping(o3.truth.mapping) != format_mapping(o1.truth.mapping));

    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("a world without events compares clean under its own truth", "[synth]") {
    for (std::uint64_t seed : {1u, 2u}) {
        ScenarioConfig cfg = base_cfg(seed, {2, 3, 7});
        cfg.p2p_density = 0.2;
        cfg.vp_count = 2;
        auto out = generate_world(cfg);
        for (const auto& [key, lbl] : out.truth.labels) CHECK(lbl == TruthLabel::Clean);
        check_ledger_agreement(out);
    }
}

TEST_CASE("hop dropouts and third-party answers never disturb the ledger", "[synth]") {
    ScenarioConfig cfg = base_cfg(31, {2, 3, 8});
    cfg.vp_count = 3;
    cfg.p_unresponsive = 0.3;
    cfg.p_third_party = 0.4;
    auto out = generate_world(cfg);
    check_ledger_agreement(out);

    // the knobs actually fire: dropouts blank a slot, substitutes swap in
    // another address of the same operator
    bool saw_timeout = false, saw_substitute = false;
    ScenarioConfig quiet = cfg;
    quiet.p_unresponsive = 0.0;
    quiet.p_third_party = 0.0;
    auto base = generate_world(quiet);
    for (std::size_t i = 0; i < out.world.vps.size(); ++i) {
        auto noisy = simulate_all(out.world, i);
        auto plain = simulate_all(base.world, i);
        REQUIRE(noisy.size() == plain.size());
        for (std::size_t k = 0; k < noisy.size(); ++k) {
            REQUIRE(noisy[k].hops.size() == plain[k].hops.size());
            for (std::size_t s = 0; s < noisy[k].hops.size(); ++s) {
                const auto& n = noisy[k].hops[s];
                const auto& p = plain[k].hops[s];
                if (n.ips.empty()) {
                    saw_timeout = true;
                    continue;
                }
                REQUIRE(n.ips.size() == 1);
                REQUIRE(p.ips.size() == 1);
                if (n.ips[0] == p.ips[0]) continue;
                saw_substitute = true;
                CHECK(out.truth.mapping.map(n.ips[0], 0) ==
                      out.truth.mapping.map(p.ips[0], 0));
            }
        }
    }
    CHECK(saw_timeout);
    CHECK(saw_substitute);
}

TEST_CASE("sub-prefix takeover worlds match their ledger and leave telltales",
          "[synth]") {
    ScenarioConfig cfg = base_cfg(101, {2, 4, 12});
    cfg.p2p_density = 0.15;
    cfg.vp_count = 3;
    cfg.events = {{EventKind::HiddenHijack, 1, 0.0}};
    auto out = generate_world(cfg);
    const auto& w = out.world;
    REQUIRE(w.hijacks.size() == 1);
    const HijackPlan& plan = w.hijacks[0];
    check_ledger_agreement(out);

    Ipv4 dst{plan.sub.net + 7};
    std::size_t diverted_vps = 0;
    for (std::size_t i = 0; i < w.vps.size(); ++i) {
        auto clean = cleanse_traces({simulate_traceroute(w, i, dst)});
        REQUIRE(clean.size() == 1);
        const CleanTrace& t = clean[0];
        if (!plan.diverted[i]) {
            CHECK(t.reached);
            continue;
        }
        ++diverted_vps;
        CHECK(!t.reached);  // the forger sinks the probe
        const CleanHop* last = nullptr;
        for (const auto& h : t.hops)
            if (h.responsive) last = &h;
        REQUIRE(last != nullptr);
        CHECK(out.truth.mapping.map(last->ip, 0) == MapAnswer::concrete(plan.hijacker));
    }
    CHECK(diverted_vps >= 1);

    // only the seeded collector carries the finer route, pointing at the forger
    for (std::size_t i = 0; i < w.vps.size(); ++i) {
        RibTable rt;
        for (const auto& e : compute_routes(w, i)) rt.insert(e);
        auto r = rt.lpm(dst, 0);
        REQUIRE(r.entry != nullptr);
        if (i == plan.polluted) {
            CHECK(r.entry->prefix == plan.sub);
            CHECK(r.entry->origin() == plan.hijacker);
        } else {
            CHECK(r.entry->prefix == plan.parent);
            CHECK(r.entry->origin() == plan.victim);
        }
    }

    // the funnel recovers the planted tuple from the corpus
    auto corpus = build_corpus(w);
    IxpDb ixp = fabric_db(w);
    std::vector<std::optional<PairComparison>> cmps;
    for (const auto& p : corpus.pairs) cmps.push_back(compare_pair(p, out.truth.mapping, ixp));
    std::vector<const RibTable*> alts;
    for (const auto& rt : corpus.ribs) alts.push_back(&rt);
    RoaDb roa = roa_db(w);
    RelDb rels = rel_db(w);
    auto det = detect_hidden_hijack(corpus.pairs, cmps, alts, &roa, rels);
    REQUIRE(det.candidates.size() == 1);
    CHECK(det.candidates[0].parent == plan.parent);
    CHECK(det.candidates[0].victim == plan.victim);
    CHECK(det.candidates[0].sub == plan.sub);
    CHECK(det.candidates[0].hijacker == plan.hijacker);
    CHECK(det.funnel.not_sibling >= 1);
}

TEST_CASE("delegated block announcements protrude past the announcing network",
          "[synth]") {
    ScenarioConfig cfg = base_cfg(55, {2, 4, 10});
    cfg.vp_count = 3;
    cfg.events = {{EventKind::Aggregation, 1, 0.0}};
    auto out = generate_world(cfg);
    const auto& w = out.world;
    REQUIRE(w.aggs.size() == 1);
    const AggPlan& plan = w.aggs[0];
    check_ledger_agreement(out);

    Ipv4 dst{plan.deleg.net + 7};
    CHECK(out.truth.mapping.map(dst, 0) == MapAnswer::concrete(plan.leaf));
    for (std::size_t i = 0; i < w.vps.size(); ++i) {
        auto clean = cleanse_traces({simulate_traceroute(w, i, dst)});
        REQUIRE(clean.size() == 1);
        // forwarding rides the announced route, then two extra networks
        std::vector<Asn> want = control_path(w, w.vps[i].second, plan.top);
        want.push_back(plan.mid);
        want.push_back(plan.leaf);
        std::vector<Asn> got;
        for (const auto& h : clean[0].hops) {
            if (!h.responsive) continue;
            auto a = out.truth.mapping.map(h.ip, 0);
            REQUIRE(a.kind == MapAnswer::Concrete);
            if (got.empty() || got.back() != a.asn) got.push_back(a.asn);
        }
        CHECK(got == want);
    }
}

TEST_CASE("static-route detours stay in the minority at their collector", "[synth]") {
    ScenarioConfig cfg = base_cfg(202, {2, 5, 14});
    cfg.p2p_density = 0.2;
    cfg.vp_count = 4;
    cfg.events = {{EventKind::DefaultRouteDetour, 1, 0.4}};
    auto out = generate_world(cfg);
    const auto& w = out.world;
    REQUIRE(w.detours.size() == 1);
    const DetourPlan& plan = w.detours[0];
    REQUIRE(!plan.dsts.empty());
    check_ledger_agreement(out);

    // the honest next-hop link must stay the majority carrier, or single-point
    // voting could flip the shared address
    Asn vp_as = w.vps[plan.vp].second;
    std::size_t via_static = 0;
    for (const auto& e : compute_routes(w, plan.vp))
        if (e.as_path.size() > 1 && e.as_path[1] == plan.via) ++via_static;
    CHECK(via_static > plan.dsts.size());
    for (std::uint32_t d : plan.dsts) {
        auto path = control_path(w, vp_as, announced_origin(w, Ipv4{d}));
        REQUIRE(path.size() > 1);
        CHECK(path[1] != plan.via);
    }
}

TEST_CASE("forged shortcut worlds keep the bait link out of the data plane",
          "[synth]") {
    ScenarioConfig cfg = base_cfg(303, {2, 5, 14});
    cfg.p2p_density = 0.15;
    cfg.vp_count = 4;
    cfg.events = {{EventKind::BogusLinkInterception, 1, 0.0}};
    auto out = generate_world(cfg);
    const auto& w = out.world;
    REQUIRE(w.bogus.size() == 1);
    const BogusPlan& plan = w.bogus[0];
    check_ledger_agreement(out);

    CHECK(w.link_at.count({std::min(plan.x, plan.y), std::max(plan.x, plan.y)}) == 0);

    auto corpus = build_corpus(w);
    bool stripped_somewhere = false;
    for (const auto& p : corpus.pairs) {
        const auto& path = p.route.as_path;
        bool shortcut = false;
        for (std::size_t i = 0; i + 1 < path.size(); ++i)
            if (path[i] == plan.x && path[i + 1] == plan.y) shortcut = true;
        if (!shortcut) continue;
        stripped_somewhere = true;
        CHECK(std::find(path.begin(), path.end(), plan.m) == path.end());
    }
    CHECK(stripped_somewhere);

    IxpDb ixp = fabric_db(w);
    std::vector<std::optional<PairComparison>> cmps;
    for (const auto& p : corpus.pairs) cmps.push_back(compare_pair(p, out.truth.mapping, ixp));

    std::vector<std::vector<RealMismatchVerdict>> verdicts;
    RibTable merged;
    for (const auto& rt : corpus.ribs) rt.for_each_entry([&](const RibEntry& e) { merged.insert(e); });
    auto tally = collect_segment_tallies(corpus.pairs, cmps);
    for (std::size_t i = 0; i < corpus.pairs.size(); ++i)
        verdicts.push_back(real_mismatch_verdicts(corpus.pairs[i], *cmps[i], tally, merged));

    auto links = detect_link_detour(corpus.pairs, cmps, verdicts);
    bool planted_flagged = false;
    for (const auto& l : links)
        if (l.a == std::min(plan.x, plan.y) && l.b == std::max(plan.x, plan.y))
            planted_flagged = true;
    CHECK(planted_flagged);

    std::set<std::pair<Asn, Asn>> observed;
    for (std::size_t i = 0; i < w.vps.size(); ++i) {
        auto seen = dataplane_links(corpus.traces[i], out.truth.mapping, ixp);
        observed.insert(seen.begin(), seen.end());
    }
    CHECK(observed.count({std::min(plan.x, plan.m), std::max(plan.x, plan.m)}) == 1);
    CHECK(observed.count({std::min(plan.m, plan.y), std::max(plan.m, plan.y)}) == 1);
    CHECK(observed.count({std::min(plan.x, plan.y), std::max(plan.x, plan.y)}) == 0);

    passive_filter(links, observed);
    for (const auto& l : links)
        if (l.a == std::min(plan.x, plan.y) && l.b == std::max(plan.x, plan.y))
            CHECK(l.status == LinkStatus::NeedsProbe);
}

TEST_CASE("a world can carry every anomaly at once and still match its ledger",
          "[synth]") {
    ScenarioConfig cfg = base_cfg(404, {2, 5, 16});
    cfg.p2p_density = 0.2;
    cfg.vp_count = 4;
    cfg.p_unresponsive = 0.1;
    cfg.p_third_party = 0.1;
    cfg.events = {{EventKind::HiddenHijack, 1, 0.0},
                  {EventKind::BogusLinkInterception, 1, 0.0},
                  {EventKind::Aggregation, 1, 0.0},
                  {EventKind::DefaultRouteDetour, 1, 0.3}};
    auto out = generate_world(cfg);
    REQUIRE(out.world.hijacks.size() == 1);
    REQUIRE(out.world.bogus.size() == 1);
    REQUIRE(out.world.aggs.size() == 1);
    REQUIRE(out.world.detours.size() == 1);
    check_ledger_agreement(out);

    std::map<TruthLabel, std::size_t> counts;
    for (const auto& [k, l] : out.truth.labels) ++counts[l];
    CHECK(counts[TruthLabel::Branching] >= 1);
    CHECK(counts[TruthLabel::Detouring] >= 1);
    CHECK(counts[TruthLabel::Protruding] >= 1);
    CHECK(counts[TruthLabel::Clean] > counts[TruthLabel::Branching] +
                                          counts[TruthLabel::Detouring] +
                                          counts[TruthLabel::Protruding]);
}

TEST_CASE("exchange fabrics wildcard their shared subnet without breaking pairs",
          "[synth]") {
    ScenarioConfig cfg = base_cfg(61, {3, 6});
    cfg.p2p_density = 0.8;
    cfg.p_ixp = 1.0;
    cfg.vp_count = 2;
    auto out = generate_world(cfg);
    const auto& w = out.world;
    REQUIRE(!w.fabrics.empty());
    bool fabric_link = false;
    for (const auto& l : w.links)
        if (l.fabric) {
            fabric_link = true;
            CHECK(w.fabrics[0].prefix.contains(l.if_u));
            CHECK(w.fabrics[0].prefix.contains(l.if_v));
            CHECK(out.truth.mapping.map(l.if_u, 0) == MapAnswer::concrete(l.u));
            CHECK(out.truth.mapping.map(l.if_v, 0) == MapAnswer::concrete(l.v));
        }
    REQUIRE(fabric_link);
    IxpDb ixp = fabric_db(w);
    CHECK(ixp.covers_ip(Ipv4{w.fabrics[0].prefix.net + 1}));
    CHECK(ixp.is_ixp_asn(w.fabrics[0].asn));
    CHECK(!is_private_asn(w.fabrics[0].asn));
    check_ledger_agreement(out);
}

TEST_CASE("mapping corruption flips an exact share of rows deterministically",
          "[synth]") {
    ScenarioConfig cfg = base_cfg(9, {2, 4, 10});
    cfg.vp_count = 2;
    auto out = generate_world(cfg);
    RelDb rels = rel_db(out.world);
    const MappingTable& truth = out.truth.mapping;

    MappingTable noisy = noisy_mapping(truth, rels, 0.1, 500);
    CHECK(noisy.size() == truth.size());
    std::size_t changed = 0, unmapped = 0;
    for (const auto& [ip, want] : truth.sorted_rows()) {
        MapAnswer got = noisy.map(ip, 0);
        if (got == want) continue;
        ++changed;
        if (got.kind == MapAnswer::Unmap) ++unmapped;
    }
    CHECK(changed == truth.size() / 10);
    CHECK(unmapped >= 1);
    CHECK(changed > unmapped);

    MappingTable again = noisy_mapping(truth, rels, 0.1, 500);
    CHECK(format_mapping(again) == format_mapping(noisy));
    MappingTable other = noisy_mapping(truth, rels, 0.1, 501);
    CHECK(format_mapping(other) != format_mapping(noisy));
}

TEST_CASE("emitted artifacts round-trip through the regular loaders", "[synth]") {
    ScenarioConfig cfg = base_cfg(88, {2, 4, 9});
    cfg.vp_count = 2;
    cfg.p_ixp = 0.5;
    cfg.p2p_density = 0.4;
    cfg.events = {{EventKind::HiddenHijack, 1, 0.0}, {EventKind::Aggregation, 1, 0.0}};
    auto out = generate_world(cfg);

    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "cdmatch_synth_rt";
    fs::remove_all(dir);
    write_world(out, dir.string(), 2);

    auto mapping = load_mapping((dir / "truth_mapping.txt").string());
    CHECK(mapping.size() == out.truth.mapping.size());
    RelDb rels = load_relationships((dir / "rel.txt").string());
    load_orgs((dir / "orgs.txt").string(), rels);
    CHECK(rels.links().size() == out.world.links.size());
    RoaDb roa = load_roas((dir / "roa.txt").string());
    CHECK(roa.records().size() >= out.world.ases.size());
    IxpDb ixp = load_ixp((dir / "ixp.txt").string());
    CHECK(ixp.prefixes().size() == out.world.fabrics.size());

    for (std::size_t i = 0; i < out.world.vps.size(); ++i) {
        std::string vp = out.world.vps[i].first;
        auto rib = load_rib_raw((dir / ("rib_" + vp + ".txt")).string());
        auto kept = cleanse_bgp(rib, &ixp);
        CHECK(kept.size() == rib.size());  // synthetic tables are already clean
        CHECK(rib.size() == compute_routes(out.world, i).size());
        auto traces = load_traces((dir / ("traces_" + vp + ".txt")).string());
        CHECK(traces.size() == trace_targets(out.world).size());
    }

    std::string events = slurp(dir / "events.csv");
    CHECK(events.find("hidden_hijack") != std::string::npos);
    CHECK(events.find("aggregation") != std::string::npos);
    std::size_t rows = static_cast<std::size_t>(std::count(events.begin(), events.end(), '\n'));
    CHECK(rows == out.truth.events.size() + 1);  // header line

    fs::remove_all(dir);
}
