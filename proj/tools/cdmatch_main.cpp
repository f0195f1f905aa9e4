#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <thread>

#include "cdmatch/compare.hpp"
#include "cdmatch/correct.hpp"
#include "cdmatch/gbdt.hpp"
#include "cdmatch/ingest.hpp"
#include "cdmatch/mismatch.hpp"
#include "cdmatch/registry.hpp"
#include "cdmatch/rib.hpp"
#include "cdmatch/synth.hpp"
#include "cdmatch/util.hpp"
#include "cdmatch/vote.hpp"

namespace fs = std::filesystem;
using namespace cdmatch;

namespace {

std::string fmt6(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.6f", v);
    return b;
}

struct CommonOpts {
    std::vector<std::string> ribs;
    std::vector<std::string> traces;
    std::string rel, orgs, roa, ixp;
    std::vector<std::string> mappings;
    std::string model;
    std::string out = ".";
    std::uint64_t seed = 1;
    unsigned jobs = 0;  // 0 picks the machine's core count
    double tie_threshold = 0.1;
    std::size_t turn_floor = 0;
};

struct SynthOpts {
    std::string tiers = "3,12,60";
    std::size_t vps = 3;
    double p2p = 0.05;
    double p_unresponsive = 0.0;
    double p_third_party = 0.0;
    double p_borrow = 1.0;
    double p_internal_hop = 1.0;
    double p_ixp = 0.0;
    double p_sibling = 0.0;
    std::vector<std::string> events;
};

void add_io_opts(CLI::App* sub, CommonOpts& c) {
    sub->add_option("--rib", c.ribs, "routing table file, one per vantage (repeatable)");
    sub->add_option("--traces", c.traces, "probe path file, one per vantage (repeatable)");
    sub->add_option("--rel", c.rel, "relationship registry file");
    sub->add_option("--orgs", c.orgs, "organization registry file");
    sub->add_option("--roa", c.roa, "route-origin authorization file");
    sub->add_option("--ixp", c.ixp, "exchange-fabric registry file");
    sub->add_option("--mapping", c.mappings, "named address table, name=path (repeatable)");
    sub->add_option("--model", c.model, "trained correctness-scorer file");
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--seed", c.seed, "random seed");
    sub->add_option("--jobs", c.jobs, "worker count; 0 = all cores");
    sub->add_option("--tie-threshold", c.tie_threshold, "score slack for candidate ties");
    sub->add_option("--turn-floor", c.turn_floor, "stop when a turn changes fewer rows");
}

unsigned effective_jobs(const CommonOpts& c) {
    if (c.jobs) return c.jobs;
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

void require_file(const std::string& path, const char* flag) {
    if (!fs::exists(path))
        throw std::runtime_error(std::string("missing file for ") + flag + ": " + path);
}

// Collects one subcommand's artifacts and the machine-readable summary.
struct Emitter {
    explicit Emitter(const std::string& dir) : dir_(dir) { fs::create_directories(dir); }

    void put(const std::string& name, const std::string& content, std::size_t rows) {
        write_file((fs::path(dir_) / name).string(), content);
        summary["artifacts"][name] = {{"path", name}, {"rows", rows}};
    }

    void finish(const std::string& cmd) {
        summary["command"] = cmd;
        write_file((fs::path(dir_) / ("summary_" + cmd + ".json")).string(),
                   summary.dump(2) + "\n");
    }

    nlohmann::json summary;

private:
    std::string dir_;
};

std::string dataset_name(const std::string& path, std::size_t i, std::set<std::string>& used) {
    std::string stem = fs::path(path).stem().string();
    for (const char* pre : {"traces_", "clean_", "rib_"}) {
        std::string p(pre);
        if (stem.rfind(p, 0) == 0) {
            stem = stem.substr(p.size());
            break;
        }
    }
    if (stem.empty()) stem = "ds" + std::to_string(i);
    std::string name = stem;
    int k = 2;
    while (!used.insert(name).second) name = stem + "_" + std::to_string(k++);
    return name;
}

struct Dataset {
    std::string name;
    RibTable rib;
    std::size_t rib_rows = 0;
    std::vector<CleanTrace> traces;
    std::vector<PathPair> pairs;
    TraceCleanseReport trace_rep;
    BgpCleanseReport bgp_rep;
    PairReport pair_rep;
};

struct Pipeline {
    IxpDb ixp;
    RelDb rels;
    std::optional<RoaDb> roa;
    std::map<std::string, MappingTable> maps;
    std::vector<Dataset> ds;
    RibTable merged;
    std::vector<PathPair> pairs;
    std::optional<RibMatchMapper> m_rib;
    std::optional<RibIxpMapper> m_ribixp;
    const Mapper* builtin = nullptr;
    std::string builtin_name;

    std::vector<CleanTrace> all_traces() const {
        std::vector<CleanTrace> out;
        for (const auto& d : ds) out.insert(out.end(), d.traces.begin(), d.traces.end());
        return out;
    }

    std::vector<const RibTable*> rib_ptrs() const {
        std::vector<const RibTable*> out;
        for (const auto& d : ds) out.push_back(&d.rib);
        return out;
    }
};

void parse_mappings(const CommonOpts& c, Pipeline& p) {
    for (const auto& m : c.mappings) {
        auto eq = m.find('=');
        if (eq == std::string::npos || eq == 0)
            throw std::runtime_error("--mapping expects name=path, got: " + m);
        std::string name = m.substr(0, eq), path = m.substr(eq + 1);
        if (name.find_first_not_of(
                "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-") !=
            std::string::npos)
            throw std::runtime_error("mapping name must be alphanumeric/_/-: " + name);
        require_file(path, "--mapping");
        if (!p.maps.emplace(name, load_mapping(path)).second)
            throw std::runtime_error("duplicate mapping name: " + name);
    }
}

Pipeline build_pipeline(const CommonOpts& c, bool need_pairs) {
    Pipeline p;
    if (!c.ixp.empty()) {
        require_file(c.ixp, "--ixp");
        p.ixp = load_ixp(c.ixp);
    }
    if (!c.rel.empty()) {
        require_file(c.rel, "--rel");
        p.rels = load_relationships(c.rel);
    }
    if (!c.orgs.empty()) {
        require_file(c.orgs, "--orgs");
        load_orgs(c.orgs, p.rels);
    }
    if (!c.roa.empty()) {
        require_file(c.roa, "--roa");
        p.roa = load_roas(c.roa);
    }
    parse_mappings(c, p);

    if (need_pairs && c.ribs.size() != c.traces.size())
        throw std::runtime_error("need one --rib per --traces file (got " +
                                 std::to_string(c.ribs.size()) + " vs " +
                                 std::to_string(c.traces.size()) + ")");

    std::set<std::string> used;
    std::size_t n = std::max(c.ribs.size(), c.traces.size());
    for (std::size_t i = 0; i < n; ++i) {
        Dataset d;
        const std::string& base = i < c.traces.size() ? c.traces[i] : c.ribs[i];
        d.name = dataset_name(base, i, used);
        if (i < c.ribs.size()) {
            require_file(c.ribs[i], "--rib");
            auto raw = load_rib_raw(c.ribs[i]);
            auto kept = cleanse_bgp(raw, c.ixp.empty() ? nullptr : &p.ixp, &d.bgp_rep);
            for (const auto& e : kept) {
                d.rib.insert(e);
                p.merged.insert(e);
            }
            d.rib_rows = kept.size();
        }
        if (i < c.traces.size()) {
            require_file(c.traces[i], "--traces");
            d.traces = cleanse_traces(load_traces(c.traces[i]), &d.trace_rep);
        }
        if (need_pairs) {
            d.pairs = pair_paths(d.traces, d.rib, d.name, &d.pair_rep,
                                 static_cast<std::uint32_t>(i) * 100000u);
            p.pairs.insert(p.pairs.end(), d.pairs.begin(), d.pairs.end());
        }
        p.ds.push_back(std::move(d));
    }

    if (c.ixp.empty()) {
        p.m_rib.emplace(p.merged);
        p.builtin = &*p.m_rib;
        p.builtin_name = "ribmatch";
    } else {
        p.m_ribixp.emplace(p.merged, p.ixp);
        p.builtin = &*p.m_ribixp;
        p.builtin_name = "ribixp";
    }
    return p;
}

// Preferred table for screening stages: "truth" if supplied, else the first
// named table, else the longest-prefix answer from the loaded routes.
std::pair<std::string, const Mapper*> analysis_mapper(const Pipeline& p) {
    auto it = p.maps.find("truth");
    if (it != p.maps.end()) return {it->first, &it->second};
    if (!p.maps.empty()) return {p.maps.begin()->first, &p.maps.begin()->second};
    return {p.builtin_name, p.builtin};
}

std::string format_rib_rows(const std::vector<RibEntry>& entries) {
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

std::set<std::uint32_t> intermediate_addresses(const std::vector<CleanTrace>& traces) {
    std::set<std::uint32_t> out;
    for (const auto& t : traces)
        for (std::size_t k = 0; k + 1 < t.hops.size(); ++k)
            if (t.hops[k].responsive) out.insert(t.hops[k].ip.v);
    return out;
}

// ---------------------------------------------------------------------------
// Subcommands.

int cmd_cleanse(const CommonOpts& c) {
    Pipeline p = build_pipeline(c, false);
    Emitter em(c.out);
    for (std::size_t i = 0; i < p.ds.size(); ++i) {
        const Dataset& d = p.ds[i];
        if (i < c.traces.size()) {
            em.put("clean_" + d.name + ".txt", format_traces(d.traces), d.traces.size());
            em.summary["stats"][d.name]["traces"] = {
                {"raw", d.trace_rep.raw_total},
                {"discarded_loop", d.trace_rep.discarded_loop},
                {"discarded_multi_response", d.trace_rep.discarded_mul_resp},
                {"flagged_unresponsive", d.trace_rep.flagged_unresponsive},
                {"flagged_incomplete", d.trace_rep.flagged_incomplete},
                {"retained", d.trace_rep.retained}};
        }
        if (i < c.ribs.size()) {
            std::vector<RibEntry> kept;
            d.rib.for_each_entry([&](const RibEntry& e) { kept.push_back(e); });
            std::sort(kept.begin(), kept.end(), [](const RibEntry& a, const RibEntry& b) {
                return std::tie(a.prefix.net, a.prefix.len, a.timestamp) <
                       std::tie(b.prefix.net, b.prefix.len, b.timestamp);
            });
            em.put("rib_clean_" + d.name + ".txt", format_rib_rows(kept), kept.size());
            em.summary["stats"][d.name]["routes"] = {
                {"raw", d.bgp_rep.raw_total},
                {"discarded_as_set", d.bgp_rep.discarded_as_set},
                {"discarded_private", d.bgp_rep.discarded_private},
                {"discarded_empty", d.bgp_rep.discarded_empty},
                {"discarded_loop", d.bgp_rep.discarded_loop},
                {"collapsed_duplicates", d.bgp_rep.modified_dup_collapse},
                {"fabric_hops_removed", d.bgp_rep.modified_ixp_removed},
                {"retained", d.bgp_rep.retained}};
        }
    }
    em.finish("cleanse");
    return 0;
}

int cmd_pair(const CommonOpts& c) {
    Pipeline p = build_pipeline(c, true);
    Emitter em(c.out);
    for (const Dataset& d : p.ds) {
        em.put("pairs_" + d.name + ".txt", format_pairs(d.pairs), d.pairs.size());
        em.summary["stats"][d.name] = {{"input", d.pair_rep.input},
                                       {"no_covering_route", d.pair_rep.discarded_no_route},
                                       {"paired", d.pair_rep.paired}};
    }
    em.finish("pair");
    return 0;
}

int cmd_compare(const CommonOpts& c) {
    Pipeline p = build_pipeline(c, true);
    Emitter em(c.out);

    std::vector<std::pair<std::string, const Mapper*>> methods;
    for (const auto& [name, table] : p.maps) methods.push_back({name, &table});
    if (methods.empty()) methods.push_back({p.builtin_name, p.builtin});

    std::vector<const Mapper*> raw;
    for (const auto& [name, m] : methods) raw.push_back(m);
    PairReport filt;
    auto pairs = discard_second_hop_bifurcation(p.pairs, raw, p.ixp, &filt);
    em.summary["stats"]["pairs"] = pairs.size();
    em.summary["stats"]["dropped_second_hop"] = filt.discarded_second_hop;

    for (const auto& [name, m] : methods) {
        CompareReport rep = compare_corpus(pairs, *m, p.ixp);
        std::string csv = "dataset,total,matched,mismatched,degenerate,ratio\n";
        for (const auto& [ds, cnt] : rep.by_dataset) {
            csv += ds + ',' + std::to_string(cnt.total) + ',' + std::to_string(cnt.matched) +
                   ',' + std::to_string(cnt.mismatched) + ',' + std::to_string(cnt.degenerate) +
                   ',' + fmt6(cnt.ratio()) + '\n';
        }
        em.put("compare_" + name + ".csv", csv, rep.by_dataset.size());
        auto t = rep.totals();
        em.summary["stats"][name] = {{"total", t.total},
                                     {"matched", t.matched},
                                     {"mismatched", t.mismatched},
                                     {"degenerate", t.degenerate},
                                     {"ratio", t.ratio()},
                                     {"segments_matched", rep.seg_match},
                                     {"segments_mismatched", rep.seg_mismatch}};
    }
    em.finish("compare");
    return 0;
}

int cmd_visv(const CommonOpts& c) {
    Pipeline p = build_pipeline(c, true);
    Emitter em(c.out);
    unsigned jobs = effective_jobs(c);

    const Mapper* base = p.builtin;
    if (auto it = p.maps.find("base"); it != p.maps.end()) base = &it->second;

    std::vector<DeterminedSet> sets;
    for (const Dataset& d : p.ds) {
        VotingResult res = run_voting(d.pairs, *base, p.ixp, d.name, jobs);
        em.put("visv_" + d.name + ".txt", format_mapping(res.primitive.to_table()),
               res.primitive.determined.size());
        em.put("vote_audit_" + d.name + ".csv", format_vote_audit(res.audit),
               res.audit.size());
        auto denom = intermediate_addresses(d.traces);
        std::size_t covered = 0;
        for (const auto& [v, a] : res.primitive.determined) covered += denom.count(v);
        em.summary["stats"][d.name] = {
            {"pairs", d.pairs.size()},
            {"iterations", res.iterations},
            {"determined", res.primitive.determined.size()},
            {"real_mismatches", res.real_mismatch.size()},
            {"coverage", denom.empty() ? 0.0
                                       : double(covered) / double(denom.size())}};
        sets.push_back(std::move(res.primitive));
    }

    MappingTable final_table;
    if (sets.size() >= 2) {
        final_table = merge_determined_sets(sets);
        em.put("visv_merged.txt", format_mapping(final_table), final_table.size());
    } else if (sets.size() == 1) {
        final_table = sets[0].to_table();
    }

    if (auto it = p.maps.find("truth"); it != p.maps.end() && !sets.empty()) {
        try {
            MappingEvaluation ev = evaluate_mapping(final_table, it->second);
            std::string csv = "ip,want,got,status\n";
            for (const auto& r : ev.rows) {
                csv += format_ipv4(r.ip) + ',' + std::to_string(r.want) + ',';
                csv += r.got.kind == MapAnswer::Concrete ? std::to_string(r.got.asn)
                                                         : std::string("-");
                csv += ',';
                csv += r.status == EvalStatus::Right  ? "right"
                       : r.status == EvalStatus::Wrong ? "wrong"
                                                       : "unmap";
                csv += '\n';
            }
            em.put("visv_eval.csv", csv, ev.rows.size());
            em.summary["stats"]["eval"] = {
                {"right", ev.right},
                {"wrong", ev.wrong},
                {"unmap", ev.unmap},
                {"error_ratio", double(ev.wrong) / double(ev.right + ev.wrong)}};
        } catch (const EmptyOverlap&) {
            em.summary["stats"]["eval"] = "no overlap with reference";
        }
    }
    em.finish("visv");
    return 0;
}

int cmd_learn_train(const CommonOpts& c) {
    Pipeline p = build_pipeline(c, true);
    auto base_it = p.maps.find("base");
    auto truth_it = p.maps.find("truth");
    if (base_it == p.maps.end() || truth_it == p.maps.end())
        throw std::runtime_error("learn-train needs --mapping base=... and --mapping truth=...");
    const MappingTable& base = base_it->second;
    const MappingTable& truth = truth_it->second;

    auto corpus = p.all_traces();
    Registries reg{p.merged, p.rels, p.ixp};
    std::vector<Sample> samples;
    for (const auto& [ip, ans] : base.sorted_rows()) {
        if (ans.kind != MapAnswer::Concrete || !truth.contains(ip)) continue;
        Sample s;
        s.fv = extract_features(ip, ans.asn, corpus, base, reg);
        s.right = truth.map(ip, 0) == ans;
        samples.push_back(std::move(s));
    }

    TrainConfig cfg;
    cfg.seed = c.seed;
    Scorer sc = train(samples, cfg);

    Emitter em(c.out);
    em.put("model.json", sc.to_json() + "\n", 1);
    em.put("train_samples.csv", format_samples_csv(samples), samples.size());
    Metrics m = evaluate(sc, samples);
    em.summary["stats"] = {{"samples", samples.size()},
                           {"tp", m.tp},
                           {"fp", m.fp},
                           {"tn", m.tn},
                           {"fn", m.fn}};
    if (auto f1 = m.f1()) em.summary["stats"]["f1"] = *f1;
    if (auto spc = m.specificity()) em.summary["stats"]["specificity"] = *spc;
    em.finish("learn-train");
    return 0;
}

int cmd_learn_correct(const CommonOpts& c) {
    Pipeline p = build_pipeline(c, true);
    auto base_it = p.maps.find("base");
    if (base_it == p.maps.end())
        throw std::runtime_error("learn-correct needs --mapping base=...");
    if (c.model.empty()) throw std::runtime_error("learn-correct needs --model");
    require_file(c.model, "--model");
    Scorer sc = Scorer::from_json(read_file(c.model));

    auto corpus = p.all_traces();
    Registries reg{p.merged, p.rels, p.ixp};
    CorrectionConfig cfg;
    cfg.band = c.tie_threshold;
    cfg.floor_n = c.turn_floor;
    cfg.jobs = effective_jobs(c);
    CorrectionResult res = run_correction(corpus, base_it->second, sc, reg, cfg);

    Emitter em(c.out);
    em.put("corrected_mapping.txt", format_mapping(res.mapping), res.mapping.size());
    std::size_t changes = 0;
    for (const auto& t : res.turns) changes += t.changes.size();
    em.put("correction_log.csv", format_correction_log(res), changes);
    em.summary["stats"] = {{"turns", res.turns.size()},
                           {"changes", changes},
                           {"corrected_addresses", res.corrected.size()}};

    if (auto it = p.maps.find("truth"); it != p.maps.end()) {
        try {
            MappingEvaluation pre = evaluate_mapping(base_it->second, it->second);
            MappingEvaluation post = evaluate_mapping(res.mapping, it->second);
            std::map<std::uint32_t, EvalStatus> before;
            for (const auto& r : pre.rows) before[r.ip.v] = r.status;
            std::size_t fixed = 0, introduced = 0;
            for (const auto& r : post.rows) {
                auto b = before.find(r.ip.v);
                if (b == before.end()) continue;
                if (b->second != EvalStatus::Right && r.status == EvalStatus::Right) ++fixed;
                if (b->second == EvalStatus::Right && r.status == EvalStatus::Wrong)
                    ++introduced;
            }
            em.summary["stats"]["eval"] = {{"wrong_before", pre.wrong},
                                           {"wrong_after", post.wrong},
                                           {"fixed", fixed},
                                           {"introduced", introduced}};
        } catch (const EmptyOverlap&) {
            em.summary["stats"]["eval"] = "no overlap with reference";
        }
    }
    em.finish("learn-correct");
    return 0;
}

int cmd_analyze(const CommonOpts& c) {
    Pipeline p = build_pipeline(c, true);
    auto [mname, mapper] = analysis_mapper(p);

    std::vector<std::optional<PairComparison>> cmps;
    compare_corpus(p.pairs, *mapper, p.ixp, &cmps);
    SegTallyMap tally = collect_segment_tallies(p.pairs, cmps);

    std::string csv = "id,vp,dst,label,pattern,real_segments,rules\n";
    std::map<std::string, std::size_t> pattern_counts;
    std::size_t real_pairs = 0, mismatched = 0;
    for (std::size_t i = 0; i < p.pairs.size(); ++i) {
        const PathPair& pr = p.pairs[i];
        csv += std::to_string(pr.id) + ',' + pr.vp + ',' + format_ipv4(pr.trace.dst) + ',';
        if (!cmps[i]) {
            csv += "degenerate,,0,\n";
            continue;
        }
        const PairComparison& cmp = *cmps[i];
        if (cmp.label == PairLabel::Match) {
            csv += "match,,0,\n";
            continue;
        }
        ++mismatched;
        auto verdicts = real_mismatch_verdicts(pr, cmp, tally, p.merged);
        std::set<std::string> rules;
        std::size_t real = 0;
        for (const auto& v : verdicts) {
            if (!v.is_real) continue;
            ++real;
            for (RealRule r : v.rules) rules.insert(real_rule_name(r));
        }
        if (real) ++real_pairs;
        const char* pat = pattern_name(classify_pattern(cmp));
        ++pattern_counts[pat];
        std::string joined;
        for (const auto& r : rules) {
            if (!joined.empty()) joined += ';';
            joined += r;
        }
        csv += std::string("mismatch,") + pat + ',' + std::to_string(real) + ',' + joined + '\n';
    }
    Emitter em(c.out);
    em.put("analysis.csv", csv, p.pairs.size());
    em.summary["stats"] = {{"method", mname},
                           {"pairs", p.pairs.size()},
                           {"mismatched", mismatched},
                           {"real_mismatch_pairs", real_pairs}};
    for (const auto& [pat, n] : pattern_counts) em.summary["stats"]["patterns"][pat] = n;
    em.finish("analyze");
    return 0;
}

int cmd_detect_hh(const CommonOpts& c) {
    if (c.roa.empty()) throw MissingRoaDb();
    Pipeline p = build_pipeline(c, true);
    auto [mname, mapper] = analysis_mapper(p);

    std::vector<std::optional<PairComparison>> cmps;
    compare_corpus(p.pairs, *mapper, p.ixp, &cmps);
    HhDetection d = detect_hidden_hijack(p.pairs, cmps, p.rib_ptrs(), &*p.roa, p.rels);

    Emitter em(c.out);
    em.put("hh_report.csv", format_hh_report(d), d.candidates.size());
    std::string funnel = "stage,count\n";
    funnel += "input," + std::to_string(d.funnel.input) + '\n';
    funnel += "avoids_origin," + std::to_string(d.funnel.avoids_origin) + '\n';
    funnel += "subprefix_seen," + std::to_string(d.funnel.subprefix_seen) + '\n';
    funnel += "roa_mismatch," + std::to_string(d.funnel.roa_mismatch) + '\n';
    funnel += "not_sibling," + std::to_string(d.funnel.not_sibling) + '\n';
    em.put("hh_funnel.csv", funnel, 5);
    em.summary["stats"] = {{"method", mname},
                           {"pairs", p.pairs.size()},
                           {"candidates", d.candidates.size()}};
    em.finish("detect-hh");
    return 0;
}

int cmd_detect_links(const CommonOpts& c) {
    Pipeline p = build_pipeline(c, true);
    auto [mname, mapper] = analysis_mapper(p);

    std::vector<std::optional<PairComparison>> cmps;
    compare_corpus(p.pairs, *mapper, p.ixp, &cmps);
    SegTallyMap tally = collect_segment_tallies(p.pairs, cmps);
    std::vector<std::vector<RealMismatchVerdict>> verdicts;
    for (std::size_t i = 0; i < p.pairs.size(); ++i)
        verdicts.push_back(cmps[i] ? real_mismatch_verdicts(p.pairs[i], *cmps[i], tally, p.merged)
                                   : std::vector<RealMismatchVerdict>{});
    auto links = detect_link_detour(p.pairs, cmps, verdicts);

    std::set<std::pair<Asn, Asn>> observed;
    for (const Dataset& d : p.ds) {
        auto seen = dataplane_links(d.traces, *mapper, p.ixp);
        observed.insert(seen.begin(), seen.end());
    }
    passive_filter(links, observed);
    auto plan = emit_probe_plan(links, {}, p.rib_ptrs());

    Emitter em(c.out);
    em.put("link_report.csv", format_link_report(links), links.size());
    em.put("probe_plan.csv", format_probe_plan(plan), plan.size());
    std::map<std::string, std::size_t> by_status;
    for (const auto& l : links) ++by_status[link_status_name(l.status)];
    em.summary["stats"] = {{"method", mname}, {"links", links.size()}};
    for (const auto& [s, n] : by_status) em.summary["stats"]["status"][s] = n;
    em.finish("detect-links");
    return 0;
}

EventKind parse_event_kind(const std::string& s) {
    for (EventKind k : {EventKind::HiddenHijack, EventKind::BogusLinkInterception,
                        EventKind::Aggregation, EventKind::DefaultRouteDetour})
        if (s == event_kind_name(k)) return k;
    throw std::runtime_error("unknown event kind: " + s);
}

int cmd_synth(const CommonOpts& c, const SynthOpts& s) {
    ScenarioConfig cfg;
    cfg.seed = c.seed;
    cfg.tier_counts.clear();
    for (auto tok : split(s.tiers, ',')) {
        std::size_t n = 0;
        if (!parse_uint(trim(tok), n)) throw std::runtime_error("bad tier list: " + s.tiers);
        cfg.tier_counts.push_back(n);
    }
    cfg.vp_count = s.vps;
    cfg.p2p_density = s.p2p;
    cfg.p_unresponsive = s.p_unresponsive;
    cfg.p_third_party = s.p_third_party;
    cfg.p_borrow = s.p_borrow;
    cfg.p_internal_hop = s.p_internal_hop;
    cfg.p_ixp = s.p_ixp;
    cfg.p_sibling = s.p_sibling;
    for (const auto& ev : s.events) {
        auto f = split(ev, ':');
        EventSpec spec;
        spec.kind = parse_event_kind(std::string(trim(f[0])));
        if (f.size() > 1 && !parse_uint(trim(f[1]), spec.count))
            throw std::runtime_error("bad event count: " + ev);
        if (f.size() > 2) {
            try {
                spec.fraction = std::stod(std::string(trim(f[2])));
            } catch (...) {
                throw std::runtime_error("bad event fraction: " + ev);
            }
        }
        cfg.events.push_back(spec);
    }

    SynthOutput out = generate_world(cfg);
    write_world(out, c.out, effective_jobs(c));

    Emitter em(c.out);
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(c.out)) {
        std::string n = e.path().filename().string();
        if (n.rfind("summary_", 0) == 0) continue;
        names.push_back(n);
    }
    std::sort(names.begin(), names.end());
    for (const auto& n : names) {
        std::string body = read_file((fs::path(c.out) / n).string());
        std::size_t rows = std::count(body.begin(), body.end(), '\n');
        if (n.size() > 4 && n.substr(n.size() - 4) == ".csv" && rows) --rows;
        em.summary["artifacts"][n] = {{"path", n}, {"rows", rows}};
    }
    em.summary["stats"] = {{"networks", out.world.ases.size()},
                           {"links", out.world.links.size()},
                           {"vantages", out.world.vps.size()},
                           {"events", out.truth.events.size()}};
    em.finish("synth");
    return 0;
}

int cmd_report(const CommonOpts& c) {
    Emitter em(c.out);
    std::vector<std::string> names;
    if (fs::exists(c.out))
        for (const auto& e : fs::directory_iterator(c.out))
            names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());

    for (const auto& n : names) {
        if (n.rfind("compare_", 0) != 0 || n.size() < 13 ||
            n.substr(n.size() - 4) != ".csv")
            continue;
        std::string method = n.substr(8, n.size() - 12);
        std::vector<double> ratios;
        bool header = true;
        for (auto line : split(read_file((fs::path(c.out) / n).string()), '\n')) {
            if (header) {
                header = false;
                continue;
            }
            auto f = split(line, ',');
            if (f.size() < 5) continue;
            std::size_t matched = 0, mismatched = 0;
            if (!parse_uint(trim(f[2]), matched) || !parse_uint(trim(f[3]), mismatched))
                continue;
            if (matched + mismatched == 0) continue;
            ratios.push_back(double(mismatched) / double(matched + mismatched));
        }
        std::sort(ratios.begin(), ratios.end());
        std::string csv = "ratio,cum_fraction\n";
        for (std::size_t i = 0; i < ratios.size(); ++i)
            csv += fmt6(ratios[i]) + ',' + fmt6(double(i + 1) / double(ratios.size())) + '\n';
        em.put("cdf_" + method + ".csv", csv, ratios.size());
    }

    if (fs::exists(fs::path(c.out) / "hh_funnel.csv")) {
        std::string body = read_file((fs::path(c.out) / "hh_funnel.csv").string());
        em.put("funnel.csv", body, std::count(body.begin(), body.end(), '\n') - 1);
    }
    if (fs::exists(fs::path(c.out) / "visv_eval.csv")) {
        std::size_t right = 0, wrong = 0, unmap = 0;
        bool header = true;
        for (auto line : split(read_file((fs::path(c.out) / "visv_eval.csv").string()), '\n')) {
            if (header) {
                header = false;
                continue;
            }
            auto f = split(line, ',');
            if (f.size() != 4) continue;
            auto st = trim(f[3]);
            if (st == "right") ++right;
            else if (st == "wrong") ++wrong;
            else if (st == "unmap") ++unmap;
        }
        std::string csv = "metric,value\n";
        csv += "right," + std::to_string(right) + '\n';
        csv += "wrong," + std::to_string(wrong) + '\n';
        csv += "unmap," + std::to_string(unmap) + '\n';
        csv += "error_ratio," +
               (right + wrong ? fmt6(double(wrong) / double(right + wrong)) : std::string("-")) +
               '\n';
        em.put("errors.csv", csv, 4);
    }
    em.finish("report");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"control-plane vs data-plane route comparison toolkit"};
    app.require_subcommand(1);

    CommonOpts c;
    SynthOpts s;

    auto* sub_cleanse = app.add_subcommand("cleanse", "filter raw probe paths and route dumps");
    auto* sub_pair = app.add_subcommand("pair", "join probe paths with covering routes");
    auto* sub_compare = app.add_subcommand("compare", "segment and label each joined pair");
    auto* sub_visv = app.add_subcommand("visv", "vote address owners from path context");
    auto* sub_train = app.add_subcommand("learn-train", "fit the assignment-correctness scorer");
    auto* sub_correct = app.add_subcommand("learn-correct", "rewrite flagged address rows");
    auto* sub_analyze = app.add_subcommand("analyze", "shape and screen contradicted pairs");
    auto* sub_hh = app.add_subcommand("detect-hh", "find covert sub-prefix takeovers");
    auto* sub_links = app.add_subcommand("detect-links", "find announced links forwarding avoids");
    auto* sub_synth = app.add_subcommand("synth", "generate a reference internet");
    auto* sub_report = app.add_subcommand("report", "distill stage outputs into tables");

    for (CLI::App* sub : {sub_cleanse, sub_pair, sub_compare, sub_visv, sub_train, sub_correct,
                          sub_analyze, sub_hh, sub_links, sub_synth, sub_report})
        add_io_opts(sub, c);

    sub_synth->add_option("--tiers", s.tiers, "networks per tier, top first (comma list)");
    sub_synth->add_option("--vps", s.vps, "vantage count");
    sub_synth->add_option("--p2p-density", s.p2p, "chance of an extra same-tier peering");
    sub_synth->add_option("--p-unresponsive", s.p_unresponsive, "chance a hop answer is lost");
    sub_synth->add_option("--p-third-party", s.p_third_party,
                          "chance an entry hop answers from another interface");
    sub_synth->add_option("--p-borrow", s.p_borrow,
                          "chance a customer interface uses provider space");
    sub_synth->add_option("--p-internal-hop", s.p_internal_hop,
                          "chance a network exposes an interior router hop");
    sub_synth->add_option("--p-ixp", s.p_ixp, "chance a peering rides an exchange fabric");
    sub_synth->add_option("--p-sibling", s.p_sibling, "chance of org fusion between networks");
    sub_synth->add_option("--event", s.events,
                          "staged anomaly, kind[:count[:fraction]] (repeatable)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sub_cleanse->parsed()) return cmd_cleanse(c);
        if (sub_pair->parsed()) return cmd_pair(c);
        if (sub_compare->parsed()) return cmd_compare(c);
        if (sub_visv->parsed()) return cmd_visv(c);
        if (sub_train->parsed()) return cmd_learn_train(c);
        if (sub_correct->parsed()) return cmd_learn_correct(c);
        if (sub_analyze->parsed()) return cmd_analyze(c);
        if (sub_hh->parsed()) return cmd_detect_hh(c);
        if (sub_links->parsed()) return cmd_detect_links(c);
        if (sub_synth->parsed()) return cmd_synth(c, s);
        if (sub_report->parsed()) return cmd_report(c);
    } catch (const MissingRoaDb& e) {
        std::cerr << "error: MissingRoaDb: " << e.what() << "\n";
        return 1;
    } catch (const MissingAltVpRibs& e) {
        std::cerr << "error: MissingAltVpRibs: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
