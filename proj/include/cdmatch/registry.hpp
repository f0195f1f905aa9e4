#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cdmatch/net.hpp"
#include "cdmatch/util.hpp"

namespace cdmatch {

/// Relationship of the first AS toward the second.
enum class Rel : std::uint8_t { None, P2C, C2P, P2P, Sibling };

inline const char* rel_name(Rel r) {
    switch (r) {
        case Rel::P2C: return "p2c";
        case Rel::C2P: return "c2p";
        case Rel::P2P: return "p2p";
        case Rel::Sibling: return "sibling";
        default: return "none";
    }
}

/// AS relationship registry. Sibling (same org) outranks any link record.
class RelDb {
public:
    /// Records `provider` as a provider of `customer`.
    void add_p2c(Asn provider, Asn customer) { set_link(provider, customer, Rel::P2C); }
    void add_p2p(Asn a, Asn b) { set_link(a, b, Rel::P2P); }
    void add_org(Asn a, const std::string& org) { org_[a] = org; }

    Rel lookup(Asn a, Asn b) const {
        if (a == b) return Rel::Sibling;
        auto oa = org_.find(a), ob = org_.find(b);
        if (oa != org_.end() && ob != org_.end() && oa->second == ob->second) return Rel::Sibling;
        auto it = links_.find(key(a, b));
        if (it == links_.end()) return Rel::None;
        if (it->second == Rel::P2P) return Rel::P2P;
        // Stored orientation: key's first AS is the provider.
        return a < b ? it->second : (it->second == Rel::P2C ? Rel::C2P : Rel::P2C);
    }

    std::vector<Asn> providers_of(Asn a) const { return neighbors(a, Rel::C2P); }
    std::vector<Asn> customers_of(Asn a) const { return neighbors(a, Rel::P2C); }
    std::vector<Asn> peers_of(Asn a) const { return neighbors(a, Rel::P2P); }

    std::vector<Asn> siblings_of(Asn a) const {
        std::vector<Asn> out;
        auto oa = org_.find(a);
        if (oa == org_.end()) return out;
        for (const auto& [asn, org] : org_)
            if (asn != a && org == oa->second) out.push_back(asn);
        std::sort(out.begin(), out.end());
        return out;
    }

    const std::map<std::pair<Asn, Asn>, Rel>& links() const { return links_; }

private:
    static std::pair<Asn, Asn> key(Asn a, Asn b) { return {std::min(a, b), std::max(a, b)}; }

    void set_link(Asn a, Asn b, Rel r) {
        if (a == b) throw std::invalid_argument("self relationship for AS " + std::to_string(a));
        Rel stored = r;
        if (r == Rel::P2C && a > b) stored = Rel::C2P;  // orient to key order
        auto [it, inserted] = links_.emplace(key(a, b), stored);
        if (!inserted && it->second != stored)
            throw std::invalid_argument("conflicting relationship for AS pair " +
                                        std::to_string(a) + "," + std::to_string(b));
    }

    std::vector<Asn> neighbors(Asn a, Rel want) const {
        std::vector<Asn> out;
        for (const auto& [k, r] : links_) {
            Asn other;
            if (k.first == a) other = k.second;
            else if (k.second == a) other = k.first;
            else continue;
            if (lookup(a, other) == want) out.push_back(other);
        }
        return out;
    }

    // key = (lower ASN, higher ASN); P2C/C2P stored relative to the lower ASN.
    std::map<std::pair<Asn, Asn>, Rel> links_;
    std::unordered_map<Asn, std::string> org_;
};

/// Loads `asn1|asn2|-1` (asn1 provider of asn2) / `asn1|asn2|0` (peers) records.
inline RelDb load_relationships(const std::string& path) {
    RelDb db;
    for_each_data_line(path, [&](std::size_t lineno, std::string_view line) {
        auto f = split(line, '|');
        if (f.size() != 3) throw ParseError(path, lineno, "expected asn1|asn2|code");
        Asn a = 0, b = 0;
        int code = 0;
        if (!parse_uint(trim(f[0]), a) || !parse_uint(trim(f[1]), b) || !parse_int(trim(f[2]), code))
            throw ParseError(path, lineno, "bad relationship record");
        try {
            if (code == -1) db.add_p2c(a, b);
            else if (code == 0) db.add_p2p(a, b);
            else throw std::invalid_argument("relationship code must be -1 or 0");
        } catch (const std::invalid_argument& e) {
            throw ParseError(path, lineno, e.what());
        }
    });
    return db;
}

/// Loads `asn|org_id` records into an existing registry.
inline void load_orgs(const std::string& path, RelDb& db) {
    for_each_data_line(path, [&](std::size_t lineno, std::string_view line) {
        auto f = split(line, '|');
        if (f.size() != 2) throw ParseError(path, lineno, "expected asn|org_id");
        Asn a = 0;
        if (!parse_uint(trim(f[0]), a) || trim(f[1]).empty())
            throw ParseError(path, lineno, "bad org record");
        db.add_org(a, std::string(trim(f[1])));
    });
}

enum class RoaState : std::uint8_t { Valid, Invalid, NotFound };

inline const char* roa_state_name(RoaState s) {
    switch (s) {
        case RoaState::Valid: return "valid";
        case RoaState::Invalid: return "invalid";
        default: return "notfound";
    }
}

struct RoaRecord {
    Prefix prefix;
    std::uint8_t maxlen = 0;
    Asn asn = 0;

    auto operator<=>(const RoaRecord&) const = default;
};

/// Route-origin authorization set with covering-prefix validation.
class RoaDb {
public:
    void add(const RoaRecord& r) {
        if (r.maxlen < r.prefix.len || r.maxlen > 32)
            throw std::invalid_argument("maxlen outside [prefix length, 32]");
        records_.push_back(r);
    }

    /// Valid if a covering record authorizes `origin` at this length; Invalid
    /// if covering records exist but none does; NotFound with no coverage.
    RoaState origin_state(const Prefix& announced, Asn origin) const {
        bool covered = false;
        for (const auto& r : records_) {
            if (!r.prefix.covers(announced)) continue;
            covered = true;
            if (r.asn == origin && announced.len <= r.maxlen) return RoaState::Valid;
        }
        return covered ? RoaState::Invalid : RoaState::NotFound;
    }

    const std::vector<RoaRecord>& records() const { return records_; }

private:
    std::vector<RoaRecord> records_;
};

/// Loads `prefix|maxlen|asn` authorization records.
inline RoaDb load_roas(const std::string& path) {
    RoaDb db;
    for_each_data_line(path, [&](std::size_t lineno, std::string_view line) {
        auto f = split(line, '|');
        if (f.size() != 3) throw ParseError(path, lineno, "expected prefix|maxlen|asn");
        auto p = parse_prefix(trim(f[0]));
        unsigned maxlen = 0;
        Asn asn = 0;
        if (!p || !parse_uint(trim(f[1]), maxlen) || !parse_uint(trim(f[2]), asn))
            throw ParseError(path, lineno, "bad authorization record");
        try {
            db.add(RoaRecord{*p, static_cast<std::uint8_t>(maxlen), asn});
        } catch (const std::invalid_argument& e) {
            throw ParseError(path, lineno, e.what());
        }
    });
    return db;
}

/// Exchange-fabric registry: peering-LAN prefixes plus exchange-operated ASNs.
class IxpDb {
public:
    void add_prefix(const Prefix& p) { prefixes_.insert(p); }
    void add_asn(Asn a) { asns_.insert(a); }

    bool is_ixp_asn(Asn a) const { return asns_.count(a) > 0; }

    bool covers_ip(Ipv4 ip) const {
        for (const auto& p : prefixes_)
            if (p.contains(ip)) return true;
        return false;
    }

    const std::set<Prefix>& prefixes() const { return prefixes_; }
    const std::set<Asn>& asns() const { return asns_; }

private:
    std::set<Prefix> prefixes_;
    std::set<Asn> asns_;
};

/// Loads `P|prefix` and `A|asn` exchange records.
inline IxpDb load_ixp(const std::string& path) {
    IxpDb db;
    for_each_data_line(path, [&](std::size_t lineno, std::string_view line) {
        auto f = split(line, '|');
        if (f.size() != 2) throw ParseError(path, lineno, "expected P|prefix or A|asn");
        auto tag = trim(f[0]);
        if (tag == "P") {
            auto p = parse_prefix(trim(f[1]));
            if (!p) throw ParseError(path, lineno, "bad prefix");
            db.add_prefix(*p);
        } else if (tag == "A") {
            Asn a = 0;
            if (!parse_uint(trim(f[1]), a)) throw ParseError(path, lineno, "bad asn");
            db.add_asn(a);
        } else {
            throw ParseError(path, lineno, "record tag must be P or A");
        }
    });
    return db;
}

}  // namespace cdmatch
