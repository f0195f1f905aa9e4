#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <random>

#include "cdmatch/registry.hpp"
#include "cdmatch/util.hpp"

using namespace cdmatch;

namespace {

std::string temp_file(const std::string& name, const std::string& content) {
    auto path = (std::filesystem::temp_directory_path() / name).string();
    write_file(path, content);
    return path;
}

// Reference origin validation: bit arithmetic done longhand, no Prefix reuse.
RoaState oracle_state(const std::vector<RoaRecord>& records, const Prefix& announced, Asn origin) {
    bool covered = false, valid = false;
    for (const auto& r : records) {
        if (r.prefix.len > announced.len) continue;
        bool same = true;
        for (unsigned bit = 0; bit < r.prefix.len; ++bit) {
            std::uint32_t m = 1u << (31 - bit);
            if ((r.prefix.net & m) != (announced.net & m)) same = false;
        }
        if (!same) continue;
        covered = true;
        if (r.asn == origin && announced.len <= r.maxlen) valid = true;
    }
    if (valid) return RoaState::Valid;
    return covered ? RoaState::Invalid : RoaState::NotFound;
}

}  // namespace

TEST_CASE("relationship lookup mirrors and defaults to none", "[registry]") {
    RelDb db;
    db.add_p2c(10, 20);   // 10 provides transit to 20
    db.add_p2c(300, 20);  // key order flipped relative to insertion
    db.add_p2p(20, 30);

    CHECK(db.lookup(10, 20) == Rel::P2C);
    CHECK(db.lookup(20, 10) == Rel::C2P);
    CHECK(db.lookup(300, 20) == Rel::P2C);
    CHECK(db.lookup(20, 300) == Rel::C2P);
    CHECK(db.lookup(20, 30) == Rel::P2P);
    CHECK(db.lookup(30, 20) == Rel::P2P);
    CHECK(db.lookup(10, 30) == Rel::None);

    CHECK(db.providers_of(20) == std::vector<Asn>{10, 300});
    CHECK(db.customers_of(10) == std::vector<Asn>{20});
    CHECK(db.peers_of(30) == std::vector<Asn>{20});
}

TEST_CASE("sibling outranks link records", "[registry]") {
    RelDb db;
    db.add_p2c(10, 20);
    db.add_org(10, "orgA");
    db.add_org(20, "orgA");
    db.add_org(30, "orgB");
    CHECK(db.lookup(10, 20) == Rel::Sibling);
    CHECK(db.lookup(20, 10) == Rel::Sibling);
    CHECK(db.lookup(10, 30) == Rel::None);
    CHECK(db.lookup(5, 5) == Rel::Sibling);
    CHECK(db.siblings_of(10) == std::vector<Asn>{20});
}

TEST_CASE("conflicting relationship records are rejected", "[registry]") {
    RelDb db;
    db.add_p2c(10, 20);
    CHECK_NOTHROW(db.add_p2c(10, 20));  // duplicates are fine
    CHECK_THROWS_AS(db.add_p2p(10, 20), std::invalid_argument);
    CHECK_THROWS_AS(db.add_p2c(20, 10), std::invalid_argument);  // reversed roles
    CHECK_THROWS_AS(db.add_p2c(7, 7), std::invalid_argument);
}

TEST_CASE("relationship file loader reports line numbers", "[registry]") {
    auto good = temp_file("rel_good.txt",
                          "# provider|customer|-1, peer|peer|0\n"
                          "10|20|-1\n"
                          "20|30|0\n");
    auto db = load_relationships(good);
    CHECK(db.lookup(10, 20) == Rel::P2C);
    CHECK(db.lookup(30, 20) == Rel::P2P);

    auto bad = temp_file("rel_bad.txt", "10|20|-1\n10|20|0\n");
    try {
        load_relationships(bad);
        FAIL("expected parse failure");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }

    auto badcode = temp_file("rel_badcode.txt", "10|20|7\n");
    CHECK_THROWS_AS(load_relationships(badcode), ParseError);
}

TEST_CASE("org loader attaches sibling info", "[registry]") {
    auto rel = temp_file("rel_orgs.txt", "10|20|-1\n");
    auto orgs = temp_file("orgs.txt", "10|org1\n20|org1\n");
    auto db = load_relationships(rel);
    load_orgs(orgs, db);
    CHECK(db.lookup(10, 20) == Rel::Sibling);
}

TEST_CASE("origin validation states", "[registry]") {
    RoaDb db;
    db.add({*parse_prefix("10.0.0.0/16"), 24, 100});
    CHECK(db.origin_state(*parse_prefix("10.0.0.0/16"), 100) == RoaState::Valid);
    CHECK(db.origin_state(*parse_prefix("10.0.4.0/24"), 100) == RoaState::Valid);
    CHECK(db.origin_state(*parse_prefix("10.0.4.0/25"), 100) == RoaState::Invalid);  // beyond maxlen
    CHECK(db.origin_state(*parse_prefix("10.0.4.0/24"), 200) == RoaState::Invalid);  // wrong origin
    CHECK(db.origin_state(*parse_prefix("10.1.0.0/16"), 100) == RoaState::NotFound);
    CHECK_THROWS_AS(db.add(RoaRecord{*parse_prefix("10.0.0.0/16"), 8, 1}), std::invalid_argument);
}

TEST_CASE("origin validation agrees with longhand reference", "[registry][property]") {
    std::mt19937 rng(11);
    RoaDb db;
    std::vector<RoaRecord> records;
    for (int i = 0; i < 40; ++i) {
        auto len = static_cast<std::uint8_t>(8 + rng() % 17);
        Prefix p(Ipv4{static_cast<std::uint32_t>(rng())}, len);
        auto maxlen = static_cast<std::uint8_t>(len + rng() % (33 - len));
        RoaRecord r{p, maxlen, static_cast<Asn>(1 + rng() % 6)};
        db.add(r);
        records.push_back(r);
    }
    for (int i = 0; i < 2000; ++i) {
        Prefix q(Ipv4{static_cast<std::uint32_t>(rng())}, static_cast<std::uint8_t>(8 + rng() % 25));
        Asn origin = 1 + rng() % 6;
        CHECK(db.origin_state(q, origin) == oracle_state(records, q, origin));
    }
}

TEST_CASE("exchange registry membership", "[registry]") {
    auto path = temp_file("ixp.txt",
                          "P|198.32.0.0/24\n"
                          "A|61000\n");
    auto db = load_ixp(path);
    CHECK(db.is_ixp_asn(61000));
    CHECK_FALSE(db.is_ixp_asn(61001));
    CHECK(db.covers_ip(*parse_ipv4("198.32.0.77")));
    CHECK_FALSE(db.covers_ip(*parse_ipv4("198.33.0.77")));

    auto bad = temp_file("ixp_bad.txt", "X|1.2.3.0/24\n");
    CHECK_THROWS_AS(load_ixp(bad), ParseError);
}
