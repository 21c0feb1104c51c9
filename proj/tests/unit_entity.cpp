#include <catch2/catch_amalgamated.hpp>

#include "canvas/entity.hpp"
#include "canvas/memory.hpp"

using namespace canvas;

TEST_CASE("entity names canonicalize to lowercase underscore form") {
    CHECK(canonicalize_entity("Lena") == "lena");
    CHECK(canonicalize_entity("lena") == "lena");
    CHECK(canonicalize_entity("Museum Gallery") == "museum_gallery");
    CHECK(canonicalize_entity("  The   Display-Case ") == "the_display_case");
    CHECK(canonicalize_entity("Shot 42b") == "shot_42b");
    CHECK(canonicalize_entity("A--B__C") == "a_b_c");
}

TEST_CASE("entity canonicalization folds accented latin letters") {
    CHECK(canonicalize_entity("Léna") == "lena");
    CHECK(canonicalize_entity("ÉTIENNE") == "etienne");
    CHECK(canonicalize_entity("Straße") == "strasse");
    CHECK(canonicalize_entity("Señor") == "senor");
}

TEST_CASE("entity canonicalization is idempotent") {
    for (const std::string raw : {"Lena", "Museum Gallery", "Léna", "a b 9", "x"}) {
        std::string once = canonicalize_entity(raw);
        CHECK(canonicalize_entity(once) == once);
    }
}

TEST_CASE("empty or separator-only names are rejected") {
    CHECK_THROWS_AS(canonicalize_entity(""), EmptyName);
    CHECK_THROWS_AS(canonicalize_entity("  --  "), EmptyName);
    CHECK_THROWS_AS(character_id("!!!"), EmptyName);
}

TEST_CASE("entity ids compare by kind then name") {
    EntityId a = character_id("ana");
    EntityId b = character_id("bo");
    EntityId loc = location_id("ana");
    CHECK(a < b);
    CHECK(a != loc);
    CHECK(a == character_id("Ana"));
    CHECK(a.str() == "character:ana");
    CHECK(loc.str() == "location:ana");
    CHECK(prop_id("Lamp").str() == "prop:lamp");
}

TEST_CASE("seed mixing is deterministic and spreads inputs") {
    CHECK(fnv1a64("") == 14695981039346656037ull);
    CHECK(fnv1a64("a") != fnv1a64("b"));
    CHECK(splitmix64(1) == splitmix64(1));
    CHECK(splitmix64(1) != splitmix64(2));
    CHECK(mix_seed(1, 2) == mix_seed(1, 2));
    CHECK(mix_seed(1, 2) != mix_seed(2, 1));
}

TEST_CASE("anchor keys render and parse as stable paths") {
    AnchorKey ck = canonical_key(character_id("Lena"), "canonical");
    CHECK(ck.path() == "canonical/lena/canonical");
    AnchorKey rk = character_key(character_id("lena"), "blue_dress");
    CHECK(rk.path() == "character/lena/blue_dress");
    AnchorKey lk = location_key(location_id("Museum Gallery"));
    CHECK(lk.path() == "location/museum_gallery");
    AnchorKey pk = prop_key(prop_id("golden artifact"), "intact");
    CHECK(pk.path() == "prop/golden_artifact/intact");

    for (const auto& k : {ck, rk, lk, pk}) {
        AnchorKey back = AnchorKey::parse(k.path());
        CHECK(back == k);
        CHECK(back.path() == k.path());
    }
}

TEST_CASE("malformed anchor key paths are rejected") {
    CHECK_THROWS_AS(AnchorKey::parse(""), CorruptSnapshot);
    CHECK_THROWS_AS(AnchorKey::parse("unknown_kind/x/y"), CorruptSnapshot);
    CHECK_THROWS_AS(AnchorKey::parse("character"), CorruptSnapshot);
    CHECK_THROWS_AS(AnchorKey::parse("prop/only_name"), CorruptSnapshot);
}
