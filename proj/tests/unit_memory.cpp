#include <catch2/catch_amalgamated.hpp>

#include "canvas/backends/symbolic.hpp"
#include "canvas/memory.hpp"
#include "canvas/planner.hpp"
#include "canvas/retrieval.hpp"
#include "canvas/selection.hpp"

#include "support/story_gen.hpp"

using namespace canvas;

namespace {

struct Fixture {
    StoryScript script;
    SymbolicBackend backend;
    ContinuityPlan plan;

    Fixture()
        : script(testsupport::load_story_file(
              testsupport::source_path("stories/museum_heist.json"))),
          backend(script),
          plan(build_global_plan(script, backend, 1)) {}

    FrameArtifact frame_for(WorldMemory& memory, int t, std::uint64_t seed = 1) {
        AnchorSet anchors = retrieve_anchors(memory, script, plan, t, &backend, {}, seed);
        GenerationPrompt prompt = construct_prompt(script, plan, t, anchors);
        GenerateRequest req = make_generate_request(
            prompt, anchors, script.shots[static_cast<std::size_t>(t)].shot_id,
            "f" + std::to_string(t), mix_seed(seed, static_cast<std::uint64_t>(t)));
        return backend.generate(req);
    }
};

}  // namespace

TEST_CASE("init_memory mints one canonical anchor per declared character") {
    Fixture fx;
    WorldMemory memory = init_memory(fx.script, fx.backend, 7);
    REQUIRE(memory.canonical.size() == 3);
    CHECK(memory.characters.empty());
    CHECK(memory.locations.empty());
    CHECK(memory.props.empty());
    CHECK(memory.frames.empty());

    const AnchorRecord* lena =
        memory.find_canonical(canonical_key(character_id("lena"), kCanonicalState));
    REQUIRE(lena != nullptr);
    CHECK(lena->key.path() == "canonical/lena/canonical");
    REQUIRE(lena->artifact.is_scene());
    CHECK(lena->artifact.scene().location.entity.name == "reference_studio");
    REQUIRE(lena->artifact.scene().characters.size() == 1);
    CHECK(lena->descriptor.value("face_id", "") != "");
    CHECK(lena->descriptor.value("face_id", "").find('~') == std::string::npos);
}

TEST_CASE("canonical minting is seed-deterministic") {
    Fixture fx;
    WorldMemory a = init_memory(fx.script, fx.backend, 7);
    WorldMemory b = init_memory(fx.script, fx.backend, 7);
    WorldMemory c = init_memory(fx.script, fx.backend, 8);
    CHECK(snapshot(a) == snapshot(b));
    auto face = [](const WorldMemory& m, const char* who) {
        return m.find_canonical(canonical_key(character_id(who), kCanonicalState))
            ->descriptor.value("face_id", "");
    };
    CHECK(face(a, "lena") == face(b, "lena"));
    CHECK(face(a, "lena") != face(c, "lena"));
    CHECK(face(a, "lena") != face(a, "ethan"));
}

TEST_CASE("disabling canonical anchors leaves init memory empty") {
    Fixture fx;
    Ablations ab;
    ab.disable_canonical_anchors = true;
    WorldMemory memory = init_memory(fx.script, fx.backend, 7, ab);
    CHECK(memory.canonical.empty());
}

TEST_CASE("update_memory indexes the committed frame by character, location and prop") {
    Fixture fx;
    WorldMemory memory = init_memory(fx.script, fx.backend, 7);
    FrameArtifact f0 = fx.frame_for(memory, 0);
    update_memory(memory, fx.script, fx.plan, 0, f0, fx.backend);

    REQUIRE(memory.frames.size() == 1);
    CHECK(memory.frames[0].frame_id == f0.frame_id);

    const AnchorRecord* lena =
        memory.find_character_anchor(character_key(character_id("lena"), "blue_dress"));
    REQUIRE(lena != nullptr);
    CHECK(lena->source_shot == 0);
    CHECK(lena->descriptor.value("face_id", "") != "");

    const AnchorRecord* ethan =
        memory.find_character_anchor(character_key(character_id("ethan"), "trench_coat"));
    CHECK(ethan != nullptr);

    const AnchorRecord* loc = memory.find_location_anchor(location_id("museum_gallery"));
    REQUIRE(loc != nullptr);
    CHECK(loc->source_shot == 0);
    REQUIRE(loc->descriptor.contains("structures"));
    CHECK(loc->descriptor["structures"].size() >= 4);

    const AnchorRecord* artifact = memory.find_prop_anchor(
        prop_key(prop_id("golden_artifact"), "inside_display_case"));
    REQUIRE(artifact != nullptr);
    const AnchorRecord* display =
        memory.find_prop_anchor(prop_key(prop_id("display_case"), "intact"));
    CHECK(display != nullptr);

    auto recent = memory.recent_character.find(character_id("lena"));
    REQUIRE(recent != memory.recent_character.end());
    CHECK(recent->second == character_key(character_id("lena"), "blue_dress"));
}

TEST_CASE("recent pointer tracks the newest committed state per character") {
    Fixture fx;
    WorldMemory memory = init_memory(fx.script, fx.backend, 7);
    for (int t = 0; t < 3; ++t)
        update_memory(memory, fx.script, fx.plan, t, fx.frame_for(memory, t), fx.backend);
    CHECK(memory.recent_character.at(character_id("lena")) ==
          character_key(character_id("lena"), "security_jacket"));
    // Ethan last appeared in shot 1.
    CHECK(memory.recent_character.at(character_id("ethan")) ==
          character_key(character_id("ethan"), "trench_coat"));
    // Both of lena's state anchors are retained.
    CHECK(memory.find_character_anchor(character_key(character_id("lena"), "blue_dress")) !=
          nullptr);
    CHECK(memory.find_character_anchor(
              character_key(character_id("lena"), "security_jacket")) != nullptr);
}

TEST_CASE("location anchors refresh only when the background plan changes") {
    Fixture fx;
    WorldMemory memory = init_memory(fx.script, fx.backend, 7);
    update_memory(memory, fx.script, fx.plan, 0, fx.frame_for(memory, 0), fx.backend);
    const AnchorRecord* after_s1 = memory.find_location_anchor(location_id("museum_gallery"));
    REQUIRE(after_s1 != nullptr);
    CHECK(after_s1->source_shot == 0);

    // Shot 1 has identical prop directives: the stored anchor is kept.
    update_memory(memory, fx.script, fx.plan, 1, fx.frame_for(memory, 1), fx.backend);
    CHECK(memory.find_location_anchor(location_id("museum_gallery"))->source_shot == 0);

    update_memory(memory, fx.script, fx.plan, 2, fx.frame_for(memory, 2), fx.backend);

    // Shot 3 changes prop states (the artifact is gone, forbidden on screen):
    // the gallery anchor must be refreshed.
    update_memory(memory, fx.script, fx.plan, 3, fx.frame_for(memory, 3), fx.backend);
    CHECK(memory.find_location_anchor(location_id("museum_gallery"))->source_shot == 3);
}

TEST_CASE("commits must arrive in order with matching shot ids") {
    Fixture fx;
    WorldMemory memory = init_memory(fx.script, fx.backend, 7);
    FrameArtifact f0 = fx.frame_for(memory, 0);

    SECTION("wrong shot id") {
        FrameArtifact wrong = f0;
        wrong.shot_id = "s2";
        CHECK_THROWS_AS(update_memory(memory, fx.script, fx.plan, 0, wrong, fx.backend),
                        SequenceError);
    }
    SECTION("skipped index") {
        FrameArtifact f1 = f0;
        f1.shot_id = "s2";
        CHECK_THROWS_AS(update_memory(memory, fx.script, fx.plan, 1, f1, fx.backend),
                        SequenceError);
    }
}

TEST_CASE("prop anchoring can be ablated") {
    Fixture fx;
    WorldMemory memory = init_memory(fx.script, fx.backend, 7);
    Ablations ab;
    ab.disable_prop_state_update = true;
    update_memory(memory, fx.script, fx.plan, 0, fx.frame_for(memory, 0), fx.backend, ab);
    CHECK(memory.props.empty());
    CHECK_FALSE(memory.characters.empty());
}

TEST_CASE("memory snapshots restore byte-identically") {
    Fixture fx;
    WorldMemory memory = init_memory(fx.script, fx.backend, 7);
    for (int t = 0; t < 2; ++t)
        update_memory(memory, fx.script, fx.plan, t, fx.frame_for(memory, t), fx.backend);

    std::string bytes = snapshot(memory);
    WorldMemory back = restore(bytes);
    CHECK(snapshot(back) == bytes);
    CHECK(back.frames.size() == memory.frames.size());
    CHECK(back.recent_character == memory.recent_character);
    CHECK(back.canonical.size() == memory.canonical.size());
}

TEST_CASE("corrupt snapshots are rejected") {
    CHECK_THROWS_AS(restore("not json"), CorruptSnapshot);
    CHECK_THROWS_AS(restore("{\"canonical\": [{\"key\": \"bogus\"}]}"), CorruptSnapshot);
}
