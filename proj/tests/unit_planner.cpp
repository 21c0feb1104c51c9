#include <catch2/catch_amalgamated.hpp>

#include "canvas/backends/symbolic.hpp"
#include "canvas/planner.hpp"

#include "support/story_gen.hpp"

using namespace canvas;

namespace {

StoryScript museum() {
    return testsupport::load_story_file(testsupport::source_path("stories/museum_heist.json"));
}

ContinuityPlan museum_plan() {
    StoryScript s = museum();
    SymbolicBackend be(s);
    return build_global_plan(s, be, 1);
}

}  // namespace

TEST_CASE("location plan clusters shots by place with normalized modes") {
    ContinuityPlan plan = museum_plan();
    REQUIRE(plan.n_shots() == 5);

    const auto& clusters = plan.locations.clusters;
    REQUIRE(clusters.size() == 2);
    CHECK(clusters.at(location_id("museum_gallery")) == std::vector<int>{0, 1, 3, 4});
    CHECK(clusters.at(location_id("security_room")) == std::vector<int>{2});

    auto mode = [&](int t) { return plan.locations.mode_at(t); };
    CHECK(mode(0) == ContinuityMode::fresh_location);
    CHECK(mode(1) == ContinuityMode::previous_frame_continuation);
    CHECK(mode(2) == ContinuityMode::fresh_location);
    CHECK(mode(3) == ContinuityMode::location_reappearance);
    // The closing shot is annotated as a hard cut even though the previous
    // shot is at the same place.
    CHECK(mode(4) == ContinuityMode::location_reappearance);
}

TEST_CASE("location occurrences split clusters into consecutive runs") {
    ContinuityPlan plan = museum_plan();
    auto runs = plan.locations.occurrences(location_id("museum_gallery"));
    REQUIRE(runs.size() == 2);
    CHECK(runs[0] == std::vector<int>{0, 1});
    CHECK(runs[1] == std::vector<int>{3, 4});
    CHECK(plan.locations.occurrences(location_id("security_room")) ==
          std::vector<std::vector<int>>{{2}});
}

TEST_CASE("appearance timelines follow the annotated states") {
    ContinuityPlan plan = museum_plan();
    EntityId lena = character_id("lena");
    EntityId ethan = character_id("ethan");
    EntityId thief = character_id("masked_thief");

    CHECK(plan.appearance_at(lena, 0) == "blue_dress");
    CHECK(plan.appearance_at(lena, 1) == "blue_dress");
    CHECK(plan.appearance_at(lena, 2) == "security_jacket");
    CHECK(plan.appearance_at(lena, 3) == "security_jacket");
    CHECK(plan.appearance_at(lena, 4) == "blue_dress");

    CHECK(plan.appearance_at(ethan, 0) == "trench_coat");
    CHECK(plan.appearance_at(ethan, 2) == kNotPresent);
    for (int t = 0; t < 5; ++t) CHECK(plan.appearance_at(thief, t) == kNotPresent);

    auto present = plan.present_characters(0);
    CHECK(present.size() == 2);
    CHECK(plan.present_characters(2) == std::vector<EntityId>{lena});
}

TEST_CASE("prop timelines carry state and carrier per shot") {
    ContinuityPlan plan = museum_plan();
    EntityId artifact = prop_id("golden_artifact");
    EntityId display = prop_id("display_case");

    CHECK(plan.prop_at(artifact, 0).state == "inside_display_case");
    CHECK(plan.prop_at(artifact, 2).state == "carried");
    REQUIRE(plan.prop_at(artifact, 2).carrier.has_value());
    CHECK(*plan.prop_at(artifact, 2).carrier == character_id("masked_thief"));
    CHECK(plan.prop_at(artifact, 3).state == "not_visible");
    CHECK(plan.prop_at(artifact, 4).state == "missing_from_gallery");
    CHECK(plan.prop_at(display, 2).state == "not_visible");
    CHECK(plan.prop_at(display, 3).state == "intact");
}

TEST_CASE("background plans are taken verbatim from explicit annotations") {
    ContinuityPlan plan = museum_plan();
    const BackgroundPlan& s1 = plan.backgrounds[0];
    CHECK(s1.background_props == std::vector<EntityId>{prop_id("display_case")});
    CHECK(s1.must_appear == std::vector<EntityId>{prop_id("golden_artifact")});
    CHECK(s1.must_not_appear.empty());

    const BackgroundPlan& s4 = plan.backgrounds[3];
    CHECK(s4.must_not_appear == std::vector<EntityId>{prop_id("golden_artifact")});

    const BackgroundPlan& s3 = plan.backgrounds[2];
    CHECK(s3.background_props.empty());
    CHECK(s3.must_appear.empty());
    CHECK(s3.must_not_appear.empty());
}

TEST_CASE("background plans derive from prop states when not annotated") {
    StoryScript s = testsupport::make_story(5);
    // Strip explicit background annotations so the planner falls back to the
    // prop-state derivation.
    for (auto& shot : s.shots) {
        auto& a = *shot.annotations;
        a.has_background = false;
        a.background_props.clear();
        a.must_appear.clear();
        a.must_not_appear.clear();
        a.carried.clear();
    }
    SymbolicBackend be(s);
    ContinuityPlan plan = build_global_plan(s, be, 3);
    for (int t = 0; t < plan.n_shots(); ++t) {
        const BackgroundPlan& bg = plan.backgrounds[static_cast<std::size_t>(t)];
        const auto& ann = *s.shots[static_cast<std::size_t>(t)].annotations;
        for (const auto& [name, entry] : ann.props) {
            EntityId id = prop_id(name);
            bool in_bg = std::find(bg.background_props.begin(), bg.background_props.end(),
                                   id) != bg.background_props.end();
            bool carried = false;
            for (const auto& [c, ps] : bg.carried)
                carried |= std::find(ps.begin(), ps.end(), id) != ps.end();
            if (entry.state == "not_visible") {
                CHECK_FALSE(in_bg);
                CHECK_FALSE(carried);
            } else if (entry.carrier) {
                CHECK(carried);
                CHECK_FALSE(in_bg);
            } else {
                CHECK(in_bg);
                CHECK_FALSE(carried);
            }
        }
        CHECK(bg.must_not_appear.empty());
    }
}

TEST_CASE("plans for generated stories always validate") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        StoryScript s = testsupport::make_story(seed);
        SymbolicBackend be(s);
        ContinuityPlan plan = build_global_plan(s, be, seed);
        CHECK_NOTHROW(validate_plan(plan, s));
    }
}

TEST_CASE("plan validation rejects structural defects") {
    StoryScript s = museum();
    SymbolicBackend be(s);
    ContinuityPlan good = build_global_plan(s, be, 1);

    SECTION("missing appearance timeline") {
        ContinuityPlan p = good;
        p.appearance.erase(character_id("lena"));
        CHECK_THROWS_AS(validate_plan(p, s), PlanValidationError);
    }
    SECTION("clustering does not partition the shots") {
        ContinuityPlan p = good;
        p.locations.clusters[location_id("security_room")].push_back(0);
        CHECK_THROWS_AS(validate_plan(p, s), PartitionError);
    }
    SECTION("first visit must be fresh") {
        ContinuityPlan p = good;
        p.locations.shots[0].mode = ContinuityMode::location_reappearance;
        CHECK_THROWS_AS(validate_plan(p, s), PlanValidationError);
    }
    SECTION("revisit may not be fresh") {
        ContinuityPlan p = good;
        p.locations.shots[3].mode = ContinuityMode::fresh_location;
        CHECK_THROWS_AS(validate_plan(p, s), PlanValidationError);
    }
    SECTION("shot count mismatch") {
        ContinuityPlan p = good;
        p.shot_ids.pop_back();
        CHECK_THROWS_AS(validate_plan(p, s), PlanValidationError);
    }
}

TEST_CASE("plan json round-trips exactly") {
    ContinuityPlan plan = museum_plan();
    Json j = to_json(plan);
    ContinuityPlan back = plan_from_json(j);
    CHECK(to_json(back) == j);
    CHECK_NOTHROW(validate_plan(back, museum()));

    for (std::uint64_t seed : {3ull, 17ull, 256ull}) {
        StoryScript s = testsupport::make_story(seed);
        SymbolicBackend be(s);
        ContinuityPlan p = build_global_plan(s, be, seed);
        Json pj = to_json(p);
        CHECK(to_json(plan_from_json(pj)) == pj);
    }
}

TEST_CASE("planning is deterministic in the seed") {
    StoryScript s = testsupport::make_story(11);
    SymbolicBackend be(s);
    Json a = to_json(build_global_plan(s, be, 42));
    Json b = to_json(build_global_plan(s, be, 42));
    CHECK(a == b);
}

TEST_CASE("planner surfaces malformed reasoner output as a backend error") {
    StoryScript s = museum();

    struct GarbageBackend : Backend {
        std::string name() const override { return "garbage"; }
        std::string reason(const ReasonRequest&) override { return "not json at all"; }
        FrameArtifact generate(const GenerateRequest&) override {
            throw BackendError("no generate");
        }
        std::string evaluate(const EvalRequest&) override { return "{}"; }
    } garbage;

    CHECK_THROWS_AS(build_global_plan(s, garbage, 1), MalformedPlanJson);
}

TEST_CASE("empty story cannot be planned") {
    StoryScript s;
    s.story_id = "empty";
    SymbolicBackend be(s);
    CHECK_THROWS_AS(build_global_plan(s, be, 1), EmptyStory);
}
