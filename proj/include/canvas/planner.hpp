#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "canvas/backend.hpp"
#include "canvas/plan.hpp"
#include "canvas/prompts.hpp"

namespace canvas {

struct ContinuationDecision {
    ContinuityMode mode = ContinuityMode::location_reappearance;
    bool same_location = false;
    bool requires_spatial_continuity = false;
    std::vector<std::string> spatial_dependencies;
    std::string reasoning;
};

namespace detail {

inline Json story_context(const StoryScript& script) {
    return Json{{"story", to_json(script)}};
}

}  // namespace detail

// One appearance state per shot for one character; off-screen shots must be
// explicit kNotPresent entries.
inline AppearanceTimeline plan_character_appearance(const StoryScript& script,
                                                    Backend& reasoner,
                                                    const CharacterDecl& who,
                                                    std::uint64_t seed,
                                                    const EventSink& sink = {}) {
    ReasonRequest req;
    req.task = "character_appearance";
    req.prompt = prompts::character_appearance(script, who);
    req.context = detail::story_context(script);
    req.context["character"] = who.id.name;
    req.seed = mix_seed(seed, fnv1a64(req.task + who.id.name));
    Json reply = logged_reason(reasoner, req, sink);

    const Json& tl = jsonutil::require(reply, "appearance_timeline", req.task);
    AppearanceTimeline out;
    out.character = who.id;
    out.states.reserve(script.shots.size());
    for (const auto& shot : script.shots) {
        auto it = tl.find(shot.shot_id);
        if (it == tl.end())
            throw CoverageError("appearance of " + who.id.name + " missing for shot " +
                                shot.shot_id);
        std::string state = it->get<std::string>();
        out.states.push_back(state == kNotPresent ? state : canonicalize_entity(state));
    }
    return out;
}

// Location clusters plus a provisional continuity mode per shot. Modes are
// normalized against the clustering: a first visit is always fresh, a
// revisit never is.
inline LocationPlan plan_locations(const StoryScript& script, Backend& reasoner,
                                   std::uint64_t seed, const EventSink& sink = {}) {
    ReasonRequest req;
    req.task = "location_clustering";
    req.prompt = prompts::location_clustering(script);
    req.context = detail::story_context(script);
    req.seed = mix_seed(seed, fnv1a64(req.task));
    Json reply = logged_reason(reasoner, req, sink);

    LocationPlan out;
    out.shots.resize(script.shots.size());
    std::map<std::string, int> index_of;
    for (const auto& shot : script.shots) index_of[shot.shot_id] = shot.index;

    const Json& shots = jsonutil::require(reply, "shots", req.task);
    std::set<int> covered;
    for (const auto& [sid, entry] : shots.items()) {
        auto it = index_of.find(sid);
        if (it == index_of.end())
            throw PartitionError("clustering names unknown shot " + sid);
        ShotLocation sl;
        sl.location = location_id(jsonutil::require_string(entry, "location_id", req.task));
        sl.mode = continuity_mode_from_string(
            jsonutil::require_string(entry, "continuity_mode", req.task));
        out.shots[static_cast<std::size_t>(it->second)] = sl;
        covered.insert(it->second);
    }
    if (static_cast<int>(covered.size()) != static_cast<int>(script.shots.size()))
        throw PartitionError("clustering does not cover every shot");

    for (int t = 0; t < static_cast<int>(out.shots.size()); ++t)
        out.clusters[out.shots[static_cast<std::size_t>(t)].location].push_back(t);

    std::set<std::string> seen;
    for (auto& sl : out.shots) {
        bool first = seen.insert(sl.location.name).second;
        if (first) sl.mode = ContinuityMode::fresh_location;
        else if (sl.mode == ContinuityMode::fresh_location)
            sl.mode = ContinuityMode::location_reappearance;
    }
    for (std::size_t t = 0; t < out.shots.size(); ++t) {
        auto& sl = out.shots[t];
        if (sl.mode == ContinuityMode::previous_frame_continuation &&
            (t == 0 || !(out.shots[t - 1].location == sl.location)))
            sl.mode = ContinuityMode::location_reappearance;
    }
    return out;
}

// Movable props worth tracking, from the reasoner plus every annotation.
inline std::vector<EntityId> plan_prop_inventory(const StoryScript& script, Backend& reasoner,
                                                 std::uint64_t seed, const EventSink& sink = {}) {
    ReasonRequest req;
    req.task = "prop_inventory";
    req.prompt = prompts::prop_inventory(script);
    req.context = detail::story_context(script);
    req.seed = mix_seed(seed, fnv1a64(req.task));
    Json reply = logged_reason(reasoner, req, sink);

    std::set<EntityId> props;
    for (const auto& p : jsonutil::require(reply, "props", req.task))
        props.insert(prop_id(p.get<std::string>()));
    for (const auto& shot : script.shots)
        if (shot.annotations)
            for (const auto& [name, entry] : shot.annotations->props)
                props.insert(EntityId(EntityKind::prop, name));
    return {props.begin(), props.end()};
}

// Per-shot state (and carrier) for one prop; unlisted shots default to
// not_visible with the carrier carried forward.
inline PropTimeline plan_prop_states(const StoryScript& script, Backend& reasoner,
                                     const EntityId& prop, std::uint64_t seed,
                                     const EventSink& sink = {}) {
    ReasonRequest req;
    req.task = "prop_states";
    req.prompt = prompts::prop_states(script, prop);
    req.context = detail::story_context(script);
    req.context["prop"] = prop.name;
    req.seed = mix_seed(seed, fnv1a64(req.task + prop.name));
    Json reply = logged_reason(reasoner, req, sink);

    const Json& tl = jsonutil::require(reply, "state_timeline", req.task);
    PropTimeline out;
    out.prop = prop;
    std::optional<EntityId> carried_forward;
    for (const auto& shot : script.shots) {
        PropStateEntry e{"not_visible", carried_forward};
        auto it = tl.find(shot.shot_id);
        if (it != tl.end()) {
            e.state = canonicalize_entity(jsonutil::require_string(*it, "state", req.task));
            if (it->contains("carrier") && !(*it)["carrier"].is_null())
                e.carrier = character_id((*it)["carrier"].get<std::string>());
            else
                e.carrier = std::nullopt;
        }
        carried_forward = e.carrier;
        out.states.push_back(std::move(e));
    }
    return out;
}

// Background composition directives for one shot, given the already-planned
// prop states at that shot.
inline BackgroundPlan plan_background(const StoryScript& script, const Shot& shot,
                                      const Json& prop_states_here, Backend& reasoner,
                                      std::uint64_t seed, const EventSink& sink = {}) {
    ReasonRequest req;
    req.task = "background_plan";
    req.prompt = prompts::background_plan(script, shot, prop_states_here);
    req.context = detail::story_context(script);
    req.context["shot_id"] = shot.shot_id;
    req.context["prop_states"] = prop_states_here;
    req.seed = mix_seed(seed, fnv1a64(req.task + shot.shot_id));
    Json reply = logged_reason(reasoner, req, sink);

    BackgroundPlan out;
    for (const auto& p : reply.value("background_props", Json::array()))
        out.background_props.push_back(prop_id(p.get<std::string>()));
    for (const auto& p : reply.value("must_appear", Json::array()))
        out.must_appear.push_back(prop_id(p.get<std::string>()));
    for (const auto& p : reply.value("must_not_appear", Json::array()))
        out.must_not_appear.push_back(prop_id(p.get<std::string>()));
    const Json jcarried = reply.value("carried_props", Json::object());
    for (const auto& [c, ps] : jcarried.items()) {
        EntityId cid = character_id(c);
        if (!script.declares(cid))
            throw ConsistencyError("carried_props names undeclared character " + cid.name);
        std::vector<EntityId> props;
        for (const auto& p : ps) props.push_back(prop_id(p.get<std::string>()));
        out.carried[cid] = std::move(props);
    }
    out.reasoning = reply.value("reasoning", "");
    for (const auto& p : out.must_appear)
        if (std::find(out.must_not_appear.begin(), out.must_not_appear.end(), p) !=
            out.must_not_appear.end())
            throw ConsistencyError("shot " + shot.shot_id + ": prop " + p.name +
                                   " both required and forbidden");
    return out;
}

// Pairwise refinement: for two consecutive shots in the same cluster, decide
// whether the second extends the first frame or merely revisits the place.
inline ContinuationDecision decide_continuation(const Shot& prev, const Shot& curr,
                                                Backend& reasoner, std::uint64_t seed,
                                                const EventSink& sink = {}) {
    ReasonRequest req;
    req.task = "continuation_decision";
    req.prompt = prompts::continuation_decision(prev, curr);
    req.context = Json{{"prev", Json{{"shot_id", prev.shot_id}, {"description", prev.description}}},
                       {"curr", Json{{"shot_id", curr.shot_id}, {"description", curr.description}}}};
    if (prev.annotations) req.context["prev"]["annotations"] = to_json(*prev.annotations);
    if (curr.annotations) req.context["curr"]["annotations"] = to_json(*curr.annotations);
    req.seed = mix_seed(seed, fnv1a64(req.task + prev.shot_id + "->" + curr.shot_id));
    Json reply = logged_reason(reasoner, req, sink);

    ContinuationDecision d;
    d.mode = continuity_mode_from_string(
        jsonutil::require_string(reply, "continuity_mode", req.task));
    d.same_location = reply.value("same_location", true);
    d.requires_spatial_continuity = reply.value("requires_spatial_continuity", false);
    for (const auto& s : reply.value("spatial_dependencies", Json::array()))
        d.spatial_dependencies.push_back(s.get<std::string>());
    d.reasoning = reply.value("reasoning", "");
    return d;
}

// Builds the full continuity plan: appearance timelines, location clusters
// with per-shot modes, prop timelines, background plans. Deterministic given
// (script, reasoner behavior, seed).
inline ContinuityPlan build_global_plan(const StoryScript& script, Backend& reasoner,
                                        std::uint64_t seed, const Ablations& ablate = {},
                                        const EventSink& sink = {}) {
    if (script.shots.empty()) throw EmptyStory();
    ContinuityPlan plan;
    plan.story_id = script.story_id;
    for (const auto& shot : script.shots) plan.shot_ids.push_back(shot.shot_id);

    if (ablate.disable_location_grouping) {
        // Every shot becomes its own fresh location: no identity to reuse.
        plan.locations.shots.resize(script.shots.size());
        for (const auto& shot : script.shots) {
            ShotLocation sl;
            sl.location = location_id("isolated_" + std::to_string(shot.index));
            sl.mode = ContinuityMode::fresh_location;
            plan.locations.shots[static_cast<std::size_t>(shot.index)] = sl;
            plan.locations.clusters[sl.location] = {shot.index};
        }
    } else {
        plan.locations = plan_locations(script, reasoner, seed, sink);
        for (std::size_t t = 1; t < script.shots.size(); ++t) {
            auto& sl = plan.locations.shots[t];
            if (!(plan.locations.shots[t - 1].location == sl.location)) continue;
            ContinuationDecision d = decide_continuation(script.shots[t - 1], script.shots[t],
                                                         reasoner, seed, sink);
            sl.mode = d.mode == ContinuityMode::previous_frame_continuation
                          ? ContinuityMode::previous_frame_continuation
                          : ContinuityMode::location_reappearance;
        }
    }

    for (const auto& who : script.characters)
        plan.appearance[who.id] = plan_character_appearance(script, reasoner, who, seed, sink);

    std::vector<EntityId> props = plan_prop_inventory(script, reasoner, seed, sink);
    for (const auto& p : props)
        plan.props[p] = plan_prop_states(script, reasoner, p, seed, sink);

    plan.backgrounds.reserve(script.shots.size());
    std::set<EntityId> late_props;
    for (const auto& shot : script.shots) {
        Json states_here = Json::object();
        for (const auto& [id, tl] : plan.props) {
            const auto& e = tl.at(shot.index);
            Json je{{"state", e.state}};
            je["carrier"] = e.carrier ? Json(e.carrier->name) : Json(nullptr);
            states_here[id.name] = je;
        }
        BackgroundPlan bg = plan_background(script, shot, states_here, reasoner, seed, sink);
        auto note_late = [&](const std::vector<EntityId>& v) {
            for (const auto& p : v)
                if (plan.props.find(p) == plan.props.end()) late_props.insert(p);
        };
        note_late(bg.background_props);
        note_late(bg.must_appear);
        note_late(bg.must_not_appear);
        for (const auto& [c, ps] : bg.carried) note_late(ps);
        plan.backgrounds.push_back(std::move(bg));
    }
    // Props the background planner introduced still need timelines.
    for (const auto& p : late_props)
        plan.props[p] = plan_prop_states(script, reasoner, p, seed, sink);

    validate_plan(plan, script);
    return plan;
}

}  // namespace canvas
