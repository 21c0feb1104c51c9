#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "canvas/story.hpp"

namespace canvas {

inline constexpr const char* kNotPresent = "not_present";

// Pipeline switches for ablation studies. Default = full pipeline.
struct Ablations {
    bool disable_canonical_anchors = false;
    bool disable_location_grouping = false;
    bool disable_background_reuse = false;
    bool disable_prop_state_update = false;
};

enum class ContinuityMode { fresh_location, location_reappearance, previous_frame_continuation };

inline const char* to_string(ContinuityMode m) {
    switch (m) {
        case ContinuityMode::fresh_location: return "fresh_location";
        case ContinuityMode::location_reappearance: return "location_reappearance";
        case ContinuityMode::previous_frame_continuation: return "previous_frame_continuation";
    }
    return "?";
}

inline ContinuityMode continuity_mode_from_string(const std::string& s) {
    if (s == "fresh_location") return ContinuityMode::fresh_location;
    if (s == "location_reappearance") return ContinuityMode::location_reappearance;
    if (s == "previous_frame_continuation") return ContinuityMode::previous_frame_continuation;
    throw SchemaError("unknown continuity mode: " + s);
}

// Per-character appearance state per shot; kNotPresent marks off-screen shots.
struct AppearanceTimeline {
    EntityId character;
    std::vector<std::string> states;  // indexed by shot index

    const std::string& at(int t) const { return states.at(static_cast<std::size_t>(t)); }
    bool present(int t) const { return at(t) != kNotPresent; }

    // Most recent on-screen state strictly before shot t, if any.
    std::optional<std::string> last_state_before(int t) const {
        for (int i = t - 1; i >= 0; --i)
            if (states[static_cast<std::size_t>(i)] != kNotPresent)
                return states[static_cast<std::size_t>(i)];
        return std::nullopt;
    }
};

struct ShotLocation {
    EntityId location;
    ContinuityMode mode = ContinuityMode::fresh_location;
};

struct LocationPlan {
    std::map<EntityId, std::vector<int>> clusters;  // location -> shot indices, ascending
    std::vector<ShotLocation> shots;                // indexed by shot index

    const EntityId& location_at(int t) const { return shots.at(static_cast<std::size_t>(t)).location; }
    ContinuityMode mode_at(int t) const { return shots.at(static_cast<std::size_t>(t)).mode; }

    // Maximal runs of consecutive shot indices within one cluster.
    std::vector<std::vector<int>> occurrences(const EntityId& loc) const {
        std::vector<std::vector<int>> runs;
        auto it = clusters.find(loc);
        if (it == clusters.end()) return runs;
        for (int idx : it->second) {
            if (!runs.empty() && runs.back().back() + 1 == idx) runs.back().push_back(idx);
            else runs.push_back({idx});
        }
        return runs;
    }
};

struct PropTimeline {
    EntityId prop;
    std::vector<PropStateEntry> states;  // indexed by shot index

    const PropStateEntry& at(int t) const { return states.at(static_cast<std::size_t>(t)); }
};

// Background composition directives for one shot.
struct BackgroundPlan {
    std::vector<EntityId> background_props;
    std::vector<EntityId> must_appear;
    std::vector<EntityId> must_not_appear;
    std::map<EntityId, std::vector<EntityId>> carried;  // character -> props
    std::string reasoning;

    bool lists_prop(const EntityId& p) const {
        auto has = [&](const std::vector<EntityId>& v) {
            return std::find(v.begin(), v.end(), p) != v.end();
        };
        if (has(background_props) || has(must_appear) || has(must_not_appear)) return true;
        for (const auto& [c, props] : carried)
            if (std::find(props.begin(), props.end(), p) != props.end()) return true;
        return false;
    }
};

struct ContinuityPlan {
    std::string story_id;
    std::vector<std::string> shot_ids;
    std::map<EntityId, AppearanceTimeline> appearance;
    LocationPlan locations;
    std::map<EntityId, PropTimeline> props;
    std::vector<BackgroundPlan> backgrounds;  // indexed by shot index

    int n_shots() const { return static_cast<int>(shot_ids.size()); }

    const std::string& appearance_at(const EntityId& c, int t) const {
        auto it = appearance.find(c);
        if (it == appearance.end()) throw UnknownCharacter(c.name);
        return it->second.at(t);
    }
    const PropStateEntry& prop_at(const EntityId& o, int t) const {
        auto it = props.find(o);
        if (it == props.end())
            throw ConsistencyError("no timeline for prop " + o.name);
        return it->second.at(t);
    }
    std::vector<EntityId> present_characters(int t) const {
        std::vector<EntityId> out;
        for (const auto& [id, tl] : appearance)
            if (tl.present(t)) out.push_back(id);
        return out;
    }
};

// Enforces the structural invariants every plan must satisfy, independent of
// which reasoner produced it.
inline void validate_plan(const ContinuityPlan& plan, const StoryScript& script) {
    const int n = plan.n_shots();
    if (n != static_cast<int>(script.shots.size()))
        throw CoverageError("plan covers " + std::to_string(n) + " shots, story has " +
                            std::to_string(script.shots.size()));
    for (int t = 0; t < n; ++t)
        if (plan.shot_ids[static_cast<std::size_t>(t)] != script.shots[static_cast<std::size_t>(t)].shot_id)
            throw CoverageError("shot id order mismatch at index " + std::to_string(t));

    for (const auto& decl : script.characters) {
        auto it = plan.appearance.find(decl.id);
        if (it == plan.appearance.end())
            throw CoverageError("no appearance timeline for " + decl.id.name);
        if (static_cast<int>(it->second.states.size()) != n)
            throw CoverageError("appearance timeline for " + decl.id.name +
                                " covers " + std::to_string(it->second.states.size()) + " shots");
    }

    if (static_cast<int>(plan.locations.shots.size()) != n)
        throw PartitionError("location plan covers " + std::to_string(plan.locations.shots.size()) +
                             " shots");
    std::set<int> assigned;
    for (const auto& [loc, indices] : plan.locations.clusters) {
        for (int idx : indices) {
            if (idx < 0 || idx >= n) throw PartitionError("cluster index out of range");
            if (!assigned.insert(idx).second)
                throw PartitionError("shot " + std::to_string(idx) + " in two clusters");
            if (!(plan.locations.location_at(idx) == loc))
                throw PartitionError("shot " + std::to_string(idx) +
                                     " location disagrees with its cluster");
        }
    }
    if (static_cast<int>(assigned.size()) != n)
        throw PartitionError("shots missing from every cluster");

    std::set<std::string> seen_locations;
    for (int t = 0; t < n; ++t) {
        const auto& sl = plan.locations.shots[static_cast<std::size_t>(t)];
        bool first_visit = seen_locations.insert(sl.location.name).second;
        if (first_visit && sl.mode != ContinuityMode::fresh_location)
            throw ConsistencyError("first visit to " + sl.location.name +
                                   " at shot " + std::to_string(t) + " is not fresh_location");
        if (!first_visit && sl.mode == ContinuityMode::fresh_location)
            throw ConsistencyError("return to " + sl.location.name + " at shot " +
                                   std::to_string(t) + " marked fresh_location");
        if (sl.mode == ContinuityMode::previous_frame_continuation) {
            if (t == 0) throw ConsistencyError("shot 0 cannot continue a previous frame");
            if (!(plan.locations.location_at(t - 1) == sl.location))
                throw ConsistencyError("continuation at shot " + std::to_string(t) +
                                       " crosses a location change");
        }
    }

    if (static_cast<int>(plan.backgrounds.size()) != n)
        throw CoverageError("background plans cover " + std::to_string(plan.backgrounds.size()) +
                            " shots");
    for (int t = 0; t < n; ++t) {
        const auto& bg = plan.backgrounds[static_cast<std::size_t>(t)];
        for (const auto& p : bg.must_appear)
            if (std::find(bg.must_not_appear.begin(), bg.must_not_appear.end(), p) !=
                bg.must_not_appear.end())
                throw ConsistencyError("prop " + p.name + " both required and forbidden at shot " +
                                       std::to_string(t));
        for (const auto& [id, tl] : plan.props) (void)id, (void)tl;
        auto check_known = [&](const EntityId& p) {
            if (plan.props.find(p) == plan.props.end())
                throw ConsistencyError("background plan at shot " + std::to_string(t) +
                                       " names unplanned prop " + p.name);
        };
        for (const auto& p : bg.background_props) check_known(p);
        for (const auto& p : bg.must_appear) check_known(p);
        for (const auto& p : bg.must_not_appear) check_known(p);
        for (const auto& [c, ps] : bg.carried) {
            if (!script.declares(c))
                throw ConsistencyError("carried-prop binding names undeclared character " + c.name);
            for (const auto& p : ps) check_known(p);
        }
    }

    for (const auto& [id, tl] : plan.props) {
        if (static_cast<int>(tl.states.size()) != n)
            throw CoverageError("prop timeline for " + id.name + " covers " +
                                std::to_string(tl.states.size()) + " shots");
        for (const auto& entry : tl.states)
            if (entry.carrier && !script.declares(*entry.carrier))
                throw ConsistencyError("prop " + id.name + " carried by undeclared character " +
                                       entry.carrier->name);
    }
}

inline Json to_json(const ContinuityPlan& plan) {
    Json appearance = Json::object();
    for (const auto& [id, tl] : plan.appearance) {
        Json m = Json::object();
        for (int t = 0; t < plan.n_shots(); ++t)
            m[plan.shot_ids[static_cast<std::size_t>(t)]] = tl.states[static_cast<std::size_t>(t)];
        appearance[id.name] = m;
    }
    Json clusters = Json::object();
    for (const auto& [loc, indices] : plan.locations.clusters) {
        Json arr = Json::array();
        for (int idx : indices) arr.push_back(plan.shot_ids[static_cast<std::size_t>(idx)]);
        clusters[loc.name] = arr;
    }
    Json shots = Json::object();
    for (int t = 0; t < plan.n_shots(); ++t) {
        const auto& sl = plan.locations.shots[static_cast<std::size_t>(t)];
        shots[plan.shot_ids[static_cast<std::size_t>(t)]] =
            Json{{"location", sl.location.name}, {"continuity_mode", to_string(sl.mode)}};
    }
    Json props = Json::object();
    for (const auto& [id, tl] : plan.props) {
        Json m = Json::object();
        for (int t = 0; t < plan.n_shots(); ++t) {
            const auto& e = tl.states[static_cast<std::size_t>(t)];
            Json je{{"state", e.state}};
            je["carrier"] = e.carrier ? Json(e.carrier->name) : Json(nullptr);
            m[plan.shot_ids[static_cast<std::size_t>(t)]] = je;
        }
        props[id.name] = m;
    }
    Json backgrounds = Json::object();
    for (int t = 0; t < plan.n_shots(); ++t) {
        const auto& bg = plan.backgrounds[static_cast<std::size_t>(t)];
        auto names = [](const std::vector<EntityId>& v) {
            Json arr = Json::array();
            for (const auto& e : v) arr.push_back(e.name);
            return arr;
        };
        Json jb{{"background_props", names(bg.background_props)},
                {"must_appear", names(bg.must_appear)},
                {"must_not_appear", names(bg.must_not_appear)}};
        Json carried = Json::object();
        for (const auto& [c, ps] : bg.carried) carried[c.name] = names(ps);
        jb["carried"] = carried;
        if (!bg.reasoning.empty()) jb["reasoning"] = bg.reasoning;
        backgrounds[plan.shot_ids[static_cast<std::size_t>(t)]] = jb;
    }
    return Json{{"story_id", plan.story_id},
                {"shot_ids", plan.shot_ids},
                {"appearance", appearance},
                {"locations", Json{{"clusters", clusters}, {"shots", shots}}},
                {"props", props},
                {"backgrounds", backgrounds}};
}

inline ContinuityPlan plan_from_json(const Json& j) {
    ContinuityPlan plan;
    const std::string ctx = "plan";
    plan.story_id = jsonutil::require_string(j, "story_id", ctx);
    for (const auto& sid : jsonutil::require(j, "shot_ids", ctx))
        plan.shot_ids.push_back(sid.get<std::string>());
    std::map<std::string, int> index_of;
    for (int t = 0; t < plan.n_shots(); ++t) index_of[plan.shot_ids[static_cast<std::size_t>(t)]] = t;
    auto shot_index = [&](const std::string& sid) {
        auto it = index_of.find(sid);
        if (it == index_of.end()) throw SchemaError("plan references unknown shot " + sid);
        return it->second;
    };

    for (const auto& [name, m] : jsonutil::require(j, "appearance", ctx).items()) {
        AppearanceTimeline tl;
        tl.character = character_id(name);
        tl.states.assign(static_cast<std::size_t>(plan.n_shots()), kNotPresent);
        for (const auto& [sid, state] : m.items())
            tl.states[static_cast<std::size_t>(shot_index(sid))] = state.get<std::string>();
        plan.appearance[tl.character] = std::move(tl);
    }

    const Json& jl = jsonutil::require(j, "locations", ctx);
    plan.locations.shots.resize(static_cast<std::size_t>(plan.n_shots()));
    for (const auto& [sid, entry] : jsonutil::require(jl, "shots", ctx).items()) {
        ShotLocation sl;
        sl.location = location_id(jsonutil::require_string(entry, "location", ctx));
        sl.mode = continuity_mode_from_string(
            jsonutil::require_string(entry, "continuity_mode", ctx));
        plan.locations.shots[static_cast<std::size_t>(shot_index(sid))] = sl;
    }
    for (const auto& [loc, arr] : jsonutil::require(jl, "clusters", ctx).items()) {
        std::vector<int> indices;
        for (const auto& sid : arr) indices.push_back(shot_index(sid.get<std::string>()));
        std::sort(indices.begin(), indices.end());
        plan.locations.clusters[location_id(loc)] = std::move(indices);
    }

    const Json jprops = j.value("props", Json::object());
    for (const auto& [name, m] : jprops.items()) {
        PropTimeline tl;
        tl.prop = prop_id(name);
        tl.states.assign(static_cast<std::size_t>(plan.n_shots()), PropStateEntry{"not_visible", std::nullopt});
        for (const auto& [sid, entry] : m.items()) {
            PropStateEntry e;
            e.state = jsonutil::require_string(entry, "state", ctx);
            if (entry.contains("carrier") && !entry["carrier"].is_null())
                e.carrier = character_id(entry["carrier"].get<std::string>());
            tl.states[static_cast<std::size_t>(shot_index(sid))] = std::move(e);
        }
        plan.props[tl.prop] = std::move(tl);
    }

    plan.backgrounds.resize(static_cast<std::size_t>(plan.n_shots()));
    const Json jbackgrounds = j.value("backgrounds", Json::object());
    for (const auto& [sid, jb] : jbackgrounds.items()) {
        BackgroundPlan bg;
        for (const auto& p : jb.value("background_props", Json::array()))
            bg.background_props.push_back(prop_id(p.get<std::string>()));
        for (const auto& p : jb.value("must_appear", Json::array()))
            bg.must_appear.push_back(prop_id(p.get<std::string>()));
        for (const auto& p : jb.value("must_not_appear", Json::array()))
            bg.must_not_appear.push_back(prop_id(p.get<std::string>()));
        const Json jcarried = jb.value("carried", Json::object());
        for (const auto& [c, ps] : jcarried.items()) {
            std::vector<EntityId> props;
            for (const auto& p : ps) props.push_back(prop_id(p.get<std::string>()));
            bg.carried[character_id(c)] = std::move(props);
        }
        bg.reasoning = jb.value("reasoning", "");
        plan.backgrounds[static_cast<std::size_t>(shot_index(sid))] = std::move(bg);
    }
    return plan;
}

}  // namespace canvas
