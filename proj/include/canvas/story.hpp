#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "canvas/scene_graph.hpp"

namespace canvas {

struct PropStateEntry {
    std::string state;
    std::optional<EntityId> carrier;
    bool operator==(const PropStateEntry&) const = default;
};

// Optional per-shot ground truth: expected plan entries (what the oracle
// reasoner answers planning queries from) plus an optional expected scene.
struct GroundTruthAnnotation {
    std::optional<EntityId> location;
    std::optional<std::string> continuity_mode;
    std::map<std::string, std::string> appearance;        // character -> state
    std::map<std::string, PropStateEntry> props;          // prop -> state entry
    std::vector<std::string> background_props;
    std::vector<std::string> must_appear;
    std::vector<std::string> must_not_appear;
    std::map<std::string, std::vector<std::string>> carried;  // character -> props
    bool has_background = false;
    std::optional<SceneGraph> scene;
};

struct Shot {
    std::string shot_id;
    int index = 0;
    std::string description;
    std::optional<GroundTruthAnnotation> annotations;
};

struct CharacterDecl {
    EntityId id;
    std::string display_name;
    std::string description;
    std::optional<std::string> reference_image_path;
};

struct StoryScript {
    std::string story_id;
    std::optional<std::string> title;
    std::vector<CharacterDecl> characters;
    std::vector<Shot> shots;

    const Shot* find_shot(const std::string& shot_id) const {
        for (const auto& s : shots)
            if (s.shot_id == shot_id) return &s;
        return nullptr;
    }
    bool declares(const EntityId& id) const {
        for (const auto& c : characters)
            if (c.id == id) return true;
        return false;
    }
};

inline GroundTruthAnnotation annotation_from_json(const Json& j) {
    GroundTruthAnnotation a;
    const std::string ctx = "annotations";
    if (j.contains("location") && !j["location"].is_null())
        a.location = location_id(j["location"].get<std::string>());
    if (j.contains("continuity_mode") && !j["continuity_mode"].is_null())
        a.continuity_mode = j["continuity_mode"].get<std::string>();
    const Json appearance = j.value("appearance", Json::object());
    for (const auto& [name, state] : appearance.items())
        a.appearance[canonicalize_entity(name)] = state.get<std::string>();
    const Json props = j.value("props", Json::object());
    for (const auto& [name, entry] : props.items()) {
        PropStateEntry e;
        e.state = jsonutil::require_string(entry, "state", ctx);
        if (entry.contains("carrier") && !entry["carrier"].is_null())
            e.carrier = character_id(entry["carrier"].get<std::string>());
        a.props[canonicalize_entity(name)] = std::move(e);
    }
    if (j.contains("background")) {
        const Json& b = j["background"];
        a.has_background = true;
        for (const auto& p : b.value("background_props", Json::array()))
            a.background_props.push_back(canonicalize_entity(p.get<std::string>()));
        for (const auto& p : b.value("must_appear", Json::array()))
            a.must_appear.push_back(canonicalize_entity(p.get<std::string>()));
        for (const auto& p : b.value("must_not_appear", Json::array()))
            a.must_not_appear.push_back(canonicalize_entity(p.get<std::string>()));
        const Json carried = b.value("carried", Json::object());
        for (const auto& [name, carried_props] : carried.items()) {
            std::vector<std::string> ps;
            for (const auto& p : carried_props)
                ps.push_back(canonicalize_entity(p.get<std::string>()));
            a.carried[canonicalize_entity(name)] = std::move(ps);
        }
    }
    if (j.contains("scene") && !j["scene"].is_null())
        a.scene = scene_graph_from_json(j["scene"]);
    return a;
}

inline Json to_json(const GroundTruthAnnotation& a) {
    Json j = Json::object();
    if (a.location) j["location"] = a.location->name;
    if (a.continuity_mode) j["continuity_mode"] = *a.continuity_mode;
    if (!a.appearance.empty()) {
        Json m = Json::object();
        for (const auto& [k, v] : a.appearance) m[k] = v;
        j["appearance"] = m;
    }
    if (!a.props.empty()) {
        Json m = Json::object();
        for (const auto& [k, v] : a.props) {
            Json e{{"state", v.state}};
            e["carrier"] = v.carrier ? Json(v.carrier->name) : Json(nullptr);
            m[k] = e;
        }
        j["props"] = m;
    }
    if (a.has_background) {
        Json b{{"background_props", a.background_props},
               {"must_appear", a.must_appear},
               {"must_not_appear", a.must_not_appear}};
        if (!a.carried.empty()) {
            Json m = Json::object();
            for (const auto& [k, v] : a.carried) m[k] = v;
            b["carried"] = m;
        }
        j["background"] = b;
    }
    if (a.scene) j["scene"] = to_json(*a.scene);
    return j;
}

// Parses and validates a story document. Shot order in the document is the
// storyboard order; indices are assigned here.
inline StoryScript parse_story(const Json& j) {
    const std::string ctx = "story";
    StoryScript s;
    s.story_id = jsonutil::require_string(j, "story_id", ctx);
    if (j.contains("title") && !j["title"].is_null()) s.title = j["title"].get<std::string>();

    std::set<std::string> char_names;
    for (const auto& jc : j.value("characters", Json::array())) {
        CharacterDecl d;
        d.display_name = jsonutil::require_string(jc, "name", ctx + ".characters");
        d.id = character_id(d.display_name);
        d.description = jc.value("description", "");
        if (jc.contains("reference_image_path") && !jc["reference_image_path"].is_null())
            d.reference_image_path = jc["reference_image_path"].get<std::string>();
        if (!char_names.insert(d.id.name).second)
            throw SchemaError("duplicate character declaration: " + d.id.name);
        s.characters.push_back(std::move(d));
    }

    const Json& shots = jsonutil::require(j, "shots", ctx);
    if (!shots.is_array() || shots.empty()) throw EmptyStory();
    std::set<std::string> ids;
    int index = 0;
    for (const auto& js : shots) {
        Shot shot;
        shot.shot_id = jsonutil::require_string(js, "shot_id", ctx + ".shots");
        shot.index = index++;
        shot.description = jsonutil::require_string(js, "description", ctx + ".shots");
        if (!ids.insert(shot.shot_id).second) throw DuplicateShotId(shot.shot_id);
        if (js.contains("annotations") && !js["annotations"].is_null())
            shot.annotations = annotation_from_json(js["annotations"]);
        s.shots.push_back(std::move(shot));
    }
    return s;
}

inline Json to_json(const StoryScript& s) {
    Json chars = Json::array();
    for (const auto& c : s.characters) {
        Json jc{{"name", c.display_name}, {"description", c.description}};
        if (c.reference_image_path) jc["reference_image_path"] = *c.reference_image_path;
        chars.push_back(jc);
    }
    Json shots = Json::array();
    for (const auto& sh : s.shots) {
        Json js{{"shot_id", sh.shot_id}, {"description", sh.description}};
        if (sh.annotations) js["annotations"] = to_json(*sh.annotations);
        shots.push_back(js);
    }
    Json j{{"story_id", s.story_id}, {"characters", chars}, {"shots", shots}};
    if (s.title) j["title"] = *s.title;
    return j;
}

}  // namespace canvas
