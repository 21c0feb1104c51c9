#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "canvas/entity.hpp"
#include "canvas/json_util.hpp"

namespace canvas {

enum class Camera { wide, medium, closeup };

inline const char* to_string(Camera c) {
    switch (c) {
        case Camera::wide: return "wide";
        case Camera::medium: return "medium";
        case Camera::closeup: return "closeup";
    }
    return "?";
}

inline Camera camera_from_string(const std::string& s) {
    if (s == "wide") return Camera::wide;
    if (s == "medium") return Camera::medium;
    if (s == "closeup") return Camera::closeup;
    throw SchemaError("unknown camera value: " + s);
}

// Symbolic stand-in for a rendered image. Attribute strings are opaque
// renderings: two frames show the same face iff the face_id strings are equal.
struct CharacterInstance {
    EntityId entity;
    std::string appearance_state;
    std::string face_id;
    std::string clothing;
    std::string hair_body;
    bool visible_face = true;
};

struct PropInstance {
    EntityId entity;
    std::string state;
    std::optional<EntityId> carrier;
};

struct LocationInstance {
    EntityId entity;
    std::vector<std::string> structures;
};

struct SceneGraph {
    std::vector<CharacterInstance> characters;
    LocationInstance location;
    std::vector<PropInstance> props;
    Camera camera = Camera::wide;

    const CharacterInstance* find_character(const EntityId& id) const {
        for (const auto& c : characters)
            if (c.entity == id) return &c;
        return nullptr;
    }
    const PropInstance* find_prop(const EntityId& id) const {
        for (const auto& p : props)
            if (p.entity == id) return &p;
        return nullptr;
    }

    // Uniqueness per entity; carried props must name an on-screen character.
    void validate() const {
        std::set<std::string> seen;
        for (const auto& c : characters)
            if (!seen.insert(c.entity.name).second)
                throw SchemaError("scene graph: duplicate character " + c.entity.name);
        seen.clear();
        for (const auto& p : props) {
            if (!seen.insert(p.entity.name).second)
                throw SchemaError("scene graph: duplicate prop " + p.entity.name);
            if (p.carrier && !find_character(*p.carrier))
                throw SchemaError("scene graph: prop " + p.entity.name +
                                  " carried by off-screen " + p.carrier->name);
        }
    }
};

// Rendered attribute strings carry an optional "#variant" tail; the part
// before it is what an in-frame judge can check against a directive.
inline std::string attr_base(const std::string& rendered) {
    return rendered.substr(0, rendered.find('#'));
}

// Structures carry an optional "@placement" tail; same base with different
// placement reads as a layout violation rather than appear+disappear.
inline std::string structure_base(const std::string& s) {
    return s.substr(0, s.find('@'));
}

inline Json to_json(const SceneGraph& g) {
    Json chars = Json::array();
    for (const auto& c : g.characters) {
        chars.push_back(Json{{"name", c.entity.name},
                             {"appearance_state", c.appearance_state},
                             {"face_id", c.face_id},
                             {"clothing", c.clothing},
                             {"hair_body", c.hair_body},
                             {"visible_face", c.visible_face}});
    }
    Json props = Json::array();
    for (const auto& p : g.props) {
        Json jp{{"name", p.entity.name}, {"state", p.state}};
        jp["carrier"] = p.carrier ? Json(p.carrier->name) : Json(nullptr);
        props.push_back(jp);
    }
    return Json{{"characters", chars},
                {"location", Json{{"name", g.location.entity.name},
                                  {"structures", g.location.structures}}},
                {"props", props},
                {"camera", to_string(g.camera)}};
}

inline SceneGraph scene_graph_from_json(const Json& j) {
    SceneGraph g;
    const std::string ctx = "scene graph";
    for (const auto& jc : jsonutil::require(j, "characters", ctx)) {
        CharacterInstance c;
        c.entity = character_id(jsonutil::require_string(jc, "name", ctx));
        c.appearance_state = jsonutil::require_string(jc, "appearance_state", ctx);
        c.face_id = jc.value("face_id", "");
        c.clothing = jc.value("clothing", "");
        c.hair_body = jc.value("hair_body", "");
        c.visible_face = jc.value("visible_face", true);
        g.characters.push_back(std::move(c));
    }
    const Json& jl = jsonutil::require(j, "location", ctx);
    g.location.entity = location_id(jsonutil::require_string(jl, "name", ctx));
    for (const auto& s : jl.value("structures", Json::array()))
        g.location.structures.push_back(s.get<std::string>());
    for (const auto& jp : j.value("props", Json::array())) {
        PropInstance p;
        p.entity = prop_id(jsonutil::require_string(jp, "name", ctx));
        p.state = jsonutil::require_string(jp, "state", ctx);
        if (jp.contains("carrier") && !jp["carrier"].is_null())
            p.carrier = character_id(jp["carrier"].get<std::string>());
        g.props.push_back(std::move(p));
    }
    g.camera = camera_from_string(j.value("camera", "wide"));
    g.validate();
    return g;
}

}  // namespace canvas
