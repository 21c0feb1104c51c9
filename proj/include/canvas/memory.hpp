#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "canvas/backend.hpp"
#include "canvas/plan.hpp"
#include "canvas/prompts.hpp"

namespace canvas {

inline constexpr const char* kCanonicalState = "canonical";

enum class AnchorKind { canonical_character, character, location, prop };

struct AnchorKey {
    AnchorKind kind = AnchorKind::character;
    EntityId entity;
    std::string state;  // appearance/prop state; empty for locations

    auto operator<=>(const AnchorKey&) const = default;

    std::string path() const {
        switch (kind) {
            case AnchorKind::canonical_character: return "canonical/" + entity.name + "/" + state;
            case AnchorKind::character: return "character/" + entity.name + "/" + state;
            case AnchorKind::location: return "location/" + entity.name;
            case AnchorKind::prop: return "prop/" + entity.name + "/" + state;
        }
        return "?";
    }

    static AnchorKey parse(const std::string& path) {
        auto fail = [&] { return CorruptSnapshot("bad anchor key: " + path); };
        std::size_t a = path.find('/');
        if (a == std::string::npos) throw fail();
        std::string kind = path.substr(0, a);
        std::string rest = path.substr(a + 1);
        AnchorKey k;
        if (kind == "location") {
            k.kind = AnchorKind::location;
            k.entity = location_id(rest);
            return k;
        }
        std::size_t b = rest.find('/');
        if (b == std::string::npos) throw fail();
        std::string name = rest.substr(0, b);
        k.state = rest.substr(b + 1);
        if (kind == "canonical") {
            k.kind = AnchorKind::canonical_character;
            k.entity = character_id(name);
        } else if (kind == "character") {
            k.kind = AnchorKind::character;
            k.entity = character_id(name);
        } else if (kind == "prop") {
            k.kind = AnchorKind::prop;
            k.entity = prop_id(name);
        } else {
            throw fail();
        }
        return k;
    }
};

inline AnchorKey canonical_key(const EntityId& c, const std::string& state) {
    return AnchorKey{AnchorKind::canonical_character, c, state};
}
inline AnchorKey character_key(const EntityId& c, const std::string& state) {
    return AnchorKey{AnchorKind::character, c, state};
}
inline AnchorKey location_key(const EntityId& l) {
    return AnchorKey{AnchorKind::location, l, ""};
}
inline AnchorKey prop_key(const EntityId& o, const std::string& state) {
    return AnchorKey{AnchorKind::prop, o, state};
}

// An anchor is a whole frame plus the extracted descriptor of the entity it
// is an anchor for; generation conditions on the descriptor.
struct AnchorRecord {
    AnchorKey key;
    FrameArtifact artifact;
    Json descriptor;
    int source_shot = -1;  // shot index the artifact came from; -1 = init
    int updated_at = -1;   // shot index of the last write; -1 = init
};

struct WorldMemory {
    std::map<AnchorKey, AnchorRecord> canonical;
    std::map<AnchorKey, AnchorRecord> characters;
    std::map<AnchorKey, AnchorRecord> locations;
    std::map<AnchorKey, AnchorRecord> props;
    std::map<EntityId, AnchorKey> recent_character;
    std::vector<FrameArtifact> frames;

    const AnchorRecord* find_canonical(const AnchorKey& k) const {
        auto it = canonical.find(k);
        return it == canonical.end() ? nullptr : &it->second;
    }
    const AnchorRecord* find_character_anchor(const AnchorKey& k) const {
        auto it = characters.find(k);
        return it == characters.end() ? nullptr : &it->second;
    }
    const AnchorRecord* find_location_anchor(const EntityId& l) const {
        auto it = locations.find(location_key(l));
        return it == locations.end() ? nullptr : &it->second;
    }
    const AnchorRecord* find_prop_anchor(const AnchorKey& k) const {
        auto it = props.find(k);
        return it == props.end() ? nullptr : &it->second;
    }
    bool has_appeared(const EntityId& c) const { return recent_character.count(c) > 0; }

    std::size_t record_count() const {
        return canonical.size() + characters.size() + locations.size() + props.size();
    }
};

namespace detail {

inline Json character_descriptor_from_graph(const SceneGraph& g, const EntityId& c) {
    const CharacterInstance* inst = g.find_character(c);
    if (!inst) throw SchemaError("reference scene lacks character " + c.name);
    return Json{{"name", inst->entity.name},
                {"appearance_state", inst->appearance_state},
                {"face_id", inst->face_id},
                {"clothing", inst->clothing},
                {"hair_body", inst->hair_body},
                {"visible_face", inst->visible_face}};
}

inline FrameArtifact load_reference_file(const std::string& path, const std::string& who) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("reference image for " + who + " not readable: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    FrameArtifact f;
    f.frame_id = "ref_" + who;
    f.backend = "file";
    if (path.size() > 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
        Json j = Json::parse(bytes, nullptr, false);
        if (j.is_discarded()) throw SchemaError("reference scene for " + who + " is not JSON");
        f.payload = scene_graph_from_json(j.contains("scene") ? j["scene"] : j);
    } else {
        ImageBytes img;
        img.bytes.assign(bytes.begin(), bytes.end());
        img.media_type = "image/png";
        f.payload = std::move(img);
    }
    return f;
}

}  // namespace detail

// Creates one canonical identity anchor per declared character: loaded from
// the declared reference file when given, generated otherwise. No shot
// frames exist yet.
inline WorldMemory init_memory(const StoryScript& script, Backend& imager, std::uint64_t seed,
                               const Ablations& ablate = {}, const EventSink& sink = {}) {
    WorldMemory memory;
    if (ablate.disable_canonical_anchors) return memory;
    for (const auto& who : script.characters) {
        AnchorRecord rec;
        rec.key = canonical_key(who.id, kCanonicalState);
        if (who.reference_image_path) {
            rec.artifact = detail::load_reference_file(*who.reference_image_path, who.id.name);
            if (rec.artifact.is_scene())
                rec.descriptor = detail::character_descriptor_from_graph(
                    rec.artifact.scene(), who.id);
            else
                rec.descriptor = Json{{"name", who.id.name},
                                      {"appearance_state", kCanonicalState},
                                      {"reference", true}};
        } else {
            GenerateRequest req;
            req.shot_id = "";
            req.frame_id = "canonical_" + who.id.name;
            req.prompt = "Neutral full-body reference portrait of " + who.id.name + ": " +
                         who.description;
            req.directives = Json{{"kind", "canonical_reference"},
                                  {"character", who.id.name},
                                  {"description", who.description}};
            req.seed = mix_seed(seed, fnv1a64("canonical:" + who.id.name));
            rec.artifact = logged_generate(imager, req, sink);
            if (rec.artifact.is_scene())
                rec.descriptor = detail::character_descriptor_from_graph(
                    rec.artifact.scene(), who.id);
            else
                rec.descriptor = Json{{"name", who.id.name},
                                      {"appearance_state", kCanonicalState}};
        }
        memory.canonical[rec.key] = std::move(rec);
    }
    return memory;
}

// --- post-shot commit --------------------------------------------------------

namespace detail {

// Location anchors refresh on first visit, after any planned prop state
// change since the stored anchor, or when something must stay out of frame.
inline bool location_needs_refresh(const WorldMemory& memory, const ContinuityPlan& plan,
                                   const EntityId& loc, int t) {
    const AnchorRecord* existing = memory.find_location_anchor(loc);
    if (!existing) return true;
    if (existing->source_shot < 0) return true;
    if (!plan.backgrounds[static_cast<std::size_t>(t)].must_not_appear.empty()) return true;
    for (const auto& [id, tl] : plan.props) {
        const auto& then = tl.at(existing->source_shot);
        const auto& now = tl.at(t);
        if (!(then == now)) return true;
    }
    return false;
}

}  // namespace detail

// Commits a selected frame: extracts character/location/prop anchors from it
// via the judge and appends it to history. Extraction failures skip the
// affected category; they never lose the frame.
inline void update_memory(WorldMemory& memory, const StoryScript& script,
                          const ContinuityPlan& plan, int t, const FrameArtifact& selected,
                          Backend& judge, const Ablations& ablate = {},
                          const EventSink& sink = {}) {
    const Shot& shot = script.shots.at(static_cast<std::size_t>(t));
    if (selected.shot_id != shot.shot_id)
        throw SequenceError("frame for shot " + selected.shot_id + " committed at index " +
                            std::to_string(t) + " (" + shot.shot_id + ")");
    if (static_cast<int>(memory.frames.size()) != t)
        throw SequenceError("commit for shot index " + std::to_string(t) + " but " +
                            std::to_string(memory.frames.size()) + " frames in history");

    std::uint64_t seed = mix_seed(fnv1a64("extract"), static_cast<std::uint64_t>(t));

    // Characters.
    try {
        Json expected = Json::object();
        for (const auto& c : plan.present_characters(t))
            expected[c.name] = plan.appearance_at(c, t);
        EvalRequest req;
        req.rubric = "extract_characters";
        req.prompt = prompts::extract_characters(expected);
        req.context = Json{{"expected", expected}};
        req.frames = {selected};
        req.seed = seed;
        Json reply = logged_evaluate(judge, req, sink);
        for (const auto& jc : reply.value("characters", Json::array())) {
            EntityId c = character_id(jsonutil::require_string(jc, "name", req.rubric));
            if (!script.declares(c)) continue;
            if (plan.appearance_at(c, t) == kNotPresent) continue;
            AnchorRecord rec;
            rec.key = character_key(c, plan.appearance_at(c, t));
            rec.artifact = selected;
            rec.descriptor = jc;
            rec.source_shot = t;
            rec.updated_at = t;
            memory.characters[rec.key] = std::move(rec);
            memory.recent_character[c] = character_key(c, plan.appearance_at(c, t));
        }
    } catch (const MalformedScoreJson&) {
        if (sink) sink(Json{{"event", "extraction_skipped"}, {"kind", "characters"}, {"shot", t}});
    }

    // Location.
    try {
        const EntityId& loc = plan.locations.location_at(t);
        if (detail::location_needs_refresh(memory, plan, loc, t)) {
            EvalRequest req;
            req.rubric = "extract_location";
            req.prompt = prompts::extract_location();
            req.context = Json{{"expected_location", loc.name}};
            req.frames = {selected};
            req.seed = seed;
            Json reply = logged_evaluate(judge, req, sink);
            AnchorRecord rec;
            rec.key = location_key(loc);
            rec.artifact = selected;
            rec.descriptor = reply;
            rec.source_shot = t;
            rec.updated_at = t;
            memory.locations[rec.key] = std::move(rec);
        }
    } catch (const MalformedScoreJson&) {
        if (sink) sink(Json{{"event", "extraction_skipped"}, {"kind", "location"}, {"shot", t}});
    }

    // Props.
    if (!ablate.disable_prop_state_update) {
        try {
            EvalRequest req;
            req.rubric = "extract_props";
            req.prompt = prompts::extract_props();
            req.context = Json::object();
            req.frames = {selected};
            req.seed = seed;
            Json reply = logged_evaluate(judge, req, sink);
            for (const auto& jo : reply.value("objects", Json::array())) {
                EntityId o = prop_id(jsonutil::require_string(jo, "name", req.rubric));
                auto it = plan.props.find(o);
                if (it == plan.props.end()) continue;
                AnchorRecord rec;
                rec.key = prop_key(o, it->second.at(t).state);
                rec.artifact = selected;
                rec.descriptor = jo;
                rec.source_shot = t;
                rec.updated_at = t;
                memory.props[rec.key] = std::move(rec);
            }
        } catch (const MalformedScoreJson&) {
            if (sink) sink(Json{{"event", "extraction_skipped"}, {"kind", "props"}, {"shot", t}});
        }
    }

    memory.frames.push_back(selected);
    if (sink) sink(Json{{"event", "shot_committed"}, {"shot", t}, {"shot_id", shot.shot_id}});
}

// --- snapshot / restore ------------------------------------------------------

namespace detail {

inline Json record_to_json(const AnchorRecord& rec) {
    return Json{{"key", rec.key.path()},
                {"artifact", to_json(rec.artifact)},
                {"descriptor", rec.descriptor},
                {"source_shot", rec.source_shot},
                {"updated_at", rec.updated_at}};
}

inline AnchorRecord record_from_json(const Json& j) {
    AnchorRecord rec;
    try {
        rec.key = AnchorKey::parse(jsonutil::require_string(j, "key", "anchor record"));
        rec.artifact = frame_from_json(jsonutil::require(j, "artifact", "anchor record"));
    } catch (const CanvasError& e) {
        throw CorruptSnapshot(e.what());
    }
    rec.descriptor = j.value("descriptor", Json::object());
    rec.source_shot = j.value("source_shot", -1);
    rec.updated_at = j.value("updated_at", -1);
    return rec;
}

}  // namespace detail

// Self-contained canonical serialization; restore(snapshot(m)) == m.
inline std::string snapshot(const WorldMemory& memory) {
    auto bucket = [](const std::map<AnchorKey, AnchorRecord>& m) {
        Json arr = Json::array();
        for (const auto& [k, rec] : m) arr.push_back(detail::record_to_json(rec));
        return arr;
    };
    Json recent = Json::object();
    for (const auto& [c, key] : memory.recent_character) recent[c.name] = key.path();
    Json frames = Json::array();
    for (const auto& f : memory.frames) frames.push_back(to_json(f));
    Json j{{"canonical", bucket(memory.canonical)},
           {"characters", bucket(memory.characters)},
           {"locations", bucket(memory.locations)},
           {"props", bucket(memory.props)},
           {"recent", recent},
           {"frames", frames}};
    return jsonutil::dump_canonical(j);
}

inline WorldMemory restore(const std::string& bytes) {
    Json j = Json::parse(bytes, nullptr, false);
    if (j.is_discarded()) throw CorruptSnapshot("not valid JSON");
    WorldMemory memory;
    auto load_bucket = [&](const char* field, std::map<AnchorKey, AnchorRecord>& into) {
        for (const auto& jr : j.value(field, Json::array())) {
            AnchorRecord rec = detail::record_from_json(jr);
            AnchorKey key = rec.key;
            into[key] = std::move(rec);
        }
    };
    load_bucket("canonical", memory.canonical);
    load_bucket("characters", memory.characters);
    load_bucket("locations", memory.locations);
    load_bucket("props", memory.props);
    const Json recent = j.value("recent", Json::object());
    for (const auto& [name, path] : recent.items())
        memory.recent_character[character_id(name)] = AnchorKey::parse(path.get<std::string>());
    try {
        for (const auto& jf : j.value("frames", Json::array()))
            memory.frames.push_back(frame_from_json(jf));
    } catch (const CanvasError& e) {
        throw CorruptSnapshot(e.what());
    }
    return memory;
}

}  // namespace canvas
