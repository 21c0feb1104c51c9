#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "canvas/memory.hpp"

namespace canvas {

struct CharacterAnchorPick {
    EntityId character;
    AnchorRecord record;
    std::string source;  // "recent" | "canonical" | "minted"
};

struct AnchorSet {
    ContinuityMode mode = ContinuityMode::fresh_location;
    std::optional<FrameArtifact> previous_frame;
    std::optional<AnchorRecord> location_anchor;
    std::vector<CharacterAnchorPick> characters;
    std::vector<AnchorRecord> props;

    Json manifest() const {
        Json chars = Json::array();
        for (const auto& c : characters)
            chars.push_back(Json{{"name", c.character.name},
                                 {"key", c.record.key.path()},
                                 {"source", c.source}});
        Json props_j = Json::array();
        for (const auto& p : props)
            props_j.push_back(Json{{"name", p.key.entity.name}, {"key", p.key.path()}});
        Json j{{"continuity_mode", to_string(mode)},
               {"characters", chars},
               {"props", props_j}};
        j["previous_frame"] = previous_frame ? Json(previous_frame->frame_id) : Json(nullptr);
        j["location_anchor"] = location_anchor
                                   ? Json{{"key", location_anchor->key.path()},
                                          {"source_shot", location_anchor->source_shot}}
                                   : Json(nullptr);
        return j;
    }
};

namespace detail {

inline const CharacterDecl* find_decl(const StoryScript& script, const EntityId& c) {
    for (const auto& d : script.characters)
        if (d.id == c) return &d;
    return nullptr;
}

// Canonical identity anchor for (character, state): exact state-keyed hit,
// then the init-time anchor, then an on-demand mint stored under (c, state).
inline AnchorRecord canonical_for(WorldMemory& memory, const StoryScript& script,
                                  const EntityId& c, const std::string& state, Backend* imager,
                                  std::uint64_t seed, const EventSink& sink,
                                  std::string& source_out) {
    if (const AnchorRecord* exact = memory.find_canonical(canonical_key(c, state))) {
        source_out = "canonical";
        return *exact;
    }
    if (const AnchorRecord* base = memory.find_canonical(canonical_key(c, kCanonicalState))) {
        source_out = "canonical";
        return *base;
    }
    if (!imager) throw MissingAnchor(canonical_key(c, state).path());

    const CharacterDecl* decl = find_decl(script, c);
    GenerateRequest req;
    req.shot_id = "";
    req.frame_id = "canonical_" + c.name + "_" + state;
    req.prompt = "Neutral full-body reference portrait of " + c.name + " in state " + state +
                 (decl ? (": " + decl->description) : "");
    req.directives = Json{{"kind", "canonical_reference"},
                          {"character", c.name},
                          {"appearance_state", state},
                          {"description", decl ? decl->description : ""}};
    // Identity continuity: condition the mint on the freshest look we have.
    auto recent_it = memory.recent_character.find(c);
    if (recent_it != memory.recent_character.end()) {
        if (const AnchorRecord* recent = memory.find_character_anchor(recent_it->second)) {
            AnchorAttachment att;
            att.role = "character";
            att.name = c.name;
            att.key = recent->key.path();
            att.source = "recent";
            att.artifact = recent->artifact;
            att.descriptor = recent->descriptor;
            req.anchors.push_back(std::move(att));
        }
    }
    req.seed = mix_seed(seed, fnv1a64("mint:" + c.name + "/" + state));
    AnchorRecord rec;
    rec.key = canonical_key(c, state);
    rec.artifact = logged_generate(*imager, req, sink);
    if (rec.artifact.is_scene())
        rec.descriptor = character_descriptor_from_graph(rec.artifact.scene(), c);
    else
        rec.descriptor = Json{{"name", c.name}, {"appearance_state", state}};
    memory.canonical[rec.key] = rec;
    if (sink) sink(Json{{"event", "canonical_minted"}, {"key", rec.key.path()}});
    source_out = "minted";
    return rec;
}

}  // namespace detail

// Props the background plan puts on screen at shot t, alphabetical.
inline std::vector<EntityId> slated_props(const ContinuityPlan& plan, int t) {
    const BackgroundPlan& bg = plan.backgrounds.at(static_cast<std::size_t>(t));
    std::set<EntityId> out;
    for (const auto& p : bg.background_props) out.insert(p);
    for (const auto& p : bg.must_appear) out.insert(p);
    for (const auto& [c, ps] : bg.carried)
        for (const auto& p : ps) out.insert(p);
    for (const auto& p : bg.must_not_appear) out.erase(p);
    return {out.begin(), out.end()};
}

// Assembles the anchor set for shot t per the branch table: continuation
// attaches the previous frame, reappearance requires the stored location
// anchor, fresh locations get character anchors only. May mint a canonical
// anchor on demand, which writes to the canonical store.
inline AnchorSet retrieve_anchors(WorldMemory& memory, const StoryScript& script,
                                  const ContinuityPlan& plan, int t, Backend* imager = nullptr,
                                  const Ablations& ablate = {}, std::uint64_t seed = 0,
                                  const EventSink& sink = {}) {
    if (t < 0 || t >= plan.n_shots()) throw OutOfRange("shot index " + std::to_string(t));
    if (sink) sink(Json{{"event", "retrieve"}, {"shot", t}});
    AnchorSet set;
    set.mode = plan.locations.mode_at(t);

    if (!ablate.disable_background_reuse) {
        if (set.mode == ContinuityMode::previous_frame_continuation) {
            if (memory.frames.empty())
                throw MissingAnchor("previous frame for shot " + std::to_string(t));
            set.previous_frame = memory.frames.back();
        }
        const EntityId& loc = plan.locations.location_at(t);
        const AnchorRecord* loc_anchor = memory.find_location_anchor(loc);
        if (set.mode == ContinuityMode::location_reappearance) {
            if (!loc_anchor) throw MissingAnchor(location_key(loc).path());
            set.location_anchor = *loc_anchor;
        } else if (set.mode == ContinuityMode::previous_frame_continuation && loc_anchor) {
            set.location_anchor = *loc_anchor;
        }
    }

    std::vector<EntityId> present = plan.present_characters(t);
    std::sort(present.begin(), present.end());
    for (const EntityId& c : present) {
        const AppearanceTimeline& tl = plan.appearance.at(c);
        const std::string& state = tl.at(t);
        std::optional<std::string> prev_state = tl.last_state_before(t);
        bool changed = !prev_state || *prev_state != state;

        if (ablate.disable_canonical_anchors) {
            if (!changed) {
                auto it = memory.recent_character.find(c);
                if (it != memory.recent_character.end())
                    if (const AnchorRecord* rec = memory.find_character_anchor(it->second))
                        set.characters.push_back({c, *rec, "recent"});
            }
            continue;
        }

        CharacterAnchorPick pick;
        pick.character = c;
        if (changed) {
            pick.record = detail::canonical_for(memory, script, c, state, imager, seed, sink,
                                                pick.source);
        } else {
            auto it = memory.recent_character.find(c);
            const AnchorRecord* rec =
                it != memory.recent_character.end() ? memory.find_character_anchor(it->second)
                                                    : nullptr;
            if (rec) {
                pick.record = *rec;
                pick.source = "recent";
            } else {
                pick.record = detail::canonical_for(memory, script, c, state, imager, seed, sink,
                                                    pick.source);
            }
        }
        set.characters.push_back(std::move(pick));
    }

    for (const EntityId& o : slated_props(plan, t)) {
        const PropStateEntry& entry = plan.prop_at(o, t);
        if (const AnchorRecord* rec = memory.find_prop_anchor(prop_key(o, entry.state)))
            set.props.push_back(*rec);
    }
    return set;
}

struct GenerationPrompt {
    std::string shot_text;
    Json appearance_directives;
    Json prop_directives;
    Json background_directive;
    std::string rendered;
};

// Renders the generation instruction: every directive appears exactly once,
// ordering is deterministic (characters and props alphabetical).
inline GenerationPrompt construct_prompt(const StoryScript& script, const ContinuityPlan& plan,
                                         int t, const AnchorSet& anchors) {
    const Shot& shot = script.shots.at(static_cast<std::size_t>(t));
    const BackgroundPlan& bg = plan.backgrounds.at(static_cast<std::size_t>(t));
    GenerationPrompt p;
    p.shot_text = shot.description;

    p.appearance_directives = Json::object();
    std::vector<EntityId> present = plan.present_characters(t);
    std::sort(present.begin(), present.end());
    for (const auto& c : present) p.appearance_directives[c.name] = plan.appearance_at(c, t);

    auto prop_entry = [&](const EntityId& o) {
        const PropStateEntry& e = plan.prop_at(o, t);
        Json j{{"name", o.name}, {"state", e.state}};
        j["carrier"] = e.carrier ? Json(e.carrier->name) : Json(nullptr);
        return j;
    };
    Json must_appear = Json::array(), background_props = Json::array();
    for (const auto& o : bg.must_appear) must_appear.push_back(prop_entry(o));
    for (const auto& o : bg.background_props) background_props.push_back(prop_entry(o));
    Json must_not = Json::array();
    for (const auto& o : bg.must_not_appear) must_not.push_back(o.name);
    Json carried = Json::object();
    for (const auto& [c, ps] : bg.carried) {
        Json arr = Json::array();
        for (const auto& o : ps) arr.push_back(o.name);
        carried[c.name] = arr;
    }
    p.prop_directives = Json{{"must_appear", must_appear},
                             {"background_props", background_props},
                             {"must_not_appear", must_not},
                             {"carried", carried}};

    Json preserve = Json::array();
    const Json* loc_desc = nullptr;
    if (anchors.location_anchor) loc_desc = &anchors.location_anchor->descriptor;
    if (loc_desc && loc_desc->contains("structures"))
        for (const auto& s : (*loc_desc)["structures"]) preserve.push_back(s);
    p.background_directive = Json{{"location", plan.locations.location_at(t).name},
                                  {"continuity_mode", to_string(anchors.mode)},
                                  {"preserve_structures", preserve}};

    std::ostringstream os;
    os << "Generate the next storyboard frame.\n"
       << "Shot: " << p.shot_text << "\n"
       << "Location: " << plan.locations.location_at(t).name << "\n";
    switch (anchors.mode) {
        case ContinuityMode::previous_frame_continuation:
            os << "Continuity: continue directly from the attached previous frame; keep its "
                  "exact layout and background geometry.\n";
            break;
        case ContinuityMode::location_reappearance:
            os << "Continuity: this location was shown before; match the attached location "
                  "reference.\n";
            break;
        case ContinuityMode::fresh_location:
            os << "Continuity: first time at this location; establish it.\n";
            break;
    }
    if (!preserve.empty()) {
        os << "Preserve structures:";
        for (const auto& s : preserve) os << " " << s.get<std::string>();
        os << "\n";
    }
    os << "Characters:\n";
    for (const auto& [name, state] : p.appearance_directives.items())
        os << "  - " << name << " in appearance state " << state.get<std::string>() << "\n";
    if (!must_appear.empty()) {
        os << "Props that must appear:\n";
        for (const auto& e : must_appear) {
            os << "  - " << e["name"].get<std::string>() << " (" << e["state"].get<std::string>();
            if (!e["carrier"].is_null()) os << ", carried by " << e["carrier"].get<std::string>();
            os << ")\n";
        }
    }
    if (!background_props.empty()) {
        os << "Background props:\n";
        for (const auto& e : background_props) {
            os << "  - " << e["name"].get<std::string>() << " (" << e["state"].get<std::string>()
               << ")\n";
        }
    }
    if (!must_not.empty()) {
        os << "Must NOT appear:";
        for (const auto& n : must_not) os << " " << n.get<std::string>();
        os << "\n";
    }
    if (!carried.empty()) {
        os << "Carried props:\n";
        for (const auto& [c, ps] : carried.items()) {
            os << "  - " << c << ":";
            for (const auto& o : ps) os << " " << o.get<std::string>();
            os << "\n";
        }
    }
    for (const auto& c : anchors.characters)
        os << "Reference for " << c.character.name << ": " << c.record.key.path() << " ("
           << c.source << ")\n";
    for (const auto& pr : anchors.props)
        os << "Reference for " << pr.key.entity.name << ": " << pr.key.path() << "\n";
    p.rendered = os.str();
    return p;
}

// Packs prompt + anchors into the imager request.
inline GenerateRequest make_generate_request(const GenerationPrompt& prompt,
                                             const AnchorSet& anchors, const std::string& shot_id,
                                             const std::string& frame_id, std::uint64_t seed) {
    GenerateRequest req;
    req.shot_id = shot_id;
    req.frame_id = frame_id;
    req.prompt = prompt.rendered;
    req.directives = Json{{"shot", prompt.shot_text},
                          {"appearance", prompt.appearance_directives},
                          {"props", prompt.prop_directives},
                          {"background", prompt.background_directive}};
    if (anchors.previous_frame) {
        AnchorAttachment att;
        att.role = "previous_frame";
        att.name = "";
        att.key = "frame/" + anchors.previous_frame->frame_id;
        att.source = "frame";
        att.artifact = *anchors.previous_frame;
        req.anchors.push_back(std::move(att));
    }
    if (anchors.location_anchor) {
        AnchorAttachment att;
        att.role = "location";
        att.name = anchors.location_anchor->key.entity.name;
        att.key = anchors.location_anchor->key.path();
        att.source = "stored";
        att.artifact = anchors.location_anchor->artifact;
        att.descriptor = anchors.location_anchor->descriptor;
        req.anchors.push_back(std::move(att));
    }
    for (const auto& c : anchors.characters) {
        AnchorAttachment att;
        att.role = "character";
        att.name = c.character.name;
        att.key = c.record.key.path();
        att.source = c.source;
        att.artifact = c.record.artifact;
        att.descriptor = c.record.descriptor;
        req.anchors.push_back(std::move(att));
    }
    for (const auto& pr : anchors.props) {
        AnchorAttachment att;
        att.role = "prop";
        att.name = pr.key.entity.name;
        att.key = pr.key.path();
        att.source = "stored";
        att.artifact = pr.artifact;
        att.descriptor = pr.descriptor;
        req.anchors.push_back(std::move(att));
    }
    req.seed = seed;
    return req;
}

}  // namespace canvas
