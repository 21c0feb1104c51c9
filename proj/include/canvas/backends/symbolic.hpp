#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "canvas/backend.hpp"
#include "canvas/plan.hpp"
#include "canvas/rational.hpp"
#include "canvas/story.hpp"

namespace canvas {

namespace symdetail {

// Deterministic per-call random stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next() { return splitmix64(state_); }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    std::uint64_t pick(std::uint64_t n) { return n == 0 ? 0 : next() % n; }

private:
    std::uint64_t state_;
};

inline std::string hex4(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(4, '0');
    for (int i = 3; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

inline std::string hex8(std::uint64_t v) { return hex4(v >> 16) + hex4(v); }

// Clothing is a pure rendering of (character, appearance state): any backend
// re-deriving it for the same state reproduces the identical string.
inline std::string clothing_for(const std::string& name, const std::string& state) {
    return "outfit_" + state + "_" + name;
}

inline const std::vector<std::string>& structure_vocabulary() {
    static const std::vector<std::string> v = {
        "arch",     "pillar",   "doorway", "window",  "counter",  "staircase",
        "skylight", "railing",  "alcove",  "beam",    "partition", "column"};
    return v;
}

inline const std::vector<std::string>& placement_vocabulary() {
    static const std::vector<std::string> v = {"left", "right", "center",
                                               "back", "front", "corner"};
    return v;
}

// Structure set of a fresh location: 4-5 distinct elements with placements.
inline std::vector<std::string> mint_structures(Rng& rng) {
    const auto& names = structure_vocabulary();
    const auto& places = placement_vocabulary();
    std::size_t count = 4 + (rng.next() & 1);
    std::vector<std::size_t> order(names.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.pick(i)]);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < count; ++i)
        out.push_back(names[order[i]] + "@" + places[rng.pick(places.size())]);
    return out;
}

// base -> multiset of placements, for geometry comparison.
inline std::map<std::string, std::multiset<std::string>> structure_layout(
    const std::vector<std::string>& structures) {
    std::map<std::string, std::multiset<std::string>> out;
    for (const auto& s : structures) {
        std::string base = structure_base(s);
        std::size_t at = s.find('@');
        out[base].insert(at == std::string::npos ? "" : s.substr(at + 1));
    }
    return out;
}

struct GeometryCounts {
    int n_a = 0, n_b = 0, n_appear = 0, n_disappear = 0, n_layout = 0;
};

inline GeometryCounts compare_structures(const std::vector<std::string>& a,
                                         const std::vector<std::string>& b) {
    GeometryCounts c;
    c.n_a = static_cast<int>(a.size());
    c.n_b = static_cast<int>(b.size());
    auto la = structure_layout(a), lb = structure_layout(b);
    for (const auto& [base, places] : lb)
        if (la.find(base) == la.end()) ++c.n_appear;
    for (const auto& [base, places] : la) {
        auto it = lb.find(base);
        if (it == lb.end()) ++c.n_disappear;
        else if (places != it->second) ++c.n_layout;
    }
    return c;
}

inline int mismatch_to_score(int mismatches) {
    switch (mismatches) {
        case 0: return 5;
        case 1: return 4;
        case 2: return 3;
        case 3: return 2;
        default: return 1;
    }
}

}  // namespace symdetail

// Deterministic world-model backend: the reasoner answers planning tasks
// from shot annotations, the imager assembles scene graphs from directives
// and anchors (optionally corrupted at a seeded flat rate), and the judge
// computes every rubric exactly from scene-graph fields.
class SymbolicBackend : public Backend {
public:
    explicit SymbolicBackend(StoryScript script = {}, CorruptionModel corruption = {})
        : script_(std::move(script)), corruption_(corruption) {}

    std::string name() const override { return "symbolic"; }

    // ---- reasoning oracle ----------------------------------------------------

    std::string reason(const ReasonRequest& req) override {
        if (script_.shots.empty())
            throw BackendError("symbolic reasoner has no story loaded");
        if (req.task == "location_clustering") return dump(reason_clustering());
        if (req.task == "character_appearance")
            return dump(reason_appearance(req.context.value("character", "")));
        if (req.task == "prop_inventory") return dump(reason_prop_inventory());
        if (req.task == "prop_states")
            return dump(reason_prop_states(req.context.value("prop", "")));
        if (req.task == "background_plan")
            return dump(reason_background(req.context.value("shot_id", ""),
                                          req.context.value("prop_states", Json::object())));
        if (req.task == "continuation_decision")
            return dump(reason_continuation(req.context));
        throw BackendError("symbolic reasoner: unknown task " + req.task);
    }

    // ---- image generation ----------------------------------------------------

    FrameArtifact generate(const GenerateRequest& req) override {
        FrameArtifact f;
        f.frame_id = req.frame_id;
        f.shot_id = req.shot_id;
        f.backend = name();
        f.seed = req.seed;
        if (req.directives.value("kind", "") == "canonical_reference")
            f.payload = assemble_reference(req);
        else
            f.payload = corrupt(assemble_shot(req), req);
        return f;
    }

    // ---- judging / extraction -------------------------------------------------

    std::string evaluate(const EvalRequest& req) override {
        if (req.rubric == "qa_score") return dump(eval_qa(req));
        if (req.rubric == "transition_face") return dump(eval_transition(req, "face"));
        if (req.rubric == "transition_clothing") return dump(eval_transition(req, "clothing"));
        if (req.rubric == "transition_hair_body") return dump(eval_transition(req, "hair_body"));
        if (req.rubric == "geometry_pair") return dump(eval_geometry(req));
        if (req.rubric == "prop_pair") return dump(eval_props(req));
        if (req.rubric == "extract_characters") return dump(eval_extract_characters(req));
        if (req.rubric == "extract_location") return dump(eval_extract_location(req));
        if (req.rubric == "extract_props") return dump(eval_extract_props(req));
        throw BackendError("symbolic judge: unknown rubric " + req.rubric);
    }

    const StoryScript& story() const { return script_; }
    const CorruptionModel& corruption() const { return corruption_; }

private:
    StoryScript script_;
    CorruptionModel corruption_;

    static std::string dump(const Json& j) { return j.dump(); }

    static const GroundTruthAnnotation* ann(const Shot& shot) {
        return shot.annotations ? &*shot.annotations : nullptr;
    }

    std::string location_name_for(const Shot& shot) const {
        const auto* a = ann(shot);
        if (a && a->location) return a->location->name;
        return "scene_" + std::to_string(shot.index);
    }

    Json reason_clustering() const {
        Json locations = Json::object();
        Json shots = Json::object();
        std::map<std::string, int> last_index;
        for (const auto& shot : script_.shots) {
            std::string loc = location_name_for(shot);
            if (!locations.contains(loc)) locations[loc] = Json::array();
            locations[loc].push_back(shot.shot_id);

            std::string mode;
            const auto* a = ann(shot);
            if (a && a->continuity_mode) {
                mode = *a->continuity_mode;
            } else if (last_index.find(loc) == last_index.end()) {
                mode = "fresh_location";
            } else if (last_index[loc] == shot.index - 1) {
                mode = "previous_frame_continuation";
            } else {
                mode = "location_reappearance";
            }
            last_index[loc] = shot.index;
            shots[shot.shot_id] = Json{{"location_id", loc}, {"continuity_mode", mode}};
        }
        return Json{{"locations", locations}, {"shots", shots}};
    }

    Json reason_appearance(const std::string& character) const {
        Json tl = Json::object();
        for (const auto& shot : script_.shots) {
            std::string state = kNotPresent;
            if (const auto* a = ann(shot)) {
                auto it = a->appearance.find(character);
                if (it != a->appearance.end()) state = it->second;
            }
            tl[shot.shot_id] = state;
        }
        return Json{{"character", character}, {"appearance_timeline", tl}};
    }

    Json reason_prop_inventory() const {
        std::set<std::string> props;
        for (const auto& shot : script_.shots) {
            const auto* a = ann(shot);
            if (!a) continue;
            for (const auto& [name, entry] : a->props) props.insert(name);
            for (const auto& n : a->background_props) props.insert(n);
            for (const auto& n : a->must_appear) props.insert(n);
            for (const auto& n : a->must_not_appear) props.insert(n);
            for (const auto& [c, ps] : a->carried)
                for (const auto& n : ps) props.insert(n);
        }
        return Json{{"props", Json(props)}};
    }

    Json reason_prop_states(const std::string& prop) const {
        Json tl = Json::object();
        for (const auto& shot : script_.shots) {
            const auto* a = ann(shot);
            if (!a) continue;
            auto it = a->props.find(prop);
            if (it == a->props.end()) continue;
            Json entry{{"state", it->second.state}};
            entry["carrier"] =
                it->second.carrier ? Json(it->second.carrier->name) : Json(nullptr);
            tl[shot.shot_id] = entry;
        }
        return Json{{"prop", prop}, {"state_timeline", tl}};
    }

    Json reason_background(const std::string& shot_id, const Json& prop_states) const {
        const Shot* shot = script_.find_shot(shot_id);
        if (!shot) throw BackendError("symbolic reasoner: unknown shot " + shot_id);
        const auto* a = ann(*shot);
        if (a && a->has_background) {
            Json carried = Json::object();
            for (const auto& [c, ps] : a->carried) carried[c] = Json(ps);
            return Json{{"background_props", Json(a->background_props)},
                        {"must_appear", Json(a->must_appear)},
                        {"must_not_appear", Json(a->must_not_appear)},
                        {"carried_props", carried},
                        {"reasoning", "annotated background plan"}};
        }
        // No annotation: derive from the already-planned prop states — every
        // prop visible here is scenery unless a character carries it.
        Json background = Json::array();
        Json carried = Json::object();
        for (const auto& [name, entry] : prop_states.items()) {
            std::string state = entry.value("state", kNotVisible());
            if (state == kNotVisible()) continue;
            if (entry.contains("carrier") && !entry["carrier"].is_null()) {
                std::string c = entry["carrier"].get<std::string>();
                if (!carried.contains(c)) carried[c] = Json::array();
                carried[c].push_back(name);
            } else {
                background.push_back(name);
            }
        }
        return Json{{"background_props", background},
                    {"must_appear", Json::array()},
                    {"must_not_appear", Json::array()},
                    {"carried_props", carried},
                    {"reasoning", "derived from planned prop states"}};
    }

    Json reason_continuation(const Json& context) const {
        std::string mode = "previous_frame_continuation";
        const Json& curr = context.value("curr", Json::object());
        if (curr.contains("annotations")) {
            const Json& a = curr["annotations"];
            if (a.contains("continuity_mode") && !a["continuity_mode"].is_null())
                mode = a["continuity_mode"].get<std::string>();
        }
        return Json{{"continuity_mode", mode},
                    {"same_location", true},
                    {"requires_spatial_continuity", mode == "previous_frame_continuation"},
                    {"spatial_dependencies", Json::array()},
                    {"reasoning", "annotated continuation decision"}};
    }

    static const char* kNotVisible() { return "not_visible"; }

    // ---- imager internals ------------------------------------------------------

    static const AnchorAttachment* find_attachment(const GenerateRequest& req,
                                                   const std::string& role,
                                                   const std::string& name = "") {
        for (const auto& a : req.anchors)
            if (a.role == role && (name.empty() || a.name == name)) return &a;
        return nullptr;
    }

    SceneGraph assemble_reference(const GenerateRequest& req) const {
        symdetail::Rng rng(req.seed);
        std::string who = req.directives.value("character", "");
        std::string state = req.directives.value("appearance_state", "canonical");
        CharacterInstance c;
        c.entity = character_id(who);
        c.appearance_state = state;
        c.clothing = symdetail::clothing_for(c.entity.name, state);
        c.visible_face = true;
        const AnchorAttachment* identity = find_attachment(req, "character");
        if (identity && identity->descriptor.value("face_id", "") != "") {
            c.face_id = identity->descriptor["face_id"].get<std::string>();
            c.hair_body = identity->descriptor.value("hair_body", "");
        } else {
            c.face_id = "face_" + c.entity.name + "#" + symdetail::hex8(rng.next());
            c.hair_body = "hair_" + c.entity.name + "#" + symdetail::hex8(rng.next());
        }
        SceneGraph g;
        g.characters.push_back(std::move(c));
        g.location.entity = location_id("reference_studio");
        g.camera = Camera::medium;
        return g;
    }

    SceneGraph assemble_shot(const GenerateRequest& req) const {
        symdetail::Rng rng(req.seed);
        const Json& appearance = req.directives.value("appearance", Json::object());
        const Json& props = req.directives.value("props", Json::object());
        const Json& background = req.directives.value("background", Json::object());
        std::string shot_text = req.directives.value("shot", "");

        SceneGraph g;
        g.location.entity = location_id(background.value("location", "unknown_location"));
        if (shot_text.find("[closeup]") != std::string::npos) g.camera = Camera::closeup;
        else if (shot_text.find("[wide]") != std::string::npos) g.camera = Camera::wide;
        else g.camera = Camera::medium;
        bool faces_hidden = shot_text.find("[faces_hidden]") != std::string::npos;

        // Background structures: continuation copies the previous frame,
        // reappearance copies the location anchor, fresh locations are minted.
        const AnchorAttachment* prev = find_attachment(req, "previous_frame");
        const AnchorAttachment* loc = find_attachment(req, "location");
        if (prev && prev->artifact.is_scene() &&
            prev->artifact.scene().location.entity == g.location.entity) {
            g.location.structures = prev->artifact.scene().location.structures;
        } else if (loc && loc->descriptor.contains("structures")) {
            for (const auto& s : loc->descriptor["structures"])
                g.location.structures.push_back(s.get<std::string>());
        } else {
            g.location.structures = symdetail::mint_structures(rng);
        }

        for (const auto& [who, state] : appearance.items()) {
            CharacterInstance c;
            c.entity = character_id(who);
            c.appearance_state = state.get<std::string>();
            c.clothing = symdetail::clothing_for(c.entity.name, c.appearance_state);
            c.visible_face = !faces_hidden;
            const AnchorAttachment* anchor = find_attachment(req, "character", who);
            if (anchor && anchor->descriptor.value("face_id", "") != "") {
                c.face_id = anchor->descriptor["face_id"].get<std::string>();
                c.hair_body = anchor->descriptor.value("hair_body", "");
            } else {
                c.face_id = "face_" + c.entity.name + "#" + symdetail::hex8(rng.next());
                c.hair_body = "hair_" + c.entity.name + "#" + symdetail::hex8(rng.next());
            }
            g.characters.push_back(std::move(c));
        }

        auto add_props = [&](const Json& list) {
            for (const auto& e : list) {
                EntityId id = prop_id(e.value("name", ""));
                if (g.find_prop(id)) continue;
                PropInstance p;
                p.entity = id;
                p.state = e.value("state", "visible");
                if (e.contains("carrier") && !e["carrier"].is_null()) {
                    EntityId carrier = character_id(e["carrier"].get<std::string>());
                    if (g.find_character(carrier)) p.carrier = carrier;
                }
                g.props.push_back(std::move(p));
            }
        };
        add_props(props.value("must_appear", Json::array()));
        add_props(props.value("background_props", Json::array()));
        return g;
    }

    // Flat-rate seeded noise. Anchored props are pinned: conditioning on a
    // stored prop anchor reproduces it faithfully, so only props without an
    // anchor can drift or vanish. Ghost adds draw from the must-not list.
    SceneGraph corrupt(SceneGraph g, const GenerateRequest& req) const {
        if (corruption_.rate <= 0.0) return g;
        symdetail::Rng rng(mix_seed(corruption_.seed, req.seed));
        const double rate = corruption_.rate;
        auto hit = [&](const char* attr) {
            double d = rng.uniform();
            return corruption_.mutates(attr) && d < rate;
        };

        for (auto& c : g.characters) {
            if (hit("face_id")) c.face_id += "~" + symdetail::hex4(rng.next());
            if (hit("clothing")) c.clothing += "~" + symdetail::hex4(rng.next());
            if (hit("hair_body")) c.hair_body += "~" + symdetail::hex4(rng.next());
        }

        for (auto& s : g.location.structures) {
            if (!hit("structures")) continue;
            std::uint64_t r = rng.next();
            std::size_t at = s.find('@');
            std::string base = s.substr(0, at == std::string::npos ? s.size() : at);
            std::string place = at == std::string::npos ? "" : s.substr(at + 1);
            if (r & 1) s = base + "~" + symdetail::hex4(r >> 1) + "@" + place;
            else s = base + "@~" + symdetail::hex4(r >> 1);
        }

        std::set<std::string> anchored;
        for (const auto& a : req.anchors)
            if (a.role == "prop") anchored.insert(a.name);
        std::vector<PropInstance> kept;
        for (auto& p : g.props) {
            bool pinned = anchored.count(p.entity.name) > 0;
            double d_state = rng.uniform();
            double d_drop = rng.uniform();
            if (!pinned && corruption_.mutates("prop_state") && d_state < rate)
                p.state += "~" + symdetail::hex4(rng.next());
            if (!pinned && corruption_.mutates("prop_presence") && d_drop < rate) continue;
            kept.push_back(std::move(p));
        }
        g.props = std::move(kept);
        const Json& props = req.directives.value("props", Json::object());
        for (const auto& n : props.value("must_not_appear", Json::array())) {
            if (!hit("prop_presence")) continue;
            EntityId id = prop_id(n.get<std::string>());
            if (g.find_prop(id)) continue;
            PropInstance ghost;
            ghost.entity = id;
            ghost.state = "unexpected";
            g.props.push_back(std::move(ghost));
        }
        return g;
    }

    // ---- judge internals --------------------------------------------------------

    static const SceneGraph& frame_scene(const EvalRequest& req, std::size_t i) {
        if (i >= req.frames.size())
            throw BackendError("symbolic judge: rubric " + req.rubric + " expects " +
                               std::to_string(i + 1) + " frames");
        return req.frames[i].scene("judge input for rubric " + req.rubric);
    }

    // QA sees only what the evaluation prompt carries: the shot text, the
    // planned appearance states, the planned prop states, the location
    // identifier, and — on continuation — the previous frame. Identity drift
    // is visible only as rendering artifacts ('~' marks a corrupted
    // attribute) or as disagreement with the previous frame's geometry.
    Json eval_qa(const EvalRequest& req) const {
        const SceneGraph& g = frame_scene(req, 0);
        const Json& appearance = req.context.value("appearance", Json::object());
        const Json& props = req.context.value("props", Json::object());
        std::string planned_location = req.context.value("location", "");
        bool continuation =
            req.context.value("continuity_mode", "") == "previous_frame_continuation";

        // Shot alignment: the planned cast must be on screen, nobody else.
        int m_align = 0;
        for (const auto& [who, state] : appearance.items())
            if (!g.find_character(character_id(who))) ++m_align;
        for (const auto& c : g.characters)
            if (!appearance.contains(c.entity.name)) ++m_align;

        // Character consistency: planned appearance state, the outfit that
        // state implies, and freedom from visible artifacts.
        int m_char = 0;
        for (const auto& c : g.characters) {
            auto it = appearance.find(c.entity.name);
            if (it == appearance.end()) continue;
            std::string planned_state = it->get<std::string>();
            if (c.appearance_state != planned_state) ++m_char;
            if (c.clothing != symdetail::clothing_for(c.entity.name, planned_state)) ++m_char;
            if (c.visible_face && c.face_id.find('~') != std::string::npos) ++m_char;
            if (c.hair_body.find('~') != std::string::npos) ++m_char;
        }
        bool char_assessable = !g.characters.empty() || !appearance.empty();

        // Background continuity: right location, plus either spatial
        // agreement with the previous frame (continuation) or freedom from
        // visible structural artifacts.
        int m_bg = 0;
        if (!planned_location.empty() && g.location.entity.name != planned_location) ++m_bg;
        if (continuation && req.frames.size() > 1) {
            const SceneGraph& prev = frame_scene(req, 1);
            auto counts = symdetail::compare_structures(prev.location.structures,
                                                        g.location.structures);
            m_bg += counts.n_appear + counts.n_disappear + counts.n_layout;
        } else {
            for (const auto& s : g.location.structures)
                if (s.find('~') != std::string::npos) ++m_bg;
        }

        // Prop state correctness: slated props present with the planned
        // state, nothing else on screen.
        int m_prop = 0;
        std::map<std::string, std::string> expected_props;
        auto note_expected = [&](const Json& list) {
            for (const auto& e : list)
                expected_props[e.value("name", "")] = e.value("state", "");
        };
        note_expected(props.value("must_appear", Json::array()));
        note_expected(props.value("background_props", Json::array()));
        bool has_forbidden = !props.value("must_not_appear", Json::array()).empty();

        for (const auto& [name, state] : expected_props) {
            const PropInstance* p = g.find_prop(prop_id(name));
            if (!p) ++m_prop;
            else if (p->state != state) ++m_prop;
        }
        for (const auto& p : g.props)
            if (expected_props.find(p.entity.name) == expected_props.end()) ++m_prop;
        bool prop_assessable = !expected_props.empty() || has_forbidden || !g.props.empty();

        Json out;
        out["shot_alignment"] = symdetail::mismatch_to_score(m_align);
        out["character_consistency"] =
            char_assessable ? Json(symdetail::mismatch_to_score(m_char)) : Json(nullptr);
        out["background_continuity"] = symdetail::mismatch_to_score(m_bg);
        out["prop_state_correctness"] =
            prop_assessable ? Json(symdetail::mismatch_to_score(m_prop)) : Json(nullptr);

        std::vector<Rational> parts;
        for (const char* k : {"shot_alignment", "character_consistency",
                              "background_continuity", "prop_state_correctness"})
            if (!out[k].is_null()) parts.emplace_back(out[k].get<int>());
        Rational overall = parts.empty() ? Rational(0) : rational_mean(parts);
        out["overall_score"] = overall.to_double();
        out["reasoning"] = "mismatches: alignment=" + std::to_string(m_align) +
                           " character=" + std::to_string(m_char) +
                           " background=" + std::to_string(m_bg) +
                           " props=" + std::to_string(m_prop);
        return out;
    }

    Json eval_transition(const EvalRequest& req, const std::string& attr) const {
        const SceneGraph& a = frame_scene(req, 0);
        const SceneGraph& b = frame_scene(req, 1);
        EntityId who = character_id(req.context.value("character", ""));
        const CharacterInstance* ca = a.find_character(who);
        const CharacterInstance* cb = b.find_character(who);
        Json out;
        if (!ca || !cb) {
            out[attr] = nullptr;
            out["reasoning"] = "character not visible in both frames";
            return out;
        }
        if (attr == "face") {
            if (!ca->visible_face || !cb->visible_face) {
                out[attr] = nullptr;
                out["reasoning"] = "face not visible";
                return out;
            }
            out[attr] = ca->face_id == cb->face_id ? 5 : 1;
        } else if (attr == "clothing") {
            out[attr] = ca->clothing == cb->clothing ? 5 : 1;
        } else {
            out[attr] = ca->hair_body == cb->hair_body ? 5 : 1;
        }
        out["reasoning"] = "exact attribute comparison";
        return out;
    }

    Json eval_geometry(const EvalRequest& req) const {
        const SceneGraph& a = frame_scene(req, 0);
        const SceneGraph& b = frame_scene(req, 1);
        auto c = symdetail::compare_structures(a.location.structures, b.location.structures);
        return Json{{"n_a", c.n_a},
                    {"n_b", c.n_b},
                    {"n_appear", c.n_appear},
                    {"n_disappear", c.n_disappear},
                    {"n_layout", c.n_layout}};
    }

    Json eval_props(const EvalRequest& req) const {
        const SceneGraph& a = frame_scene(req, 0);
        const SceneGraph& b = frame_scene(req, 1);
        std::map<EntityId, std::string> sa, sb;
        for (const auto& p : a.props)
            if (sa.find(p.entity) == sa.end()) sa[p.entity] = p.state;
        for (const auto& p : b.props)
            if (sb.find(p.entity) == sb.end()) sb[p.entity] = p.state;
        int n_match = 0;
        for (const auto& [id, state] : sa) {
            auto it = sb.find(id);
            if (it != sb.end() && it->second == state) ++n_match;
        }
        return Json{{"n_a", static_cast<int>(sa.size())},
                    {"n_b", static_cast<int>(sb.size())},
                    {"n_match", n_match}};
    }

    Json eval_extract_characters(const EvalRequest& req) const {
        const SceneGraph& g = frame_scene(req, 0);
        Json chars = Json::array();
        for (const auto& c : g.characters)
            chars.push_back(Json{{"name", c.entity.name},
                                 {"appearance_state", c.appearance_state},
                                 {"face_id", c.face_id},
                                 {"clothing", c.clothing},
                                 {"hair_body", c.hair_body},
                                 {"visible_face", c.visible_face},
                                 {"anchor", "character_anchor_image"}});
        return Json{{"characters", chars}};
    }

    Json eval_extract_location(const EvalRequest& req) const {
        const SceneGraph& g = frame_scene(req, 0);
        return Json{{"location", g.location.entity.name},
                    {"structures", Json(g.location.structures)},
                    {"anchor", "background_anchor_image"}};
    }

    Json eval_extract_props(const EvalRequest& req) const {
        const SceneGraph& g = frame_scene(req, 0);
        Json objects = Json::array();
        for (const auto& p : g.props) {
            Json o{{"name", p.entity.name},
                   {"state", p.state},
                   {"anchor", "prop_anchor_image"}};
            o["carrier"] = p.carrier ? Json(p.carrier->name) : Json(nullptr);
            objects.push_back(o);
        }
        return Json{{"objects", objects}};
    }
};

}  // namespace canvas
