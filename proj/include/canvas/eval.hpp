#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "canvas/backend.hpp"
#include "canvas/frame.hpp"
#include "canvas/plan.hpp"
#include "canvas/prompts.hpp"
#include "canvas/rational.hpp"
#include "canvas/story.hpp"

namespace canvas {

struct TransitionScore {
    std::string character;
    std::string from_shot;
    std::string to_shot;
    std::optional<int> face;
    std::optional<int> clothing;
    std::optional<int> hair_body;
    std::optional<Rational> combined;  // mean of non-null parts; null iff all null
};

struct GeometryComparison {
    std::string from_shot;
    std::string to_shot;
    bool consecutive = true;
    int n_a = 0, n_b = 0;
    int n_appear = 0, n_disappear = 0, n_layout = 0;
    std::optional<Rational> percentage;  // null when max(n_a, n_b) == 0
    std::optional<Rational> score;       // 1-5; null when unassessable
};

struct PropComparison {
    std::string from_shot;
    std::string to_shot;
    bool consecutive = true;
    int n_a = 0, n_b = 0, n_match = 0;
    std::optional<Rational> recoverability;  // null when min(n_a, n_b) == 0
    std::optional<Rational> score;
};

struct ContinuityReport {
    std::string story_id;
    std::optional<Rational> background_consecutive;
    std::optional<Rational> background_nonconsecutive;
    std::optional<Rational> prop_consistency;
    std::optional<Rational> face_consistency;
    std::optional<Rational> clothing_consistency;
    std::optional<Rational> body_consistency;
    std::optional<Rational> char_avg;
    std::map<EntityId, std::optional<Rational>> per_character;  // CIDS(c)
    std::vector<TransitionScore> transitions;
    std::vector<GeometryComparison> geometry_pairs;
    std::vector<PropComparison> prop_pairs;
};

namespace evaldetail {

inline std::optional<Rational> mean_optional(const std::vector<std::optional<Rational>>& xs) {
    std::vector<Rational> vals;
    for (const auto& x : xs)
        if (x) vals.push_back(*x);
    if (vals.empty()) return std::nullopt;
    return rational_mean(vals);
}

inline std::optional<int> int_field(const Json& reply, const std::string& key) {
    if (!reply.contains(key) || reply[key].is_null()) return std::nullopt;
    if (!reply[key].is_number_integer()) return std::nullopt;
    int v = reply[key].get<int>();
    if (v < 1 || v > 5) return std::nullopt;
    return v;
}

inline int count_field(const Json& reply, const std::string& key) {
    if (!reply.contains(key) || !reply[key].is_number_integer()) return 0;
    int v = reply[key].get<int>();
    return v < 0 ? 0 : v;
}

}  // namespace evaldetail

// Rubric band conversion: lower edges inclusive, exact comparisons.
inline int percentage_to_score(const Rational& p) {
    if (p < Rational(0) || p > Rational(100))
        throw OutOfRange("percentage " + p.str() + " outside [0,100]");
    if (p >= Rational(90)) return 5;
    if (p >= Rational(75)) return 4;
    if (p >= Rational(55)) return 3;
    if (p >= Rational(30)) return 2;
    return 1;
}

// Frames in which the character is on screen, in shot order. Scene-graph
// frames answer from their own content; opaque images defer to the plan.
inline std::vector<int> character_timeline(const std::vector<FrameArtifact>& frames,
                                           const EntityId& character,
                                           const ContinuityPlan& plan,
                                           const StoryScript& script) {
    if (!script.declares(character)) throw UnknownCharacter(character.name);
    std::vector<int> out;
    for (int t = 0; t < static_cast<int>(frames.size()); ++t) {
        const FrameArtifact& f = frames[static_cast<std::size_t>(t)];
        bool present = f.is_scene()
                           ? f.scene().find_character(character) != nullptr
                           : plan.appearance_at(character, t) != kNotPresent;
        if (present) out.push_back(t);
    }
    return out;
}

// One identity transition: three rubric calls (face / clothing / hair-body),
// with the clothing call skipped entirely when the plan mandates an
// appearance change across this pair.
inline TransitionScore score_transition(const FrameArtifact& a, const FrameArtifact& b,
                                        const EntityId& character, Backend& judge,
                                        bool expect_clothing_change = false,
                                        std::uint64_t seed = 0, const EventSink& sink = {}) {
    TransitionScore ts;
    ts.character = character.name;
    ts.from_shot = a.shot_id;
    ts.to_shot = b.shot_id;

    auto ask = [&](const std::string& rubric, const std::string& prompt,
                   const std::string& field, std::uint64_t salt) -> std::optional<int> {
        EvalRequest req;
        req.rubric = rubric;
        req.prompt = prompt;
        req.context = Json{{"character", character.name}};
        req.frames = {a, b};
        req.seed = mix_seed(seed, salt);
        Json reply = ask_eval_json(judge, req, sink);
        return evaldetail::int_field(reply, field);
    };

    ts.face = ask("transition_face", prompts::transition_face(character.name), "face", 1);
    if (!expect_clothing_change)
        ts.clothing = ask("transition_clothing", prompts::transition_clothing(character.name),
                          "clothing", 2);
    ts.hair_body = ask("transition_hair_body", prompts::transition_hair_body(character.name),
                       "hair_body", 3);

    std::vector<Rational> parts;
    for (const auto& c : {ts.face, ts.clothing, ts.hair_body})
        if (c) parts.emplace_back(*c);
    if (!parts.empty()) ts.combined = rational_mean(parts);
    return ts;
}

// Identity score for one character: the average of its transition scores.
inline std::optional<Rational> cids(const std::vector<TransitionScore>& transitions) {
    std::vector<Rational> vals;
    for (const auto& t : transitions)
        if (t.combined) vals.push_back(*t.combined);
    if (vals.empty()) return std::nullopt;
    return rational_mean(vals);
}

inline Rational character_consistency(
    const std::map<EntityId, std::optional<Rational>>& per_character) {
    std::vector<Rational> vals;
    for (const auto& [id, v] : per_character)
        if (v) vals.push_back(*v);
    if (vals.empty()) throw NoEvaluableCharacters();
    return rational_mean(vals);
}

inline GeometryComparison geom_cons(const FrameArtifact& a, const FrameArtifact& b,
                                    Backend& judge, std::uint64_t seed = 0,
                                    const EventSink& sink = {}) {
    EvalRequest req;
    req.rubric = "geometry_pair";
    req.prompt = prompts::geometry_pair();
    req.frames = {a, b};
    req.seed = seed;
    Json reply = ask_eval_json(judge, req, sink);

    GeometryComparison g;
    g.from_shot = a.shot_id;
    g.to_shot = b.shot_id;
    g.n_a = evaldetail::count_field(reply, "n_a");
    g.n_b = evaldetail::count_field(reply, "n_b");
    g.n_appear = evaldetail::count_field(reply, "n_appear");
    g.n_disappear = evaldetail::count_field(reply, "n_disappear");
    g.n_layout = evaldetail::count_field(reply, "n_layout");
    int max_n = std::max(g.n_a, g.n_b);
    if (max_n > 0) {
        Rational violations(g.n_appear + g.n_disappear + g.n_layout);
        Rational pct = (Rational(1) - violations / Rational(max_n)) * Rational(100);
        g.percentage = Rational::clamp(pct, Rational(0), Rational(100));
        g.score = Rational(percentage_to_score(*g.percentage));
    }
    return g;
}

inline PropComparison prop_cons(const FrameArtifact& a, const FrameArtifact& b,
                                Backend& judge, std::uint64_t seed = 0,
                                const EventSink& sink = {}) {
    EvalRequest req;
    req.rubric = "prop_pair";
    req.prompt = prompts::prop_pair();
    req.frames = {a, b};
    req.seed = seed;
    Json reply = ask_eval_json(judge, req, sink);

    PropComparison p;
    p.from_shot = a.shot_id;
    p.to_shot = b.shot_id;
    p.n_a = evaldetail::count_field(reply, "n_a");
    p.n_b = evaldetail::count_field(reply, "n_b");
    p.n_match = evaldetail::count_field(reply, "n_match");
    int min_n = std::min(p.n_a, p.n_b);
    if (p.n_match > min_n) p.n_match = min_n;  // judges may not over-report matches
    if (min_n > 0) {
        Rational pct = Rational(100) * Rational(p.n_match) / Rational(min_n);
        p.recoverability = Rational::clamp(pct, Rational(0), Rational(100));
        p.score = Rational(percentage_to_score(*p.recoverability));
    }
    return p;
}

// Background comparison pairs derived from the plan's location clusters:
// adjacent shots inside one stay at a location, and the seam between one
// stay and the next visit to the same location.
struct EvalPairs {
    std::vector<std::pair<int, int>> consecutive;
    std::vector<std::pair<int, int>> nonconsecutive;
};

inline EvalPairs derive_pairs(const ContinuityPlan& plan) {
    EvalPairs pairs;
    for (const auto& [loc, indices] : plan.locations.clusters) {
        auto runs = plan.locations.occurrences(loc);
        for (const auto& run : runs)
            for (std::size_t i = 0; i + 1 < run.size(); ++i)
                pairs.consecutive.emplace_back(run[i], run[i + 1]);
        for (std::size_t r = 0; r + 1 < runs.size(); ++r)
            pairs.nonconsecutive.emplace_back(runs[r].back(), runs[r + 1].front());
    }
    auto order = [](std::vector<std::pair<int, int>>& v) {
        std::sort(v.begin(), v.end());
    };
    order(pairs.consecutive);
    order(pairs.nonconsecutive);
    return pairs;
}

inline ContinuityReport evaluate_story_single(const std::vector<FrameArtifact>& frames,
                                              const ContinuityPlan& plan,
                                              const StoryScript& script, Backend& judge,
                                              std::uint64_t seed = 0,
                                              const EventSink& sink = {}) {
    if (static_cast<int>(frames.size()) != plan.n_shots())
        throw IncompleteRun(std::to_string(frames.size()) + " frames for " +
                            std::to_string(plan.n_shots()) + " planned shots");

    ContinuityReport report;
    report.story_id = plan.story_id;

    // Character identity: per-character timelines, pairwise transitions.
    for (const auto& decl : script.characters) {
        std::vector<int> timeline = character_timeline(frames, decl.id, plan, script);
        std::vector<TransitionScore> transitions;
        for (std::size_t i = 0; i + 1 < timeline.size(); ++i) {
            int ta = timeline[i], tb = timeline[i + 1];
            bool change = plan.appearance_at(decl.id, ta) != plan.appearance_at(decl.id, tb);
            TransitionScore ts = score_transition(
                frames[static_cast<std::size_t>(ta)], frames[static_cast<std::size_t>(tb)],
                decl.id, judge, change,
                mix_seed(seed, fnv1a64("transition:" + decl.id.name) ^
                                   static_cast<std::uint64_t>(ta)),
                sink);
            transitions.push_back(ts);
        }
        report.per_character[decl.id] = cids(transitions);
        for (auto& ts : transitions) report.transitions.push_back(std::move(ts));
    }

    {
        std::vector<std::optional<Rational>> face, cloth, body;
        for (const auto& ts : report.transitions) {
            face.push_back(ts.face ? std::optional<Rational>(Rational(*ts.face))
                                   : std::nullopt);
            cloth.push_back(ts.clothing ? std::optional<Rational>(Rational(*ts.clothing))
                                        : std::nullopt);
            body.push_back(ts.hair_body ? std::optional<Rational>(Rational(*ts.hair_body))
                                        : std::nullopt);
        }
        report.face_consistency = evaldetail::mean_optional(face);
        report.clothing_consistency = evaldetail::mean_optional(cloth);
        report.body_consistency = evaldetail::mean_optional(body);
    }

    bool any_cids = false;
    for (const auto& [id, v] : report.per_character)
        if (v) any_cids = true;
    if (any_cids) report.char_avg = character_consistency(report.per_character);

    // Background geometry and prop persistence over the plan-derived pairs.
    EvalPairs pairs = derive_pairs(plan);
    std::vector<std::optional<Rational>> bg_consec, bg_noncon, prop_scores;
    auto judge_pair = [&](int ta, int tb, bool consecutive) {
        const FrameArtifact& a = frames[static_cast<std::size_t>(ta)];
        const FrameArtifact& b = frames[static_cast<std::size_t>(tb)];
        std::uint64_t pair_seed =
            mix_seed(seed, (static_cast<std::uint64_t>(ta) << 20) ^
                               static_cast<std::uint64_t>(tb));
        GeometryComparison g = geom_cons(a, b, judge, mix_seed(pair_seed, 1), sink);
        g.consecutive = consecutive;
        PropComparison p = prop_cons(a, b, judge, mix_seed(pair_seed, 2), sink);
        p.consecutive = consecutive;
        (consecutive ? bg_consec : bg_noncon).push_back(g.score);
        prop_scores.push_back(p.score);
        report.geometry_pairs.push_back(g);
        report.prop_pairs.push_back(p);
    };
    for (const auto& [ta, tb] : pairs.consecutive) judge_pair(ta, tb, true);
    for (const auto& [ta, tb] : pairs.nonconsecutive) judge_pair(ta, tb, false);

    report.background_consecutive = evaldetail::mean_optional(bg_consec);
    report.background_nonconsecutive = evaldetail::mean_optional(bg_noncon);
    report.prop_consistency = evaldetail::mean_optional(prop_scores);
    return report;
}

// Ensemble: each judge produces a full report; scalar fields and per-
// character identity scores are averaged field-wise over non-null values.
// Detail rows come from the first judge.
inline ContinuityReport evaluate_story(const std::vector<FrameArtifact>& frames,
                                       const ContinuityPlan& plan, const StoryScript& script,
                                       const std::vector<std::shared_ptr<Backend>>& judges,
                                       std::uint64_t seed = 0, const EventSink& sink = {}) {
    if (judges.empty()) throw BackendError("evaluate_story: no judge configured");
    std::vector<ContinuityReport> reports;
    for (const auto& j : judges)
        reports.push_back(evaluate_story_single(frames, plan, script, *j, seed, sink));
    if (reports.size() == 1) return reports.front();

    ContinuityReport merged = reports.front();
    auto merge_field = [&](std::optional<Rational> ContinuityReport::*field) {
        std::vector<std::optional<Rational>> vals;
        for (const auto& r : reports) vals.push_back(r.*field);
        merged.*field = evaldetail::mean_optional(vals);
    };
    merge_field(&ContinuityReport::background_consecutive);
    merge_field(&ContinuityReport::background_nonconsecutive);
    merge_field(&ContinuityReport::prop_consistency);
    merge_field(&ContinuityReport::face_consistency);
    merge_field(&ContinuityReport::clothing_consistency);
    merge_field(&ContinuityReport::body_consistency);
    merge_field(&ContinuityReport::char_avg);
    for (auto& [id, v] : merged.per_character) {
        std::vector<std::optional<Rational>> vals;
        for (const auto& r : reports) {
            auto it = r.per_character.find(id);
            vals.push_back(it == r.per_character.end() ? std::nullopt : it->second);
        }
        v = evaldetail::mean_optional(vals);
    }
    return merged;
}

// ---- serialization --------------------------------------------------------------

inline Json rational_field(const std::optional<Rational>& v) {
    if (!v) return Json(nullptr);
    return Json{{"exact", v->str()}, {"value", v->to_double()}};
}

inline Json to_json(const ContinuityReport& r) {
    Json per_char = Json::object();
    for (const auto& [id, v] : r.per_character) per_char[id.name] = rational_field(v);

    Json transitions = Json::array();
    for (const auto& t : r.transitions) {
        Json row{{"character", t.character},
                 {"from_shot", t.from_shot},
                 {"to_shot", t.to_shot}};
        row["face"] = t.face ? Json(*t.face) : Json(nullptr);
        row["clothing"] = t.clothing ? Json(*t.clothing) : Json(nullptr);
        row["hair_body"] = t.hair_body ? Json(*t.hair_body) : Json(nullptr);
        row["combined"] = rational_field(t.combined);
        transitions.push_back(row);
    }

    Json geometry = Json::array();
    for (const auto& g : r.geometry_pairs)
        geometry.push_back(Json{{"from_shot", g.from_shot},
                                {"to_shot", g.to_shot},
                                {"consecutive", g.consecutive},
                                {"n_a", g.n_a},
                                {"n_b", g.n_b},
                                {"n_appear", g.n_appear},
                                {"n_disappear", g.n_disappear},
                                {"n_layout", g.n_layout},
                                {"percentage", rational_field(g.percentage)},
                                {"score", rational_field(g.score)}});

    Json props = Json::array();
    for (const auto& p : r.prop_pairs)
        props.push_back(Json{{"from_shot", p.from_shot},
                             {"to_shot", p.to_shot},
                             {"consecutive", p.consecutive},
                             {"n_a", p.n_a},
                             {"n_b", p.n_b},
                             {"n_match", p.n_match},
                             {"recoverability", rational_field(p.recoverability)},
                             {"score", rational_field(p.score)}});

    return Json{{"story_id", r.story_id},
                {"background_consecutive", rational_field(r.background_consecutive)},
                {"background_nonconsecutive", rational_field(r.background_nonconsecutive)},
                {"prop_cons", rational_field(r.prop_consistency)},
                {"face_cons", rational_field(r.face_consistency)},
                {"cloth_cons", rational_field(r.clothing_consistency)},
                {"body_cons", rational_field(r.body_consistency)},
                {"char_avg", rational_field(r.char_avg)},
                {"per_character", per_char},
                {"transitions", transitions},
                {"geometry_pairs", geometry},
                {"prop_pairs", props}};
}

// Flat per-pair rows for spreadsheet inspection.
inline std::string pairs_csv(const ContinuityReport& r) {
    std::ostringstream os;
    os << "kind,from_shot,to_shot,consecutive,detail,score\n";
    for (const auto& g : r.geometry_pairs)
        os << "geometry," << g.from_shot << "," << g.to_shot << ","
           << (g.consecutive ? "yes" : "no") << ","
           << "appear=" << g.n_appear << " disappear=" << g.n_disappear
           << " layout=" << g.n_layout << "," << (g.score ? g.score->str() : "null")
           << "\n";
    for (const auto& p : r.prop_pairs)
        os << "props," << p.from_shot << "," << p.to_shot << ","
           << (p.consecutive ? "yes" : "no") << ","
           << "match=" << p.n_match << "/" << std::min(p.n_a, p.n_b) << ","
           << (p.score ? p.score->str() : "null") << "\n";
    for (const auto& t : r.transitions)
        os << "transition," << t.from_shot << "," << t.to_shot << ",,"
           << t.character << "," << (t.combined ? t.combined->str() : "null") << "\n";
    return os.str();
}

}  // namespace canvas
