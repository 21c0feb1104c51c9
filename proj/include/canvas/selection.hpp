#pragma once

#include <algorithm>
#include <functional>
#include <future>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "canvas/backend.hpp"
#include "canvas/config.hpp"
#include "canvas/memory.hpp"
#include "canvas/plan.hpp"
#include "canvas/planner.hpp"
#include "canvas/prompts.hpp"
#include "canvas/rational.hpp"
#include "canvas/retrieval.hpp"
#include "canvas/story.hpp"

namespace canvas {

struct CandidateScore {
    int candidate_index = 0;
    std::optional<int> shot_alignment;
    std::optional<int> character_consistency;
    std::optional<int> background_continuity;
    std::optional<int> prop_state_correctness;
    Rational overall{0};
    std::string reasoning;
};

inline Json to_json(const CandidateScore& s) {
    auto field = [](const std::optional<int>& v) {
        return v ? Json(*v) : Json(nullptr);
    };
    return Json{{"candidate_index", s.candidate_index},
                {"shot_alignment", field(s.shot_alignment)},
                {"character_consistency", field(s.character_consistency)},
                {"background_continuity", field(s.background_continuity)},
                {"prop_state_correctness", field(s.prop_state_correctness)},
                {"overall", s.overall.str()},
                {"overall_value", s.overall.to_double()},
                {"reasoning", s.reasoning}};
}

inline CandidateScore candidate_score_from_json(const Json& j) {
    CandidateScore s;
    s.candidate_index = j.value("candidate_index", 0);
    auto field = [&](const char* key) -> std::optional<int> {
        if (!j.contains(key) || j[key].is_null()) return std::nullopt;
        return j[key].get<int>();
    };
    s.shot_alignment = field("shot_alignment");
    s.character_consistency = field("character_consistency");
    s.background_continuity = field("background_continuity");
    s.prop_state_correctness = field("prop_state_correctness");
    s.overall = rational_from_string(j.value("overall", "0"));
    s.reasoning = j.value("reasoning", "");
    return s;
}

struct ShotResult {
    std::string shot_id;
    int shot_index = 0;
    std::vector<CandidateScore> candidates;
    int selected_index = 0;
    FrameArtifact selected;
    Json retrieval_manifest;
};

// Serialized without the frame payload; the run store keeps frames as files.
inline Json shot_result_to_json(const ShotResult& r) {
    Json cands = Json::array();
    for (const auto& c : r.candidates) cands.push_back(to_json(c));
    return Json{{"shot_id", r.shot_id},
                {"shot_index", r.shot_index},
                {"candidates", cands},
                {"selected_index", r.selected_index},
                {"selected_frame_id", r.selected.frame_id},
                {"retrieval", r.retrieval_manifest}};
}

inline ShotResult shot_result_from_json(const Json& j, FrameArtifact selected) {
    ShotResult r;
    r.shot_id = j.value("shot_id", "");
    r.shot_index = j.value("shot_index", 0);
    for (const auto& c : j.value("candidates", Json::array()))
        r.candidates.push_back(candidate_score_from_json(c));
    r.selected_index = j.value("selected_index", 0);
    r.selected = std::move(selected);
    r.retrieval_manifest = j.value("retrieval", Json::object());
    return r;
}

namespace seldetail {

// Runs `jobs` with at most `parallelism` in flight; results land by index.
template <typename T>
std::vector<T> bounded_parallel(std::vector<std::function<T()>> jobs, int parallelism) {
    std::vector<T> out(jobs.size());
    if (parallelism <= 1 || jobs.size() <= 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i) out[i] = jobs[i]();
        return out;
    }
    std::size_t next = 0;
    while (next < jobs.size()) {
        std::size_t batch = std::min<std::size_t>(
            static_cast<std::size_t>(parallelism), jobs.size() - next);
        std::vector<std::future<T>> futs;
        futs.reserve(batch);
        for (std::size_t k = 0; k < batch; ++k)
            futs.push_back(std::async(std::launch::async, jobs[next + k]));
        for (std::size_t k = 0; k < batch; ++k) out[next + k] = futs[k].get();
        next += batch;
    }
    return out;
}

inline EventSink locked_sink(const EventSink& inner, std::shared_ptr<std::mutex> mu) {
    if (!inner) return {};
    return [inner, mu](const Json& event) {
        std::lock_guard<std::mutex> lock(*mu);
        inner(event);
    };
}

}  // namespace seldetail

inline std::vector<FrameArtifact> generate_candidates(
    Backend& imager, const GenerationPrompt& prompt, const AnchorSet& anchors,
    const std::string& shot_id, int shot_index, int n, std::uint64_t shot_seed,
    int parallelism = 1, const EventSink& sink = {}) {
    if (n < 1) throw InvalidN(n);
    std::vector<std::function<FrameArtifact()>> jobs;
    for (int i = 0; i < n; ++i) {
        std::string frame_id =
            "shot" + std::to_string(shot_index) + "_cand" + std::to_string(i);
        GenerateRequest req = make_generate_request(prompt, anchors, shot_id, frame_id,
                                                    shot_seed ^ static_cast<std::uint64_t>(i));
        jobs.push_back([&imager, req, sink]() { return logged_generate(imager, req, sink); });
    }
    return seldetail::bounded_parallel<FrameArtifact>(std::move(jobs), parallelism);
}

// Constraint set the evaluator is allowed to see for one shot: the shot text,
// the planned character/prop states, the location identity, and the mode.
inline Json qa_context_for_shot(const StoryScript& script, const ContinuityPlan& plan, int t,
                                const GenerationPrompt& prompt) {
    const Shot& shot = script.shots.at(static_cast<std::size_t>(t));
    return Json{{"shot", shot.description},
                {"appearance", prompt.appearance_directives},
                {"props", prompt.prop_directives},
                {"location", plan.locations.location_at(t).name},
                {"continuity_mode", to_string(plan.locations.mode_at(t))}};
}

inline CandidateScore score_candidate(Backend& judge, const FrameArtifact& candidate,
                                      const std::optional<FrameArtifact>& previous_frame,
                                      const Json& qa_context, const std::string& qa_prompt,
                                      int candidate_index, std::uint64_t seed,
                                      const EventSink& sink = {}) {
    CandidateScore score;
    score.candidate_index = candidate_index;

    EvalRequest req;
    req.rubric = "qa_score";
    req.prompt = qa_prompt;
    req.context = qa_context;
    req.frames.push_back(candidate);
    if (previous_frame) req.frames.push_back(*previous_frame);
    req.seed = seed;

    Json reply;
    try {
        reply = ask_eval_json(judge, req, sink);
    } catch (const MalformedScoreJson&) {
        // The judge never produced usable JSON: the frame survives with a
        // zero score rather than killing the run.
        if (sink)
            sink(Json{{"event", "qa_score_failed"}, {"frame_id", candidate.frame_id}});
        score.reasoning = "judge reply unusable; all components skipped";
        score.overall = Rational(0);
        return score;
    }

    auto component = [&](const char* key) -> std::optional<int> {
        if (!reply.contains(key) || reply[key].is_null()) return std::nullopt;
        if (!reply[key].is_number_integer()) {
            if (sink)
                sink(Json{{"event", "qa_component_invalid"},
                          {"frame_id", candidate.frame_id},
                          {"component", key}});
            return std::nullopt;
        }
        int v = reply[key].get<int>();
        if (v < 1 || v > 5) {
            if (sink)
                sink(Json{{"event", "qa_component_invalid"},
                          {"frame_id", candidate.frame_id},
                          {"component", key}});
            return std::nullopt;
        }
        return v;
    };
    score.shot_alignment = component("shot_alignment");
    score.character_consistency = component("character_consistency");
    score.background_continuity = component("background_continuity");
    score.prop_state_correctness = component("prop_state_correctness");
    score.reasoning = reply.value("reasoning", "");

    std::vector<Rational> parts;
    for (const auto& c : {score.shot_alignment, score.character_consistency,
                          score.background_continuity, score.prop_state_correctness})
        if (c) parts.emplace_back(*c);
    score.overall = parts.empty() ? Rational(0) : rational_mean(parts);
    return score;
}

// Highest exact-mean score wins; equal scores keep the earliest candidate.
inline int select_best(const std::vector<CandidateScore>& scores) {
    if (scores.empty()) throw EmptyCandidates();
    int best = 0;
    for (int i = 1; i < static_cast<int>(scores.size()); ++i)
        if (scores[static_cast<std::size_t>(i)].overall >
            scores[static_cast<std::size_t>(best)].overall)
            best = i;
    return best;
}

struct RunHooks {
    EventSink events{};
    std::function<void(const ContinuityPlan&)> on_plan{};
    std::function<void(int, const ShotResult&, const WorldMemory&)> on_shot{};
};

struct ResumeState {
    ContinuityPlan plan;
    WorldMemory memory;
    std::vector<ShotResult> shots;
};

struct RunOutcome {
    ContinuityPlan plan;
    std::vector<ShotResult> shots;
    WorldMemory memory;
    bool completed = false;
};

// One full sequential pass: plan once, then per shot retrieve → prompt →
// generate N candidates → score → select → commit to memory. A failure
// mid-story propagates with memory already committed through the last
// finished shot, which is exactly the state a resume starts from.
inline RunOutcome run_story(const StoryScript& script, const RunConfig& config,
                            const Backends& backends, const RunHooks& hooks = {},
                            const ResumeState* resume = nullptr, int max_shots = -1,
                            const ContinuityPlan* preplanned = nullptr) {
    config.validate();
    auto mu = std::make_shared<std::mutex>();
    EventSink sink = seldetail::locked_sink(hooks.events, mu);

    RunOutcome out;
    if (resume) {
        out.plan = resume->plan;
        out.memory = resume->memory;
        out.shots = resume->shots;
    } else {
        if (preplanned) {
            validate_plan(*preplanned, script);
            out.plan = *preplanned;
        } else {
            out.plan = build_global_plan(script, *backends.reasoner, config.seed,
                                         config.ablations, sink);
        }
        out.memory = init_memory(script, *backends.imager, config.seed,
                                 config.ablations, sink);
    }
    if (hooks.on_plan) hooks.on_plan(out.plan);

    int total = out.plan.n_shots();
    int stop = max_shots >= 0 ? std::min(total, static_cast<int>(out.shots.size()) +
                                                    max_shots)
                              : total;
    for (int t = static_cast<int>(out.shots.size()); t < stop; ++t) {
        AnchorSet anchors = retrieve_anchors(out.memory, script, out.plan, t,
                                             backends.imager.get(), config.ablations,
                                             config.seed, sink);
        GenerationPrompt prompt = construct_prompt(script, out.plan, t, anchors);
        std::uint64_t shot_seed = mix_seed(config.seed, static_cast<std::uint64_t>(t));

        std::vector<FrameArtifact> candidates =
            generate_candidates(*backends.imager, prompt, anchors,
                                script.shots[static_cast<std::size_t>(t)].shot_id, t,
                                config.n_candidates, shot_seed, config.parallelism, sink);

        Json qa_context = qa_context_for_shot(script, out.plan, t, prompt);
        std::string qa_prompt = prompts::qa_score(
            script.shots[static_cast<std::size_t>(t)].description, qa_context,
            anchors.previous_frame.has_value());
        std::uint64_t judge_seed = mix_seed(shot_seed, fnv1a64("qa"));

        std::vector<std::function<CandidateScore()>> jobs;
        for (int i = 0; i < static_cast<int>(candidates.size()); ++i) {
            const FrameArtifact& frame = candidates[static_cast<std::size_t>(i)];
            jobs.push_back([&, i]() {
                return score_candidate(*backends.judge, frame, anchors.previous_frame,
                                       qa_context, qa_prompt, i,
                                       judge_seed ^ static_cast<std::uint64_t>(i), sink);
            });
        }
        std::vector<CandidateScore> scores =
            seldetail::bounded_parallel<CandidateScore>(std::move(jobs),
                                                        config.parallelism);

        ShotResult result;
        result.shot_id = script.shots[static_cast<std::size_t>(t)].shot_id;
        result.shot_index = t;
        result.candidates = scores;
        result.selected_index = select_best(scores);
        result.selected = candidates[static_cast<std::size_t>(result.selected_index)];
        result.retrieval_manifest = anchors.manifest();

        update_memory(out.memory, script, out.plan, t, result.selected, *backends.judge,
                      config.ablations, sink);
        if (hooks.on_shot) hooks.on_shot(t, result, out.memory);
        out.shots.push_back(std::move(result));
    }
    out.completed = static_cast<int>(out.shots.size()) == total;
    return out;
}

}  // namespace canvas
