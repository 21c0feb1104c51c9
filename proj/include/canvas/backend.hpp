#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "canvas/frame.hpp"
#include "canvas/json_util.hpp"

namespace canvas {

// Structured query answered with text that must parse as JSON.
struct ReasonRequest {
    std::string task;     // stable identifier: "location_clustering", "appearance", ...
    std::string prompt;   // fully rendered instruction text
    Json context;         // structured inputs (script slice, annotations, plan slice)
    std::uint64_t seed = 0;
};

// An anchor handed to the generator, tagged with why it is attached.
struct AnchorAttachment {
    std::string role;   // "previous_frame" | "location" | "character" | "prop"
    std::string name;   // entity name the anchor is for ("" for previous_frame)
    std::string key;    // memory key path, e.g. "character/lena/blue_dress"
    std::string source; // "recent" | "canonical" | "minted" | "frame"
    FrameArtifact artifact;
    Json descriptor;    // extracted entity attributes, shape depends on role
};

struct GenerateRequest {
    std::string shot_id;
    std::string frame_id;
    std::string prompt;      // rendered generation prompt
    Json directives;         // structured: appearance map, prop lists, location, mode
    std::vector<AnchorAttachment> anchors;
    std::uint64_t seed = 0;
};

// Judge query: scoring rubrics and anchor extraction both go through here.
struct EvalRequest {
    std::string rubric;  // "qa_score" | "transition_face" | ... | "extract_props"
    std::string prompt;
    Json context;
    std::vector<FrameArtifact> frames;
    std::uint64_t seed = 0;
};

// One capability interface with three methods; a run may route each
// capability to a different implementation.
class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string name() const = 0;
    virtual std::string reason(const ReasonRequest& req) = 0;
    virtual FrameArtifact generate(const GenerateRequest& req) = 0;
    virtual std::string evaluate(const EvalRequest& req) = 0;
};

struct Backends {
    std::shared_ptr<Backend> reasoner;
    std::shared_ptr<Backend> imager;
    std::shared_ptr<Backend> judge;
};

// Drives symbolic generation noise: each listed attribute of an assembled
// scene graph is independently corrupted with probability `rate`.
struct CorruptionModel {
    double rate = 0.0;
    std::uint64_t seed = 0;
    std::set<std::string> mutable_attributes = {
        "clothing", "hair_body", "face_id", "structures", "prop_presence", "prop_state"};

    bool mutates(const std::string& attr) const {
        return rate > 0.0 && mutable_attributes.count(attr) > 0;
    }
};

using EventSink = std::function<void(const Json&)>;

inline std::string append_parse_error(const std::string& prompt, const std::string& error) {
    return prompt +
           "\n\nYour previous reply could not be parsed as JSON (" + error +
           "). Reply again with exactly one valid JSON object and nothing else.";
}

// Fence-strip + strict parse + repair pass, then bounded re-asks with the
// parse failure appended to the prompt. Raw payload travels with the error.
template <typename MakeError>
Json ask_json(Backend& backend, ReasonRequest req, MakeError make_error,
              const EventSink& sink = {}, int max_reasks = 2) {
    std::string raw;
    for (int attempt = 0; attempt <= max_reasks; ++attempt) {
        raw = backend.reason(req);
        auto parsed = jsonutil::parse_lenient(raw);
        if (parsed) return *parsed;
        if (sink)
            sink(Json{{"event", "reask"},
                      {"capability", "reason"},
                      {"task", req.task},
                      {"attempt", attempt + 1}});
        req.prompt = append_parse_error(req.prompt, "invalid JSON");
    }
    throw make_error(raw);
}

inline Json ask_reason_json(Backend& backend, const ReasonRequest& req,
                            const EventSink& sink = {}, int max_reasks = 2) {
    return ask_json(backend, req,
                    [&](const std::string& raw) { return MalformedPlanJson(req.task, raw); },
                    sink, max_reasks);
}

// Judge variant: same loop over evaluate(); unparseable output is the
// caller's cue to null out the affected components rather than abort.
inline Json ask_eval_json(Backend& backend, EvalRequest req, const EventSink& sink = {},
                          int max_reasks = 2) {
    std::string raw;
    for (int attempt = 0; attempt <= max_reasks; ++attempt) {
        raw = backend.evaluate(req);
        auto parsed = jsonutil::parse_lenient(raw);
        if (parsed) return *parsed;
        if (sink)
            sink(Json{{"event", "reask"},
                      {"capability", "evaluate"},
                      {"rubric", req.rubric},
                      {"attempt", attempt + 1}});
        req.prompt = append_parse_error(req.prompt, "invalid JSON");
    }
    throw MalformedScoreJson(raw);
}

namespace detail {

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

template <typename Fn>
auto timed_call(const EventSink& sink, Json event, Fn&& fn) {
    auto t0 = std::chrono::steady_clock::now();
    auto finish = [&](const char* outcome) {
        if (!sink) return;
        event["latency_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                                  std::chrono::steady_clock::now() - t0)
                                  .count();
        event["outcome"] = outcome;
        sink(event);
    };
    try {
        auto result = fn();
        finish("ok");
        return result;
    } catch (const std::exception& e) {
        if (sink) event["error"] = e.what();
        finish("error");
        throw;
    }
}

}  // namespace detail

inline Json logged_reason(Backend& backend, const ReasonRequest& req, const EventSink& sink = {}) {
    Json event{{"event", "backend_call"},
               {"capability", "reason"},
               {"task", req.task},
               {"backend", backend.name()},
               {"request_hash", detail::hex64(fnv1a64(req.task + req.prompt + req.context.dump()))}};
    return detail::timed_call(sink, std::move(event),
                              [&] { return ask_reason_json(backend, req, sink); });
}

inline FrameArtifact logged_generate(Backend& backend, const GenerateRequest& req,
                                     const EventSink& sink = {}) {
    Json event{{"event", "backend_call"},
               {"capability", "generate"},
               {"shot_id", req.shot_id},
               {"frame_id", req.frame_id},
               {"backend", backend.name()},
               {"request_hash", detail::hex64(fnv1a64(req.prompt + req.directives.dump()) ^ req.seed)}};
    return detail::timed_call(sink, std::move(event), [&] { return backend.generate(req); });
}

inline Json logged_evaluate(Backend& backend, const EvalRequest& req, const EventSink& sink = {}) {
    Json event{{"event", "backend_call"},
               {"capability", "evaluate"},
               {"rubric", req.rubric},
               {"backend", backend.name()},
               {"request_hash", detail::hex64(fnv1a64(req.rubric + req.prompt + req.context.dump()))}};
    return detail::timed_call(sink, std::move(event),
                              [&] { return ask_eval_json(backend, req, sink); });
}

}  // namespace canvas
