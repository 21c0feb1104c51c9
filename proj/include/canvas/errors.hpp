#pragma once

#include <stdexcept>
#include <string>

namespace canvas {

// Exit codes the CLI maps error categories onto.
enum class ExitCode : int {
    ok = 0,
    failure = 1,
    schema_error = 2,
    backend_error = 3,
    incomplete_run = 4,
};

class CanvasError : public std::runtime_error {
public:
    CanvasError(std::string what, ExitCode code = ExitCode::failure)
        : std::runtime_error(std::move(what)), code_(code) {}
    ExitCode exit_code() const { return code_; }

private:
    ExitCode code_;
};

// --- input / schema problems ---------------------------------------------

struct SchemaError : CanvasError {
    explicit SchemaError(const std::string& w) : CanvasError(w, ExitCode::schema_error) {}
};
struct EmptyName : SchemaError {
    explicit EmptyName(const std::string& raw)
        : SchemaError("entity name is empty after canonicalization: \"" + raw + "\"") {}
};
struct EmptyStory : SchemaError {
    EmptyStory() : SchemaError("story has no shots") {}
};
struct DuplicateShotId : SchemaError {
    explicit DuplicateShotId(const std::string& id) : SchemaError("duplicate shot_id: " + id) {}
};
struct NotSceneGraph : SchemaError {
    explicit NotSceneGraph(const std::string& ctx)
        : SchemaError("frame payload is not a scene graph: " + ctx) {}
};
struct OutOfRange : SchemaError {
    explicit OutOfRange(const std::string& w) : SchemaError(w) {}
};
struct InvalidN : SchemaError {
    explicit InvalidN(int n)
        : SchemaError("n_candidates must be within [1,8], got " + std::to_string(n)) {}
};
struct CorruptSnapshot : SchemaError {
    explicit CorruptSnapshot(const std::string& w) : SchemaError("memory snapshot: " + w) {}
};

// --- planning problems -----------------------------------------------------

struct PlanValidationError : CanvasError {
    explicit PlanValidationError(const std::string& w)
        : CanvasError("plan validation: " + w, ExitCode::schema_error) {}
};
struct CoverageError : PlanValidationError {
    explicit CoverageError(const std::string& w) : PlanValidationError("coverage: " + w) {}
};
struct PartitionError : PlanValidationError {
    explicit PartitionError(const std::string& w) : PlanValidationError("partition: " + w) {}
};
struct ConsistencyError : PlanValidationError {
    explicit ConsistencyError(const std::string& w) : PlanValidationError("consistency: " + w) {}
};
struct UnknownCharacter : CanvasError {
    explicit UnknownCharacter(const std::string& name)
        : CanvasError("character not declared or never on screen: " + name,
                      ExitCode::schema_error) {}
};

// --- backend problems ------------------------------------------------------

struct BackendError : CanvasError {
    explicit BackendError(const std::string& w) : CanvasError(w, ExitCode::backend_error) {}
};
struct AuthError : BackendError {
    explicit AuthError(const std::string& w) : BackendError("auth: " + w) {}
};
struct RateLimited : BackendError {
    explicit RateLimited(const std::string& w) : BackendError("rate limited: " + w) {}
};
struct TimeoutError : BackendError {
    explicit TimeoutError(const std::string& w) : BackendError("timeout: " + w) {}
};
struct ProviderSchemaError : BackendError {
    explicit ProviderSchemaError(const std::string& w)
        : BackendError("provider response schema: " + w) {}
};

// Structured output stayed unparseable after the bounded re-ask loop.
struct MalformedPlanJson : BackendError {
    MalformedPlanJson(const std::string& task, const std::string& raw)
        : BackendError("unparseable json for task \"" + task + "\" after retries"), payload(raw) {}
    std::string payload;
};
struct MalformedScoreJson : BackendError {
    explicit MalformedScoreJson(const std::string& raw)
        : BackendError("unparseable judge json after retries"), payload(raw) {}
    std::string payload;
};

// --- pipeline sequencing -----------------------------------------------------

struct MissingAnchor : CanvasError {
    explicit MissingAnchor(const std::string& key)
        : CanvasError("required anchor missing from memory: " + key) {}
};
struct SequenceError : CanvasError {
    explicit SequenceError(const std::string& w) : CanvasError("sequence: " + w) {}
};
struct EmptyCandidates : CanvasError {
    EmptyCandidates() : CanvasError("no candidates to select from") {}
};
struct IncompleteRun : CanvasError {
    explicit IncompleteRun(const std::string& w)
        : CanvasError("incomplete run: " + w, ExitCode::incomplete_run) {}
};
struct NoEvaluableCharacters : CanvasError {
    NoEvaluableCharacters() : CanvasError("no character has an evaluable timeline") {}
};

}  // namespace canvas
