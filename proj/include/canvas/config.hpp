#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "canvas/backend.hpp"
#include "canvas/errors.hpp"
#include "canvas/json_util.hpp"
#include "canvas/plan.hpp"

namespace canvas {

// One remote capability endpoint. The API key is named, never stored.
struct EndpointConfig {
    std::string provider = "openai_chat";
    std::string model;
    std::string base_url;
    std::string api_key_env;
};

inline void from_json_endpoint(const Json& j, EndpointConfig& e) {
    e.provider = j.value("provider", e.provider);
    e.model = j.value("model", e.model);
    e.base_url = j.value("base_url", e.base_url);
    e.api_key_env = j.value("api_key_env", e.api_key_env);
}

inline Json to_json(const EndpointConfig& e) {
    return Json{{"provider", e.provider},
                {"model", e.model},
                {"base_url", e.base_url},
                {"api_key_env", e.api_key_env}};
}

struct HttpTuning {
    int max_retries = 3;
    int timeout_ms = 30000;
    int backoff_base_ms = 200;
    double requests_per_second = 8.0;
    int max_in_flight = 4;
};

struct RunConfig {
    int n_candidates = 3;
    std::uint64_t seed = 0;
    std::string backend = "symbolic";  // "symbolic" | "http"
    double corruption_rate = 0.0;
    std::uint64_t corruption_seed = 0;
    std::vector<std::string> corruption_attributes;  // empty = all mutable kinds
    int parallelism = 1;
    std::string run_dir = "runs/latest";
    Ablations ablations;
    std::map<std::string, EndpointConfig> endpoints;  // reason / generate / evaluate
    HttpTuning http;
    std::vector<std::string> judges;  // eval-time judges; scores averaged

    void validate() const {
        if (n_candidates < 1 || n_candidates > 8) throw InvalidN(n_candidates);
        if (parallelism < 1)
            throw SchemaError("parallelism must be >= 1, got " +
                              std::to_string(parallelism));
        if (backend != "symbolic" && backend != "http")
            throw SchemaError("backend must be 'symbolic' or 'http', got '" + backend + "'");
        if (corruption_rate < 0.0 || corruption_rate > 1.0)
            throw OutOfRange("corruption_rate must be in [0,1]");
    }

    CorruptionModel corruption_model() const {
        CorruptionModel m;
        m.rate = corruption_rate;
        m.seed = corruption_seed;
        if (!corruption_attributes.empty())
            m.mutable_attributes = {corruption_attributes.begin(), corruption_attributes.end()};
        return m;
    }
};

inline RunConfig run_config_from_json(const Json& j) {
    if (!j.is_object()) throw SchemaError("run config must be a JSON object");
    RunConfig c;
    c.n_candidates = j.value("n_candidates", c.n_candidates);
    c.seed = j.value("seed", c.seed);
    c.backend = j.value("backend", c.backend);
    c.corruption_rate = j.value("corruption_rate", c.corruption_rate);
    c.corruption_seed = j.value("corruption_seed", c.corruption_seed);
    if (j.contains("corruption_attributes"))
        c.corruption_attributes =
            j["corruption_attributes"].get<std::vector<std::string>>();
    c.parallelism = j.value("parallelism", c.parallelism);
    c.run_dir = j.value("run_dir", c.run_dir);
    if (j.contains("ablations")) {
        const Json& a = j["ablations"];
        c.ablations.disable_canonical_anchors =
            a.value("disable_canonical_anchors", false);
        c.ablations.disable_location_grouping =
            a.value("disable_location_grouping", false);
        c.ablations.disable_background_reuse =
            a.value("disable_background_reuse", false);
        c.ablations.disable_prop_state_update =
            a.value("disable_prop_state_update", false);
    }
    if (j.contains("endpoints")) {
        for (const auto& [capability, spec] : j["endpoints"].items()) {
            EndpointConfig e;
            from_json_endpoint(spec, e);
            c.endpoints[capability] = e;
        }
    }
    if (j.contains("http")) {
        const Json& h = j["http"];
        c.http.max_retries = h.value("max_retries", c.http.max_retries);
        c.http.timeout_ms = h.value("timeout_ms", c.http.timeout_ms);
        c.http.backoff_base_ms = h.value("backoff_base_ms", c.http.backoff_base_ms);
        c.http.requests_per_second =
            h.value("requests_per_second", c.http.requests_per_second);
        c.http.max_in_flight = h.value("max_in_flight", c.http.max_in_flight);
    }
    if (j.contains("judges")) c.judges = j["judges"].get<std::vector<std::string>>();
    c.validate();
    return c;
}

inline Json to_json(const RunConfig& c) {
    Json j{{"n_candidates", c.n_candidates},
           {"seed", c.seed},
           {"backend", c.backend},
           {"corruption_rate", c.corruption_rate},
           {"corruption_seed", c.corruption_seed},
           {"parallelism", c.parallelism},
           {"run_dir", c.run_dir}};
    if (!c.corruption_attributes.empty())
        j["corruption_attributes"] = c.corruption_attributes;
    j["ablations"] = Json{
        {"disable_canonical_anchors", c.ablations.disable_canonical_anchors},
        {"disable_location_grouping", c.ablations.disable_location_grouping},
        {"disable_background_reuse", c.ablations.disable_background_reuse},
        {"disable_prop_state_update", c.ablations.disable_prop_state_update}};
    j["http"] = Json{{"max_retries", c.http.max_retries},
                     {"timeout_ms", c.http.timeout_ms},
                     {"backoff_base_ms", c.http.backoff_base_ms},
                     {"requests_per_second", c.http.requests_per_second},
                     {"max_in_flight", c.http.max_in_flight}};
    if (!c.endpoints.empty()) {
        Json eps = Json::object();
        for (const auto& [capability, e] : c.endpoints) eps[capability] = to_json(e);
        j["endpoints"] = eps;
    }
    if (!c.judges.empty()) j["judges"] = c.judges;
    return j;
}

}  // namespace canvas
