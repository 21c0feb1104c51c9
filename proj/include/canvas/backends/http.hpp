#pragma once

#include <chrono>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <thread>

#include <httplib.h>

#include "canvas/backend.hpp"
#include "canvas/config.hpp"
#include "canvas/frame.hpp"
#include "canvas/json_util.hpp"

namespace canvas {

namespace httpdetail {

// Blocking token bucket: at most `rps` request starts per second, with burst
// capacity of one second's worth of tokens.
class TokenBucket {
public:
    explicit TokenBucket(double rps)
        : rate_(rps > 0 ? rps : 1e9),
          capacity_(rate_ < 1.0 ? 1.0 : rate_),
          tokens_(capacity_),
          last_(std::chrono::steady_clock::now()) {}

    void acquire() {
        while (true) {
            double wait_s = 0.0;
            {
                std::lock_guard<std::mutex> lock(mu_);
                auto now = std::chrono::steady_clock::now();
                double elapsed = std::chrono::duration<double>(now - last_).count();
                last_ = now;
                tokens_ = std::min(capacity_, tokens_ + elapsed * rate_);
                if (tokens_ >= 1.0) {
                    tokens_ -= 1.0;
                    return;
                }
                wait_s = (1.0 - tokens_) / rate_;
            }
            std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
        }
    }

private:
    double rate_;
    double capacity_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
    std::mutex mu_;
};

struct HostPath {
    std::string host;  // scheme://host:port for httplib::Client
    std::string prefix;
};

inline HostPath split_base_url(const std::string& base_url) {
    HostPath hp;
    std::size_t scheme = base_url.find("://");
    std::size_t path_at = scheme == std::string::npos
                              ? base_url.find('/')
                              : base_url.find('/', scheme + 3);
    if (path_at == std::string::npos) {
        hp.host = base_url;
    } else {
        hp.host = base_url.substr(0, path_at);
        hp.prefix = base_url.substr(path_at);
        while (!hp.prefix.empty() && hp.prefix.back() == '/') hp.prefix.pop_back();
    }
    return hp;
}

inline bool retryable_status(int status) { return status == 429 || status >= 500; }

inline bool timeout_error(httplib::Error e) {
    return e == httplib::Error::ConnectionTimeout || e == httplib::Error::Read ||
           e == httplib::Error::Write;
}

inline Json frame_as_message_part(const FrameArtifact& f) {
    if (f.is_scene())
        return Json{{"type", "text"},
                    {"text", "Frame " + f.frame_id + ":\n" + to_json(f.scene()).dump()}};
    const ImageBytes& img = f.image();
    return Json{{"type", "image_url"},
                {"image_url",
                 Json{{"url", "data:" + img.media_type + ";base64," +
                                  b64::encode(img.bytes)}}}};
}

}  // namespace httpdetail

// Remote-model backend: one endpoint per capability, data-driven provider
// adapters, bounded retry with exponential backoff on transient failures,
// a token-bucket rate limit, and an in-flight cap.
class HttpBackend : public Backend {
public:
    HttpBackend(std::map<std::string, EndpointConfig> endpoints, HttpTuning tuning = {})
        : endpoints_(std::move(endpoints)),
          tuning_(tuning),
          bucket_(tuning.requests_per_second),
          slots_(tuning.max_in_flight > 0 ? tuning.max_in_flight : 1) {}

    std::string name() const override { return "http"; }

    std::string reason(const ReasonRequest& req) override {
        Json payload = Json{{"task", req.task},
                            {"prompt", req.prompt},
                            {"context", req.context},
                            {"seed", req.seed}};
        return text_call("reason", req.prompt, req.context, {}, payload, req.seed);
    }

    FrameArtifact generate(const GenerateRequest& req) override {
        const EndpointConfig& ep = endpoint("generate");
        Json reply = call(ep, generate_path(ep), generate_body(ep, req), req.seed);
        return parse_generated(ep, reply, req);
    }

    std::string evaluate(const EvalRequest& req) override {
        Json payload = Json{{"rubric", req.rubric},
                            {"prompt", req.prompt},
                            {"context", req.context},
                            {"seed", req.seed}};
        Json frames = Json::array();
        for (const auto& f : req.frames) frames.push_back(to_json(f));
        payload["frames"] = frames;
        return text_call("evaluate", req.prompt, req.context, req.frames, payload,
                         req.seed);
    }

private:
    std::map<std::string, EndpointConfig> endpoints_;
    HttpTuning tuning_;
    httpdetail::TokenBucket bucket_;
    std::counting_semaphore<4096> slots_;

    const EndpointConfig& endpoint(const std::string& capability) const {
        auto it = endpoints_.find(capability);
        if (it == endpoints_.end())
            throw BackendError("no endpoint configured for capability '" + capability + "'");
        return it->second;
    }

    // Secrets never leave the environment; an unset key fails before any
    // network traffic.
    static std::string api_key(const EndpointConfig& ep) {
        if (ep.api_key_env.empty()) return "";
        const char* v = std::getenv(ep.api_key_env.c_str());
        if (!v || !*v)
            throw AuthError("environment variable " + ep.api_key_env + " is not set");
        return v;
    }

    Json call(const EndpointConfig& ep, const std::string& path, const Json& body,
              std::uint64_t seed) {
        std::string key = api_key(ep);
        httpdetail::HostPath hp = httpdetail::split_base_url(ep.base_url);

        slots_.acquire();
        struct Release {
            std::counting_semaphore<4096>* s;
            ~Release() { s->release(); }
        } release{&slots_};

        std::uint64_t jitter_state = mix_seed(seed, fnv1a64(path));
        std::string payload = body.dump();
        int attempts = tuning_.max_retries + 1;
        httplib::Error last_error = httplib::Error::Success;
        int last_status = 0;
        std::string last_body;

        for (int attempt = 0; attempt < attempts; ++attempt) {
            if (attempt > 0) {
                std::uint64_t jitter = splitmix64(jitter_state) %
                                       static_cast<std::uint64_t>(
                                           std::max(1, tuning_.backoff_base_ms));
                int delay = tuning_.backoff_base_ms * (1 << (attempt - 1)) +
                            static_cast<int>(jitter);
                std::this_thread::sleep_for(std::chrono::milliseconds(delay));
            }
            bucket_.acquire();

            httplib::Client cli(hp.host);
            cli.set_connection_timeout(0, tuning_.timeout_ms * 1000);
            cli.set_read_timeout(tuning_.timeout_ms / 1000,
                                 (tuning_.timeout_ms % 1000) * 1000);
            cli.set_write_timeout(tuning_.timeout_ms / 1000,
                                  (tuning_.timeout_ms % 1000) * 1000);
            httplib::Headers headers;
            if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

            auto res = cli.Post(hp.prefix + path, headers, payload, "application/json");
            if (!res) {
                last_error = res.error();
                last_status = 0;
                continue;  // transport failure: retry
            }
            last_status = res->status;
            last_body = res->body;
            if (res->status == 401 || res->status == 403)
                throw AuthError("endpoint rejected credentials (HTTP " +
                                std::to_string(res->status) + ")");
            if (httpdetail::retryable_status(res->status)) continue;
            if (res->status >= 400)
                throw BackendError("HTTP " + std::to_string(res->status) + " from " +
                                   path + ": " + res->body.substr(0, 200));
            try {
                return Json::parse(res->body);
            } catch (const Json::parse_error& e) {
                throw ProviderSchemaError("non-JSON reply from " + path + ": " +
                                          std::string(e.what()));
            }
        }

        if (last_status == 429)
            throw RateLimited("still rate-limited after " + std::to_string(attempts) +
                              " attempts to " + path);
        if (last_status >= 500)
            throw BackendError("HTTP " + std::to_string(last_status) + " persisted after " +
                               std::to_string(attempts) + " attempts to " + path);
        if (httpdetail::timeout_error(last_error))
            throw TimeoutError("request to " + path + " timed out after " +
                               std::to_string(attempts) + " attempts");
        throw BackendError("request to " + path + " failed after " +
                           std::to_string(attempts) + " attempts (transport error " +
                           std::to_string(static_cast<int>(last_error)) + ")");
    }

    // ---- provider adapters -----------------------------------------------------

    std::string text_call(const std::string& capability, const std::string& prompt,
                          const Json& context, const std::vector<FrameArtifact>& frames,
                          const Json& stub_payload, std::uint64_t seed) {
        const EndpointConfig& ep = endpoint(capability);
        if (ep.provider == "stub") {
            Json reply = call(ep, "/" + capability, stub_payload, seed);
            if (!reply.contains("text") || !reply["text"].is_string())
                throw ProviderSchemaError("stub reply missing string field 'text'");
            return reply["text"].get<std::string>();
        }
        if (ep.provider == "openai_chat") {
            Json content = Json::array();
            std::string text = prompt;
            if (!context.is_null() && !context.empty())
                text += "\n\nContext:\n" + context.dump();
            content.push_back(Json{{"type", "text"}, {"text", text}});
            for (const auto& f : frames)
                content.push_back(httpdetail::frame_as_message_part(f));
            Json body{{"model", ep.model},
                      {"messages",
                       Json::array({Json{{"role", "user"}, {"content", content}}})}};
            Json reply = call(ep, "/v1/chat/completions", body, seed);
            if (!reply.contains("choices") || !reply["choices"].is_array() ||
                reply["choices"].empty())
                throw ProviderSchemaError("chat reply missing 'choices'");
            const Json& msg = reply["choices"][0].value("message", Json::object());
            if (!msg.contains("content") || !msg["content"].is_string())
                throw ProviderSchemaError("chat reply missing message content");
            return msg["content"].get<std::string>();
        }
        throw BackendError("unknown provider '" + ep.provider + "'");
    }

    static std::string generate_path(const EndpointConfig& ep) {
        if (ep.provider == "stub") return "/generate";
        if (ep.provider == "openai_chat") return "/v1/images/generations";
        throw BackendError("unknown provider '" + ep.provider + "'");
    }

    Json generate_body(const EndpointConfig& ep, const GenerateRequest& req) const {
        if (ep.provider == "stub") {
            Json anchors = Json::array();
            for (const auto& a : req.anchors)
                anchors.push_back(Json{{"role", a.role},
                                       {"name", a.name},
                                       {"key", a.key},
                                       {"descriptor", a.descriptor},
                                       {"artifact", to_json(a.artifact)}});
            return Json{{"shot_id", req.shot_id},
                        {"frame_id", req.frame_id},
                        {"prompt", req.prompt},
                        {"directives", req.directives},
                        {"anchors", anchors},
                        {"seed", req.seed}};
        }
        // Reference images ride along as data URIs; providers that accept
        // only text silently ignore them.
        Json refs = Json::array();
        for (const auto& a : req.anchors)
            if (!a.artifact.is_scene())
                refs.push_back("data:" + a.artifact.image().media_type + ";base64," +
                               b64::encode(a.artifact.image().bytes));
        Json body{{"model", ep.model}, {"prompt", req.prompt}, {"n", 1}};
        if (!refs.empty()) body["reference_images"] = refs;
        return body;
    }

    FrameArtifact parse_generated(const EndpointConfig& ep, const Json& reply,
                                  const GenerateRequest& req) const {
        FrameArtifact f;
        f.frame_id = req.frame_id;
        f.shot_id = req.shot_id;
        f.backend = name();
        f.seed = req.seed;
        if (ep.provider == "stub") {
            if (reply.contains("scene")) {
                f.payload = scene_graph_from_json(reply["scene"]);
                return f;
            }
            if (reply.contains("image_base64")) {
                ImageBytes img;
                img.bytes = b64::decode(reply["image_base64"].get<std::string>());
                img.media_type = reply.value("media_type", "image/png");
                f.payload = std::move(img);
                return f;
            }
            throw ProviderSchemaError("stub generate reply has neither scene nor image");
        }
        if (!reply.contains("data") || !reply["data"].is_array() || reply["data"].empty() ||
            !reply["data"][0].contains("b64_json"))
            throw ProviderSchemaError("image reply missing data[0].b64_json");
        ImageBytes img;
        img.bytes = b64::decode(reply["data"][0]["b64_json"].get<std::string>());
        f.payload = std::move(img);
        return f;
    }
};

}  // namespace canvas
