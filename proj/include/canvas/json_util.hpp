#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "canvas/errors.hpp"

namespace canvas {

using Json = nlohmann::json;

namespace jsonutil {

// Drops markdown code fences (``` or ```json) wrapping a structured reply.
inline std::string strip_code_fence(const std::string& text) {
    std::size_t begin = text.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return text;
    std::size_t end = text.find_last_not_of(" \t\r\n") + 1;
    std::string body = text.substr(begin, end - begin);
    if (body.rfind("```", 0) != 0) return body;
    std::size_t nl = body.find('\n');
    if (nl == std::string::npos) return body;
    std::string inner = body.substr(nl + 1);
    std::size_t close = inner.rfind("```");
    if (close != std::string::npos) inner = inner.substr(0, close);
    std::size_t ib = inner.find_first_not_of(" \t\r\n");
    if (ib == std::string::npos) return inner;
    std::size_t ie = inner.find_last_not_of(" \t\r\n") + 1;
    return inner.substr(ib, ie - ib);
}

// Repairs the two malformations structured-output models actually produce:
// trailing commas and single-quoted strings. Also folds Python literals.
inline std::string repair(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool in_dq = false;   // inside a "..." string
    bool in_sq = false;   // inside a '...' string (rewritten to "...")
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_dq) {
            out += c;
            if (c == '\\' && i + 1 < text.size()) out += text[++i];
            else if (c == '"') in_dq = false;
            continue;
        }
        if (in_sq) {
            if (c == '\\' && i + 1 < text.size()) {
                out += c;
                out += text[++i];
            } else if (c == '\'') {
                out += '"';
                in_sq = false;
            } else if (c == '"') {
                out += "\\\"";
            } else {
                out += c;
            }
            continue;
        }
        if (c == '"') { in_dq = true; out += c; continue; }
        if (c == '\'') { in_sq = true; out += '"'; continue; }
        if (c == ',') {
            std::size_t j = i + 1;
            while (j < text.size() && (text[j] == ' ' || text[j] == '\t' || text[j] == '\r' || text[j] == '\n')) ++j;
            if (j < text.size() && (text[j] == '}' || text[j] == ']')) continue;  // trailing comma
            out += c;
            continue;
        }
        if (c == 'T' && text.compare(i, 4, "True") == 0) { out += "true"; i += 3; continue; }
        if (c == 'F' && text.compare(i, 5, "False") == 0) { out += "false"; i += 4; continue; }
        if (c == 'N' && text.compare(i, 4, "None") == 0) { out += "null"; i += 3; continue; }
        out += c;
    }
    return out;
}

// Fence-strip, strict parse, then one repair pass. nullopt when unparseable.
inline std::optional<Json> parse_lenient(const std::string& text) {
    std::string body = strip_code_fence(text);
    Json parsed = Json::parse(body, nullptr, false);
    if (!parsed.is_discarded()) return parsed;
    parsed = Json::parse(repair(body), nullptr, false);
    if (!parsed.is_discarded()) return parsed;
    return std::nullopt;
}

inline const Json& require(const Json& j, const std::string& key, const std::string& ctx) {
    auto it = j.find(key);
    if (it == j.end()) throw SchemaError(ctx + ": missing field \"" + key + "\"");
    return *it;
}

inline std::string require_string(const Json& j, const std::string& key, const std::string& ctx) {
    const Json& v = require(j, key, ctx);
    if (!v.is_string()) throw SchemaError(ctx + ": field \"" + key + "\" must be a string");
    return v.get<std::string>();
}

// Canonical serialized form: sorted keys (nlohmann object order), 2-space
// indent, newline-terminated. Byte-stable across runs by construction.
inline std::string dump_canonical(const Json& j) {
    return j.dump(2) + "\n";
}

}  // namespace jsonutil

}  // namespace canvas
