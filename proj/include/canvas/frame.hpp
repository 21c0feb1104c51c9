#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "canvas/scene_graph.hpp"

namespace canvas {

namespace b64 {

inline const char* alphabet() {
    return "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

inline std::string encode(const std::vector<std::uint8_t>& data) {
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 2 < data.size()) {
        std::uint32_t n = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
        out += alphabet()[(n >> 18) & 63];
        out += alphabet()[(n >> 12) & 63];
        out += alphabet()[(n >> 6) & 63];
        out += alphabet()[n & 63];
        i += 3;
    }
    if (i + 1 == data.size()) {
        std::uint32_t n = data[i] << 16;
        out += alphabet()[(n >> 18) & 63];
        out += alphabet()[(n >> 12) & 63];
        out += "==";
    } else if (i + 2 == data.size()) {
        std::uint32_t n = (data[i] << 16) | (data[i + 1] << 8);
        out += alphabet()[(n >> 18) & 63];
        out += alphabet()[(n >> 12) & 63];
        out += alphabet()[(n >> 6) & 63];
        out += '=';
    }
    return out;
}

inline std::vector<std::uint8_t> decode(const std::string& text) {
    auto val = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    std::vector<std::uint8_t> out;
    int buf = 0, bits = 0;
    for (char c : text) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        int v = val(c);
        if (v < 0) throw SchemaError("invalid base64 payload");
        buf = (buf << 6) | v;
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<std::uint8_t>((buf >> bits) & 0xff));
        }
    }
    return out;
}

}  // namespace b64

struct ImageBytes {
    std::vector<std::uint8_t> bytes;
    std::string media_type = "image/png";
};

// A produced frame: a scene graph under the symbolic backend, raw image
// bytes under an HTTP backend. Provenance records the generation call.
struct FrameArtifact {
    std::string frame_id;
    std::string shot_id;
    std::variant<SceneGraph, ImageBytes> payload;
    std::string backend;
    std::uint64_t seed = 0;

    bool is_scene() const { return std::holds_alternative<SceneGraph>(payload); }
    const SceneGraph& scene(const std::string& ctx = "") const {
        if (!is_scene()) throw NotSceneGraph(ctx.empty() ? frame_id : ctx);
        return std::get<SceneGraph>(payload);
    }
    const ImageBytes& image() const { return std::get<ImageBytes>(payload); }
};

inline Json to_json(const FrameArtifact& f) {
    Json j{{"frame_id", f.frame_id},
           {"shot_id", f.shot_id},
           {"backend", f.backend},
           {"seed", f.seed}};
    if (f.is_scene()) {
        j["scene"] = to_json(std::get<SceneGraph>(f.payload));
    } else {
        const auto& img = std::get<ImageBytes>(f.payload);
        j["image_base64"] = b64::encode(img.bytes);
        j["media_type"] = img.media_type;
    }
    return j;
}

inline FrameArtifact frame_from_json(const Json& j) {
    FrameArtifact f;
    f.frame_id = j.value("frame_id", "");
    f.shot_id = j.value("shot_id", "");
    f.backend = j.value("backend", "");
    f.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("scene")) {
        f.payload = scene_graph_from_json(j["scene"]);
    } else if (j.contains("image_base64")) {
        ImageBytes img;
        img.bytes = b64::decode(j["image_base64"].get<std::string>());
        img.media_type = j.value("media_type", "image/png");
        f.payload = std::move(img);
    } else {
        throw SchemaError("frame artifact: neither scene nor image payload present");
    }
    return f;
}

}  // namespace canvas
