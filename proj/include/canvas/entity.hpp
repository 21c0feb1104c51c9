#pragma once

#include <compare>
#include <cstdint>
#include <string>

#include "canvas/errors.hpp"

namespace canvas {

enum class EntityKind { character, location, prop };

inline const char* to_string(EntityKind k) {
    switch (k) {
        case EntityKind::character: return "character";
        case EntityKind::location: return "location";
        case EntityKind::prop: return "prop";
    }
    return "?";
}

namespace detail {

// Maps the Latin-1 supplement block (UTF-8 lead byte 0xC3) onto ASCII base
// letters so "Léna" and "Lena" name the same entity.
inline const char* latin1_fold(unsigned char second) {
    switch (second) {
        case 0x80: case 0x81: case 0x82: case 0x83: case 0x84: case 0x85: return "a";
        case 0x86: return "ae";
        case 0x87: return "c";
        case 0x88: case 0x89: case 0x8a: case 0x8b: return "e";
        case 0x8c: case 0x8d: case 0x8e: case 0x8f: return "i";
        case 0x90: return "d";
        case 0x91: return "n";
        case 0x92: case 0x93: case 0x94: case 0x95: case 0x96: case 0x98: return "o";
        case 0x99: case 0x9a: case 0x9b: case 0x9c: return "u";
        case 0x9d: return "y";
        case 0x9f: return "ss";
        case 0xa0: case 0xa1: case 0xa2: case 0xa3: case 0xa4: case 0xa5: return "a";
        case 0xa6: return "ae";
        case 0xa7: return "c";
        case 0xa8: case 0xa9: case 0xaa: case 0xab: return "e";
        case 0xac: case 0xad: case 0xae: case 0xaf: return "i";
        case 0xb1: return "n";
        case 0xb2: case 0xb3: case 0xb4: case 0xb5: case 0xb6: case 0xb8: return "o";
        case 0xb9: case 0xba: case 0xbb: case 0xbc: return "u";
        case 0xbd: case 0xbf: return "y";
        default: return "";
    }
}

}  // namespace detail

// Lowercase-fold, strip diacritics, join word runs with single underscores.
// Idempotent: canonicalize(canonicalize(x)) == canonicalize(x).
inline std::string canonicalize_entity(const std::string& raw) {
    std::string folded;
    folded.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(raw[i]);
        if (c == 0xC3 && i + 1 < raw.size()) {
            folded += detail::latin1_fold(static_cast<unsigned char>(raw[++i]));
        } else if (c >= 'A' && c <= 'Z') {
            folded += static_cast<char>(c - 'A' + 'a');
        } else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
            folded += static_cast<char>(c);
        } else {
            folded += ' ';  // every other byte acts as a separator
        }
    }
    std::string out;
    out.reserve(folded.size());
    bool pending_sep = false;
    for (char c : folded) {
        if (c == ' ') {
            pending_sep = !out.empty();
            continue;
        }
        if (pending_sep) { out += '_'; pending_sep = false; }
        out += c;
    }
    if (out.empty()) throw EmptyName(raw);
    return out;
}

struct EntityId {
    EntityKind kind = EntityKind::character;
    std::string name;  // canonical form

    EntityId() = default;
    EntityId(EntityKind k, const std::string& raw) : kind(k), name(canonicalize_entity(raw)) {}

    auto operator<=>(const EntityId&) const = default;

    std::string str() const { return std::string(to_string(kind)) + ":" + name; }
};

inline EntityId character_id(const std::string& raw) { return EntityId(EntityKind::character, raw); }
inline EntityId location_id(const std::string& raw) { return EntityId(EntityKind::location, raw); }
inline EntityId prop_id(const std::string& raw) { return EntityId(EntityKind::prop, raw); }

// Deterministic 64-bit string hash used for seed derivation and event logs.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ splitmix64(b));
}

}  // namespace canvas
