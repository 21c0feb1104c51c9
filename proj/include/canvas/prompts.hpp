#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "canvas/plan.hpp"
#include "canvas/story.hpp"

namespace canvas {
namespace prompts {

inline std::string shot_listing(const StoryScript& script) {
    std::ostringstream os;
    for (const auto& shot : script.shots)
        os << "- " << shot.shot_id << ": " << shot.description << "\n";
    return os.str();
}

inline std::string character_listing(const StoryScript& script) {
    std::ostringstream os;
    for (const auto& c : script.characters)
        os << "- " << c.id.name << ": " << c.description << "\n";
    return os.str();
}

inline std::string location_clustering(const StoryScript& script) {
    std::ostringstream os;
    os << "You are planning backgrounds for a storyboard. Group the shots below by the "
          "physical location they take place in, reusing one location id for every shot "
          "set in the same place. For each shot also pick a continuity mode:\n"
          "- fresh_location: first time this location is shown\n"
          "- location_reappearance: the location was shown before, after a gap\n"
          "- previous_frame_continuation: the shot continues directly from the previous "
          "shot in the same space with no time gap\n\n"
          "Shots:\n"
       << shot_listing(script)
       << "\nReply with one JSON object:\n"
          "{\"locations\": {\"<location_id>\": [\"<shot_id>\", ...]}, "
          "\"shots\": {\"<shot_id>\": {\"location_id\": \"<location_id>\", "
          "\"continuity_mode\": \"<mode>\"}}}\n"
          "Use lowercase snake_case location ids. Every shot must appear in exactly one "
          "location list.";
    return os.str();
}

inline std::string character_appearance(const StoryScript& script, const CharacterDecl& who) {
    std::ostringstream os;
    os << "Track how the character below looks in every shot of this storyboard. Give one "
          "appearance state per shot: a short snake_case label for the outfit/look (for "
          "example blue_dress or security_jacket), or \"not_present\" when the character "
          "is off screen. Keep the same label while the look is unchanged; introduce a new "
          "label only when the story changes it.\n\n"
          "Character: " << who.id.name << " (" << who.description << ")\n\n"
          "Shots:\n"
       << shot_listing(script)
       << "\nReply with one JSON object:\n"
          "{\"character\": \"" << who.id.name << "\", "
          "\"appearance_timeline\": {\"<shot_id>\": \"<state or not_present>\"}}";
    return os.str();
}

inline std::string prop_inventory(const StoryScript& script) {
    std::ostringstream os;
    os << "List every movable prop that matters for visual continuity in the storyboard "
          "below: objects characters handle, objects that change state, and set dressing "
          "that must persist. Use lowercase snake_case names. Do not list characters, "
          "architecture, or clothing.\n\n"
          "Shots:\n"
       << shot_listing(script)
       << "\nReply with one JSON object: {\"props\": [\"<prop_name>\", ...]}";
    return os.str();
}

inline std::string prop_states(const StoryScript& script, const EntityId& prop) {
    std::ostringstream os;
    os << "Track the state of one prop across every shot of this storyboard. For each "
          "shot give a short snake_case state label (for example inside_display_case, "
          "carried, broken, not_visible, missing_from_gallery) and, when a character is "
          "holding it, that character's name as carrier (null otherwise). A removal or "
          "hand-off persists until the story changes it again.\n\n"
          "Prop: " << prop.name << "\n\n"
          "Shots:\n"
       << shot_listing(script)
       << "\nReply with one JSON object:\n"
          "{\"prop\": \"" << prop.name << "\", "
          "\"state_timeline\": {\"<shot_id>\": {\"state\": \"<state>\", "
          "\"carrier\": \"<character or null>\"}}}";
    return os.str();
}

inline std::string background_plan(const StoryScript& script, const Shot& shot,
                                   const Json& prop_states_here) {
    std::ostringstream os;
    os << "Plan the background composition for one shot. Decide which props belong in "
          "the scene as persistent set dressing (background_props), which must be shown "
          "because the story demands it (must_appear), which must NOT be visible because "
          "the story removed them (must_not_appear), and which are held by characters "
          "(carried_props, keyed by character).\n\n"
          "Shot " << shot.shot_id << ": " << shot.description << "\n\n"
          "Planned prop states at this shot:\n" << prop_states_here.dump() << "\n\n"
          "Full storyboard for context:\n"
       << shot_listing(script)
       << "\nReply with one JSON object:\n"
          "{\"background_props\": [...], \"must_appear\": [...], "
          "\"must_not_appear\": [...], \"carried_props\": {\"<character>\": [...]}, "
          "\"reasoning\": \"<one sentence>\"}";
    return os.str();
}

inline std::string continuation_decision(const Shot& prev, const Shot& curr) {
    std::ostringstream os;
    os << "Decide how the second shot relates to the first for visual continuity.\n"
          "- previous_frame_continuation: same place, no time gap; the new frame must "
          "extend the previous frame's exact layout\n"
          "- location_reappearance: same place but after a gap or re-framing; reuse the "
          "stored look of the location, not the exact previous frame\n"
          "- fresh_location: a different place\n\n"
          "Shot A (" << prev.shot_id << "): " << prev.description << "\n"
          "Shot B (" << curr.shot_id << "): " << curr.description << "\n\n"
          "Reply with one JSON object:\n"
          "{\"continuity_mode\": \"<mode>\", \"same_location\": <bool>, "
          "\"requires_spatial_continuity\": <bool>, \"spatial_dependencies\": "
          "[\"<element>\", ...], \"reasoning\": \"<one sentence>\"}";
    return os.str();
}

inline std::string qa_score(const std::string& shot_text, const Json& expectations,
                            bool has_previous_frame) {
    std::ostringstream os;
    os << "You are inspecting one candidate storyboard frame. Score it 1-5 on each "
          "dimension (5 = flawless, 1 = badly wrong):\n"
          "- shot_alignment: the frame depicts the scripted action with the right "
          "characters on screen\n"
          "- character_consistency: each character's identity and outfit match the "
          "expected appearance state\n"
          "- background_continuity: the place looks right";
    if (has_previous_frame)
        os << " and the layout extends the attached previous frame without contradiction";
    os << "\n- prop_state_correctness: required props are present in the correct state, "
          "removed props are absent\n\n"
          "Scripted shot: " << shot_text << "\n"
          "Expectations:\n" << expectations.dump() << "\n\n"
          "Reply with one JSON object:\n"
          "{\"shot_alignment\": <1-5>, \"character_consistency\": <1-5>, "
          "\"background_continuity\": <1-5>, \"prop_state_correctness\": <1-5>, "
          "\"overall_score\": <number>, \"reasoning\": \"<one sentence>\"}";
    return os.str();
}

inline std::string transition(const std::string& attribute, const std::string& character,
                              const std::string& guidance) {
    std::ostringstream os;
    os << "Compare the character \"" << character << "\" across the two attached frames "
          "and rate " << attribute << " consistency from 1 to 5 (5 = identical, "
          "1 = clearly different). " << guidance <<
          "\n\nReply with one JSON object: {\"" << attribute << "\": <1-5 or null>}";
    return os.str();
}

inline std::string transition_face(const std::string& character) {
    return transition("face", character,
                      "Judge facial identity only. If the face is not clearly visible in "
                      "either frame, reply null.");
}
inline std::string transition_clothing(const std::string& character) {
    return transition("clothing", character,
                      "Judge garment style, color and details; ignore pose and lighting.");
}
inline std::string transition_hair_body(const std::string& character) {
    return transition("hair_body", character,
                      "Judge hairstyle, hair color, build and height; ignore pose.");
}

inline std::string geometry_pair() {
    return "Compare the architecture of the two attached frames of the same location. "
           "Count the persistent structural elements visible in each (walls, doorways, "
           "windows, pillars, stairs, built-in fixtures; ignore people and movable "
           "objects). Then count violations between them: elements present in only one "
           "frame (appear/disappear) and elements present in both but re-arranged "
           "(layout).\n\nReply with one JSON object:\n"
           "{\"n_a\": <int>, \"n_b\": <int>, \"n_appear\": <int>, "
           "\"n_disappear\": <int>, \"n_layout\": <int>}";
}

inline std::string prop_pair() {
    return "Compare the movable props visible in the two attached frames (furniture, "
           "tools, containers, decorations; ignore people, clothing and architecture). "
           "Count the props in each frame, then count how many can be matched across "
           "both frames: a match requires the same object with identical shape, color "
           "and texture.\n\nReply with one JSON object:\n"
           "{\"n_a\": <int>, \"n_b\": <int>, \"n_match\": <int>}";
}

inline std::string extract_characters(const Json& expected) {
    return "For each clearly visible character in the attached frame, record identity "
           "attributes usable as a future reference: appearance state label, face, "
           "clothing, hair/body, and whether the face is visible. Expected characters "
           "and states:\n" + expected.dump() +
           "\n\nReply with one JSON object:\n"
           "{\"characters\": [{\"name\": \"...\", \"appearance_state\": \"...\", "
           "\"face_id\": \"...\", \"clothing\": \"...\", \"hair_body\": \"...\", "
           "\"visible_face\": <bool>}]}";
}

inline std::string extract_location() {
    return "Describe the location of the attached frame for reuse as a background "
           "reference: a location id, the persistent structural elements, and any "
           "visible resident props with their states.\n\n"
           "Reply with one JSON object:\n"
           "{\"location\": \"...\", \"structures\": [\"...\"], "
           "\"resident_props\": [{\"name\": \"...\", \"state\": \"...\"}]}";
}

inline std::string extract_props() {
    return "List every visible movable prop in the attached frame with its state and, "
           "if a character is holding it, the carrier. Record the state you can actually "
           "see, not the state the script implies.\n\n"
           "Reply with one JSON object:\n"
           "{\"objects\": [{\"name\": \"...\", \"state\": \"...\", "
           "\"carrier\": \"<character or null>\"}]}";
}

}  // namespace prompts
}  // namespace canvas
