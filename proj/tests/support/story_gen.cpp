#include "story_gen.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#ifndef CANVAS_SOURCE_DIR
#define CANVAS_SOURCE_DIR "."
#endif

namespace testsupport {

using canvas::Json;

std::string source_path(const std::string& rel) {
    return std::string(CANVAS_SOURCE_DIR) + "/" + rel;
}

canvas::StoryScript load_story_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open story fixture: " + path);
    Json j = Json::parse(in);
    return canvas::parse_story(j);
}

canvas::StoryScript make_story(std::uint64_t seed, const StoryGenOptions& opt) {
    std::mt19937_64 rng(seed);
    auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
    auto chance = [&](double p) {
        return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
    };

    const std::vector<std::string> char_pool = {"aria", "bo", "cleo", "dmitri"};
    const std::vector<std::array<std::string, 2>> state_pool = {
        {"casual_jacket", "rain_poncho"},
        {"work_uniform", "evening_gown"},
        {"travel_cloak", "street_clothes"},
        {"lab_coat", "winter_coat"},
    };
    const std::vector<std::string> loc_pool = {"harbor", "atrium", "rooftop"};
    const std::vector<std::string> prop_pool = {"lantern", "ledger", "violin", "satchel"};
    const std::vector<std::array<std::string, 2>> prop_state_pool = {
        {"stowed", "in_use"},
        {"closed", "open"},
        {"pristine", "damaged"},
        {"packed", "unpacked"},
    };

    const int n_chars = std::clamp(opt.n_characters, 1, static_cast<int>(char_pool.size()));
    const int n_locs = std::clamp(opt.n_locations, 1, static_cast<int>(loc_pool.size()));
    const int n_props = std::clamp(opt.n_props, 0, static_cast<int>(prop_pool.size()));
    const int n_shots = std::max(opt.n_shots, 3);

    // Location sequence: a sticky random walk, then force the final shot back
    // to the opening location so every multi-location story revisits one.
    std::vector<int> loc_of(static_cast<std::size_t>(n_shots), 0);
    for (int t = 1; t < n_shots; ++t)
        loc_of[static_cast<std::size_t>(t)] =
            chance(0.55) ? loc_of[static_cast<std::size_t>(t - 1)]
                         : static_cast<int>(pick(static_cast<std::size_t>(n_locs)));
    if (n_locs >= 2) {
        loc_of[static_cast<std::size_t>(n_shots - 1)] = loc_of[0];
        bool leaves = false;
        for (int t = 1; t + 1 < n_shots; ++t)
            if (loc_of[static_cast<std::size_t>(t)] != loc_of[0]) leaves = true;
        if (!leaves) loc_of[static_cast<std::size_t>(n_shots / 2)] = 1;
    }

    // Presence grid with at least two on-screen shots per character.
    std::vector<std::vector<bool>> present(static_cast<std::size_t>(n_chars),
                                           std::vector<bool>(static_cast<std::size_t>(n_shots)));
    for (int c = 0; c < n_chars; ++c) {
        auto& row = present[static_cast<std::size_t>(c)];
        for (int t = 0; t < n_shots; ++t) row[static_cast<std::size_t>(t)] = chance(0.8);
        int count = static_cast<int>(std::count(row.begin(), row.end(), true));
        while (count < 2) {
            std::size_t t = pick(static_cast<std::size_t>(n_shots));
            if (!row[t]) {
                row[t] = true;
                ++count;
            }
        }
    }

    // Appearance switch points; character 0 always changes outfits mid-story.
    std::vector<int> switch_at(static_cast<std::size_t>(n_chars), -1);
    switch_at[0] = n_shots / 2;
    for (int c = 1; c < n_chars; ++c)
        if (chance(0.5))
            switch_at[static_cast<std::size_t>(c)] =
                1 + static_cast<int>(pick(static_cast<std::size_t>(n_shots - 1)));
    auto state_of = [&](int c, int t) {
        int sw = switch_at[static_cast<std::size_t>(c)];
        return state_pool[static_cast<std::size_t>(c)][(sw >= 0 && t >= sw) ? 1 : 0];
    };

    // Props live at a home location and may flip state once mid-story.
    std::vector<int> prop_home(static_cast<std::size_t>(n_props), 0);
    std::vector<int> prop_switch(static_cast<std::size_t>(n_props), -1);
    for (int p = 0; p < n_props; ++p) {
        prop_home[static_cast<std::size_t>(p)] =
            static_cast<int>(pick(static_cast<std::size_t>(n_locs)));
        if (chance(0.5))
            prop_switch[static_cast<std::size_t>(p)] =
                1 + static_cast<int>(pick(static_cast<std::size_t>(n_shots - 1)));
    }

    canvas::StoryScript story;
    story.story_id = "gen_" + std::to_string(seed);
    for (int c = 0; c < n_chars; ++c) {
        canvas::CharacterDecl d;
        d.id = canvas::character_id(char_pool[static_cast<std::size_t>(c)]);
        d.display_name = char_pool[static_cast<std::size_t>(c)];
        d.description = "test figure " + d.display_name;
        story.characters.push_back(std::move(d));
    }

    for (int t = 0; t < n_shots; ++t) {
        canvas::Shot shot;
        shot.shot_id = "s" + std::to_string(t + 1);
        shot.index = t;

        canvas::GroundTruthAnnotation a;
        const std::string loc = loc_pool[static_cast<std::size_t>(loc_of[static_cast<std::size_t>(t)])];
        a.location = canvas::location_id(loc);
        // Occasionally pin a same-location shot to a hard cut instead of a
        // continuation; only legal when the location has been seen before.
        if (t > 0 && loc_of[static_cast<std::size_t>(t)] == loc_of[static_cast<std::size_t>(t - 1)] &&
            chance(0.15))
            a.continuity_mode = "location_reappearance";

        std::vector<std::string> cast;
        for (int c = 0; c < n_chars; ++c) {
            if (!present[static_cast<std::size_t>(c)][static_cast<std::size_t>(t)]) continue;
            a.appearance[char_pool[static_cast<std::size_t>(c)]] = state_of(c, t);
            cast.push_back(char_pool[static_cast<std::size_t>(c)]);
        }

        std::vector<std::string> visible_uncarried;
        std::map<std::string, std::vector<std::string>> carried_by;
        std::vector<std::string> absent;
        for (int p = 0; p < n_props; ++p) {
            const std::string& name = prop_pool[static_cast<std::size_t>(p)];
            bool at_home =
                loc_of[static_cast<std::size_t>(t)] == prop_home[static_cast<std::size_t>(p)];
            canvas::PropStateEntry entry;
            if (at_home && chance(0.85)) {
                int sw = prop_switch[static_cast<std::size_t>(p)];
                entry.state =
                    prop_state_pool[static_cast<std::size_t>(p)][(sw >= 0 && t >= sw) ? 1 : 0];
                if (!cast.empty() && chance(0.2)) {
                    std::string carrier = cast[pick(cast.size())];
                    entry.carrier = canvas::character_id(carrier);
                    carried_by[carrier].push_back(name);
                } else {
                    visible_uncarried.push_back(name);
                }
            } else {
                entry.state = "not_visible";
                absent.push_back(name);
            }
            a.props[name] = entry;
        }

        if (chance(0.5)) {
            a.has_background = true;
            for (const auto& name : visible_uncarried) {
                if (chance(0.4))
                    a.must_appear.push_back(name);
                else
                    a.background_props.push_back(name);
            }
            if (!absent.empty() && chance(0.4))
                a.must_not_appear.push_back(absent[pick(absent.size())]);
            a.carried = carried_by;
        }

        std::ostringstream text;
        text << "Shot " << (t + 1) << " at the " << loc << ":";
        if (cast.empty()) {
            text << " an empty scene.";
        } else {
            for (std::size_t i = 0; i < cast.size(); ++i)
                text << (i ? (i + 1 == cast.size() ? " and " : ", ") : " ") << cast[i];
            text << (cast.size() == 1 ? " lingers." : " talk.");
        }
        for (const auto& name : visible_uncarried) text << " The " << name << " is here.";
        if (opt.camera_tags && chance(0.3)) text << (chance(0.5) ? " [wide]" : " [closeup]");
        if (opt.hidden_faces && chance(0.1)) text << " [faces_hidden]";
        shot.description = text.str();
        shot.annotations = std::move(a);
        story.shots.push_back(std::move(shot));
    }
    return story;
}

}  // namespace testsupport
