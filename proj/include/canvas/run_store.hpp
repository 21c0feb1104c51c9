#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "canvas/config.hpp"
#include "canvas/frame.hpp"
#include "canvas/json_util.hpp"
#include "canvas/memory.hpp"
#include "canvas/selection.hpp"
#include "canvas/story.hpp"

namespace canvas {

namespace storedetail {

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw SchemaError("cannot write " + path.string());
        out << text;
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot read " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::string s = read_text(path);
    return std::vector<std::uint8_t>(s.begin(), s.end());
}

inline std::string pad3(int n) {
    std::string s = std::to_string(n);
    while (s.size() < 3) s = "0" + s;
    return s;
}

inline std::string sanitize_id(const std::string& raw) {
    std::string out;
    for (char c : raw) {
        if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
            c == '_' || c == '-')
            out += c;
        else
            out += '_';
    }
    return out.empty() ? "frame" : out;
}

inline std::string iso_timestamp() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace storedetail

// One directory per run. Content files are deterministic for a fixed seed
// and symbolic backends; wall-clock timestamps appear only in events.jsonl.
//
// Layout:
//   config.json   story.json   plan.json   scores.json   events.jsonl
//   memory.json   — anchor keys/descriptors with artifact file references
//   frames/NNN.scene.json | frames/NNN.png (+ .png.json metadata sidecar)
//   frames/a_<frame_id>.*  — anchor artifacts that are not committed frames
//   report.json   pairs.csv  — written by evaluation
class RunStore {
public:
    explicit RunStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

    const std::filesystem::path& dir() const { return dir_; }
    std::filesystem::path frames_dir() const { return dir_ / "frames"; }

    void begin(const StoryScript& script, const RunConfig& config) {
        std::filesystem::create_directories(frames_dir());
        storedetail::write_text_atomic(dir_ / "config.json",
                                       jsonutil::dump_canonical(to_json(config)));
        storedetail::write_text_atomic(dir_ / "story.json",
                                       jsonutil::dump_canonical(to_json(script)));
    }

    void write_plan(const ContinuityPlan& plan) {
        storedetail::write_text_atomic(dir_ / "plan.json",
                                       jsonutil::dump_canonical(to_json(plan)));
    }

    // Thread-safe JSONL event sink; the only place timestamps are written.
    EventSink event_sink() {
        auto mu = mu_;
        auto path = dir_ / "events.jsonl";
        std::filesystem::create_directories(dir_);
        return [mu, path](const Json& event) {
            Json line = event;
            line["ts"] = storedetail::iso_timestamp();
            std::lock_guard<std::mutex> lock(*mu);
            std::ofstream out(path, std::ios::app | std::ios::binary);
            out << line.dump() << "\n";
        };
    }

    // Persists the committed frame, every new anchor artifact, the memory
    // index, and the per-shot score row. Called once per finished shot.
    void commit_shot(int t, const ShotResult& result, const WorldMemory& memory) {
        std::string rel = write_committed_frame(t, result.selected);
        frame_paths_[result.selected.frame_id] = rel;

        Json row = shot_result_to_json(result);
        row["frame_path"] = rel;
        score_rows_.push_back(row);
        storedetail::write_text_atomic(dir_ / "scores.json",
                                       jsonutil::dump_canonical(Json(score_rows_)));
        write_memory(memory);
    }

    void write_report(const Json& report) {
        storedetail::write_text_atomic(dir_ / "report.json",
                                       jsonutil::dump_canonical(report));
    }

    void write_pairs_csv(const std::string& csv) {
        storedetail::write_text_atomic(dir_ / "pairs.csv", csv);
    }

    RunHooks hooks() {
        RunHooks h;
        h.events = event_sink();
        h.on_plan = [this](const ContinuityPlan& p) { write_plan(p); };
        h.on_shot = [this](int t, const ShotResult& r, const WorldMemory& m) {
            commit_shot(t, r, m);
        };
        return h;
    }

    // ---- loading ---------------------------------------------------------------

    StoryScript load_story() const {
        return parse_story(Json::parse(storedetail::read_text(dir_ / "story.json")));
    }

    RunConfig load_config() const {
        return run_config_from_json(Json::parse(storedetail::read_text(dir_ / "config.json")));
    }

    ContinuityPlan load_plan() const {
        return plan_from_json(Json::parse(storedetail::read_text(dir_ / "plan.json")));
    }

    bool has_plan() const { return std::filesystem::exists(dir_ / "plan.json"); }
    bool has_scores() const { return std::filesystem::exists(dir_ / "scores.json"); }
    bool has_memory() const { return std::filesystem::exists(dir_ / "memory.json"); }

    FrameArtifact load_frame(const std::string& rel) const {
        std::filesystem::path path = dir_ / rel;
        if (rel.size() > 4 && rel.substr(rel.size() - 4) == ".png") {
            FrameArtifact f;
            ImageBytes img;
            img.bytes = storedetail::read_bytes(path);
            std::filesystem::path meta = path;
            meta += ".json";
            if (std::filesystem::exists(meta)) {
                Json m = Json::parse(storedetail::read_text(meta));
                f.frame_id = m.value("frame_id", "");
                f.shot_id = m.value("shot_id", "");
                f.backend = m.value("backend", "");
                f.seed = m.value("seed", std::uint64_t{0});
                img.media_type = m.value("media_type", "image/png");
            }
            f.payload = std::move(img);
            return f;
        }
        return frame_from_json(Json::parse(storedetail::read_text(path)));
    }

    std::vector<ShotResult> load_results() const {
        Json rows = Json::parse(storedetail::read_text(dir_ / "scores.json"));
        std::vector<ShotResult> out;
        for (const auto& row : rows) {
            FrameArtifact frame = load_frame(row.value("frame_path", ""));
            out.push_back(shot_result_from_json(row, std::move(frame)));
        }
        return out;
    }

    std::vector<FrameArtifact> load_committed_frames() const {
        Json m = Json::parse(storedetail::read_text(dir_ / "memory.json"));
        std::vector<FrameArtifact> out;
        for (const auto& rel : m.value("frames", Json::array()))
            out.push_back(load_frame(rel.get<std::string>()));
        return out;
    }

    WorldMemory load_memory() const {
        Json m = Json::parse(storedetail::read_text(dir_ / "memory.json"));
        WorldMemory mem;
        auto load_bucket = [&](const char* name,
                               std::map<AnchorKey, AnchorRecord>& bucket) {
            for (const auto& row : m.value(name, Json::array())) {
                AnchorRecord rec;
                rec.key = AnchorKey::parse(row.value("key", ""));
                rec.descriptor = row.value("descriptor", Json::object());
                rec.source_shot = row.value("source_shot", -1);
                rec.updated_at = row.value("updated_at", -1);
                rec.artifact = load_frame(row.value("artifact", ""));
                bucket[rec.key] = rec;
            }
        };
        load_bucket("canonical", mem.canonical);
        load_bucket("characters", mem.characters);
        load_bucket("locations", mem.locations);
        load_bucket("props", mem.props);
        for (const auto& rel : m.value("frames", Json::array()))
            mem.frames.push_back(load_frame(rel.get<std::string>()));
        // The freshest per-character anchor is derivable: latest update wins.
        for (const auto& [key, rec] : mem.characters) {
            auto it = mem.recent_character.find(key.entity);
            if (it == mem.recent_character.end()) {
                mem.recent_character[key.entity] = key;
                continue;
            }
            if (mem.characters.at(it->second).updated_at < rec.updated_at)
                mem.recent_character[key.entity] = key;
        }
        return mem;
    }

    ResumeState load_resume_state() const {
        ResumeState s;
        s.plan = load_plan();
        s.memory = load_memory();
        s.shots = load_results();
        return s;
    }

    // Rebuilds the frame-id → path index from files already on disk, so a
    // resumed run reuses the original artifact paths instead of minting new
    // ones (the memory index must stay byte-identical to an unbroken run).
    void attach_existing() {
        if (has_scores()) {
            Json rows = Json::parse(storedetail::read_text(dir_ / "scores.json"));
            for (const auto& row : rows) {
                score_rows_.push_back(row);
                std::string rel = row.value("frame_path", "");
                std::string id = row.value("selected_frame_id", "");
                if (!rel.empty() && !id.empty()) frame_paths_[id] = rel;
            }
        }
        if (has_memory()) {
            Json m = Json::parse(storedetail::read_text(dir_ / "memory.json"));
            for (const char* bucket : {"canonical", "characters", "locations", "props"}) {
                for (const auto& row : m.value(bucket, Json::array())) {
                    std::string rel = row.value("artifact", "");
                    if (rel.empty() || frame_paths_map_has(rel)) continue;
                    FrameArtifact f = load_frame(rel);
                    if (!f.frame_id.empty()) frame_paths_[f.frame_id] = rel;
                }
            }
        }
    }

private:
    std::filesystem::path dir_;
    std::shared_ptr<std::mutex> mu_ = std::make_shared<std::mutex>();
    std::map<std::string, std::string> frame_paths_;  // frame_id -> relative path
    std::vector<Json> score_rows_;

    bool frame_paths_map_has(const std::string& rel) const {
        for (const auto& [id, path] : frame_paths_)
            if (path == rel) return true;
        return false;
    }

    std::string write_artifact(const std::string& rel, const FrameArtifact& f) {
        std::filesystem::path path = dir_ / rel;
        std::filesystem::create_directories(path.parent_path());
        if (f.is_scene()) {
            storedetail::write_text_atomic(path, jsonutil::dump_canonical(to_json(f)));
        } else {
            const ImageBytes& img = f.image();
            storedetail::write_text_atomic(
                path, std::string(img.bytes.begin(), img.bytes.end()));
            Json meta{{"frame_id", f.frame_id},
                      {"shot_id", f.shot_id},
                      {"backend", f.backend},
                      {"seed", f.seed},
                      {"media_type", img.media_type}};
            std::filesystem::path mp = path;
            mp += ".json";
            storedetail::write_text_atomic(mp, jsonutil::dump_canonical(meta));
        }
        return rel;
    }

    std::string write_committed_frame(int t, const FrameArtifact& f) {
        std::string stem = "frames/" + storedetail::pad3(t);
        std::string rel = f.is_scene() ? stem + ".scene.json" : stem + ".png";
        return write_artifact(rel, f);
    }

    std::string anchor_artifact_path(const FrameArtifact& f) {
        auto it = frame_paths_.find(f.frame_id);
        if (it != frame_paths_.end()) return it->second;
        std::string stem = "frames/a_" + storedetail::sanitize_id(f.frame_id);
        std::string rel = f.is_scene() ? stem + ".scene.json" : stem + ".png";
        write_artifact(rel, f);
        frame_paths_[f.frame_id] = rel;
        return rel;
    }

    void write_memory(const WorldMemory& memory) {
        Json m = Json::object();
        auto dump_bucket = [&](const char* name,
                               const std::map<AnchorKey, AnchorRecord>& bucket) {
            Json rows = Json::array();
            for (const auto& [key, rec] : bucket)
                rows.push_back(Json{{"key", key.path()},
                                    {"descriptor", rec.descriptor},
                                    {"source_shot", rec.source_shot},
                                    {"updated_at", rec.updated_at},
                                    {"artifact", anchor_artifact_path(rec.artifact)}});
            m[name] = rows;
        };
        dump_bucket("canonical", memory.canonical);
        dump_bucket("characters", memory.characters);
        dump_bucket("locations", memory.locations);
        dump_bucket("props", memory.props);
        Json frames = Json::array();
        for (std::size_t i = 0; i < memory.frames.size(); ++i) {
            auto it = frame_paths_.find(memory.frames[i].frame_id);
            if (it != frame_paths_.end()) {
                frames.push_back(it->second);
            } else {
                // Frame committed by an earlier process (resume): re-derive
                // its canonical path from its position.
                std::string stem = "frames/" + storedetail::pad3(static_cast<int>(i));
                frames.push_back(memory.frames[i].is_scene() ? stem + ".scene.json"
                                                             : stem + ".png");
            }
        }
        m["frames"] = frames;
        storedetail::write_text_atomic(dir_ / "memory.json", jsonutil::dump_canonical(m));
    }
};

// Binds a run store to the resumable pipeline state on disk.
inline bool run_is_resumable(const RunStore& store) {
    return store.has_plan() && store.has_memory() && store.has_scores();
}

}  // namespace canvas
