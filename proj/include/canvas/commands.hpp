#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "canvas/backends/http.hpp"
#include "canvas/backends/symbolic.hpp"
#include "canvas/config.hpp"
#include "canvas/eval.hpp"
#include "canvas/run_store.hpp"
#include "canvas/selection.hpp"

namespace canvas {

struct CliOptions {
    std::string story_path;
    std::string config_path;
    std::string run_dir;
    std::string plan_path;
    std::string judge;  // eval override: "symbolic" | "http"
    std::optional<std::uint64_t> seed;
    std::optional<int> n_candidates;
    std::optional<std::string> backend;
    bool resume = false;
    bool dry_run = false;
    int shot = -1;
    int max_shots = -1;
};

namespace climp {

inline Json read_json_file(const std::string& path, const std::string& what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open " + what + " file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), {});
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw SchemaError(what + " file " + path + " is not valid JSON: " + e.what());
    }
}

inline RunConfig effective_config(const CliOptions& opts) {
    RunConfig config;
    if (!opts.config_path.empty())
        config = run_config_from_json(read_json_file(opts.config_path, "config"));
    if (opts.seed) config.seed = *opts.seed;
    if (opts.n_candidates) config.n_candidates = *opts.n_candidates;
    if (opts.backend) config.backend = *opts.backend;
    if (!opts.run_dir.empty()) config.run_dir = opts.run_dir;
    config.validate();
    return config;
}

inline std::shared_ptr<Backend> make_backend(const std::string& kind,
                                             const RunConfig& config,
                                             const StoryScript& script) {
    if (kind == "symbolic")
        return std::make_shared<SymbolicBackend>(script, config.corruption_model());
    if (kind == "http") return std::make_shared<HttpBackend>(config.endpoints, config.http);
    throw SchemaError("unknown backend '" + kind + "'");
}

inline Backends make_backends(const RunConfig& config, const StoryScript& script) {
    std::shared_ptr<Backend> shared = make_backend(config.backend, config, script);
    Backends b;
    b.reasoner = shared;
    b.imager = shared;
    b.judge = shared;
    return b;
}

// Returns exit code; every diagnostic goes to stderr, results to stdout/files.
template <typename F>
int guarded(F&& body) {
    try {
        return body();
    } catch (const CanvasError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return static_cast<int>(e.exit_code());
    } catch (const Json::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return static_cast<int>(ExitCode::schema_error);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return static_cast<int>(ExitCode::failure);
    }
}

}  // namespace climp

inline int cmd_plan(const CliOptions& opts) {
    return climp::guarded([&]() {
        StoryScript script = parse_story(climp::read_json_file(opts.story_path, "story"));
        RunConfig config = climp::effective_config(opts);

        if (opts.dry_run) {
            // Show the reasoning prompts this story would produce — the
            // whole point is that no backend gets called.
            std::cout << "=== location clustering prompt ===\n"
                      << prompts::location_clustering(script) << "\n";
            for (const auto& who : script.characters)
                std::cout << "=== appearance prompt: " << who.id.name << " ===\n"
                          << prompts::character_appearance(script, who) << "\n";
            std::cout << "=== prop inventory prompt ===\n"
                      << prompts::prop_inventory(script) << "\n";
            return 0;
        }

        Backends backends = climp::make_backends(config, script);
        ContinuityPlan plan = build_global_plan(script, *backends.reasoner, config.seed,
                                                config.ablations);
        std::string rendered = jsonutil::dump_canonical(to_json(plan));
        if (!opts.run_dir.empty()) {
            std::filesystem::create_directories(opts.run_dir);
            storedetail::write_text_atomic(
                std::filesystem::path(opts.run_dir) / "plan.json", rendered);
            std::cerr << "plan written to " << opts.run_dir << "/plan.json" << std::endl;
        } else {
            std::cout << rendered;
        }
        return 0;
    });
}

inline int cmd_run(const CliOptions& opts) {
    return climp::guarded([&]() {
        if (opts.run_dir.empty()) throw SchemaError("--run <dir> is required");
        RunStore store{std::filesystem::path(opts.run_dir)};

        StoryScript script;
        RunConfig config;
        std::optional<ResumeState> state;
        if (opts.resume) {
            if (!run_is_resumable(store))
                throw IncompleteRun("nothing to resume in " + opts.run_dir);
            script = store.load_story();
            config = store.load_config();
            store.attach_existing();
            state = store.load_resume_state();
        } else {
            script = parse_story(climp::read_json_file(opts.story_path, "story"));
            config = climp::effective_config(opts);
            store.begin(script, config);
        }

        std::optional<ContinuityPlan> preplanned;
        if (!opts.plan_path.empty() && !opts.resume)
            preplanned = plan_from_json(climp::read_json_file(opts.plan_path, "plan"));

        Backends backends = climp::make_backends(config, script);
        RunHooks hooks = store.hooks();
        RunOutcome outcome =
            run_story(script, config, backends, hooks, state ? &*state : nullptr,
                      opts.max_shots, preplanned ? &*preplanned : nullptr);

        Json summary{{"run_dir", opts.run_dir},
                     {"story_id", script.story_id},
                     {"shots_committed", outcome.shots.size()},
                     {"completed", outcome.completed}};
        std::cout << summary.dump(2) << std::endl;
        return outcome.completed ? 0 : static_cast<int>(ExitCode::incomplete_run);
    });
}

inline int cmd_eval(const CliOptions& opts) {
    return climp::guarded([&]() {
        if (opts.run_dir.empty()) throw SchemaError("--run <dir> is required");
        RunStore store{std::filesystem::path(opts.run_dir)};
        if (!store.has_memory() || !store.has_plan())
            throw IncompleteRun("run directory " + opts.run_dir + " has no committed shots");

        StoryScript script = store.load_story();
        RunConfig config = store.load_config();
        if (opts.seed) config.seed = *opts.seed;

        ContinuityPlan plan = opts.plan_path.empty()
                                  ? store.load_plan()
                                  : plan_from_json(
                                        climp::read_json_file(opts.plan_path, "plan"));
        std::vector<FrameArtifact> frames = store.load_committed_frames();

        std::vector<std::string> judge_names;
        if (!opts.judge.empty()) judge_names = {opts.judge};
        else if (!config.judges.empty()) judge_names = config.judges;
        else judge_names = {"symbolic"};

        RunConfig judge_config = config;
        judge_config.corruption_rate = 0.0;  // judging never injects noise
        std::vector<std::shared_ptr<Backend>> judges;
        for (const auto& name : judge_names)
            judges.push_back(climp::make_backend(name, judge_config, script));

        ContinuityReport report = evaluate_story(frames, plan, script, judges,
                                                 config.seed, store.event_sink());
        Json rendered = to_json(report);
        store.write_report(rendered);
        store.write_pairs_csv(pairs_csv(report));
        std::cout << jsonutil::dump_canonical(rendered);
        return 0;
    });
}

inline int cmd_retrieve(const CliOptions& opts) {
    return climp::guarded([&]() {
        if (opts.run_dir.empty()) throw SchemaError("--run <dir> is required");
        if (opts.shot < 0) throw SchemaError("--shot <index> is required");
        RunStore store{std::filesystem::path(opts.run_dir)};
        StoryScript script = store.load_story();
        RunConfig config = store.load_config();
        ContinuityPlan plan = store.load_plan();

        if (opts.shot >= plan.n_shots())
            throw OutOfRange("shot index " + std::to_string(opts.shot) + " outside plan (" +
                             std::to_string(plan.n_shots()) + " shots)");

        // Committed shots report the manifest the run actually used; the
        // next shot is a live (read-only) retrieval against current memory.
        std::vector<ShotResult> results =
            store.has_scores() ? store.load_results() : std::vector<ShotResult>{};
        if (opts.shot < static_cast<int>(results.size())) {
            std::cout << jsonutil::dump_canonical(
                results[static_cast<std::size_t>(opts.shot)].retrieval_manifest);
            return 0;
        }
        if (opts.shot > static_cast<int>(results.size()))
            throw SequenceError("shot " + std::to_string(opts.shot) + " not reached: " +
                                std::to_string(results.size()) + " shots committed");

        WorldMemory memory = store.load_memory();
        // Inspection is read-only: no imager, so a missing canonical anchor
        // reports as an error instead of being minted.
        AnchorSet anchors = retrieve_anchors(memory, script, plan, opts.shot, nullptr,
                                             config.ablations, config.seed);
        std::cout << jsonutil::dump_canonical(anchors.manifest());
        return 0;
    });
}

inline int cmd_show(const CliOptions& opts) {
    return climp::guarded([&]() {
        if (opts.run_dir.empty()) throw SchemaError("--run <dir> is required");
        RunStore store{std::filesystem::path(opts.run_dir)};
        Json summary = Json::object();
        if (std::filesystem::exists(store.dir() / "story.json")) {
            StoryScript script = store.load_story();
            summary["story_id"] = script.story_id;
            summary["shots_total"] = script.shots.size();
        }
        if (store.has_plan()) {
            ContinuityPlan plan = store.load_plan();
            Json locs = Json::object();
            for (const auto& [loc, indices] : plan.locations.clusters)
                locs[loc.name] = indices.size();
            summary["locations"] = locs;
        }
        if (store.has_scores()) {
            std::vector<ShotResult> results = store.load_results();
            Json shots = Json::array();
            for (const auto& r : results) {
                const CandidateScore& sel =
                    r.candidates.at(static_cast<std::size_t>(r.selected_index));
                shots.push_back(Json{{"shot_id", r.shot_id},
                                     {"selected_index", r.selected_index},
                                     {"overall", sel.overall.str()},
                                     {"overall_value", sel.overall.to_double()}});
            }
            summary["shots_committed"] = results.size();
            summary["shots"] = shots;
        }
        summary["report_present"] = std::filesystem::exists(store.dir() / "report.json");
        std::cout << jsonutil::dump_canonical(summary);
        return 0;
    });
}

}  // namespace canvas
