#include <CLI11.hpp>

#include "canvas/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"storyboard continuity pipeline: plan, generate, select, evaluate"};
    app.require_subcommand(1);

    canvas::CliOptions opts;
    std::uint64_t seed_value = 0;
    int n_value = 0;
    std::string backend_value;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", opts.config_path, "run config JSON file");
        cmd->add_option("--seed", seed_value, "seed override")
            ->each([&](const std::string&) { opts.seed = seed_value; });
        cmd->add_option("--run", opts.run_dir, "run directory");
    };

    CLI::App* plan = app.add_subcommand("plan", "build and validate the continuity plan");
    add_common(plan);
    plan->add_option("--story", opts.story_path, "story script JSON")->required();
    plan->add_option("--backend", backend_value, "backend: symbolic | http")
        ->each([&](const std::string&) { opts.backend = backend_value; });
    plan->add_flag("--dry-run", opts.dry_run, "print planning prompts, call nothing");

    CLI::App* run = app.add_subcommand("run", "execute the full generation pipeline");
    add_common(run);
    run->add_option("--story", opts.story_path, "story script JSON");
    run->add_option("--plan", opts.plan_path, "use this plan instead of planning");
    run->add_option("--n", n_value, "candidates per shot (1-8)")
        ->each([&](const std::string&) { opts.n_candidates = n_value; });
    run->add_option("--backend", backend_value, "backend: symbolic | http")
        ->each([&](const std::string&) { opts.backend = backend_value; });
    run->add_flag("--resume", opts.resume, "continue from the last committed shot");
    run->add_option("--max-shots", opts.max_shots,
                    "stop after this many additional shots (testing aid)");

    CLI::App* eval = app.add_subcommand("eval", "score a finished run");
    add_common(eval);
    eval->add_option("--judge", opts.judge, "judge backend: symbolic | http");
    eval->add_option("--plan", opts.plan_path, "evaluate against this plan file");

    CLI::App* retrieve = app.add_subcommand("retrieve", "inspect anchors for one shot");
    add_common(retrieve);
    retrieve->add_option("--shot", opts.shot, "shot index")->required();

    CLI::App* show = app.add_subcommand("show", "summarize a run directory");
    add_common(show);

    CLI11_PARSE(app, argc, argv);

    if (plan->parsed()) return canvas::cmd_plan(opts);
    if (run->parsed()) return canvas::cmd_run(opts);
    if (eval->parsed()) return canvas::cmd_eval(opts);
    if (retrieve->parsed()) return canvas::cmd_retrieve(opts);
    if (show->parsed()) return canvas::cmd_show(opts);
    return 1;
}
