// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

// Command-line front end over the run pipeline. One JSON config file drives a
// run; subcommands execute single stages against its run directory.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "tailor/errors.hpp"
#include "tailor/pipeline.hpp"

namespace {

struct CliOverrides {
    std::optional<int> m, n, k, question_pairs, max_in_flight;
    std::optional<std::uint64_t> seed;
    std::optional<bool> pool_irt;
};

tailor::RunConfig load_config(const std::string& path, const CliOverrides& ov) {
    tailor::RunConfig cfg = tailor::load_run_config(path);
    if (ov.m) cfg.m = *ov.m;
    if (ov.n) cfg.n = *ov.n;
    if (ov.k) cfg.k = *ov.k;
    if (ov.question_pairs) cfg.question_pairs = *ov.question_pairs;
    if (ov.max_in_flight) cfg.max_in_flight = *ov.max_in_flight;
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.pool_irt) cfg.pool_irt = *ov.pool_irt;
    cfg.validate();
    return cfg;
}

void print_stage_done(const tailor::Run& run, const char* stage) {
    auto m = run.manifest();
    auto it = m.stages.find(stage);
    std::size_t artifacts = it == m.stages.end() ? 0 : it->second.artifacts.size();
    std::printf("%s: done (%zu artifact%s) in %s\n", stage, artifacts, artifacts == 1 ? "" : "s",
                run.run_dir().string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Preference-data pipeline: elicit drafts from a teacher endpoint, score them by "
                 "student in-context accuracy, and export preference datasets"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    app.add_option("-c,--config", config_path, "Run config (JSON)")->required();

    CliOverrides ov;
    app.add_option("--m", ov.m, "Draft questions per task");
    app.add_option("--n", ov.n, "Rationales per question");
    app.add_option("--k", ov.k, "Preference items per task");
    app.add_option("--seed", ov.seed, "Run seed");
    app.add_option("--max-in-flight", ov.max_in_flight, "Max concurrent backend requests");

    app.add_subcommand("elicit", "Sample draft questions and rationales from the teacher");
    app.add_subcommand("matrix", "Grade (model, shots) subjects over the validation sets");

    auto* cmd_select = app.add_subcommand("select", "Fit the response model and pick the most "
                                                    "discriminative preference items");
    bool pool_irt = false;
    cmd_select->add_flag("--pool", pool_irt, "Fit one model across all tasks' items");

    app.add_subcommand("score", "Score drafts by student one-shot accuracy on the preference set");

    auto* cmd_build = app.add_subcommand("build-dpo", "Mix and export preference pairs");
    std::optional<int> build_pairs;
    std::string level = "both";
    cmd_build->add_option("--question-pairs", build_pairs, "Question-level pairs per task");
    cmd_build->add_option("--level", level, "Pair levels to include")
        ->check(CLI::IsMember({"both", "question", "rationale"}));

    app.add_subcommand("regen-sft", "Regenerate tailored examples and export the SFT dataset");

    auto* cmd_eval = app.add_subcommand("eval", "n-shot accuracy over the held-out test sets");
    tailor::EvalOptions eopts;
    std::string demo_source = "fixed";
    cmd_eval->add_option("--backend", eopts.backend,
                         "student | teacher | aligned | a configured backend name");
    cmd_eval->add_option("--shots", eopts.shots, "Demonstrations per prompt");
    cmd_eval->add_option("--demo-source", demo_source, "Demonstration pool")
        ->check(CLI::IsMember({"fixed", "drafts"}));

    auto* cmd_consistency = app.add_subcommand(
        "consistency", "Compare preference-set rankings against full-validation rankings");
    tailor::ConsistencyOptions copts;
    cmd_consistency->add_option("--samples", copts.samples, "Questions to re-score");

    auto* cmd_analyze = app.add_subcommand("analyze", "Rationale length vs score analysis");
    tailor::AnalyzeOptions aopts;
    cmd_analyze->add_option("--bin-width", aopts.bin_width_words, "Bin width in words");

    app.add_subcommand("status", "Show per-stage status for the run");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (cmd_select->parsed() && pool_irt) ov.pool_irt = true;
        tailor::Run run(load_config(config_path, ov));

        if (app.got_subcommand("elicit")) {
            run.elicit();
            print_stage_done(run, "elicit");
        } else if (app.got_subcommand("matrix")) {
            run.matrix();
            print_stage_done(run, "matrix");
        } else if (app.got_subcommand("select")) {
            run.select();
            print_stage_done(run, "select");
        } else if (app.got_subcommand("score")) {
            run.score();
            print_stage_done(run, "score");
        } else if (app.got_subcommand("build-dpo")) {
            tailor::BuildDpoOptions opts;
            opts.question_pairs = build_pairs;
            opts.include_question_pairs = level != "rationale";
            opts.include_rationale_pairs = level != "question";
            run.build_dpo(opts);
            print_stage_done(run, "build-dpo");
        } else if (app.got_subcommand("regen-sft")) {
            run.regen_sft();
            print_stage_done(run, "regen-sft");
        } else if (app.got_subcommand("eval")) {
            eopts.demo_source = demo_source == "drafts" ? tailor::DemoSource::drafts
                                                        : tailor::DemoSource::fixed_examples;
            run.eval(eopts);
            print_stage_done(run, "eval");
        } else if (app.got_subcommand("consistency")) {
            run.consistency(copts);
            print_stage_done(run, "consistency");
        } else if (app.got_subcommand("analyze")) {
            run.analyze(aopts);
            print_stage_done(run, "analyze");
        } else if (app.got_subcommand("status")) {
            std::cout << run.status_text();
        }
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return tailor::exit_code_for(e);
    }
}
