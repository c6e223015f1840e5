// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tailor/backend.hpp"
#include "tailor/eval_harness.hpp"
#include "tailor/task.hpp"

namespace tailor {

// One endpoint entry in the run config.
struct BackendSpec {
    std::string name;
    std::string kind;  // "mock" or "remote"
    // mock
    std::optional<std::string> fixture;  // JSONL path, relative to the config file
    std::vector<std::string> alphabet;
    std::uint64_t seed = 0;
    // remote
    std::string base_url;
    std::string model;
    std::string api_key_env = "OPENAI_API_KEY";
    int max_attempts = 5;
    int base_delay_ms = 1000;
    int timeout_sec = 120;
};

struct RunTemperatures {
    double question_gen = 1.0;
    double rationale = 0.0;
    double icl = 0.0;
};

struct RunPaths {
    std::filesystem::path tasks_dir = "tasks";
    std::filesystem::path runs_dir = "runs";
    std::filesystem::path cache_dir = "cache";
    std::filesystem::path validation_dir = "validation";
    std::filesystem::path test_dir = "test";
};

struct RunConfig {
    std::string run_id;
    BackendSpec teacher;
    BackendSpec student;
    std::optional<BackendSpec> aligned_teacher;
    std::vector<BackendSpec> matrix_models;  // defaults to {student}
    std::vector<int> matrix_shots{0, 1, 2, 3};
    std::vector<std::string> tasks;
    int m = 250;             // draft questions per task
    int n = 4;               // rationales per question
    int k = 40;              // preference items per task
    int question_pairs = 50;
    int per_prompt_count = 5;
    RunTemperatures temperatures;
    std::uint64_t seed = 0;
    int max_in_flight = 8;
    int max_tokens = 1024;
    bool pool_irt = false;  // fit one model across all tasks' items
    RunPaths paths;         // relative paths resolve against the config file

    void validate() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

enum class StageStatus { pending, running, done, failed };

struct StageRecord {
    StageStatus status = StageStatus::pending;
    std::string started_at;
    std::string finished_at;
    std::string error;
    // artifact path relative to the run dir -> sha256 of its bytes
    std::map<std::string, std::string> artifacts;
};

struct RunManifest {
    std::string run_id;
    std::string config_digest;
    std::map<std::string, StageRecord> stages;
};

std::string_view to_string(StageStatus s);

// Options for the stages that take them.
struct BuildDpoOptions {
    std::optional<int> question_pairs;  // override config
    bool include_question_pairs = true;
    bool include_rationale_pairs = true;
};

struct EvalOptions {
    std::string backend = "student";  // student | teacher | aligned | matrix model name
    int shots = 0;
    DemoSource demo_source = DemoSource::fixed_examples;
};

struct ConsistencyOptions {
    int samples = 10;  // drafts re-scored against the full validation set
};

struct AnalyzeOptions {
    int bin_width_words = 25;
};

// One pipeline run rooted at <runs_dir>/<run_id>. Stage methods check their
// upstream artifacts, take the run lock, execute, then record artifact
// digests in manifest.json. Artifacts never get overwritten in place: a
// changed artifact moves the old bytes aside as <name>.v<N> first.
class Run {
public:
    explicit Run(RunConfig cfg);

    const RunConfig& config() const { return cfg_; }
    std::filesystem::path run_dir() const;
    RunManifest manifest() const;

    void elicit();
    void matrix();
    void select();
    void score();
    void build_dpo(const BuildDpoOptions& opts = {});
    void regen_sft();
    void eval(const EvalOptions& opts = {});
    void consistency(const ConsistencyOptions& opts = {});
    void analyze(const AnalyzeOptions& opts = {});
    std::string status_text() const;

    // Stats for a backend by config name, for tests and the status command.
    BackendStats backend_stats(const std::string& name) const;

private:
    struct State;
    RunConfig cfg_;
    std::shared_ptr<State> state_;
};

}  // namespace tailor
