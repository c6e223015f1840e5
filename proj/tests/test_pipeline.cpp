// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#include "tailor/pipeline.hpp"

#include <doctest.h>
#include <json.hpp>

#include <map>
#include <set>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "tailor/digest.hpp"
#include "tailor/errors.hpp"
#include "tailor/serialization.hpp"

using namespace tailor;
namespace fs = std::filesystem;

namespace {

nlohmann::json read_json(const fs::path& p) {
    return nlohmann::json::parse(testing::slurp(p));
}

std::size_t line_count(const fs::path& p) {
    std::string text = testing::slurp(p);
    std::size_t n = 0;
    for (char c : text) {
        if (c == '\n') ++n;
    }
    return n;
}

// Every regular file under the run dir, keyed by relative path, excluding
// mutable run state (manifest, lock).
std::map<std::string, std::string> snapshot_artifacts(const fs::path& run_dir) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(run_dir)) {
        if (!entry.is_regular_file()) continue;
        std::string rel = fs::relative(entry.path(), run_dir).string();
        if (rel == "manifest.json" || rel == ".lock") continue;
        out[rel] = testing::slurp(entry.path());
    }
    return out;
}

void run_all_stages(Run& run) {
    run.elicit();
    run.matrix();
    run.select();
    run.score();
    run.build_dpo();
    run.regen_sft();
    run.eval();
    run.consistency();
    run.analyze();
}

}  // namespace

TEST_CASE("run config loads the toy workspace with resolved paths") {
    testing::TempDir tmp;
    auto ws = testing::write_toy_workspace(tmp.path());
    RunConfig cfg = load_run_config(ws.config_path);

    CHECK(cfg.run_id == "toy");
    CHECK(cfg.seed == 1234);
    CHECK(cfg.tasks == std::vector<std::string>{"toy_parity", "toy_negation"});
    CHECK(cfg.m == 10);
    CHECK(cfg.n == 2);
    CHECK(cfg.k == 5);
    CHECK(cfg.question_pairs == 4);
    CHECK(cfg.per_prompt_count == 5);
    CHECK(cfg.max_in_flight == 4);
    CHECK(cfg.max_tokens == 256);
    CHECK_FALSE(cfg.pool_irt);
    CHECK(cfg.teacher.name == "toy-teacher");
    CHECK(cfg.teacher.kind == "mock");
    CHECK(cfg.teacher.alphabet.size() == 6);
    CHECK(cfg.teacher.seed == 7);
    CHECK(cfg.student.name == "toy-student");
    CHECK_FALSE(cfg.aligned_teacher.has_value());
    REQUIRE(cfg.matrix_models.size() == 2);
    CHECK(cfg.matrix_models[0].name == "toy-student");
    CHECK(cfg.matrix_models[1].name == "toy-probe");
    CHECK(cfg.matrix_shots == std::vector<int>{0, 1});

    // Unset temperatures fall back to sampling questions, greedy everything
    // else.
    CHECK(cfg.temperatures.question_gen == 1.0);
    CHECK(cfg.temperatures.rationale == 0.0);
    CHECK(cfg.temperatures.icl == 0.0);

    // Relative paths resolve against the config file's directory.
    CHECK(cfg.paths.tasks_dir == tmp.path() / "tasks");
    CHECK(cfg.paths.runs_dir == tmp.path() / "runs");
    CHECK(cfg.paths.cache_dir == tmp.path() / "cache");
    CHECK(cfg.paths.validation_dir == tmp.path() / "validation");
    CHECK(cfg.paths.test_dir == tmp.path() / "test");
}

TEST_CASE("run config defaults match the published scale") {
    testing::TempDir tmp;
    nlohmann::json j = {
        {"run_id", "defaults"},
        {"tasks", {"some_task"}},
        {"teacher", {{"name", "t"}, {"kind", "mock"}, {"alphabet", {"x"}}}},
        {"student", {{"name", "s"}, {"kind", "mock"}, {"alphabet", {"y"}}}}};
    auto path = tmp.path() / "cfg.json";
    testing::write_file(path, j.dump());
    RunConfig cfg = load_run_config(path);

    CHECK(cfg.m == 250);
    CHECK(cfg.n == 4);
    CHECK(cfg.k == 40);
    CHECK(cfg.question_pairs == 50);
    CHECK(cfg.per_prompt_count == 5);
    CHECK(cfg.max_in_flight == 8);
    CHECK(cfg.max_tokens == 1024);
    CHECK(cfg.seed == 0);
    CHECK_FALSE(cfg.pool_irt);
    CHECK(cfg.matrix_shots == std::vector<int>{0, 1, 2, 3});
    // With no matrix_models the student doubles as the only matrix subject.
    REQUIRE(cfg.matrix_models.size() == 1);
    CHECK(cfg.matrix_models[0].name == "s");
    CHECK(cfg.paths.tasks_dir == tmp.path() / "tasks");
}

TEST_CASE("run config rejects contradictory settings") {
    testing::TempDir tmp;
    nlohmann::json base = {
        {"run_id", "bad"},
        {"tasks", {"task_a"}},
        {"teacher", {{"name", "t"}, {"kind", "mock"}, {"alphabet", {"x"}}}},
        {"student", {{"name", "s"}, {"kind", "mock"}, {"alphabet", {"y"}}}}};
    auto write_cfg = [&](nlohmann::json j) {
        auto p = tmp.path() / "cfg.json";
        testing::write_file(p, j.dump());
        return p;
    };

    CHECK_NOTHROW(load_run_config(write_cfg(base)));

    nlohmann::json dup = base;
    dup["tasks"] = {"task_a", "task_a"};
    CHECK_THROWS_WITH_AS(load_run_config(write_cfg(dup)), doctest::Contains("duplicates"),
                         ConfigError);

    nlohmann::json none = base;
    none["tasks"] = nlohmann::json::array();
    CHECK_THROWS_WITH_AS(load_run_config(write_cfg(none)), doctest::Contains("no tasks"),
                         ConfigError);

    nlohmann::json bad_id = base;
    bad_id["run_id"] = "has space";
    CHECK_THROWS_AS(load_run_config(write_cfg(bad_id)), ConfigError);
    bad_id["run_id"] = "../escape";
    CHECK_THROWS_AS(load_run_config(write_cfg(bad_id)), ConfigError);

    nlohmann::json bad_task = base;
    bad_task["tasks"] = {"a/b"};
    CHECK_THROWS_AS(load_run_config(write_cfg(bad_task)), ConfigError);

    // Question-level pairing needs at least the two quartiles of 8 drafts.
    nlohmann::json small_m = base;
    small_m["m"] = 5;
    CHECK_THROWS_WITH_AS(load_run_config(write_cfg(small_m)),
                         doctest::Contains("m >= 8"), ConfigError);
    small_m["question_pairs"] = 0;  // rationale-only runs may go smaller
    CHECK_NOTHROW(load_run_config(write_cfg(small_m)));

    nlohmann::json hot = base;
    hot["temperatures"] = {{"icl", 2.5}};
    CHECK_THROWS_WITH_AS(load_run_config(write_cfg(hot)), doctest::Contains("within [0, 2]"),
                         ConfigError);

    nlohmann::json bare_mock = base;
    bare_mock["teacher"] = {{"name", "t"}, {"kind", "mock"}};
    CHECK_THROWS_WITH_AS(load_run_config(write_cfg(bare_mock)),
                         doctest::Contains("fixture or an answer alphabet"), ConfigError);

    nlohmann::json bad_kind = base;
    bad_kind["teacher"] = {{"name", "t"}, {"kind", "local"}, {"alphabet", {"x"}}};
    CHECK_THROWS_WITH_AS(load_run_config(write_cfg(bad_kind)),
                         doctest::Contains("'mock' or 'remote'"), ConfigError);

    nlohmann::json bare_remote = base;
    bare_remote["student"] = {{"name", "s"}, {"kind", "remote"}, {"model", "m"}};
    CHECK_THROWS_WITH_AS(load_run_config(write_cfg(bare_remote)),
                         doctest::Contains("base_url"), ConfigError);

    nlohmann::json no_shots = base;
    no_shots["matrix_shots"] = nlohmann::json::array();
    CHECK_THROWS_AS(load_run_config(write_cfg(no_shots)), ConfigError);
    no_shots["matrix_shots"] = {0, -1};
    CHECK_THROWS_AS(load_run_config(write_cfg(no_shots)), ConfigError);

    auto mangled = tmp.path() / "mangled.json";
    testing::write_file(mangled, "{nope");
    CHECK_THROWS_WITH_AS(load_run_config(mangled), doctest::Contains("mangled.json"), ConfigError);
    CHECK_THROWS_AS(load_run_config(tmp.path() / "absent.json"), IoError);
}

TEST_CASE("a full toy run produces every artifact with honest digests") {
    testing::TempDir tmp;
    auto ws = testing::write_toy_workspace(tmp.path());
    Run run(load_run_config(ws.config_path));
    run_all_stages(run);
    const fs::path dir = run.run_dir();
    CHECK(dir == tmp.path() / "runs" / "toy");

    for (const auto& task : ws.task_ids) {
        CHECK(fs::exists(dir / task / "drafts.jsonl"));
        CHECK(fs::exists(dir / task / "matrix.csv"));
        CHECK(fs::exists(dir / task / "irt_params.jsonl"));
        CHECK(fs::exists(dir / task / "pref_set.json"));
        CHECK(fs::exists(dir / task / "scores.jsonl"));
        CHECK(fs::exists(dir / task / "regen_drafts.jsonl"));
        CHECK(fs::exists(dir / ("eval/" + task + ".toy-student.0shot.json")));
        CHECK(fs::exists(dir / ("analysis/" + task + ".consistency.json")));
        CHECK(fs::exists(dir / ("analysis/" + task + ".length_bins.json")));
    }
    CHECK(fs::exists(dir / "dpo.jsonl"));
    CHECK(fs::exists(dir / "dpo_manifest.json"));
    CHECK(fs::exists(dir / "sft.jsonl"));
    CHECK(fs::exists(dir / "sft_manifest.json"));

    // Shapes: m questions each with n rationales; one score record per
    // rationale plus one per question; k selected items.
    for (const auto& task : ws.task_ids) {
        auto drafts = load_drafts_jsonl(dir / task / "drafts.jsonl");
        CHECK(drafts.size() == 20);
        std::set<std::string> question_ids;
        for (const auto& d : drafts) {
            CHECK(d.question.task_id == task);
            question_ids.insert(d.question.id);
        }
        CHECK(question_ids.size() == 10);

        auto records = load_score_records_jsonl(dir / task / "scores.jsonl");
        CHECK(records.size() == 30);
        int question_level = 0;
        for (const auto& r : records) {
            if (r.level == ScoreLevel::question) ++question_level;
        }
        CHECK(question_level == 10);

        auto sel = load_pref_selection(dir / task / "pref_set.json");
        CHECK(sel.task_id == task);
        CHECK(sel.item_ids.size() == 5);
        auto validation = load_qa_jsonl(tmp.path() / "validation" / (task + ".jsonl"));
        std::set<std::string> valid_ids;
        for (const auto& item : validation) valid_ids.insert(item_id_for(item));
        for (const auto& id : sel.item_ids) CHECK(valid_ids.count(id) == 1);

        // IRT params cover all 12 validation items plus 4 subject rows.
        auto [items, abilities] = load_irt_params_jsonl(dir / task / "irt_params.jsonl");
        CHECK(items.size() == 12);
        CHECK(abilities.size() == 4);  // 2 models x 2 shot counts
    }

    // Exported datasets pass their own validators.
    CHECK(validate_dpo_jsonl(dir / "dpo.jsonl").empty());
    CHECK(validate_sft_jsonl(dir / "sft.jsonl").empty());

    auto dpo_manifest = read_json(dir / "dpo_manifest.json");
    CHECK(dpo_manifest["counts"]["question_pairs"] == 8);  // 4 per task
    CHECK(dpo_manifest["per_task"]["toy_parity"]["question_pairs"] == 4);
    CHECK(dpo_manifest["per_task"]["toy_negation"]["question_pairs"] == 4);
    CHECK(dpo_manifest["counts"]["total"] ==
          dpo_manifest["counts"]["question_pairs"].get<std::size_t>() +
              dpo_manifest["counts"]["rationale_pairs"].get<std::size_t>());
    CHECK(dpo_manifest["task_errors"].empty());
    CHECK(line_count(dir / "dpo.jsonl") == dpo_manifest["counts"]["total"].get<std::size_t>());
    CHECK(dpo_manifest["trainer"]["dpo_beta"] == 0.1);

    auto sft_manifest = read_json(dir / "sft_manifest.json");
    CHECK(sft_manifest["records"] == 20);
    CHECK(sft_manifest["per_task"]["toy_parity"] == 10);
    CHECK(sft_manifest["backend"] == "toy-teacher");
    CHECK(line_count(dir / "sft.jsonl") == 20);

    auto eval_report = read_json(dir / "eval/toy_parity.toy-student.0shot.json");
    CHECK(eval_report["task_id"] == "toy_parity");
    CHECK(eval_report["model"] == "toy-student");
    CHECK(eval_report["total"] == 6);
    CHECK(eval_report["per_item"].size() == 6);

    auto consistency = read_json(dir / "analysis/toy_parity.consistency.json");
    CHECK(consistency["samples"] == 10);
    CHECK(consistency["top_match_rate"].get<double>() >= 0.0);
    CHECK(consistency["top_match_rate"].get<double>() <= 1.0);

    auto bins = read_json(dir / "analysis/toy_parity.length_bins.json");
    CHECK(bins["total"].get<int>() == 20);
    CHECK(!bins["bins"].empty());

    // The manifest records every stage as done, and each artifact digest is
    // the sha256 of the bytes actually on disk.
    RunManifest manifest = run.manifest();
    CHECK(manifest.run_id == "toy");
    std::set<std::string> expected_stages = {"elicit",    "matrix", "select",
                                             "score",     "build-dpo", "regen-sft",
                                             "eval",      "consistency", "analyze"};
    for (const auto& name : expected_stages) {
        REQUIRE(manifest.stages.count(name) == 1);
        const StageRecord& rec = manifest.stages.at(name);
        CHECK(rec.status == StageStatus::done);
        CHECK(rec.error.empty());
        CHECK(!rec.artifacts.empty());
        for (const auto& [rel, digest] : rec.artifacts) {
            CHECK(digest == sha256_hex(testing::slurp(dir / rel)));
        }
    }
    CHECK(manifest.stages.at("elicit").artifacts.size() == 2);
    CHECK(manifest.stages.at("select").artifacts.size() == 4);
    CHECK(manifest.stages.at("regen-sft").artifacts.size() == 4);

    // Teacher did the elicitation, student did the scoring.
    CHECK(run.backend_stats("toy-teacher").completions > 0);
    CHECK(run.backend_stats("toy-student").completions > 0);
    CHECK_THROWS_AS(run.backend_stats("nobody"), PreconditionViolation);
}

TEST_CASE("rerunning every stage is byte-identical and cache-served") {
    testing::TempDir tmp;
    auto ws = testing::write_toy_workspace(tmp.path());
    RunConfig cfg = load_run_config(ws.config_path);
    {
        Run first(cfg);
        run_all_stages(first);
    }
    const fs::path dir = cfg.paths.runs_dir / cfg.run_id;
    auto before = snapshot_artifacts(dir);
    REQUIRE(!before.empty());

    Run second(load_run_config(ws.config_path));
    run_all_stages(second);
    auto after = snapshot_artifacts(dir);

    CHECK(before == after);
    for (const auto& [rel, bytes] : after) {
        CHECK(rel.find(".v1") == std::string::npos);  // nothing rotated
        CHECK(rel.find(".tmp") == std::string::npos);  // nothing left behind
    }

    // The second run's deterministic requests were served from the on-disk
    // cache rather than recomputed.
    CHECK(second.backend_stats("toy-teacher").cache_hits > 0);
    CHECK(second.backend_stats("toy-student").cache_hits > 0);
}

TEST_CASE("stages fail fast naming the missing artifact and its producer") {
    testing::TempDir tmp;
    auto ws = testing::write_toy_workspace(tmp.path());
    Run run(load_run_config(ws.config_path));

    CHECK_THROWS_WITH_AS(
        run.select(),
        doctest::Contains("missing artifact 'toy_parity/matrix.csv' (produced by the 'matrix' "
                          "stage)"),
        PreconditionViolation);
    CHECK_THROWS_WITH_AS(run.score(),
                         doctest::Contains("'toy_parity/drafts.jsonl' (produced by the 'elicit'"),
                         PreconditionViolation);
    CHECK_THROWS_WITH_AS(run.build_dpo(), doctest::Contains("run that stage first"),
                         PreconditionViolation);
    CHECK_THROWS_AS(run.consistency(), PreconditionViolation);
    CHECK_THROWS_AS(run.analyze(), PreconditionViolation);

    // The failure is recorded, the lock is released, and later stages run.
    RunManifest manifest = run.manifest();
    REQUIRE(manifest.stages.count("select") == 1);
    CHECK(manifest.stages.at("select").status == StageStatus::failed);
    CHECK(manifest.stages.at("select").error.find("missing artifact") != std::string::npos);
    CHECK_FALSE(fs::exists(run.run_dir() / ".lock"));

    std::string status = run.status_text();
    CHECK(status.find("run toy") != std::string::npos);
    CHECK(status.find("failed") != std::string::npos);
    CHECK(status.find("error: missing artifact") != std::string::npos);

    CHECK_NOTHROW(run.elicit());
    CHECK(run.manifest().stages.at("elicit").status == StageStatus::done);
}

TEST_CASE("a held lock excludes other stage invocations") {
    testing::TempDir tmp;
    auto ws = testing::write_toy_workspace(tmp.path());
    Run run(load_run_config(ws.config_path));

    fs::create_directories(run.run_dir());
    testing::write_file(run.run_dir() / ".lock", "12345\n");
    CHECK_THROWS_WITH_AS(run.elicit(), doctest::Contains("locked by another process"),
                         PreconditionViolation);
    // The loser must not delete the winner's lock.
    CHECK(fs::exists(run.run_dir() / ".lock"));

    fs::remove(run.run_dir() / ".lock");
    CHECK_NOTHROW(run.elicit());
    CHECK_FALSE(fs::exists(run.run_dir() / ".lock"));
}

TEST_CASE("changed artifacts rotate aside instead of being overwritten") {
    testing::TempDir tmp;
    auto ws = testing::write_toy_workspace(tmp.path());
    {
        Run run(load_run_config(ws.config_path));
        run.elicit();
    }
    const fs::path drafts = tmp.path() / "runs/toy/toy_parity/drafts.jsonl";
    const std::string original = testing::slurp(drafts);

    // Same run id, different seed: the elicit artifact changes content.
    testing::ToyOptions opts;
    opts.seed = 4321;
    testing::write_toy_workspace(tmp.path(), opts);
    Run changed(load_run_config(ws.config_path));
    changed.elicit();

    const std::string fresh = testing::slurp(drafts);
    CHECK(fresh != original);
    REQUIRE(fs::exists(drafts.string() + ".v1"));
    CHECK(testing::slurp(drafts.string() + ".v1") == original);

    // The manifest tracks the live file, not the rotated copy.
    auto rec = changed.manifest().stages.at("elicit");
    CHECK(rec.artifacts.at("toy_parity/drafts.jsonl") == sha256_hex(fresh));

    // A third run back at the original seed rotates again rather than
    // clobbering the .v1 snapshot.
    testing::write_toy_workspace(tmp.path());
    Run back(load_run_config(ws.config_path));
    back.elicit();
    CHECK(fs::exists(drafts.string() + ".v2"));
    CHECK(testing::slurp(drafts.string() + ".v2") == fresh);
    CHECK(testing::slurp(drafts) == original);
}

TEST_CASE("status text lists all stages pending before any work") {
    testing::TempDir tmp;
    auto ws = testing::write_toy_workspace(tmp.path());
    Run run(load_run_config(ws.config_path));
    std::string status = run.status_text();
    for (const char* stage : {"elicit", "matrix", "select", "score", "build-dpo", "regen-sft",
                              "eval", "consistency", "analyze"}) {
        CHECK(status.find(stage) != std::string::npos);
    }
    CHECK(status.find("pending") != std::string::npos);
    CHECK(status.find("done") == std::string::npos);
}

TEST_CASE("eval stage resolves backend roles and validates demo shots") {
    testing::TempDir tmp;
    auto ws = testing::write_toy_workspace(tmp.path());
    Run run(load_run_config(ws.config_path));

    EvalOptions teacher;
    teacher.backend = "teacher";
    run.eval(teacher);
    CHECK(fs::exists(run.run_dir() / "eval/toy_parity.toy-teacher.0shot.json"));

    EvalOptions probe;
    probe.backend = "toy-probe";  // matrix models are addressable by name
    probe.shots = 1;
    run.eval(probe);
    CHECK(fs::exists(run.run_dir() / "eval/toy_parity.toy-probe.1shot.json"));

    EvalOptions aligned;
    aligned.backend = "aligned";
    CHECK_THROWS_WITH_AS(run.eval(aligned), doctest::Contains("aligned_teacher"), ConfigError);

    EvalOptions unknown;
    unknown.backend = "nobody";
    CHECK_THROWS_WITH_AS(run.eval(unknown), doctest::Contains("no backend named 'nobody'"),
                         PreconditionViolation);

    // Fixed-example demos come from the three seed questions.
    EvalOptions greedy;
    greedy.shots = 4;
    CHECK_THROWS_AS(run.eval(greedy), InsufficientDemoPool);

    // Draft-sourced demos need the elicit artifact first.
    EvalOptions from_drafts;
    from_drafts.demo_source = DemoSource::drafts;
    from_drafts.shots = 4;
    CHECK_THROWS_WITH_AS(run.eval(from_drafts), doctest::Contains("'elicit'"),
                         PreconditionViolation);
    run.elicit();
    run.eval(from_drafts);  // ten drafted questions cover four shots
    CHECK(fs::exists(run.run_dir() / "eval/toy_parity.toy-student.4shot.json"));
}

TEST_CASE("consistency and analyze guard their options") {
    testing::TempDir tmp;
    auto ws = testing::write_toy_workspace(tmp.path());
    Run run(load_run_config(ws.config_path));
    run.elicit();
    run.matrix();
    run.select();
    run.score();

    // More samples than eligible questions clamps to what exists.
    ConsistencyOptions lots;
    lots.samples = 50;
    run.consistency(lots);
    auto report = read_json(run.run_dir() / "analysis/toy_parity.consistency.json");
    CHECK(report["samples"] == 10);

    ConsistencyOptions none;
    none.samples = 0;
    CHECK_THROWS_AS(run.consistency(none), ConfigError);

    AnalyzeOptions narrow;
    narrow.bin_width_words = 0;
    CHECK_THROWS_AS(run.analyze(narrow), ConfigError);
    AnalyzeOptions fine;
    fine.bin_width_words = 5;
    run.analyze(fine);
    auto bins = read_json(run.run_dir() / "analysis/toy_parity.length_bins.json");
    CHECK(bins["bin_width_words"] == 5);
}

TEST_CASE("pooled irt shares the ability scale but selects per task") {
    testing::TempDir tmp;
    testing::ToyOptions opts;
    opts.pool_irt = true;
    auto ws = testing::write_toy_workspace(tmp.path(), opts);
    Run run(load_run_config(ws.config_path));
    run.matrix();
    run.select();

    std::vector<std::vector<AbilityParams>> abilities;
    for (const auto& task : ws.task_ids) {
        auto [items, abil] = load_irt_params_jsonl(run.run_dir() / task / "irt_params.jsonl");
        CHECK(items.size() == 12);  // only this task's columns
        CHECK(abil.size() == 4);
        auto sel = load_pref_selection(run.run_dir() / task / "pref_set.json");
        CHECK(sel.item_ids.size() == 5);
        abilities.push_back(std::move(abil));
    }
    // One pooled fit: both tasks carry the identical ability estimates.
    REQUIRE(abilities.size() == 2);
    for (std::size_t i = 0; i < abilities[0].size(); ++i) {
        CHECK(abilities[0][i].row_id == abilities[1][i].row_id);
        CHECK(abilities[0][i].theta == abilities[1][i].theta);
    }
}

TEST_CASE("selection refuses k beyond the validation set") {
    testing::TempDir tmp;
    auto ws = testing::write_toy_workspace(tmp.path());
    RunConfig cfg = load_run_config(ws.config_path);
    {
        Run run(cfg);
        run.matrix();
    }
    RunConfig greedy = cfg;
    greedy.k = 13;  // validation sets have 12 items
    Run run(greedy);
    CHECK_THROWS_WITH_AS(run.select(), doctest::Contains("exceeds the 12-item validation set"),
                         ConfigError);
}
