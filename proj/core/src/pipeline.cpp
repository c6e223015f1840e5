// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#include "tailor/pipeline.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <functional>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json_io.hpp"
#include "tailor/digest.hpp"
#include "tailor/dpo_builder.hpp"
#include "tailor/elicitation.hpp"
#include "tailor/irt.hpp"
#include "tailor/preference.hpp"
#include "tailor/rng.hpp"
#include "tailor/serialization.hpp"

namespace tailor {

namespace fs = std::filesystem;
using detail::json;

namespace {

std::string iso8601_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

bool safe_path_component(const std::string& id) {
    if (id.empty() || id == "." || id == "..") return false;
    for (char c : id) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                  c == '-' || c == '_' || c == '.';
        if (!ok) return false;
    }
    return true;
}

json backend_spec_to_json(const BackendSpec& b) {
    json j;
    j["name"] = b.name;
    j["kind"] = b.kind;
    if (b.fixture) j["fixture"] = *b.fixture;
    if (!b.alphabet.empty()) j["alphabet"] = b.alphabet;
    j["seed"] = b.seed;
    if (b.kind == "remote") {
        j["base_url"] = b.base_url;
        j["model"] = b.model;
        j["api_key_env"] = b.api_key_env;
        j["max_attempts"] = b.max_attempts;
        j["base_delay_ms"] = b.base_delay_ms;
        j["timeout_sec"] = b.timeout_sec;
    }
    return j;
}

BackendSpec backend_spec_from_json(const json& j, const fs::path& base) {
    BackendSpec b;
    b.name = detail::require_as<std::string, ConfigError>(j, "name");
    b.kind = detail::require_as<std::string, ConfigError>(j, "kind");
    if (auto it = j.find("fixture"); it != j.end() && !it->is_null()) {
        fs::path f = it->get<std::string>();
        if (f.is_relative()) f = base / f;
        b.fixture = f.string();
    }
    b.alphabet = detail::get_or<std::vector<std::string>, ConfigError>(j, "alphabet", {});
    b.seed = detail::get_or<std::uint64_t, ConfigError>(j, "seed", 0);
    b.base_url = detail::get_or<std::string, ConfigError>(j, "base_url", "");
    b.model = detail::get_or<std::string, ConfigError>(j, "model", "");
    b.api_key_env = detail::get_or<std::string, ConfigError>(j, "api_key_env", "OPENAI_API_KEY");
    b.max_attempts = detail::get_or<int, ConfigError>(j, "max_attempts", 5);
    b.base_delay_ms = detail::get_or<int, ConfigError>(j, "base_delay_ms", 1000);
    b.timeout_sec = detail::get_or<int, ConfigError>(j, "timeout_sec", 120);
    return b;
}

void validate_backend_spec(const BackendSpec& b, const std::string& role) {
    if (b.name.empty()) throw ConfigError(role + " backend needs a name");
    if (b.kind != "mock" && b.kind != "remote") {
        throw ConfigError(role + " backend kind must be 'mock' or 'remote', got '" + b.kind + "'");
    }
    if (b.kind == "remote") {
        if (b.base_url.empty()) throw ConfigError(role + " backend needs base_url");
        if (b.model.empty()) throw ConfigError(role + " backend needs model");
        if (b.max_attempts < 1) throw ConfigError(role + " backend max_attempts must be >= 1");
    } else if (!b.fixture && b.alphabet.empty()) {
        throw ConfigError(role + " mock backend needs a fixture or an answer alphabet");
    }
}

json config_to_json(const RunConfig& c) {
    json j;
    j["run_id"] = c.run_id;
    j["seed"] = c.seed;
    j["tasks"] = c.tasks;
    j["m"] = c.m;
    j["n"] = c.n;
    j["k"] = c.k;
    j["question_pairs"] = c.question_pairs;
    j["per_prompt_count"] = c.per_prompt_count;
    j["max_in_flight"] = c.max_in_flight;
    j["max_tokens"] = c.max_tokens;
    j["pool_irt"] = c.pool_irt;
    j["temperatures"] = {{"question_gen", c.temperatures.question_gen},
                         {"rationale", c.temperatures.rationale},
                         {"icl", c.temperatures.icl}};
    j["teacher"] = backend_spec_to_json(c.teacher);
    j["student"] = backend_spec_to_json(c.student);
    if (c.aligned_teacher) j["aligned_teacher"] = backend_spec_to_json(*c.aligned_teacher);
    json models = json::array();
    for (const auto& b : c.matrix_models) models.push_back(backend_spec_to_json(b));
    j["matrix_models"] = models;
    j["matrix_shots"] = c.matrix_shots;
    j["paths"] = {{"tasks_dir", c.paths.tasks_dir.string()},
                  {"runs_dir", c.paths.runs_dir.string()},
                  {"cache_dir", c.paths.cache_dir.string()},
                  {"validation_dir", c.paths.validation_dir.string()},
                  {"test_dir", c.paths.test_dir.string()}};
    return j;
}

// Holding the lock means exclusive use of a run directory; created with "wx"
// (O_EXCL) so two processes cannot both win.
class RunDirLock {
public:
    explicit RunDirLock(const fs::path& run_dir) : path_(run_dir / ".lock") {
        std::FILE* f = std::fopen(path_.string().c_str(), "wx");
        if (!f) {
            throw PreconditionViolation("run directory is locked by another process (" +
                                        path_.string() + "); remove the file if it is stale");
        }
        std::fprintf(f, "%d\n", static_cast<int>(::getpid()));
        std::fclose(f);
    }
    ~RunDirLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    RunDirLock(const RunDirLock&) = delete;
    RunDirLock& operator=(const RunDirLock&) = delete;

private:
    fs::path path_;
};

RunManifest manifest_from_json(const json& j) {
    RunManifest m;
    m.run_id = detail::get_or<std::string>(j, "run_id", "");
    m.config_digest = detail::get_or<std::string>(j, "config_digest", "");
    if (auto it = j.find("stages"); it != j.end() && it->is_object()) {
        for (const auto& [name, sj] : it->items()) {
            StageRecord rec;
            std::string status = detail::get_or<std::string>(sj, "status", "pending");
            if (status == "running") {
                rec.status = StageStatus::running;
            } else if (status == "done") {
                rec.status = StageStatus::done;
            } else if (status == "failed") {
                rec.status = StageStatus::failed;
            }
            rec.started_at = detail::get_or<std::string>(sj, "started_at", "");
            rec.finished_at = detail::get_or<std::string>(sj, "finished_at", "");
            rec.error = detail::get_or<std::string>(sj, "error", "");
            if (auto a = sj.find("artifacts"); a != sj.end() && a->is_object()) {
                for (const auto& [rel, digest] : a->items()) {
                    rec.artifacts[rel] = digest.get<std::string>();
                }
            }
            m.stages[name] = std::move(rec);
        }
    }
    return m;
}

json manifest_to_json(const RunManifest& m, const json& config_snapshot) {
    json stages = json::object();
    for (const auto& [name, rec] : m.stages) {
        json artifacts = json::object();
        for (const auto& [rel, digest] : rec.artifacts) artifacts[rel] = digest;
        stages[name] = json{{"status", std::string(to_string(rec.status))},
                            {"started_at", rec.started_at},
                            {"finished_at", rec.finished_at},
                            {"error", rec.error},
                            {"artifacts", artifacts}};
    }
    return json{{"run_id", m.run_id},
                {"config_digest", m.config_digest},
                {"config", config_snapshot},
                {"stages", stages}};
}

RunManifest read_manifest(const fs::path& run_dir, const RunConfig& cfg) {
    fs::path p = run_dir / "manifest.json";
    if (!fs::exists(p)) {
        RunManifest m;
        m.run_id = cfg.run_id;
        m.config_digest = sha256_hex(config_to_json(cfg).dump());
        return m;
    }
    try {
        return manifest_from_json(json::parse(read_text_file(p)));
    } catch (const json::exception& e) {
        throw IoError(p.string() + ": " + e.what());
    }
}

// The manifest is mutable run state, rewritten in place (unlike artifacts,
// which are versioned).
void write_manifest(const fs::path& run_dir, const RunManifest& m, const json& config_snapshot) {
    fs::path p = run_dir / "manifest.json";
    fs::path tmp = p;
    tmp += ".tmp";
    write_text_file(tmp, manifest_to_json(m, config_snapshot).dump(2) + "\n");
    std::error_code ec;
    fs::rename(tmp, p, ec);
    if (ec) throw IoError("cannot write manifest: " + p.string());
}

std::string drafts_rel(const std::string& task_id) { return task_id + "/drafts.jsonl"; }
std::string matrix_rel(const std::string& task_id) { return task_id + "/matrix.csv"; }
std::string params_rel(const std::string& task_id) { return task_id + "/irt_params.jsonl"; }
std::string pref_rel(const std::string& task_id) { return task_id + "/pref_set.json"; }
std::string scores_rel(const std::string& task_id) { return task_id + "/scores.jsonl"; }

}  // namespace

std::string_view to_string(StageStatus s) {
    switch (s) {
        case StageStatus::pending: return "pending";
        case StageStatus::running: return "running";
        case StageStatus::done: return "done";
        case StageStatus::failed: return "failed";
    }
    return "pending";
}

void RunConfig::validate() const {
    if (!safe_path_component(run_id)) {
        throw ConfigError("run_id must be non-empty and use only [A-Za-z0-9._-]: '" + run_id +
                          "'");
    }
    if (tasks.empty()) throw ConfigError("config lists no tasks");
    std::set<std::string> task_set(tasks.begin(), tasks.end());
    if (task_set.size() != tasks.size()) throw ConfigError("task list contains duplicates");
    for (const auto& t : tasks) {
        if (!safe_path_component(t)) {
            throw ConfigError("task ids must use only [A-Za-z0-9._-]: '" + t + "'");
        }
    }
    if (m < 1) throw ConfigError("m must be >= 1");
    if (n < 1) throw ConfigError("n must be >= 1");
    if (k < 1) throw ConfigError("k must be >= 1");
    if (question_pairs < 0) throw ConfigError("question_pairs must be >= 0");
    if (question_pairs > 0 && m < 8) {
        throw ConfigError("question-level pairs need m >= 8 drafts (quartiles of at least 2); "
                          "got m=" + std::to_string(m));
    }
    if (per_prompt_count < 1) throw ConfigError("per_prompt_count must be >= 1");
    if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
    for (double t : {temperatures.question_gen, temperatures.rationale, temperatures.icl}) {
        if (!(t >= 0.0 && t <= 2.0)) throw ConfigError("temperatures must be within [0, 2]");
    }
    validate_backend_spec(teacher, "teacher");
    validate_backend_spec(student, "student");
    if (aligned_teacher) validate_backend_spec(*aligned_teacher, "aligned_teacher");
    if (matrix_shots.empty()) throw ConfigError("matrix_shots must list at least one shot count");
    for (int s : matrix_shots) {
        if (s < 0) throw ConfigError("matrix_shots entries must be >= 0");
    }
    for (const auto& b : matrix_models) validate_backend_spec(b, "matrix model");
}

RunConfig load_run_config(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");

    try {
        RunConfig c;
        c.run_id = detail::require_as<std::string, ConfigError>(j, "run_id");
        c.seed = detail::get_or<std::uint64_t, ConfigError>(j, "seed", 0);
        c.tasks = detail::require_as<std::vector<std::string>, ConfigError>(j, "tasks");
        c.m = detail::get_or<int, ConfigError>(j, "m", 250);
        c.n = detail::get_or<int, ConfigError>(j, "n", 4);
        c.k = detail::get_or<int, ConfigError>(j, "k", 40);
        c.question_pairs = detail::get_or<int, ConfigError>(j, "question_pairs", 50);
        c.per_prompt_count = detail::get_or<int, ConfigError>(j, "per_prompt_count", 5);
        c.max_in_flight = detail::get_or<int, ConfigError>(j, "max_in_flight", 8);
        c.max_tokens = detail::get_or<int, ConfigError>(j, "max_tokens", 1024);
        c.pool_irt = detail::get_or<bool, ConfigError>(j, "pool_irt", false);
        if (auto it = j.find("temperatures"); it != j.end() && !it->is_null()) {
            c.temperatures.question_gen =
                detail::get_or<double, ConfigError>(*it, "question_gen", 1.0);
            c.temperatures.rationale = detail::get_or<double, ConfigError>(*it, "rationale", 0.0);
            c.temperatures.icl = detail::get_or<double, ConfigError>(*it, "icl", 0.0);
        }
        c.teacher = backend_spec_from_json(detail::require<ConfigError>(j, "teacher"), base);
        c.student = backend_spec_from_json(detail::require<ConfigError>(j, "student"), base);
        if (auto it = j.find("aligned_teacher"); it != j.end() && !it->is_null()) {
            c.aligned_teacher = backend_spec_from_json(*it, base);
        }
        if (auto it = j.find("matrix_models"); it != j.end() && !it->is_null()) {
            for (const auto& e : *it) c.matrix_models.push_back(backend_spec_from_json(e, base));
        }
        if (c.matrix_models.empty()) c.matrix_models.push_back(c.student);
        if (auto it = j.find("matrix_shots"); it != j.end() && !it->is_null()) {
            c.matrix_shots = it->get<std::vector<int>>();
        }
        if (auto it = j.find("paths"); it != j.end() && !it->is_null()) {
            c.paths.tasks_dir = detail::get_or<std::string, ConfigError>(*it, "tasks_dir", "tasks");
            c.paths.runs_dir = detail::get_or<std::string, ConfigError>(*it, "runs_dir", "runs");
            c.paths.cache_dir = detail::get_or<std::string, ConfigError>(*it, "cache_dir", "cache");
            c.paths.validation_dir =
                detail::get_or<std::string, ConfigError>(*it, "validation_dir", "validation");
            c.paths.test_dir = detail::get_or<std::string, ConfigError>(*it, "test_dir", "test");
        }
        for (fs::path* p : {&c.paths.tasks_dir, &c.paths.runs_dir, &c.paths.cache_dir,
                            &c.paths.validation_dir, &c.paths.test_dir}) {
            if (p->is_relative()) *p = base / *p;
        }
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

struct Run::State {
    BackendRegistry registry;
    std::unordered_map<std::string, BackendId> backend_ids;

    BackendId ensure_backend(const BackendSpec& spec) {
        if (auto it = backend_ids.find(spec.name); it != backend_ids.end()) return it->second;
        BackendId id;
        if (spec.kind == "mock") {
            if (spec.fixture) {
                id = registry.mock_from_fixture(spec.name, *spec.fixture, spec.alphabet, spec.seed);
            } else {
                MockBackendConfig mc;
                mc.name = spec.name;
                mc.answer_alphabet = spec.alphabet;
                mc.seed = spec.seed;
                id = registry.register_mock(std::move(mc));
            }
        } else {
            RemoteBackendConfig rc;
            rc.name = spec.name;
            rc.base_url = spec.base_url;
            rc.model = spec.model;
            rc.api_key_env = spec.api_key_env;
            rc.retry.max_attempts = spec.max_attempts;
            rc.retry.base_delay_ms = spec.base_delay_ms;
            rc.timeout_sec = spec.timeout_sec;
            id = registry.register_remote(std::move(rc));
        }
        backend_ids.emplace(spec.name, id);
        return id;
    }

    BackendId id_of(const std::string& name) const {
        auto it = backend_ids.find(name);
        if (it == backend_ids.end()) {
            throw PreconditionViolation("no backend named '" + name + "' in this run");
        }
        return it->second;
    }
};

Run::Run(RunConfig cfg) : cfg_(std::move(cfg)), state_(std::make_shared<State>()) {
    cfg_.validate();
    state_->registry.set_cache_dir(cfg_.paths.cache_dir);
    state_->ensure_backend(cfg_.teacher);
    state_->ensure_backend(cfg_.student);
    if (cfg_.aligned_teacher) state_->ensure_backend(*cfg_.aligned_teacher);
    for (const auto& b : cfg_.matrix_models) state_->ensure_backend(b);
}

fs::path Run::run_dir() const { return cfg_.paths.runs_dir / cfg_.run_id; }

RunManifest Run::manifest() const { return read_manifest(run_dir(), cfg_); }

BackendStats Run::backend_stats(const std::string& name) const {
    return state_->registry.stats(state_->id_of(name));
}

namespace {

// Everything one stage invocation needs to read inputs and write artifacts.
class StageContext {
public:
    StageContext(const RunConfig& cfg, const fs::path& run_dir) : cfg_(cfg), run_dir_(run_dir) {}

    // Write-or-keep with versioning. The writer fills a temp file; identical
    // bytes leave the existing artifact untouched, changed bytes rotate the
    // old file aside as <name>.v<N> before the rename.
    template <typename WriteFn>
    std::string put_artifact(const std::string& rel, WriteFn&& write) {
        fs::path abs = run_dir_ / rel;
        std::error_code ec;
        if (abs.has_parent_path()) fs::create_directories(abs.parent_path(), ec);
        fs::path tmp = abs;
        tmp += ".tmp";
        write(tmp);
        std::string fresh = read_text_file(tmp);
        if (fs::exists(abs)) {
            if (read_text_file(abs) == fresh) {
                fs::remove(tmp, ec);
                written_[rel] = sha256_hex(fresh);
                return written_[rel];
            }
            int v = 1;
            fs::path rotated;
            do {
                rotated = abs;
                rotated += ".v" + std::to_string(v++);
            } while (fs::exists(rotated));
            fs::rename(abs, rotated, ec);
            if (ec) throw IoError("cannot rotate artifact: " + abs.string());
        }
        fs::rename(tmp, abs, ec);
        if (ec) throw IoError("cannot finalize artifact: " + abs.string());
        written_[rel] = sha256_hex(fresh);
        return written_[rel];
    }

    std::string put_text(const std::string& rel, const std::string& content) {
        return put_artifact(rel, [&](const fs::path& tmp) { write_text_file(tmp, content); });
    }

    std::string put_json(const std::string& rel, const json& j) {
        return put_text(rel, j.dump(2) + "\n");
    }

    // Fails fast naming the missing artifact and the stage that makes it.
    void need_artifact(const std::string& rel, const std::string& producer) const {
        if (!fs::exists(run_dir_ / rel)) {
            throw PreconditionViolation("missing artifact '" + rel + "' (produced by the '" +
                                        producer + "' stage); run that stage first");
        }
    }

    void need_input(const fs::path& p, const std::string& what) const {
        if (!fs::exists(p)) throw ConfigError("missing " + what + ": " + p.string());
    }

    fs::path abs(const std::string& rel) const { return run_dir_ / rel; }
    const std::map<std::string, std::string>& written() const { return written_; }

    TaskSpec task(const std::string& task_id) const {
        fs::path p = cfg_.paths.tasks_dir / (task_id + ".json");
        need_input(p, "task file");
        TaskSpec t = load_task_spec(p);
        if (t.task_id != task_id) {
            throw ConfigError("task file " + p.string() + " declares task_id '" + t.task_id + "'");
        }
        if (static_cast<int>(t.strategy_prompts.size()) < cfg_.n) {
            throw ConfigError("task '" + task_id + "' provides " +
                              std::to_string(t.strategy_prompts.size()) +
                              " strategy prompts but config n=" + std::to_string(cfg_.n));
        }
        // The run uses exactly n strategies, taken in file order.
        t.strategy_prompts.resize(static_cast<std::size_t>(cfg_.n));
        return t;
    }

    std::vector<QAPair> validation_items(const std::string& task_id) const {
        fs::path p = cfg_.paths.validation_dir / (task_id + ".jsonl");
        need_input(p, "validation set");
        auto items = load_qa_jsonl(p);
        if (items.empty()) throw ConfigError("validation set is empty: " + p.string());
        return items;
    }

    std::vector<QAPair> test_items(const std::string& task_id) const {
        fs::path p = cfg_.paths.test_dir / (task_id + ".jsonl");
        need_input(p, "test set");
        auto items = load_qa_jsonl(p);
        if (items.empty()) throw ConfigError("test set is empty: " + p.string());
        return items;
    }

private:
    const RunConfig& cfg_;
    fs::path run_dir_;
    std::map<std::string, std::string> written_;
};

// Runs one stage under the run lock and records the outcome (plus any
// artifacts written before a failure) in the manifest.
void drive_stage(const RunConfig& cfg, const fs::path& run_dir, const std::string& stage_name,
                 const std::function<void(StageContext&)>& body) {
    std::error_code ec;
    fs::create_directories(run_dir, ec);
    if (ec) throw IoError("cannot create run dir: " + run_dir.string());

    RunDirLock lock(run_dir);
    StageContext ctx(cfg, run_dir);
    const json snapshot = config_to_json(cfg);

    RunManifest m = read_manifest(run_dir, cfg);
    m.run_id = cfg.run_id;
    m.config_digest = sha256_hex(snapshot.dump());
    {
        auto& rec = m.stages[stage_name];
        rec.status = StageStatus::running;
        rec.started_at = iso8601_now();
        rec.finished_at.clear();
        rec.error.clear();
    }
    write_manifest(run_dir, m, snapshot);

    try {
        body(ctx);
    } catch (const std::exception& e) {
        auto& rec = m.stages[stage_name];
        rec.status = StageStatus::failed;
        rec.finished_at = iso8601_now();
        rec.error = e.what();
        for (const auto& [rel, digest] : ctx.written()) rec.artifacts[rel] = digest;
        write_manifest(run_dir, m, snapshot);
        throw;
    }
    auto& rec = m.stages[stage_name];
    rec.status = StageStatus::done;
    rec.finished_at = iso8601_now();
    for (const auto& [rel, digest] : ctx.written()) rec.artifacts[rel] = digest;
    write_manifest(run_dir, m, snapshot);
}

// Score lookup across a task's records; question-level records key on the
// question id.
struct ScoreIndex {
    std::unordered_map<std::string, double> rationale;
    std::unordered_map<std::string, double> question;

    explicit ScoreIndex(const std::vector<ScoreRecord>& records) {
        for (const auto& r : records) {
            if (r.level == ScoreLevel::rationale) {
                rationale[r.subject_id] = r.score;
            } else {
                question[r.subject_id] = r.score;
            }
        }
    }
};

// Drafts grouped by question, preserving first-seen question order and the
// rationale order within each question.
struct DraftGroup {
    DraftQuestion question;
    std::vector<Rationale> rationales;
};

std::vector<DraftGroup> group_drafts(const std::vector<DraftExample>& drafts) {
    std::vector<DraftGroup> groups;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& d : drafts) {
        auto [it, fresh] = index.emplace(d.question.id, groups.size());
        if (fresh) groups.push_back(DraftGroup{d.question, {}});
        groups[it->second].rationales.push_back(d.rationale);
    }
    return groups;
}

json eval_report_to_json(const EvalReport& r) {
    json per_item = json::array();
    for (const auto& it : r.per_item) {
        per_item.push_back({{"item_id", it.item_id},
                            {"correct", it.correct},
                            {"degraded", it.degraded},
                            {"diagnostic", it.diagnostic}});
    }
    return json{{"task_id", r.task_id},
                {"model", r.model},
                {"shots", r.shots},
                {"accuracy", r.accuracy},
                {"total", r.total},
                {"correct_count", r.correct_count},
                {"degraded_count", r.degraded_count},
                {"per_item", per_item}};
}

json trainer_settings_to_json(const TrainerSettings& t) {
    return json{{"dpo_beta", t.dpo_beta},
                {"dpo_learning_rate", t.dpo_learning_rate},
                {"dpo_batch_size", t.dpo_batch_size},
                {"dpo_epochs", t.dpo_epochs},
                {"dpo_warmup_ratio", t.dpo_warmup_ratio},
                {"dpo_schedule", t.dpo_schedule},
                {"sft_learning_rate", t.sft_learning_rate},
                {"sft_epochs", t.sft_epochs},
                {"sft_warmup_ratio", t.sft_warmup_ratio},
                {"sft_schedule", t.sft_schedule},
                {"optimizer", t.optimizer}};
}

}  // namespace

void Run::elicit() {
    drive_stage(cfg_, run_dir(), "elicit", [&](StageContext& ctx) {
        BackendId teacher = state_->id_of(cfg_.teacher.name);
        for (const auto& task_id : cfg_.tasks) {
            TaskSpec task = ctx.task(task_id);
            std::uint64_t base_seed = mix_seed(cfg_.seed, digest_u64("elicit|" + task_id));
            ElicitDiagnostics qdiag;
            auto questions = elicit_questions(state_->registry, teacher, task, cfg_.m,
                                              cfg_.temperatures.question_gen, base_seed,
                                              cfg_.per_prompt_count, cfg_.max_in_flight,
                                              cfg_.max_tokens, &qdiag);
            std::vector<DraftExample> examples;
            examples.reserve(questions.size() * static_cast<std::size_t>(cfg_.n));
            for (const auto& q : questions) {
                std::vector<std::string> notes;
                auto rationales = elicit_rationales(state_->registry, teacher, task, q,
                                                    cfg_.temperatures.rationale,
                                                    cfg_.max_in_flight, cfg_.max_tokens, &notes);
                for (auto& r : rationales) {
                    examples.push_back(DraftExample{q, std::move(r)});
                }
            }
            ctx.put_artifact(drafts_rel(task_id), [&](const fs::path& tmp) {
                save_drafts_jsonl(examples, tmp);
            });
        }
    });
}

void Run::matrix() {
    drive_stage(cfg_, run_dir(), "matrix", [&](StageContext& ctx) {
        std::vector<BackendId> models;
        models.reserve(cfg_.matrix_models.size());
        for (const auto& b : cfg_.matrix_models) models.push_back(state_->id_of(b.name));
        for (const auto& task_id : cfg_.tasks) {
            TaskSpec task = ctx.task(task_id);
            auto items = ctx.validation_items(task_id);
            std::uint64_t seed = mix_seed(cfg_.seed, digest_u64("matrix|" + task_id));
            ScoreMatrix m = build_score_matrix(state_->registry, models, task, items,
                                               cfg_.matrix_shots, task.seed_questions, seed,
                                               cfg_.max_in_flight, cfg_.temperatures.icl,
                                               cfg_.max_tokens);
            ctx.put_text(matrix_rel(task_id), matrix_to_csv(m));
        }
    });
}

void Run::select() {
    drive_stage(cfg_, run_dir(), "select", [&](StageContext& ctx) {
        for (const auto& task_id : cfg_.tasks) ctx.need_artifact(matrix_rel(task_id), "matrix");

        std::vector<ScoreMatrix> matrices;
        matrices.reserve(cfg_.tasks.size());
        for (const auto& task_id : cfg_.tasks) {
            matrices.push_back(read_matrix_csv(ctx.abs(matrix_rel(task_id))));
            if (static_cast<std::size_t>(cfg_.k) > matrices.back().cols()) {
                throw ConfigError("k=" + std::to_string(cfg_.k) + " exceeds the " +
                                  std::to_string(matrices.back().cols()) +
                                  "-item validation set of task '" + task_id + "'");
            }
        }

        // Per-task fits by default. Pooled mode concatenates every task's
        // columns (subject rows must line up) and fits once so the ability
        // scale is shared; selection still happens within each task's own
        // columns.
        std::vector<std::vector<ItemParams>> task_items(cfg_.tasks.size());
        std::vector<std::vector<AbilityParams>> task_abilities(cfg_.tasks.size());
        if (cfg_.pool_irt) {
            ScoreMatrix pooled;
            pooled.row_ids = matrices.front().row_ids;
            for (std::size_t t = 0; t < matrices.size(); ++t) {
                if (matrices[t].row_ids != pooled.row_ids) {
                    throw DegenerateMatrix(
                        "pooled fit needs identical subject rows across tasks; '" +
                        cfg_.tasks[t] + "' differs");
                }
                for (const auto& id : matrices[t].item_ids) pooled.item_ids.push_back(id);
            }
            pooled.cells.resize(pooled.rows() * pooled.cols());
            std::size_t col_base = 0;
            for (const auto& m : matrices) {
                for (std::size_t r = 0; r < m.rows(); ++r) {
                    for (std::size_t c = 0; c < m.cols(); ++c) {
                        pooled.set(r, col_base + c, m.at(r, c));
                    }
                }
                col_base += m.cols();
            }
            FitResult fit = fit_2pl(pooled);
            col_base = 0;
            for (std::size_t t = 0; t < matrices.size(); ++t) {
                auto first = fit.items.begin() + static_cast<std::ptrdiff_t>(col_base);
                task_items[t].assign(first, first + static_cast<std::ptrdiff_t>(matrices[t].cols()));
                task_abilities[t] = fit.abilities;
                col_base += matrices[t].cols();
            }
        } else {
            for (std::size_t t = 0; t < matrices.size(); ++t) {
                FitResult fit = fit_2pl(matrices[t]);
                task_items[t] = std::move(fit.items);
                task_abilities[t] = std::move(fit.abilities);
            }
        }

        for (std::size_t t = 0; t < cfg_.tasks.size(); ++t) {
            const auto& task_id = cfg_.tasks[t];
            auto top = select_top_k(task_items[t], cfg_.k);
            ctx.put_artifact(params_rel(task_id), [&](const fs::path& tmp) {
                save_irt_params_jsonl(task_items[t], task_abilities[t], tmp);
            });
            ctx.put_artifact(pref_rel(task_id), [&](const fs::path& tmp) {
                save_pref_selection(PrefSelection{task_id, top}, tmp);
            });
        }
    });
}

void Run::score() {
    drive_stage(cfg_, run_dir(), "score", [&](StageContext& ctx) {
        BackendId student = state_->id_of(cfg_.student.name);
        for (const auto& task_id : cfg_.tasks) {
            ctx.need_artifact(drafts_rel(task_id), "elicit");
            ctx.need_artifact(pref_rel(task_id), "select");

            TaskSpec task = ctx.task(task_id);
            auto drafts = load_drafts_jsonl(ctx.abs(drafts_rel(task_id)));
            auto selection = load_pref_selection(ctx.abs(pref_rel(task_id)));
            auto validation = ctx.validation_items(task_id);

            std::unordered_map<std::string, const QAPair*> by_id;
            for (const auto& item : validation) by_id[item_id_for(item)] = &item;

            PreferenceSet pref;
            pref.task_id = task_id;
            pref.source = PreferenceSource::irt_selected;
            pref.items.reserve(selection.item_ids.size());
            for (const auto& id : selection.item_ids) {
                auto it = by_id.find(id);
                if (it == by_id.end()) {
                    throw IoError("preference item '" + id +
                                  "' is not in the validation set for task '" + task_id +
                                  "'; was the validation file changed after selection?");
                }
                pref.items.push_back(*it->second);
            }

            std::vector<ScoreRecord> records;
            for (const auto& group : group_drafts(drafts)) {
                std::vector<ScoreRecord> rationale_records;
                rationale_records.reserve(group.rationales.size());
                for (const auto& r : group.rationales) {
                    DraftExample ex{group.question, r};
                    rationale_records.push_back(
                        score_rationale(state_->registry, student, task, ex, pref,
                                        cfg_.max_in_flight, cfg_.temperatures.icl,
                                        cfg_.max_tokens));
                }
                ScoreRecord qrec = score_question(rationale_records);
                for (auto& rr : rationale_records) records.push_back(std::move(rr));
                records.push_back(std::move(qrec));
            }
            ctx.put_artifact(scores_rel(task_id), [&](const fs::path& tmp) {
                save_score_records_jsonl(records, tmp);
            });
        }
    });
}

void Run::build_dpo(const BuildDpoOptions& opts) {
    drive_stage(cfg_, run_dir(), "build-dpo", [&](StageContext& ctx) {
        const int qpairs_per_task = opts.question_pairs.value_or(cfg_.question_pairs);
        if (qpairs_per_task < 0) throw ConfigError("question_pairs must be >= 0");

        std::vector<PreferencePair> all_question_pairs;
        std::vector<PreferencePair> all_rationale_pairs;
        std::vector<std::string> skipped;
        std::vector<std::string> task_errors;
        json per_task = json::object();

        for (const auto& task_id : cfg_.tasks) {
            ctx.need_artifact(drafts_rel(task_id), "elicit");
            ctx.need_artifact(scores_rel(task_id), "score");

            TaskSpec task = ctx.task(task_id);
            auto drafts = load_drafts_jsonl(ctx.abs(drafts_rel(task_id)));
            ScoreIndex scores(load_score_records_jsonl(ctx.abs(scores_rel(task_id))));

            std::vector<DraftQuestion> scored_questions;
            std::vector<RationalePairInput> inputs;
            for (auto& group : group_drafts(drafts)) {
                auto qit = scores.question.find(group.question.id);
                if (qit == scores.question.end()) {
                    throw MissingScoreSet("question '" + group.question.id +
                                          "' has no question-level score record");
                }
                DraftQuestion q = group.question;
                q.pref_score = qit->second;
                scored_questions.push_back(q);

                RationalePairInput input;
                input.question = q;
                for (auto& r : group.rationales) {
                    auto rit = scores.rationale.find(r.id);
                    if (rit == scores.rationale.end()) {
                        throw MissingScoreSet("rationale '" + r.id + "' has no score record");
                    }
                    r.pref_score = rit->second;
                    input.rationales.push_back(std::move(r));
                }
                inputs.push_back(std::move(input));
            }

            // Degenerate score distributions fail only their own task; the
            // rest of the run keeps going.
            std::size_t q_count = 0, r_count = 0;
            if (opts.include_question_pairs && qpairs_per_task > 0) {
                try {
                    auto pairs = build_question_pairs(
                        task, scored_questions, qpairs_per_task,
                        mix_seed(cfg_.seed, digest_u64("qpairs|" + task_id)),
                        cfg_.per_prompt_count);
                    q_count = pairs.size();
                    for (auto& p : pairs) all_question_pairs.push_back(std::move(p));
                } catch (const DegenerateData& e) {
                    task_errors.push_back(task_id + ": " + e.what());
                }
            }
            if (opts.include_rationale_pairs) {
                auto pairs = build_rationale_pairs(task, inputs, &skipped);
                r_count = pairs.size();
                for (auto& p : pairs) all_rationale_pairs.push_back(std::move(p));
            }
            per_task[task_id] = {{"question_pairs", q_count}, {"rationale_pairs", r_count}};
        }

        if (all_question_pairs.empty() && all_rationale_pairs.empty()) {
            std::string detail = task_errors.empty() ? "no pairs produced" : task_errors.front();
            throw QuartilesDegenerate("no task produced any preference pair: " + detail);
        }

        ExportCounts counts;
        ctx.put_artifact("dpo.jsonl", [&](const fs::path& tmp) {
            counts = mix_and_export(all_question_pairs, all_rationale_pairs, tmp,
                                    mix_seed(cfg_.seed, digest_u64("mix")));
            auto problems = validate_dpo_jsonl(tmp);
            if (!problems.empty()) {
                throw Error("exported dataset failed validation: " + problems.front());
            }
        });

        ctx.put_json("dpo_manifest.json",
                     json{{"counts",
                           {{"question_pairs", counts.question_pairs},
                            {"rationale_pairs", counts.rationale_pairs},
                            {"total", counts.total}}},
                          {"per_task", per_task},
                          {"skipped", skipped},
                          {"task_errors", task_errors},
                          {"seed", cfg_.seed},
                          {"trainer", trainer_settings_to_json(TrainerSettings{})}});
    });
}

void Run::regen_sft() {
    drive_stage(cfg_, run_dir(), "regen-sft", [&](StageContext& ctx) {
        const BackendSpec& spec = cfg_.aligned_teacher ? *cfg_.aligned_teacher : cfg_.teacher;
        BackendId aligned = state_->id_of(spec.name);

        std::map<std::string, TaskSpec> tasks;
        std::vector<DraftExample> all_examples;
        std::vector<std::string> notes;
        json per_task = json::object();

        for (const auto& task_id : cfg_.tasks) {
            TaskSpec task = ctx.task(task_id);
            std::uint64_t base_seed = mix_seed(cfg_.seed, digest_u64("regen|" + task_id));
            auto examples = regenerate_tailored(state_->registry, aligned, task, cfg_.m, base_seed,
                                                cfg_.per_prompt_count, cfg_.max_in_flight,
                                                cfg_.max_tokens, &notes);
            ctx.put_artifact(task_id + "/regen_drafts.jsonl", [&](const fs::path& tmp) {
                save_drafts_jsonl(examples, tmp);
            });
            per_task[task_id] = examples.size();
            tasks.emplace(task_id, std::move(task));
            for (auto& e : examples) all_examples.push_back(std::move(e));
        }

        std::size_t total = 0;
        ctx.put_artifact("sft.jsonl", [&](const fs::path& tmp) {
            total = export_sft(tasks, all_examples, tmp);
            auto problems = validate_sft_jsonl(tmp);
            if (!problems.empty()) {
                throw Error("exported dataset failed validation: " + problems.front());
            }
        });

        ctx.put_json("sft_manifest.json",
                     json{{"records", total},
                          {"per_task", per_task},
                          {"backend", spec.name},
                          {"notes", notes},
                          {"seed", cfg_.seed},
                          {"trainer", trainer_settings_to_json(TrainerSettings{})}});
    });
}

void Run::eval(const EvalOptions& opts) {
    drive_stage(cfg_, run_dir(), "eval", [&](StageContext& ctx) {
        std::string name;
        if (opts.backend == "student") {
            name = cfg_.student.name;
        } else if (opts.backend == "teacher") {
            name = cfg_.teacher.name;
        } else if (opts.backend == "aligned") {
            if (!cfg_.aligned_teacher) {
                throw ConfigError("eval backend 'aligned' needs aligned_teacher in the config");
            }
            name = cfg_.aligned_teacher->name;
        } else {
            name = opts.backend;
        }
        BackendId model = state_->id_of(name);
        if (opts.shots < 0) throw ConfigError("shots must be >= 0");

        for (const auto& task_id : cfg_.tasks) {
            TaskSpec task = ctx.task(task_id);
            auto test_set = ctx.test_items(task_id);

            std::vector<QAPair> demo_pool;
            if (opts.demo_source == DemoSource::fixed_examples) {
                demo_pool = task.seed_questions;
            } else {
                ctx.need_artifact(drafts_rel(task_id), "elicit");
                auto drafts = load_drafts_jsonl(ctx.abs(drafts_rel(task_id)));
                for (const auto& g : group_drafts(drafts)) {
                    demo_pool.push_back(QAPair{g.question.input, g.question.target});
                }
            }

            EvalConfig ecfg;
            ecfg.shots = opts.shots;
            ecfg.demo_source = opts.demo_source;
            ecfg.seed = mix_seed(cfg_.seed, digest_u64("eval|" + task_id));
            EvalReport report = evaluate(state_->registry, model, task, test_set, demo_pool, ecfg,
                                         cfg_.max_in_flight);
            report.model = name;

            std::string rel = "eval/" + task_id + "." + name + "." +
                              std::to_string(opts.shots) + "shot.json";
            ctx.put_json(rel, eval_report_to_json(report));
        }
    });
}

void Run::consistency(const ConsistencyOptions& opts) {
    drive_stage(cfg_, run_dir(), "consistency", [&](StageContext& ctx) {
        if (opts.samples < 1) throw ConfigError("samples must be >= 1");
        BackendId student = state_->id_of(cfg_.student.name);

        for (const auto& task_id : cfg_.tasks) {
            ctx.need_artifact(drafts_rel(task_id), "elicit");
            ctx.need_artifact(scores_rel(task_id), "score");

            TaskSpec task = ctx.task(task_id);
            auto drafts = load_drafts_jsonl(ctx.abs(drafts_rel(task_id)));
            ScoreIndex scores(load_score_records_jsonl(ctx.abs(scores_rel(task_id))));
            auto validation = ctx.validation_items(task_id);

            PreferenceSet full;
            full.task_id = task_id;
            full.items = validation;
            full.source = PreferenceSource::full_validation;

            // Only questions with two or more scored rationales say anything
            // about best/worst agreement.
            std::vector<DraftGroup> eligible;
            for (auto& g : group_drafts(drafts)) {
                if (g.rationales.size() >= 2) eligible.push_back(std::move(g));
            }
            SplitMix64 rng(mix_seed(cfg_.seed, digest_u64("consistency|" + task_id)));
            std::size_t want =
                std::min<std::size_t>(static_cast<std::size_t>(opts.samples), eligible.size());
            auto picks = sample_indices(eligible.size(), want, rng);
            std::sort(picks.begin(), picks.end());

            std::vector<DoubleScoredDraft> doubles;
            doubles.reserve(picks.size());
            for (std::size_t pick : picks) {
                const auto& g = eligible[pick];
                DoubleScoredDraft d;
                d.question_id = g.question.id;
                for (const auto& r : g.rationales) {
                    auto it = scores.rationale.find(r.id);
                    if (it == scores.rationale.end()) {
                        throw MissingScoreSet("rationale '" + r.id + "' has no score record");
                    }
                    DraftExample ex{g.question, r};
                    ScoreRecord val = score_rationale(state_->registry, student, task, ex, full,
                                                      cfg_.max_in_flight, cfg_.temperatures.icl,
                                                      cfg_.max_tokens);
                    d.strategy_indices.push_back(r.strategy_index);
                    d.pref_scores.push_back(it->second);
                    d.val_scores.push_back(val.score);
                }
                doubles.push_back(std::move(d));
            }

            ConsistencyReport report = consistency_check(doubles);
            ctx.put_json("analysis/" + task_id + ".consistency.json",
                         json{{"task_id", task_id},
                              {"top_match_rate", report.top_match_rate},
                              {"bottom_match_rate", report.bottom_match_rate},
                              {"samples", report.samples}});
        }
    });
}

void Run::analyze(const AnalyzeOptions& opts) {
    drive_stage(cfg_, run_dir(), "analyze", [&](StageContext& ctx) {
        if (opts.bin_width_words < 1) throw ConfigError("bin width must be >= 1");

        for (const auto& task_id : cfg_.tasks) {
            ctx.need_artifact(drafts_rel(task_id), "elicit");
            ctx.need_artifact(scores_rel(task_id), "score");

            auto drafts = load_drafts_jsonl(ctx.abs(drafts_rel(task_id)));
            ScoreIndex scores(load_score_records_jsonl(ctx.abs(scores_rel(task_id))));

            std::vector<Rationale> rationales;
            rationales.reserve(drafts.size());
            for (const auto& d : drafts) {
                Rationale r = d.rationale;
                if (auto it = scores.rationale.find(r.id); it != scores.rationale.end()) {
                    r.pref_score = it->second;
                }
                rationales.push_back(std::move(r));
            }

            LengthAnalysis analysis = length_bin_analysis(rationales, opts.bin_width_words);
            json bins = json::array();
            for (const auto& b : analysis.bins) {
                bins.push_back(
                    {{"lo", b.lo}, {"hi", b.hi}, {"mean_score", b.mean_score}, {"count", b.count}});
            }
            ctx.put_json("analysis/" + task_id + ".length_bins.json",
                         json{{"task_id", task_id},
                              {"bin_width_words", opts.bin_width_words},
                              {"bins", bins},
                              {"pearson_r", analysis.pearson_r},
                              {"total", analysis.total}});
        }
    });
}

std::string Run::status_text() const {
    static const char* kOrder[] = {"elicit",    "matrix", "select",      "score",  "build-dpo",
                                   "regen-sft", "eval",   "consistency", "analyze"};
    RunManifest m = manifest();
    std::ostringstream out;
    out << "run " << cfg_.run_id << "\n";
    out << "config digest " << m.config_digest << "\n";
    std::set<std::string> listed;
    auto line = [&](const std::string& name, const StageRecord& rec) {
        out << "  " << name;
        for (std::size_t i = name.size(); i < 12; ++i) out << ' ';
        out << to_string(rec.status);
        if (!rec.finished_at.empty()) out << "  " << rec.finished_at;
        if (!rec.artifacts.empty()) out << "  artifacts=" << rec.artifacts.size();
        if (!rec.error.empty()) out << "  error: " << rec.error;
        out << "\n";
    };
    for (const char* name : kOrder) {
        listed.insert(name);
        auto it = m.stages.find(name);
        if (it != m.stages.end()) {
            line(name, it->second);
        } else {
            out << "  " << name;
            for (std::size_t i = std::char_traits<char>::length(name); i < 12; ++i) out << ' ';
            out << "pending\n";
        }
    }
    for (const auto& [name, rec] : m.stages) {
        if (!listed.count(name)) line(name, rec);
    }
    return out.str();
}

}  // namespace tailor
