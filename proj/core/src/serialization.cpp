// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#include "tailor/serialization.hpp"

#include <fstream>
#include <sstream>

#include "json_io.hpp"
#include "tailor/errors.hpp"

namespace tailor {

namespace {

using detail::json;

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write: " + path.string());
    return out;
}

// Applies fn to each non-blank line parsed as JSON. Parse failures carry the
// file and line number.
template <typename Fn>
void for_each_jsonl(const std::filesystem::path& path, Fn&& fn) {
    auto in = open_in(path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        try {
            fn(j);
        } catch (const IoError& e) {
            throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
    auto out = open_out(path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

TaskSpec load_task_spec(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    try {
        TaskSpec task;
        task.task_id = detail::require_as<std::string, ConfigError>(j, "task_id");
        task.description = detail::require_as<std::string, ConfigError>(j, "description");
        task.category =
            category_from_string(detail::get_or<std::string, ConfigError>(j, "category", "other"));
        task.answer_format = answer_format_from_string(
            detail::require_as<std::string, ConfigError>(j, "answer_format"));
        for (const auto& e : detail::require<ConfigError>(j, "seed_questions")) {
            task.seed_questions.push_back(detail::qa_from_json(e));
        }
        task.strategy_prompts =
            detail::require_as<std::vector<std::string>, ConfigError>(j, "strategy_prompts");
        task.validate();
        return task;
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void save_task_spec(const TaskSpec& task, const std::filesystem::path& path) {
    task.validate();
    json j;
    j["task_id"] = task.task_id;
    j["description"] = task.description;
    j["category"] = std::string(to_string(task.category));
    j["answer_format"] = std::string(to_string(task.answer_format));
    json seeds = json::array();
    for (const auto& qa : task.seed_questions) seeds.push_back(detail::to_json(qa));
    j["seed_questions"] = seeds;
    j["strategy_prompts"] = task.strategy_prompts;
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

std::vector<QAPair> load_qa_jsonl(const std::filesystem::path& path) {
    std::vector<QAPair> out;
    for_each_jsonl(path, [&](const json& j) { out.push_back(detail::qa_from_json(j)); });
    return out;
}

void save_qa_jsonl(const std::vector<QAPair>& items, const std::filesystem::path& path) {
    auto out = open_out(path);
    for (const auto& qa : items) out << detail::to_json(qa).dump() << '\n';
}

void save_drafts_jsonl(const std::vector<DraftExample>& drafts,
                       const std::filesystem::path& path) {
    auto out = open_out(path);
    for (const auto& d : drafts) out << detail::to_json(d).dump() << '\n';
}

std::vector<DraftExample> load_drafts_jsonl(const std::filesystem::path& path) {
    std::vector<DraftExample> out;
    for_each_jsonl(path, [&](const json& j) { out.push_back(detail::draft_example_from_json(j)); });
    return out;
}

void save_score_records_jsonl(const std::vector<ScoreRecord>& records,
                              const std::filesystem::path& path) {
    auto out = open_out(path);
    for (const auto& r : records) out << detail::to_json(r).dump() << '\n';
}

std::vector<ScoreRecord> load_score_records_jsonl(const std::filesystem::path& path) {
    std::vector<ScoreRecord> out;
    for_each_jsonl(path, [&](const json& j) { out.push_back(detail::score_record_from_json(j)); });
    return out;
}

void save_irt_params_jsonl(const std::vector<ItemParams>& items,
                           const std::vector<AbilityParams>& abilities,
                           const std::filesystem::path& path) {
    auto out = open_out(path);
    for (const auto& item : items) {
        json j{{"kind", "item"},
               {"item_id", item.item_id},
               {"alpha", item.alpha},
               {"beta", item.beta},
               {"degenerate", item.degenerate}};
        out << j.dump() << '\n';
    }
    for (const auto& a : abilities) {
        json j{{"kind", "ability"}, {"row_id", a.row_id}, {"theta", a.theta}};
        out << j.dump() << '\n';
    }
}

std::pair<std::vector<ItemParams>, std::vector<AbilityParams>> load_irt_params_jsonl(
    const std::filesystem::path& path) {
    std::vector<ItemParams> items;
    std::vector<AbilityParams> abilities;
    for_each_jsonl(path, [&](const json& j) {
        auto kind = detail::require_as<std::string>(j, "kind");
        if (kind == "item") {
            items.push_back({detail::require_as<std::string>(j, "item_id"),
                             detail::require_as<double>(j, "alpha"),
                             detail::require_as<double>(j, "beta"),
                             detail::get_or<bool>(j, "degenerate", false)});
        } else if (kind == "ability") {
            abilities.push_back({detail::require_as<std::string>(j, "row_id"),
                                 detail::require_as<double>(j, "theta")});
        } else {
            throw IoError("unknown record kind '" + kind + "'");
        }
    });
    return {std::move(items), std::move(abilities)};
}

void save_pref_selection(const PrefSelection& sel, const std::filesystem::path& path) {
    json j{{"task_id", sel.task_id}, {"item_ids", sel.item_ids}};
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

PrefSelection load_pref_selection(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
    return {detail::require_as<std::string>(j, "task_id"),
            detail::require_as<std::vector<std::string>>(j, "item_ids")};
}

std::vector<std::string> validate_dpo_jsonl(const std::filesystem::path& path) {
    std::vector<std::string> problems;
    int line_no = 0;
    auto in = open_in(path);
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            problems.push_back("line " + std::to_string(line_no) + ": not a JSON object");
            continue;
        }
        for (const char* key : {"prompt", "chosen", "rejected", "level", "task_id"}) {
            if (!j.contains(key) || !j[key].is_string() || j[key].get<std::string>().empty()) {
                problems.push_back("line " + std::to_string(line_no) + ": missing or empty '" +
                                   key + "'");
            }
        }
        for (const char* key : {"chosen_score", "rejected_score"}) {
            if (!j.contains(key) || !j[key].is_number()) {
                problems.push_back("line " + std::to_string(line_no) + ": missing numeric '" +
                                   key + "'");
            }
        }
        if (j.contains("level") && j["level"].is_string()) {
            auto level = j["level"].get<std::string>();
            if (level != "question" && level != "rationale") {
                problems.push_back("line " + std::to_string(line_no) + ": bad level '" + level +
                                   "'");
            }
        }
        if (j.contains("chosen") && j.contains("rejected") && j["chosen"] == j["rejected"]) {
            problems.push_back("line " + std::to_string(line_no) + ": chosen equals rejected");
        }
        if (j.contains("chosen_score") && j.contains("rejected_score") &&
            j["chosen_score"].is_number() && j["rejected_score"].is_number() &&
            !(j["chosen_score"].get<double>() > j["rejected_score"].get<double>())) {
            problems.push_back("line " + std::to_string(line_no) +
                               ": chosen_score must exceed rejected_score");
        }
    }
    return problems;
}

std::vector<std::string> validate_sft_jsonl(const std::filesystem::path& path) {
    std::vector<std::string> problems;
    int line_no = 0;
    auto in = open_in(path);
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            problems.push_back("line " + std::to_string(line_no) + ": not a JSON object");
            continue;
        }
        for (const char* key : {"prompt", "completion", "task_id"}) {
            if (!j.contains(key) || !j[key].is_string() || j[key].get<std::string>().empty()) {
                problems.push_back("line " + std::to_string(line_no) + ": missing or empty '" +
                                   key + "'");
            }
        }
    }
    return problems;
}

}  // namespace tailor
