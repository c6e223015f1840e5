// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "tailor/elicitation.hpp"
#include "tailor/irt.hpp"
#include "tailor/preference.hpp"
#include "tailor/task.hpp"

namespace tailor {

// Task definition file: one JSON object per task under <tasks_dir>/<id>.json.
TaskSpec load_task_spec(const std::filesystem::path& path);
void save_task_spec(const TaskSpec& task, const std::filesystem::path& path);

// Question/answer JSONL ({"question": .., "answer": ..} per line), used for
// validation and test sets.
std::vector<QAPair> load_qa_jsonl(const std::filesystem::path& path);
void save_qa_jsonl(const std::vector<QAPair>& items, const std::filesystem::path& path);

// Draft examples, one JSON object per line, question fields inline.
void save_drafts_jsonl(const std::vector<DraftExample>& drafts, const std::filesystem::path& path);
std::vector<DraftExample> load_drafts_jsonl(const std::filesystem::path& path);

// Preference score records.
void save_score_records_jsonl(const std::vector<ScoreRecord>& records,
                              const std::filesystem::path& path);
std::vector<ScoreRecord> load_score_records_jsonl(const std::filesystem::path& path);

// Fitted parameters: item lines then ability lines, tagged by a "kind" field.
void save_irt_params_jsonl(const std::vector<ItemParams>& items,
                           const std::vector<AbilityParams>& abilities,
                           const std::filesystem::path& path);
std::pair<std::vector<ItemParams>, std::vector<AbilityParams>> load_irt_params_jsonl(
    const std::filesystem::path& path);

// Selected preference items, rank order preserved.
struct PrefSelection {
    std::string task_id;
    std::vector<std::string> item_ids;
};
void save_pref_selection(const PrefSelection& sel, const std::filesystem::path& path);
PrefSelection load_pref_selection(const std::filesystem::path& path);

// Structural checks over exported datasets; returns one message per problem,
// empty when the file is well-formed.
std::vector<std::string> validate_dpo_jsonl(const std::filesystem::path& path);
std::vector<std::string> validate_sft_jsonl(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace tailor
