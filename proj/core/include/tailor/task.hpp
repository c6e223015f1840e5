// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tailor {

enum class TaskCategory { logic, commonsense, math, knowledge, other };

enum class AnswerFormat { boolean, multiple_choice, free_text };

struct QAPair {
    std::string question;
    std::string answer;
};

// Static description of one task: what it is, how answers are normalized,
// which worked examples seed question generation, and the reasoning-strategy
// instructions used when drafting rationales.
struct TaskSpec {
    std::string task_id;
    std::string description;
    TaskCategory category = TaskCategory::other;
    std::vector<QAPair> seed_questions;
    AnswerFormat answer_format = AnswerFormat::free_text;
    std::vector<std::string> strategy_prompts;

    // Throws PreconditionViolation unless there are >= 3 seed questions and
    // >= 1 strategy prompt and the id is non-empty.
    void validate() const;
};

// Human-readable name used inside prompts: underscores become spaces.
std::string task_display_name(std::string_view task_id);

// Canonicalize a raw answer string for comparison.
//   boolean         -> "True" / "False" (case-insensitive; yes/no accepted)
//   multiple_choice -> "(A)" .. "(Z)" from forms like "(a)", "B", "c)"
//   free_text       -> trimmed, inner whitespace runs collapsed to one space
// Returns nullopt when the raw text has no valid reading.
std::optional<std::string> normalize_answer(std::string_view raw, AnswerFormat format);

// Key used to detect duplicate questions: lowercased, whitespace collapsed.
std::string normalize_question_key(std::string_view text);

// What a model's extracted answer is compared against for this item. The
// normalized reading when the stored answer parses, otherwise the raw text
// with whitespace collapsed, so one off-format item degrades to exact
// matching instead of failing the whole set.
std::string comparison_answer(const QAPair& item, AnswerFormat format);

// Stable identifier for a validation or preference item: digest16 of the
// question text.
std::string item_id_for(const QAPair& item);

std::string_view to_string(TaskCategory c);
std::string_view to_string(AnswerFormat f);
TaskCategory category_from_string(std::string_view s);
AnswerFormat answer_format_from_string(std::string_view s);

}  // namespace tailor
