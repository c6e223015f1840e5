// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#include "tailor/task.hpp"

#include <cctype>

#include "tailor/digest.hpp"
#include "tailor/errors.hpp"

namespace tailor {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
char to_lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }
char to_upper(char c) { return static_cast<char>(std::toupper(static_cast<unsigned char>(c))); }

std::string_view trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return s.substr(b, e - b);
}

// Trim plus inner whitespace runs collapsed to one space.
std::string collapse_ws(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : trim(s)) {
        if (is_space(c)) {
            pending_space = true;
            continue;
        }
        if (pending_space && !out.empty()) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (to_lower(a[i]) != to_lower(b[i])) return false;
    }
    return true;
}

}  // namespace

void TaskSpec::validate() const {
    if (task_id.empty()) throw PreconditionViolation("task_id must be non-empty");
    if (seed_questions.size() < 3) {
        throw PreconditionViolation("task '" + task_id + "' needs at least 3 seed questions, has " +
                                    std::to_string(seed_questions.size()));
    }
    if (strategy_prompts.empty()) {
        throw PreconditionViolation("task '" + task_id + "' needs at least 1 strategy prompt");
    }
}

std::string task_display_name(std::string_view task_id) {
    std::string out(task_id);
    for (char& c : out) {
        if (c == '_') c = ' ';
    }
    return out;
}

std::optional<std::string> normalize_answer(std::string_view raw, AnswerFormat format) {
    switch (format) {
        case AnswerFormat::boolean: {
            // Yes/no tasks and true/false answer tags appear interchangeably
            // in the wild (ground truth says "No", prompts ask for
            // <ans>False</ans>), so both spellings normalize to one pair.
            std::string_view t = trim(raw);
            if (iequals(t, "true") || iequals(t, "yes")) return std::string("True");
            if (iequals(t, "false") || iequals(t, "no")) return std::string("False");
            return std::nullopt;
        }
        case AnswerFormat::multiple_choice: {
            // Accept "(A)", "A", "a)", "(b" and similar; exactly one letter
            // may remain once decoration is stripped.
            char letter = 0;
            for (char c : trim(raw)) {
                if (c == '(' || c == ')' || c == '.' || is_space(c)) continue;
                if (std::isalpha(static_cast<unsigned char>(c)) && letter == 0) {
                    letter = to_upper(c);
                    continue;
                }
                return std::nullopt;
            }
            if (letter == 0) return std::nullopt;
            return std::string("(") + letter + ")";
        }
        case AnswerFormat::free_text: {
            std::string out = collapse_ws(raw);
            if (out.empty()) return std::nullopt;
            return out;
        }
    }
    return std::nullopt;
}

std::string normalize_question_key(std::string_view text) {
    std::string out = collapse_ws(text);
    for (char& c : out) c = to_lower(c);
    return out;
}

std::string comparison_answer(const QAPair& item, AnswerFormat format) {
    if (auto norm = normalize_answer(item.answer, format)) return *norm;
    std::string collapsed = collapse_ws(item.answer);
    return collapsed.empty() ? item.answer : collapsed;
}

std::string item_id_for(const QAPair& item) { return digest16(item.question); }

std::string_view to_string(TaskCategory c) {
    switch (c) {
        case TaskCategory::logic: return "logic";
        case TaskCategory::commonsense: return "commonsense";
        case TaskCategory::math: return "math";
        case TaskCategory::knowledge: return "knowledge";
        case TaskCategory::other: return "other";
    }
    return "other";
}

std::string_view to_string(AnswerFormat f) {
    switch (f) {
        case AnswerFormat::boolean: return "boolean";
        case AnswerFormat::multiple_choice: return "multiple_choice";
        case AnswerFormat::free_text: return "free_text";
    }
    return "free_text";
}

TaskCategory category_from_string(std::string_view s) {
    if (s == "logic") return TaskCategory::logic;
    if (s == "commonsense") return TaskCategory::commonsense;
    if (s == "math") return TaskCategory::math;
    if (s == "knowledge") return TaskCategory::knowledge;
    if (s == "other") return TaskCategory::other;
    throw PreconditionViolation("unknown task category: " + std::string(s));
}

AnswerFormat answer_format_from_string(std::string_view s) {
    if (s == "boolean") return AnswerFormat::boolean;
    if (s == "multiple_choice") return AnswerFormat::multiple_choice;
    if (s == "free_text") return AnswerFormat::free_text;
    throw PreconditionViolation("unknown answer format: " + std::string(s));
}

}  // namespace tailor
