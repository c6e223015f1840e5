// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tailor/backend.hpp"
#include "tailor/elicitation.hpp"
#include "tailor/score_matrix.hpp"
#include "tailor/task.hpp"

namespace tailor {

enum class PreferenceSource { full_validation, irt_selected };

// The items a draft is graded against. Scoring code is agnostic to where the
// items came from; source is bookkeeping for reports.
struct PreferenceSet {
    std::string task_id;
    std::vector<QAPair> items;
    PreferenceSource source = PreferenceSource::full_validation;
};

enum class ScoreLevel { rationale, question };

struct PerItemResult {
    int item_index = 0;
    bool correct = false;
};

struct ScoreRecord {
    std::string subject_id;   // rationale id or question id
    std::string question_id;  // owning question (== subject_id at question level)
    ScoreLevel level = ScoreLevel::rationale;
    double score = 0.0;
    std::vector<PerItemResult> per_item;  // empty at question level
    int shots = 1;
};

// One-shot in-context evaluation prompt: task description, answer-tag
// reminder, the draft as the worked example, then the held-out question.
std::string build_icl_prompt(const TaskSpec& task,
                             const DraftExample& example,
                             const std::string& test_question);

// n demonstrations with bare tagged answers instead of rationales; n == 0
// degrades to a zero-shot prompt. Demo and test blocks share the layout of
// build_icl_prompt.
std::string build_nshot_prompt(const TaskSpec& task,
                               const std::vector<QAPair>& demos,
                               const std::string& test_question);

// Last <ans>..</ans> span wins; its content is normalized for the format.
// nullopt when no complete tag pair exists or normalization fails.
std::optional<std::string> extract_answer(const std::string& completion, AnswerFormat format);

// Fraction of pref.items the student answers correctly when shown the draft
// example one-shot. Deterministic at fixed backend behavior: items are
// prompted and aggregated in set order.
ScoreRecord score_rationale(BackendRegistry& backends,
                            const BackendId& student,
                            const TaskSpec& task,
                            const DraftExample& example,
                            const PreferenceSet& pref,
                            int max_in_flight = 1,
                            double temperature = 0.0,
                            int max_tokens = 1024);

// Question-level score: mean of its rationale scores. All records must share
// one question_id (else MixedQuestionIds) and be rationale-level.
ScoreRecord score_question(const std::vector<ScoreRecord>& rationale_records);

// Grades every (model, shot-count) subject against every item. Demos for an
// n-shot row are drawn from demo_pool without replacement, seeded per row, so
// the matrix is reproducible. Row ids look like "gemma-2b#1shot".
ScoreMatrix build_score_matrix(BackendRegistry& backends,
                               const std::vector<BackendId>& models,
                               const TaskSpec& task,
                               const std::vector<QAPair>& items,
                               const std::vector<int>& shots,
                               const std::vector<QAPair>& demo_pool,
                               std::uint64_t seed,
                               int max_in_flight = 1,
                               double temperature = 0.0,
                               int max_tokens = 1024);

std::string matrix_row_id(const std::string& model_name, int shots);

}  // namespace tailor
