// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tailor/elicitation.hpp"
#include "tailor/task.hpp"

namespace tailor {

enum class PairLevel { question, rationale };

struct PreferencePair {
    std::string prompt;
    std::string chosen;
    std::string rejected;
    PairLevel level = PairLevel::question;
    std::string task_id;
    double chosen_score = 0.0;
    double rejected_score = 0.0;
};

struct SftRecord {
    std::string prompt;
    std::string completion;
    std::string task_id;
};

// Plain elicitation prompt for one question, ending with the step-by-step
// cue. Used as the rationale-pair context and as the SFT prompt.
std::string build_naive_stepbystep_prompt(const TaskSpec& task, const DraftQuestion& question);

// Question-level pairs: chosen from the top score quartile, rejected from
// the bottom (quartile size = ceil(N/4)). Pairings are sampled seeded and
// never repeat; chosen score must strictly exceed rejected score. The shared
// prompt is the task's question-generation prompt over its first seed triple.
// Throws InsufficientDrafts when N < 8 or `pairs` exceeds the number of valid
// combinations, QuartilesDegenerate when no strict-dominance pair exists.
std::vector<PreferencePair> build_question_pairs(const TaskSpec& task,
                                                 const std::vector<DraftQuestion>& scored,
                                                 int pairs,
                                                 std::uint64_t seed,
                                                 int per_prompt_count = 5);

struct RationalePairInput {
    DraftQuestion question;
    std::vector<Rationale> rationales;  // pref_score must be set to take part
};

// One pair per question: best-scoring rationale vs worst (ties resolved to
// the lowest strategy_index). Questions whose rationales all tie, or with
// fewer than two scored rationales, are skipped with a diagnostic.
std::vector<PreferencePair> build_rationale_pairs(const TaskSpec& task,
                                                  const std::vector<RationalePairInput>& inputs,
                                                  std::vector<std::string>* skipped = nullptr);

struct ExportCounts {
    std::size_t question_pairs = 0;
    std::size_t rationale_pairs = 0;
    std::size_t total = 0;
};

// Shuffles both pair sets together (seeded) and writes one JSON object per
// line: prompt, chosen, rejected, level, task_id, chosen_score,
// rejected_score. Byte-identical across runs at fixed inputs and seed.
ExportCounts mix_and_export(std::vector<PreferencePair> question_pairs,
                            std::vector<PreferencePair> rationale_pairs,
                            const std::filesystem::path& out_path,
                            std::uint64_t seed);

// SFT JSONL: prompt (naive step-by-step), completion (rationale text),
// task_id. Examples with an empty rationale throw PreconditionViolation.
std::size_t export_sft(const std::map<std::string, TaskSpec>& tasks,
                       const std::vector<DraftExample>& examples,
                       const std::filesystem::path& out_path);

struct DpoLossConfig {
    double beta = 0.1;
};

// Reference DPO objective for one pair:
//   -log sigmoid(beta * ((lp_c - lr_c) - (lp_r - lr_r)))
// Computed in softplus form, stable for large |margin|. Non-finite inputs
// throw NonFiniteInput.
double dpo_loss(double logp_policy_chosen, double logp_policy_rejected,
                double logp_ref_chosen, double logp_ref_rejected,
                const DpoLossConfig& cfg = {});

// Trainer settings the exported datasets are intended to be consumed with.
// Recorded into the export manifest.
struct TrainerSettings {
    double dpo_beta = 0.1;
    double dpo_learning_rate = 1e-7;
    int dpo_batch_size = 16;
    int dpo_epochs = 1;
    double dpo_warmup_ratio = 0.10;
    std::string dpo_schedule = "cosine";
    double sft_learning_rate = 2e-5;
    int sft_epochs = 1;
    double sft_warmup_ratio = 0.03;
    std::string sft_schedule = "linear";
    std::string optimizer = "adam";
};

std::string_view to_string(PairLevel level);

}  // namespace tailor
