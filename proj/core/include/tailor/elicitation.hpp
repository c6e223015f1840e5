// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tailor/backend.hpp"
#include "tailor/errors.hpp"
#include "tailor/task.hpp"

namespace tailor {

struct DraftQuestion {
    std::string id;       // digest16(task_id + "\n" + normalized input)
    std::string task_id;
    std::string input;
    std::string target;   // normalized answer
    // provenance
    std::string prompt_digest;
    int batch_index = 0;  // position within the parsed generation batch
    std::optional<double> pref_score;
};

struct Rationale {
    std::string id;  // digest16(question_id + "#" + strategy_index)
    std::string question_id;
    int strategy_index = 0;
    std::string text;
    std::optional<double> pref_score;
};

struct DraftExample {
    DraftQuestion question;
    Rationale rationale;
};

// Question generation hit its attempt budget before reaching the requested
// count. Whatever was collected so far rides along for inspection or reuse.
class ElicitationBudgetExceeded : public Error {
public:
    ElicitationBudgetExceeded(const std::string& what, std::vector<DraftQuestion> partial)
        : Error(what), partial_(std::move(partial)) {}
    const std::vector<DraftQuestion>& partial() const { return partial_; }

private:
    std::vector<DraftQuestion> partial_;
};

struct ElicitDiagnostics {
    int attempts = 0;
    int parsed_blocks = 0;
    int duplicates_dropped = 0;
    int malformed_dropped = 0;
    std::vector<std::string> notes;
};

// Brainstorming prompt that asks for per_prompt_count new questions, shaped
// around three worked examples. Byte-stable: goldens pin the exact output.
std::string build_question_prompt(const TaskSpec& task,
                                  const std::array<QAPair, 3>& seed_triple,
                                  int per_prompt_count);

struct ParsedBlock {
    std::string input;
    std::string target;
};

struct ParseResult {
    std::vector<ParsedBlock> blocks;
    std::vector<std::string> diagnostics;
};

// Total: scans any text for <Question_*><input>..</input><target>..</target>
// blocks, never throws. Malformed regions are skipped with a diagnostic.
ParseResult parse_question_blocks(const std::string& text);

// Collects exactly m unique questions (dedup on normalize_question_key) by
// repeatedly sampling the teacher. Seed triples rotate round-robin through
// task.seed_questions. Attempt budget: 5 * ceil(m / per_prompt_count); when
// it runs out, throws ElicitationBudgetExceeded carrying the partial set.
// When base_seed is set, attempt i carries derived seed mix_seed(base_seed, i)
// so sampling runs are reproducible and cacheable.
std::vector<DraftQuestion> elicit_questions(BackendRegistry& backends,
                                            const BackendId& teacher,
                                            const TaskSpec& task,
                                            int m,
                                            double temperature,
                                            std::optional<std::uint64_t> base_seed,
                                            int per_prompt_count = 5,
                                            int max_in_flight = 1,
                                            int max_tokens = 1024,
                                            ElicitDiagnostics* diag = nullptr);

// One rationale per strategy prompt, requested at the given temperature
// (greedy by default so reruns are cache hits). Empty or failed completions
// are dropped with a diagnostic; throws BackendUnavailable only when every
// strategy failed.
std::vector<Rationale> elicit_rationales(BackendRegistry& backends,
                                         const BackendId& teacher,
                                         const TaskSpec& task,
                                         const DraftQuestion& question,
                                         double temperature = 0.0,
                                         int max_in_flight = 1,
                                         int max_tokens = 1024,
                                         std::vector<std::string>* diagnostics = nullptr);

// Post-alignment sampling: fresh questions at temperature 1.0 and one greedy
// step-by-step rationale per question, paired into ready-to-export examples.
std::vector<DraftExample> regenerate_tailored(BackendRegistry& backends,
                                              const BackendId& aligned_teacher,
                                              const TaskSpec& task,
                                              int m,
                                              std::optional<std::uint64_t> base_seed,
                                              int per_prompt_count = 5,
                                              int max_in_flight = 1,
                                              int max_tokens = 1024,
                                              std::vector<std::string>* diagnostics = nullptr);

}  // namespace tailor
