// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tailor/backend.hpp"
#include "tailor/elicitation.hpp"
#include "tailor/task.hpp"

namespace tailor {

enum class DemoSource { fixed_examples, drafts };

struct EvalConfig {
    int shots = 0;
    DemoSource demo_source = DemoSource::fixed_examples;
    std::uint64_t seed = 0;
};

struct EvalItemResult {
    std::string item_id;
    bool correct = false;
    bool degraded = false;   // backend error; counted incorrect
    std::string diagnostic;
};

struct EvalReport {
    std::string task_id;
    std::string model;
    int shots = 0;
    double accuracy = 0.0;
    int total = 0;
    int correct_count = 0;
    int degraded_count = 0;
    std::vector<EvalItemResult> per_item;
};

// n-shot accuracy of one model over a test set. Demos are drawn from
// demo_pool once, seeded, without replacement (InsufficientDemoPool when the
// pool is too small). Backend failures mark the item incorrect and degraded
// instead of aborting the sweep.
EvalReport evaluate(BackendRegistry& backends,
                    const BackendId& model,
                    const TaskSpec& task,
                    const std::vector<QAPair>& test_set,
                    const std::vector<QAPair>& demo_pool,
                    const EvalConfig& cfg,
                    int max_in_flight = 1);

// A draft rationale scored twice: against the compact preference set and
// against the full validation set. Vectors are parallel, indexed by rationale
// (strategy_indices breaks argmax/argmin ties).
struct DoubleScoredDraft {
    std::string question_id;
    std::vector<int> strategy_indices;
    std::vector<double> pref_scores;
    std::vector<double> val_scores;
};

struct ConsistencyReport {
    double top_match_rate = 0.0;     // argmax under pref == argmax under val
    double bottom_match_rate = 0.0;  // argmin agreement
    int samples = 0;
};

// How often the compact set picks the same best/worst rationale as the full
// set. Empty input or mismatched score vectors throw MissingScoreSet.
ConsistencyReport consistency_check(const std::vector<DoubleScoredDraft>& drafts);

struct LengthBin {
    int lo = 0;  // inclusive word-count bound
    int hi = 0;  // exclusive
    double mean_score = 0.0;
    int count = 0;
};

struct LengthAnalysis {
    std::vector<LengthBin> bins;
    double pearson_r = 0.0;  // word count vs score over all rationales
    int total = 0;
};

// Buckets scored rationales by whitespace word count. Rationales without a
// pref_score are ignored; nothing scored throws PreconditionViolation.
LengthAnalysis length_bin_analysis(const std::vector<Rationale>& rationales, int bin_width_words);

int word_count(std::string_view text);

}  // namespace tailor
