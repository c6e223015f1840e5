// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#include "tailor/eval_harness.hpp"

#include <cctype>
#include <cmath>
#include <map>

#include "tailor/errors.hpp"
#include "tailor/preference.hpp"
#include "tailor/rng.hpp"

namespace tailor {

namespace {

// Index of the best/worst entry; score ties go to the lowest strategy index
// so the choice never depends on input order.
std::size_t arg_best(const std::vector<double>& scores, const std::vector<int>& strategies,
                     bool want_max) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        bool strictly_better = want_max ? scores[i] > scores[best] : scores[i] < scores[best];
        bool tie_break = scores[i] == scores[best] && strategies[i] < strategies[best];
        if (strictly_better || tie_break) best = i;
    }
    return best;
}

}  // namespace

int word_count(std::string_view text) {
    int count = 0;
    bool in_word = false;
    for (char c : text) {
        bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!space && !in_word) ++count;
        in_word = !space;
    }
    return count;
}

EvalReport evaluate(BackendRegistry& backends,
                    const BackendId& model,
                    const TaskSpec& task,
                    const std::vector<QAPair>& test_set,
                    const std::vector<QAPair>& demo_pool,
                    const EvalConfig& cfg,
                    int max_in_flight) {
    if (test_set.empty()) throw PreconditionViolation("test set is empty");
    if (cfg.shots < 0) throw PreconditionViolation("shots must be >= 0");
    if (static_cast<std::size_t>(cfg.shots) > demo_pool.size()) {
        throw InsufficientDemoPool("demo pool has " + std::to_string(demo_pool.size()) +
                                   " items, need " + std::to_string(cfg.shots));
    }

    std::vector<QAPair> demos;
    if (cfg.shots > 0) {
        SplitMix64 rng(cfg.seed);
        for (auto idx : sample_indices(demo_pool.size(), static_cast<std::size_t>(cfg.shots), rng)) {
            demos.push_back(demo_pool[idx]);
        }
    }

    std::vector<CompletionRequest> reqs;
    reqs.reserve(test_set.size());
    for (const auto& item : test_set) {
        CompletionRequest req;
        req.prompt = build_nshot_prompt(task, demos, item.question);
        req.temperature = 0.0;
        req.stop_sequences = {"\nQuestion:"};
        reqs.push_back(std::move(req));
    }

    auto responses = backends.batch_complete(model, reqs, max_in_flight);

    EvalReport report;
    report.task_id = task.task_id;
    report.model = model.name;
    report.shots = cfg.shots;
    report.total = static_cast<int>(test_set.size());
    report.per_item.reserve(test_set.size());

    for (std::size_t i = 0; i < responses.size(); ++i) {
        EvalItemResult item;
        item.item_id = item_id_for(test_set[i]);
        const auto& resp = responses[i];
        if (resp.finish_reason == FinishReason::error) {
            // Evaluation is a survey, not a pipeline stage: a failed item
            // should dent accuracy, not abort the sweep.
            item.degraded = true;
            item.diagnostic = resp.error_message;
            ++report.degraded_count;
        } else {
            auto got = extract_answer(resp.text, task.answer_format);
            item.correct = got && *got == comparison_answer(test_set[i], task.answer_format);
            if (item.correct) ++report.correct_count;
        }
        report.per_item.push_back(std::move(item));
    }
    report.accuracy = static_cast<double>(report.correct_count) /
                      static_cast<double>(report.total);
    return report;
}

ConsistencyReport consistency_check(const std::vector<DoubleScoredDraft>& drafts) {
    if (drafts.empty()) throw MissingScoreSet("no double-scored drafts to compare");

    int top_matches = 0, bottom_matches = 0;
    for (const auto& d : drafts) {
        if (d.pref_scores.empty() || d.pref_scores.size() != d.val_scores.size() ||
            d.pref_scores.size() != d.strategy_indices.size()) {
            throw MissingScoreSet("draft '" + d.question_id +
                                  "' lacks aligned preference and validation scores");
        }
        if (arg_best(d.pref_scores, d.strategy_indices, true) ==
            arg_best(d.val_scores, d.strategy_indices, true)) {
            ++top_matches;
        }
        if (arg_best(d.pref_scores, d.strategy_indices, false) ==
            arg_best(d.val_scores, d.strategy_indices, false)) {
            ++bottom_matches;
        }
    }

    ConsistencyReport report;
    report.samples = static_cast<int>(drafts.size());
    report.top_match_rate = static_cast<double>(top_matches) / report.samples;
    report.bottom_match_rate = static_cast<double>(bottom_matches) / report.samples;
    return report;
}

LengthAnalysis length_bin_analysis(const std::vector<Rationale>& rationales, int bin_width_words) {
    if (bin_width_words < 1) throw PreconditionViolation("bin width must be >= 1");

    std::vector<std::pair<int, double>> points;  // (word count, score)
    for (const auto& r : rationales) {
        if (r.pref_score) points.emplace_back(word_count(r.text), *r.pref_score);
    }
    if (points.empty()) throw PreconditionViolation("no scored rationales to analyze");

    std::map<int, std::pair<double, int>> bins;  // lo -> (score sum, count)
    for (const auto& [wc, score] : points) {
        int lo = (wc / bin_width_words) * bin_width_words;
        auto& [sum, count] = bins[lo];
        sum += score;
        ++count;
    }

    LengthAnalysis out;
    out.total = static_cast<int>(points.size());
    for (const auto& [lo, agg] : bins) {
        out.bins.push_back({lo, lo + bin_width_words, agg.first / agg.second, agg.second});
    }

    double mean_x = 0.0, mean_y = 0.0;
    for (const auto& [wc, score] : points) {
        mean_x += wc;
        mean_y += score;
    }
    mean_x /= static_cast<double>(points.size());
    mean_y /= static_cast<double>(points.size());
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (const auto& [wc, score] : points) {
        double dx = wc - mean_x, dy = score - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    // Either variable constant: correlation is undefined, report 0.
    out.pearson_r = (sxx > 0.0 && syy > 0.0) ? sxy / std::sqrt(sxx * syy) : 0.0;
    return out;
}

}  // namespace tailor
