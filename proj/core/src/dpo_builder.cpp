// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#include "tailor/dpo_builder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json_io.hpp"
#include "tailor/digest.hpp"
#include "tailor/errors.hpp"
#include "tailor/rng.hpp"

namespace tailor {

namespace {

std::string serialize_question_block(const DraftQuestion& q) {
    return "<Question_1><input>" + q.input + "</input><target>" + q.target +
           "</target></Question_1>";
}

void write_jsonl(const std::filesystem::path& path, const std::vector<detail::json>& lines) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write: " + path.string());
    for (const auto& j : lines) out << j.dump() << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

std::string_view to_string(PairLevel level) {
    return level == PairLevel::question ? "question" : "rationale";
}

std::string build_naive_stepbystep_prompt(const TaskSpec& task, const DraftQuestion& question) {
    std::string out;
    out += "Task Description: ";
    out += task.description;
    out += "\n";
    out += "Question: ";
    out += question.input;
    out += "\n";
    out += "Answer: Let's think step by step.";
    return out;
}

std::vector<PreferencePair> build_question_pairs(const TaskSpec& task,
                                                 const std::vector<DraftQuestion>& scored,
                                                 int pairs,
                                                 std::uint64_t seed,
                                                 int per_prompt_count) {
    if (pairs < 1) throw PreconditionViolation("pairs must be >= 1");
    const std::size_t n = scored.size();
    if (n < 8) {
        throw InsufficientDrafts("quartile pairing needs at least 8 scored drafts, have " +
                                 std::to_string(n));
    }
    for (const auto& q : scored) {
        if (!q.pref_score) {
            throw PreconditionViolation("draft '" + q.id + "' has no preference score");
        }
        if (q.task_id != task.task_id) {
            throw PreconditionViolation("draft '" + q.id + "' belongs to task '" + q.task_id +
                                        "', not '" + task.task_id + "'");
        }
    }

    std::vector<const DraftQuestion*> ranked;
    ranked.reserve(n);
    for (const auto& q : scored) ranked.push_back(&q);
    std::sort(ranked.begin(), ranked.end(), [](const DraftQuestion* a, const DraftQuestion* b) {
        if (*a->pref_score != *b->pref_score) return *a->pref_score > *b->pref_score;
        return a->id < b->id;
    });
    if (*ranked.front()->pref_score == *ranked.back()->pref_score) {
        throw QuartilesDegenerate("all " + std::to_string(n) + " drafts share score " +
                                  std::to_string(*ranked.front()->pref_score));
    }

    const std::size_t quartile = (n + 3) / 4;
    std::vector<std::pair<std::size_t, std::size_t>> combos;
    for (std::size_t i = 0; i < quartile; ++i) {
        for (std::size_t j = n - quartile; j < n; ++j) {
            if (*ranked[i]->pref_score > *ranked[j]->pref_score) combos.emplace_back(i, j);
        }
    }
    if (combos.empty()) {
        throw QuartilesDegenerate("top and bottom quartiles are score-tied; no usable pairing");
    }
    if (static_cast<std::size_t>(pairs) > combos.size()) {
        throw InsufficientDrafts("requested " + std::to_string(pairs) + " question pairs but only " +
                                 std::to_string(combos.size()) + " distinct pairings exist");
    }

    SplitMix64 rng(seed);
    shuffle_inplace(combos, rng);

    // Every exported pair shares the generation prompt the drafts answered.
    std::array<QAPair, 3> triple = {task.seed_questions[0], task.seed_questions[1],
                                    task.seed_questions[2]};
    const std::string prompt = build_question_prompt(task, triple, per_prompt_count);

    std::vector<PreferencePair> out;
    out.reserve(static_cast<std::size_t>(pairs));
    for (int p = 0; p < pairs; ++p) {
        const auto& [ti, bj] = combos[static_cast<std::size_t>(p)];
        PreferencePair pair;
        pair.prompt = prompt;
        pair.chosen = serialize_question_block(*ranked[ti]);
        pair.rejected = serialize_question_block(*ranked[bj]);
        pair.level = PairLevel::question;
        pair.task_id = task.task_id;
        pair.chosen_score = *ranked[ti]->pref_score;
        pair.rejected_score = *ranked[bj]->pref_score;
        out.push_back(std::move(pair));
    }
    return out;
}

std::vector<PreferencePair> build_rationale_pairs(const TaskSpec& task,
                                                  const std::vector<RationalePairInput>& inputs,
                                                  std::vector<std::string>* skipped) {
    std::vector<PreferencePair> out;
    out.reserve(inputs.size());

    for (const auto& input : inputs) {
        if (input.question.task_id != task.task_id) {
            throw PreconditionViolation("question '" + input.question.id + "' belongs to task '" +
                                        input.question.task_id + "', not '" + task.task_id + "'");
        }
        std::vector<const Rationale*> scored;
        for (const auto& r : input.rationales) {
            if (r.pref_score) scored.push_back(&r);
        }
        if (scored.size() < 2) {
            if (skipped) {
                skipped->push_back("question '" + input.question.id + "' skipped: only " +
                                   std::to_string(scored.size()) + " scored rationales");
            }
            continue;
        }

        auto better = [](const Rationale* a, const Rationale* b) {
            if (*a->pref_score != *b->pref_score) return *a->pref_score > *b->pref_score;
            return a->strategy_index < b->strategy_index;
        };
        const Rationale* best = scored.front();
        const Rationale* worst = scored.front();
        for (const Rationale* r : scored) {
            if (better(r, best)) best = r;
            if (better(worst, r)) worst = r;
        }

        if (*best->pref_score == *worst->pref_score) {
            if (skipped) {
                skipped->push_back("question '" + input.question.id +
                                   "' skipped: rationales tie at score " +
                                   std::to_string(*best->pref_score));
            }
            continue;
        }
        if (best->text == worst->text) {
            if (skipped) {
                skipped->push_back("question '" + input.question.id +
                                   "' skipped: best and worst rationale texts are identical");
            }
            continue;
        }

        PreferencePair pair;
        pair.prompt = build_naive_stepbystep_prompt(task, input.question);
        pair.chosen = best->text;
        pair.rejected = worst->text;
        pair.level = PairLevel::rationale;
        pair.task_id = task.task_id;
        pair.chosen_score = *best->pref_score;
        pair.rejected_score = *worst->pref_score;
        out.push_back(std::move(pair));
    }
    return out;
}

ExportCounts mix_and_export(std::vector<PreferencePair> question_pairs,
                            std::vector<PreferencePair> rationale_pairs,
                            const std::filesystem::path& out_path,
                            std::uint64_t seed) {
    ExportCounts counts;
    counts.question_pairs = question_pairs.size();
    counts.rationale_pairs = rationale_pairs.size();

    std::vector<PreferencePair> all = std::move(question_pairs);
    all.insert(all.end(), std::make_move_iterator(rationale_pairs.begin()),
               std::make_move_iterator(rationale_pairs.end()));
    counts.total = all.size();

    SplitMix64 rng(seed);
    shuffle_inplace(all, rng);

    std::vector<detail::json> lines;
    lines.reserve(all.size());
    for (const auto& p : all) lines.push_back(detail::to_json(p));
    write_jsonl(out_path, lines);
    return counts;
}

std::size_t export_sft(const std::map<std::string, TaskSpec>& tasks,
                       const std::vector<DraftExample>& examples,
                       const std::filesystem::path& out_path) {
    std::vector<detail::json> lines;
    lines.reserve(examples.size());
    for (const auto& ex : examples) {
        auto it = tasks.find(ex.question.task_id);
        if (it == tasks.end()) {
            throw PreconditionViolation("no task spec for '" + ex.question.task_id + "'");
        }
        if (ex.rationale.text.empty()) {
            throw PreconditionViolation("example for question '" + ex.question.id +
                                        "' has an empty rationale");
        }
        SftRecord rec;
        rec.prompt = build_naive_stepbystep_prompt(it->second, ex.question);
        rec.completion = ex.rationale.text;
        rec.task_id = ex.question.task_id;
        lines.push_back(detail::to_json(rec));
    }
    write_jsonl(out_path, lines);
    return lines.size();
}

double dpo_loss(double logp_policy_chosen, double logp_policy_rejected,
                double logp_ref_chosen, double logp_ref_rejected,
                const DpoLossConfig& cfg) {
    for (double v : {logp_policy_chosen, logp_policy_rejected, logp_ref_chosen, logp_ref_rejected,
                     cfg.beta}) {
        if (!std::isfinite(v)) throw NonFiniteInput("dpo_loss inputs must be finite");
    }
    if (cfg.beta <= 0.0) throw PreconditionViolation("dpo beta must be positive");

    const double margin = (logp_policy_chosen - logp_ref_chosen) -
                          (logp_policy_rejected - logp_ref_rejected);
    const double x = cfg.beta * margin;
    // -log sigmoid(x) in softplus form, stable for large |x|.
    return x > 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

}  // namespace tailor
