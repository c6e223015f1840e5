// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#include "tailor/preference.hpp"

#include <unordered_set>

#include "tailor/digest.hpp"
#include "tailor/errors.hpp"
#include "tailor/rng.hpp"

namespace tailor {

namespace {

void append_preamble(std::string& out, const TaskSpec& task) {
    out += "Task Description: ";
    out += task.description;
    out += "\n";
    out += "Remember you should include your final answer with the tag <ans> and </ans>.\n";
}

void append_test_question(std::string& out, const std::string& test_question) {
    out += "Question: ";
    out += test_question;
    out += "\n";
    out += "Answer: Let's think step by step.";
}

}  // namespace

std::string matrix_row_id(const std::string& model_name, int shots) {
    return model_name + "#" + std::to_string(shots) + "shot";
}

std::string build_icl_prompt(const TaskSpec& task,
                             const DraftExample& example,
                             const std::string& test_question) {
    std::string out;
    append_preamble(out, task);
    out += "Question: ";
    out += example.question.input;
    out += "\n";
    out += "Answer: Let's think step by step. ";
    out += example.rationale.text;
    out += "\n";
    append_test_question(out, test_question);
    return out;
}

std::string build_nshot_prompt(const TaskSpec& task,
                               const std::vector<QAPair>& demos,
                               const std::string& test_question) {
    std::string out;
    append_preamble(out, task);
    for (const auto& demo : demos) {
        out += "Question: ";
        out += demo.question;
        out += "\n";
        out += "Answer: Let's think step by step. <ans>";
        out += demo.answer;
        out += "</ans>\n";
    }
    append_test_question(out, test_question);
    return out;
}

std::optional<std::string> extract_answer(const std::string& completion, AnswerFormat format) {
    static constexpr std::string_view kOpen = "<ans>";
    static constexpr std::string_view kClose = "</ans>";

    // Models often restate answers; the last complete tag pair wins.
    std::size_t close = completion.rfind(kClose.data(), std::string::npos, kClose.size());
    if (close == std::string::npos) return std::nullopt;
    std::size_t open = completion.rfind(kOpen.data(), close, kOpen.size());
    if (open == std::string::npos) return std::nullopt;

    std::string inner = completion.substr(open + kOpen.size(), close - open - kOpen.size());
    return normalize_answer(inner, format);
}

ScoreRecord score_rationale(BackendRegistry& backends,
                            const BackendId& student,
                            const TaskSpec& task,
                            const DraftExample& example,
                            const PreferenceSet& pref,
                            int max_in_flight,
                            double temperature,
                            int max_tokens) {
    if (pref.items.empty()) throw PreconditionViolation("preference set has no items");
    if (example.question.task_id != task.task_id) {
        throw PreconditionViolation("example question belongs to task '" +
                                    example.question.task_id + "', not '" + task.task_id + "'");
    }

    std::vector<CompletionRequest> reqs;
    reqs.reserve(pref.items.size());
    for (const auto& item : pref.items) {
        CompletionRequest req;
        req.prompt = build_icl_prompt(task, example, item.question);
        req.temperature = temperature;
        req.max_tokens = max_tokens;
        req.stop_sequences = {"\nQuestion:"};
        reqs.push_back(std::move(req));
    }

    auto responses = backends.batch_complete(student, reqs, max_in_flight);

    ScoreRecord record;
    record.subject_id = example.rationale.id;
    record.question_id = example.question.id;
    record.level = ScoreLevel::rationale;
    record.shots = 1;
    record.per_item.reserve(pref.items.size());

    int correct = 0;
    for (std::size_t idx = 0; idx < responses.size(); ++idx) {
        const auto& resp = responses[idx];
        if (resp.finish_reason == FinishReason::error) {
            // Completed items live in the response cache, so a rerun picks
            // up where this one stopped.
            throw BackendUnavailable("scoring of rationale '" + example.rationale.id +
                                     "' stopped at item " + std::to_string(idx) + ": " +
                                     resp.error_message);
        }
        auto got = extract_answer(resp.text, task.answer_format);
        bool ok = got && *got == comparison_answer(pref.items[idx], task.answer_format);
        record.per_item.push_back({static_cast<int>(idx), ok});
        if (ok) ++correct;
    }
    record.score = static_cast<double>(correct) / static_cast<double>(pref.items.size());
    return record;
}

ScoreRecord score_question(const std::vector<ScoreRecord>& rationale_records) {
    if (rationale_records.empty()) {
        throw PreconditionViolation("question score needs at least one rationale record");
    }
    const std::string& qid = rationale_records.front().question_id;
    double sum = 0.0;
    for (const auto& r : rationale_records) {
        if (r.level != ScoreLevel::rationale) {
            throw PreconditionViolation("question score aggregates rationale-level records only");
        }
        if (r.question_id != qid) {
            throw MixedQuestionIds("records span questions '" + qid + "' and '" + r.question_id +
                                   "'");
        }
        sum += r.score;
    }

    ScoreRecord out;
    out.subject_id = qid;
    out.question_id = qid;
    out.level = ScoreLevel::question;
    out.score = sum / static_cast<double>(rationale_records.size());
    out.shots = rationale_records.front().shots;
    return out;
}

ScoreMatrix build_score_matrix(BackendRegistry& backends,
                               const std::vector<BackendId>& models,
                               const TaskSpec& task,
                               const std::vector<QAPair>& items,
                               const std::vector<int>& shots,
                               const std::vector<QAPair>& demo_pool,
                               std::uint64_t seed,
                               int max_in_flight,
                               double temperature,
                               int max_tokens) {
    if (models.empty()) throw PreconditionViolation("matrix needs at least one model");
    if (items.empty()) throw PreconditionViolation("matrix needs at least one item");
    if (shots.empty()) throw PreconditionViolation("matrix needs at least one shot count");
    for (int s : shots) {
        if (s < 0) throw PreconditionViolation("shot counts must be >= 0");
        if (static_cast<std::size_t>(s) > demo_pool.size()) {
            throw InsufficientDemoPool("demo pool has " + std::to_string(demo_pool.size()) +
                                       " items, need " + std::to_string(s) + " for " +
                                       std::to_string(s) + "-shot row");
        }
    }

    ScoreMatrix matrix;
    matrix.item_ids.reserve(items.size());
    for (const auto& item : items) matrix.item_ids.push_back(item_id_for(item));

    std::unordered_set<std::string> seen_rows;
    for (const auto& model : models) {
        for (int s : shots) {
            std::string row_id = matrix_row_id(model.name, s);
            if (!seen_rows.insert(row_id).second) {
                throw PreconditionViolation("duplicate matrix row: " + row_id);
            }
            matrix.row_ids.push_back(std::move(row_id));
        }
    }
    matrix.cells.assign(matrix.rows() * matrix.cols(), 0);

    std::size_t row = 0;
    for (const auto& model : models) {
        for (int s : shots) {
            const std::string& row_id = matrix.row_ids[row];
            // Each row gets its own demo draw so shot contexts differ across
            // rows but are reproducible at a fixed seed.
            SplitMix64 rng(mix_seed(seed, digest_u64(row_id)));
            auto demo_idx = sample_indices(demo_pool.size(), static_cast<std::size_t>(s), rng);
            std::vector<QAPair> demos;
            demos.reserve(demo_idx.size());
            for (auto di : demo_idx) demos.push_back(demo_pool[di]);

            std::vector<CompletionRequest> reqs;
            reqs.reserve(items.size());
            for (const auto& item : items) {
                CompletionRequest req;
                req.prompt = build_nshot_prompt(task, demos, item.question);
                req.temperature = temperature;
                req.max_tokens = max_tokens;
                req.stop_sequences = {"\nQuestion:"};
                reqs.push_back(std::move(req));
            }

            auto responses = backends.batch_complete(model, reqs, max_in_flight);
            for (std::size_t c = 0; c < responses.size(); ++c) {
                const auto& resp = responses[c];
                if (resp.finish_reason == FinishReason::error) {
                    throw BackendUnavailable("matrix row '" + row_id + "' stopped at item " +
                                             std::to_string(c) + ": " + resp.error_message);
                }
                auto got = extract_answer(resp.text, task.answer_format);
                bool ok = got && *got == comparison_answer(items[c], task.answer_format);
                matrix.set(row, c, ok ? 1 : 0);
            }
            ++row;
        }
    }
    return matrix;
}

}  // namespace tailor
