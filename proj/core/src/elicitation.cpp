// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#include "tailor/elicitation.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

#include "tailor/digest.hpp"
#include "tailor/dpo_builder.hpp"
#include "tailor/errors.hpp"
#include "tailor/rng.hpp"

namespace tailor {

namespace {

std::string_view trim_view(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

void append_block(std::string& out, const QAPair& qa, int index) {
    out += "<Question_";
    out += std::to_string(index);
    out += "><input>";
    out += qa.question;
    out += "</input><target>";
    out += qa.answer;
    out += "</target></Question_";
    out += std::to_string(index);
    out += ">";
}

std::size_t skip_ws(const std::string& text, std::size_t pos) {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    return pos;
}

}  // namespace

std::string build_question_prompt(const TaskSpec& task,
                                  const std::array<QAPair, 3>& seed_triple,
                                  int per_prompt_count) {
    if (per_prompt_count < 1) throw PreconditionViolation("per_prompt_count must be >= 1");
    const std::string name = task_display_name(task.task_id);

    std::string out;
    out += name;
    out += " is a task whose description is as follows: ";
    out += task.description;
    out += "\n";
    out += "I will provide you 3 example questions about this task in the following. ";
    out += "Based on the following example, I want you to generate ";
    out += std::to_string(per_prompt_count);
    out += " more questions about ";
    out += name;
    out += " with brainstorming.\n";
    out += "You may not stick to context, but the question should be related to ";
    out += name;
    out += ".\n";
    out += "The output should be like this:\n";
    out += "<Question_x><input>...</input><target>...</target></Question_x>\n";
    out += "x can be any number, but it should be unique.\n";
    out += "\n";
    for (int i = 0; i < 3; ++i) {
        append_block(out, seed_triple[static_cast<std::size_t>(i)], i + 1);
        if (i < 2) out += "\n";
    }
    return out;
}

ParseResult parse_question_blocks(const std::string& text) {
    static constexpr std::string_view kOpen = "<Question_";
    static constexpr std::string_view kInputOpen = "<input>";
    static constexpr std::string_view kInputClose = "</input>";
    static constexpr std::string_view kTargetOpen = "<target>";
    static constexpr std::string_view kTargetClose = "</target>";

    ParseResult out;
    std::size_t pos = 0;
    while (true) {
        std::size_t start = text.find(kOpen.data(), pos, kOpen.size());
        if (start == std::string::npos) break;

        // The label between "<Question_" and ">" is free-form; models number
        // blocks however they like.
        std::size_t tag_close = text.find('>', start + kOpen.size());
        if (tag_close == std::string::npos) {
            out.diagnostics.push_back("unterminated question tag at offset " +
                                      std::to_string(start));
            break;
        }

        std::size_t cursor = skip_ws(text, tag_close + 1);
        if (text.compare(cursor, kInputOpen.size(), kInputOpen) != 0) {
            out.diagnostics.push_back("block at offset " + std::to_string(start) +
                                      " lacks <input>");
            pos = start + 1;
            continue;
        }
        cursor += kInputOpen.size();
        std::size_t input_end = text.find(kInputClose.data(), cursor, kInputClose.size());
        if (input_end == std::string::npos) {
            out.diagnostics.push_back("block at offset " + std::to_string(start) +
                                      " has unterminated <input>");
            pos = start + 1;
            continue;
        }
        std::string input(trim_view(std::string_view(text).substr(cursor, input_end - cursor)));

        cursor = skip_ws(text, input_end + kInputClose.size());
        if (text.compare(cursor, kTargetOpen.size(), kTargetOpen) != 0) {
            out.diagnostics.push_back("block at offset " + std::to_string(start) +
                                      " lacks <target>");
            pos = start + 1;
            continue;
        }
        cursor += kTargetOpen.size();
        std::size_t target_end = text.find(kTargetClose.data(), cursor, kTargetClose.size());
        if (target_end == std::string::npos) {
            out.diagnostics.push_back("block at offset " + std::to_string(start) +
                                      " has unterminated <target>");
            pos = start + 1;
            continue;
        }
        std::string target(trim_view(std::string_view(text).substr(cursor, target_end - cursor)));

        out.blocks.push_back({std::move(input), std::move(target)});
        pos = target_end + kTargetClose.size();
    }
    return out;
}

std::vector<DraftQuestion> elicit_questions(BackendRegistry& backends,
                                            const BackendId& teacher,
                                            const TaskSpec& task,
                                            int m,
                                            double temperature,
                                            std::optional<std::uint64_t> base_seed,
                                            int per_prompt_count,
                                            int max_in_flight,
                                            int max_tokens,
                                            ElicitDiagnostics* diag) {
    task.validate();
    if (m < 1) throw PreconditionViolation("m must be >= 1");
    if (per_prompt_count < 1) throw PreconditionViolation("per_prompt_count must be >= 1");
    if (max_in_flight < 1) throw PreconditionViolation("max_in_flight must be >= 1");

    const int budget = 5 * ((m + per_prompt_count - 1) / per_prompt_count);
    const std::size_t n_seeds = task.seed_questions.size();

    ElicitDiagnostics local;
    ElicitDiagnostics& d = diag ? *diag : local;

    std::vector<DraftQuestion> out;
    out.reserve(static_cast<std::size_t>(m));
    std::unordered_set<std::string> seen;

    int issued = 0;
    while (static_cast<int>(out.size()) < m && issued < budget) {
        const int batch = std::min(max_in_flight, budget - issued);
        std::vector<CompletionRequest> reqs;
        std::vector<std::string> prompt_digests;
        reqs.reserve(static_cast<std::size_t>(batch));
        for (int b = 0; b < batch; ++b) {
            const int attempt = issued + b;
            // Seed triples rotate one step per attempt so consecutive
            // attempts see different example contexts.
            std::array<QAPair, 3> triple = {
                task.seed_questions[static_cast<std::size_t>(attempt) % n_seeds],
                task.seed_questions[(static_cast<std::size_t>(attempt) + 1) % n_seeds],
                task.seed_questions[(static_cast<std::size_t>(attempt) + 2) % n_seeds]};
            CompletionRequest req;
            req.prompt = build_question_prompt(task, triple, per_prompt_count);
            req.temperature = temperature;
            req.max_tokens = max_tokens;
            if (base_seed) req.seed = mix_seed(*base_seed, static_cast<std::uint64_t>(attempt));
            prompt_digests.push_back(prompt_digest(req.prompt));
            reqs.push_back(std::move(req));
        }
        issued += batch;
        d.attempts = issued;

        auto responses = backends.batch_complete(teacher, reqs, max_in_flight);
        for (std::size_t r = 0; r < responses.size(); ++r) {
            const auto& resp = responses[r];
            if (resp.finish_reason == FinishReason::error) {
                // complete() already exhausted its retry budget; a surviving
                // error means the teacher is genuinely down.
                throw BackendUnavailable("question generation failed: " + resp.error_message);
            }
            ParseResult parsed = parse_question_blocks(resp.text);
            d.parsed_blocks += static_cast<int>(parsed.blocks.size());
            for (auto& note : parsed.diagnostics) d.notes.push_back(std::move(note));

            int batch_index = 0;
            for (const auto& block : parsed.blocks) {
                if (static_cast<int>(out.size()) >= m) break;
                const int this_index = batch_index++;
                const std::string key = normalize_question_key(block.input);
                if (key.empty()) {
                    ++d.malformed_dropped;
                    d.notes.push_back("dropped block with empty input");
                    continue;
                }
                auto target = normalize_answer(block.target, task.answer_format);
                if (!target) {
                    ++d.malformed_dropped;
                    d.notes.push_back("dropped '" + block.input + "': unusable target '" +
                                      block.target + "'");
                    continue;
                }
                if (!seen.insert(key).second) {
                    ++d.duplicates_dropped;
                    continue;
                }
                DraftQuestion q;
                q.id = digest16(task.task_id + "\n" + key);
                q.task_id = task.task_id;
                q.input = block.input;
                q.target = *target;
                q.prompt_digest = prompt_digests[r];
                q.batch_index = this_index;
                out.push_back(std::move(q));
            }
        }
    }

    if (static_cast<int>(out.size()) < m) {
        // Snapshot the count: the message and the moved-from payload are both
        // constructor arguments, and their evaluation order is unspecified.
        const std::size_t collected = out.size();
        throw ElicitationBudgetExceeded(
            "collected " + std::to_string(collected) + " of " + std::to_string(m) +
                " questions for task '" + task.task_id + "' within " + std::to_string(budget) +
                " attempts",
            std::move(out));
    }
    return out;
}

std::vector<Rationale> elicit_rationales(BackendRegistry& backends,
                                         const BackendId& teacher,
                                         const TaskSpec& task,
                                         const DraftQuestion& question,
                                         double temperature,
                                         int max_in_flight,
                                         int max_tokens,
                                         std::vector<std::string>* diagnostics) {
    task.validate();
    if (question.task_id != task.task_id) {
        throw PreconditionViolation("question '" + question.id + "' belongs to task '" +
                                    question.task_id + "', not '" + task.task_id + "'");
    }

    std::vector<CompletionRequest> reqs;
    reqs.reserve(task.strategy_prompts.size());
    for (const auto& strategy : task.strategy_prompts) {
        CompletionRequest req;
        req.prompt = strategy + "\n\nQuestion: " + question.input + "\nAnswer:";
        req.temperature = temperature;
        req.max_tokens = max_tokens;
        reqs.push_back(std::move(req));
    }

    auto responses = backends.batch_complete(teacher, reqs, max_in_flight);

    std::vector<Rationale> out;
    int errors = 0;
    for (std::size_t i = 0; i < responses.size(); ++i) {
        const auto& resp = responses[i];
        if (resp.finish_reason == FinishReason::error) {
            ++errors;
            if (diagnostics) {
                diagnostics->push_back("strategy " + std::to_string(i) + " failed: " +
                                       resp.error_message);
            }
            continue;
        }
        std::string text(trim_view(resp.text));
        if (text.empty()) {
            if (diagnostics) {
                diagnostics->push_back("strategy " + std::to_string(i) +
                                       " returned an empty rationale");
            }
            continue;
        }
        Rationale r;
        r.id = digest16(question.id + "#" + std::to_string(i));
        r.question_id = question.id;
        r.strategy_index = static_cast<int>(i);
        r.text = std::move(text);
        out.push_back(std::move(r));
    }

    if (out.empty()) {
        throw BackendUnavailable("no rationale could be drafted for question '" + question.id +
                                 "' (" + std::to_string(errors) + " of " +
                                 std::to_string(responses.size()) + " strategies failed)");
    }
    return out;
}

std::vector<DraftExample> regenerate_tailored(BackendRegistry& backends,
                                              const BackendId& aligned_teacher,
                                              const TaskSpec& task,
                                              int m,
                                              std::optional<std::uint64_t> base_seed,
                                              int per_prompt_count,
                                              int max_in_flight,
                                              int max_tokens,
                                              std::vector<std::string>* diagnostics) {
    // Regeneration mirrors the original drafting temperatures: sampled
    // questions, greedy rationales.
    auto questions = elicit_questions(backends, aligned_teacher, task, m, 1.0, base_seed,
                                      per_prompt_count, max_in_flight, max_tokens, nullptr);

    std::vector<CompletionRequest> reqs;
    reqs.reserve(questions.size());
    for (const auto& q : questions) {
        CompletionRequest req;
        req.prompt = build_naive_stepbystep_prompt(task, q);
        req.temperature = 0.0;
        req.max_tokens = max_tokens;
        reqs.push_back(std::move(req));
    }

    auto responses = backends.batch_complete(aligned_teacher, reqs, max_in_flight);

    std::vector<DraftExample> out;
    out.reserve(questions.size());
    for (std::size_t i = 0; i < questions.size(); ++i) {
        const auto& resp = responses[i];
        if (resp.finish_reason == FinishReason::error) {
            if (diagnostics) {
                diagnostics->push_back("question '" + questions[i].id +
                                       "' dropped: " + resp.error_message);
            }
            continue;
        }
        std::string text(trim_view(resp.text));
        if (text.empty()) {
            if (diagnostics) {
                diagnostics->push_back("question '" + questions[i].id +
                                       "' dropped: empty rationale");
            }
            continue;
        }
        Rationale r;
        r.id = digest16(questions[i].id + "#naive");
        r.question_id = questions[i].id;
        r.strategy_index = 0;
        r.text = std::move(text);
        out.push_back(DraftExample{std::move(questions[i]), std::move(r)});
    }
    return out;
}

}  // namespace tailor
