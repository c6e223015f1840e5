// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <string>

#include "tailor/elicitation.hpp"
#include "tailor/task.hpp"

using namespace tailor;

namespace {

TaskSpec bench_task() {
    TaskSpec t;
    t.task_id = "bench_parity";
    t.description = "Decide whether a short parity claim holds.";
    t.category = TaskCategory::logic;
    t.answer_format = AnswerFormat::boolean;
    t.seed_questions = {{"Claim s1: 2 is even.", "True"},
                        {"Claim s2: 3 is even.", "False"},
                        {"Claim s3: 4 is even.", "True"}};
    t.strategy_prompts = {
        "Check the parity of the number in the claim. Remember you should output your final "
        "answer in the end like <ans>True</ans> or <ans>False</ans>"};
    return t;
}

// A teacher-style reply: chatter, then `blocks` question blocks separated by
// more chatter, with one malformed region thrown in.
std::string reply_with_blocks(int blocks) {
    std::string out = "Sure! Here are some fresh questions for you.\n";
    for (int i = 1; i <= blocks; ++i) {
        out += "Let me think of another one...\n";
        out += "<Question_" + std::to_string(i) + "><input>Claim " + std::to_string(i) +
               ": the number " + std::to_string(2 * i) + " is even.</input><target>True"
               "</target></Question_" + std::to_string(i) + ">\n";
    }
    out += "<Question_999><target>orphaned</target>\nHope these help!\n";
    return out;
}

void BM_ParseQuestionBlocks(benchmark::State& state) {
    const std::string text = reply_with_blocks(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        ParseResult r = parse_question_blocks(text);
        benchmark::DoNotOptimize(r.blocks.size());
    }
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_ParseQuestionBlocks)->Arg(5)->Arg(50)->Arg(500);

void BM_BuildQuestionPrompt(benchmark::State& state) {
    TaskSpec task = bench_task();
    std::array<QAPair, 3> triple = {task.seed_questions[0], task.seed_questions[1],
                                    task.seed_questions[2]};
    for (auto _ : state) {
        std::string prompt = build_question_prompt(task, triple, 5);
        benchmark::DoNotOptimize(prompt.size());
    }
}
BENCHMARK(BM_BuildQuestionPrompt);

}  // namespace
