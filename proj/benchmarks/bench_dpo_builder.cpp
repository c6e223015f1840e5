// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <cstdio>
#include <string>
#include <vector>

#include "tailor/dpo_builder.hpp"
#include "tailor/rng.hpp"
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

std::vector<DraftQuestion> scored_drafts(const TaskSpec& task, int m, std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<DraftQuestion> drafts;
    for (int i = 0; i < m; ++i) {
        DraftQuestion q;
        char buf[16];
        std::snprintf(buf, sizeof buf, "%05d", i);
        q.id = std::string("d") + buf;
        q.task_id = task.task_id;
        q.input = "Claim " + std::to_string(i) + ": the number " + std::to_string(2 * i) +
                  " is even.";
        q.target = "True";
        q.pref_score = static_cast<double>(rng.below(41)) / 40.0;
        drafts.push_back(std::move(q));
    }
    return drafts;
}

void BM_BuildQuestionPairs(benchmark::State& state) {
    TaskSpec task = bench_task();
    const int m = static_cast<int>(state.range(0));
    auto drafts = scored_drafts(task, m, 42);
    for (auto _ : state) {
        auto pairs = build_question_pairs(task, drafts, 50, 7);
        benchmark::DoNotOptimize(pairs.size());
    }
}
BENCHMARK(BM_BuildQuestionPairs)->Arg(250)->Arg(1000);

void BM_BuildRationalePairs(benchmark::State& state) {
    TaskSpec task = bench_task();
    auto drafts = scored_drafts(task, 250, 42);
    SplitMix64 rng(11);
    std::vector<RationalePairInput> inputs;
    for (const auto& q : drafts) {
        RationalePairInput in;
        in.question = q;
        for (int s = 0; s < 4; ++s) {
            Rationale r;
            r.id = q.id + "#" + std::to_string(s);
            r.question_id = q.id;
            r.strategy_index = s;
            r.text = "Reasoning path " + std::to_string(s) + " about " + q.input;
            r.pref_score = static_cast<double>(rng.below(5)) / 4.0;
            in.rationales.push_back(std::move(r));
        }
        inputs.push_back(std::move(in));
    }
    for (auto _ : state) {
        auto pairs = build_rationale_pairs(task, inputs);
        benchmark::DoNotOptimize(pairs.size());
    }
}
BENCHMARK(BM_BuildRationalePairs);

void BM_DpoLoss(benchmark::State& state) {
    for (auto _ : state) {
        double total = 0.0;
        for (int i = 0; i < 1000; ++i) {
            double chosen = -25.0 + 50.0 * i / 999.0;
            total += dpo_loss(chosen, 0.0, 0.0, 0.0, {0.1});
        }
        benchmark::DoNotOptimize(total);
    }
    state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_DpoLoss);

}  // namespace
