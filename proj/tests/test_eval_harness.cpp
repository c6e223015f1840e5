// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#include "tailor/eval_harness.hpp"

#include <doctest.h>

#include <algorithm>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "tailor/errors.hpp"
#include "tailor/preference.hpp"
#include "tailor/rng.hpp"
#include "tailor/task.hpp"

using namespace tailor;

namespace {

std::vector<QAPair> claims(const std::string& prefix, const std::vector<bool>& evens) {
    std::vector<QAPair> out;
    for (std::size_t i = 0; i < evens.size(); ++i) {
        int v = 2 * static_cast<int>(i) + (evens[i] ? 0 : 1);
        out.push_back({prefix + " " + std::to_string(i) + ": the number " + std::to_string(v) +
                           " is even.",
                       evens[i] ? "True" : "False"});
    }
    return out;
}

// Scripted student: always answers True, so accuracy equals the share of
// True-keyed items.
CompletionResponse always_true(const CompletionRequest&) {
    CompletionResponse r;
    r.text = "Even numbers divide by two. <ans>True</ans>";
    return r;
}

// The 30-draft double-scored fixture: 2 drafts where the compact set picks a
// different best rationale, 4 where it picks a different worst, 24 in full
// agreement. Match rates land on 28/30 and 26/30.
std::vector<DoubleScoredDraft> thirty_draft_fixture() {
    std::vector<DoubleScoredDraft> drafts;
    for (int i = 0; i < 30; ++i) {
        DoubleScoredDraft d;
        d.question_id = "q" + std::to_string(i);
        d.strategy_indices = {0, 1, 2, 3};
        d.pref_scores = {0.2, 0.4, 0.6, 0.8};  // argmin 0, argmax 3
        if (i < 2) {
            d.val_scores = {0.1, 0.9, 0.6, 0.7};  // argmax moves to 1
        } else if (i < 6) {
            d.val_scores = {0.5, 0.3, 0.6, 0.9};  // argmin moves to 1
        } else {
            d.val_scores = {0.15, 0.35, 0.65, 0.95};
        }
        drafts.push_back(std::move(d));
    }
    return drafts;
}

Rationale scored_rationale(int strategy, const std::string& text, double score) {
    Rationale r;
    r.id = "r" + std::to_string(strategy);
    r.question_id = "q";
    r.strategy_index = strategy;
    r.text = text;
    r.pref_score = score;
    return r;
}

}  // namespace

TEST_CASE("word count splits on whitespace runs") {
    CHECK(word_count("") == 0);
    CHECK(word_count("   \t\n ") == 0);
    CHECK(word_count("one") == 1);
    CHECK(word_count(" a  b\tc\nd ") == 4);
    CHECK(word_count("commas, and. punctuation!") == 3);
    CHECK(word_count("line\nbreaks\ncount\nas\nseparators") == 5);
}

TEST_CASE("evaluate reports exact accuracy for a scripted model") {
    TaskSpec task = testing::tiny_boolean_task();
    auto test_set = claims("Claim t", {true, true, true, true, false, false});

    BackendRegistry reg;
    BackendId model = reg.register_custom("always-true", always_true);

    EvalReport report = evaluate(reg, model, task, test_set, {}, {});
    CHECK(report.task_id == task.task_id);
    CHECK(report.model == "always-true");
    CHECK(report.shots == 0);
    CHECK(report.total == 6);
    CHECK(report.correct_count == 4);
    CHECK(report.degraded_count == 0);
    CHECK(report.accuracy == doctest::Approx(4.0 / 6.0).epsilon(1e-12));

    REQUIRE(report.per_item.size() == 6);
    int recount = 0;
    for (std::size_t i = 0; i < test_set.size(); ++i) {
        CHECK(report.per_item[i].item_id == item_id_for(test_set[i]));
        CHECK(report.per_item[i].correct == (test_set[i].answer == "True"));
        CHECK_FALSE(report.per_item[i].degraded);
        if (report.per_item[i].correct) ++recount;
    }
    CHECK(report.accuracy ==
          doctest::Approx(static_cast<double>(recount) / report.total).epsilon(1e-15));

    // A model that answers without the tag is wrong, but not degraded.
    BackendId tagless = reg.register_custom("tagless", [](const CompletionRequest&) {
        CompletionResponse r;
        r.text = "True, surely.";
        return r;
    });
    EvalReport none = evaluate(reg, tagless, task, test_set, {}, {});
    CHECK(none.correct_count == 0);
    CHECK(none.degraded_count == 0);
    CHECK(none.accuracy == 0.0);
}

TEST_CASE("evaluate draws one seeded demo set for the whole sweep") {
    TaskSpec task = testing::tiny_boolean_task();
    auto test_set = claims("Claim t", {true, false, true});
    auto pool = claims("Demo d", {true, true, false, true, false});

    std::mutex mu;
    std::vector<CompletionRequest> seen;
    BackendRegistry reg;
    BackendId model = reg.register_custom("recorder", [&](const CompletionRequest& r) {
        std::lock_guard<std::mutex> lock(mu);
        seen.push_back(r);
        CompletionResponse resp;
        resp.text = "<ans>True</ans>";
        return resp;
    });

    EvalConfig cfg;
    cfg.shots = 2;
    cfg.seed = 77;
    EvalReport report = evaluate(reg, model, task, test_set, pool, cfg);
    CHECK(report.shots == 2);
    REQUIRE(seen.size() == 3);

    // The demo subset is drawn once up front, so every item sees the same
    // demos: recompute the draw and compare prompts byte for byte.
    SplitMix64 rng(cfg.seed);
    std::vector<QAPair> demos;
    for (auto idx : sample_indices(pool.size(), 2, rng)) demos.push_back(pool[idx]);
    std::set<std::string> prompts;
    for (const auto& r : seen) {
        prompts.insert(r.prompt);
        CHECK(r.temperature == 0.0);
        REQUIRE(r.stop_sequences.size() == 1);
        CHECK(r.stop_sequences[0] == "\nQuestion:");
    }
    REQUIRE(prompts.size() == 3);  // one prompt per distinct test question
    for (const auto& item : test_set) {
        CHECK(prompts.count(build_nshot_prompt(task, demos, item.question)) == 1);
    }

    // Zero shots: the demo pool is not consulted at all.
    seen.clear();
    EvalReport zero = evaluate(reg, model, task, test_set, {}, {});
    CHECK(zero.shots == 0);
    CHECK(seen.front().prompt == build_nshot_prompt(task, {}, test_set[0].question));

    // Using the whole pool is fine; one past it is not.
    EvalConfig all;
    all.shots = 5;
    CHECK(evaluate(reg, model, task, test_set, pool, all).shots == 5);
    EvalConfig over;
    over.shots = 6;
    CHECK_THROWS_WITH_AS(evaluate(reg, model, task, test_set, pool, over),
                         doctest::Contains("demo pool has 5 items, need 6"),
                         InsufficientDemoPool);

    EvalConfig negative;
    negative.shots = -1;
    CHECK_THROWS_AS(evaluate(reg, model, task, test_set, pool, negative), PreconditionViolation);
    CHECK_THROWS_AS(evaluate(reg, model, task, {}, pool, {}), PreconditionViolation);
}

TEST_CASE("evaluate marks backend failures degraded instead of aborting") {
    TaskSpec task = testing::tiny_boolean_task();
    auto test_set = claims("Claim t", {true, true, true, true});

    BackendRegistry reg;
    BackendId model = reg.register_custom("flaky", [&](const CompletionRequest& r) {
        if (r.prompt.find("Claim t 2:") != std::string::npos) {
            throw BackendUnavailable("endpoint fell over");
        }
        CompletionResponse resp;
        resp.text = "<ans>True</ans>";
        return resp;
    });

    EvalReport report = evaluate(reg, model, task, test_set, {}, {});
    CHECK(report.total == 4);
    CHECK(report.correct_count == 3);
    CHECK(report.degraded_count == 1);
    // The failed item counts against accuracy like a wrong answer.
    CHECK(report.accuracy == doctest::Approx(0.75).epsilon(1e-12));
    REQUIRE(report.per_item.size() == 4);
    CHECK(report.per_item[2].degraded);
    CHECK_FALSE(report.per_item[2].correct);
    CHECK(report.per_item[2].diagnostic.find("endpoint fell over") != std::string::npos);
    for (std::size_t i : {0u, 1u, 3u}) {
        CHECK_FALSE(report.per_item[i].degraded);
        CHECK(report.per_item[i].correct);
    }
}

TEST_CASE("consistency rates land on the thirty-draft fixture's constants") {
    ConsistencyReport report = consistency_check(thirty_draft_fixture());
    CHECK(report.samples == 30);
    CHECK(report.top_match_rate == doctest::Approx(28.0 / 30.0).epsilon(1e-12));
    CHECK(report.bottom_match_rate == doctest::Approx(26.0 / 30.0).epsilon(1e-12));
    // The headline percentages, to the advertised precision.
    CHECK(std::abs(report.top_match_rate - 0.9333) <= 1e-4);
    CHECK(std::abs(report.bottom_match_rate - 0.8667) <= 1e-4);
}

TEST_CASE("consistency tie-breaks on strategy index, not array position") {
    // Both scorers tie their best two entries; the lower strategy index wins
    // on each side, so the (position-level) choices still agree.
    DoubleScoredDraft d;
    d.question_id = "tied";
    d.strategy_indices = {3, 0, 1};
    d.pref_scores = {0.8, 0.8, 0.1};  // argmax: strategy 0 at position 1
    d.val_scores = {0.4, 0.9, 0.1};   // argmax: position 1 outright
    ConsistencyReport r1 = consistency_check({d});
    CHECK(r1.top_match_rate == 1.0);

    // Reorder the same draft jointly: rates must not move.
    DoubleScoredDraft p;
    p.question_id = "tied-permuted";
    p.strategy_indices = {0, 1, 3};
    p.pref_scores = {0.8, 0.1, 0.8};
    p.val_scores = {0.9, 0.1, 0.4};
    ConsistencyReport r2 = consistency_check({p});
    CHECK(r2.top_match_rate == r1.top_match_rate);
    CHECK(r2.bottom_match_rate == r1.bottom_match_rate);
}

TEST_CASE("consistency is invariant under joint per-draft reordering") {
    SplitMix64 rng(20260714);
    std::vector<DoubleScoredDraft> drafts;
    for (int i = 0; i < 40; ++i) {
        DoubleScoredDraft d;
        d.question_id = "q" + std::to_string(i);
        int n = 2 + static_cast<int>(rng.next() % 4);
        for (int s = 0; s < n; ++s) {
            d.strategy_indices.push_back(s);
            d.pref_scores.push_back(static_cast<double>(rng.next() % 5) / 4.0);
            d.val_scores.push_back(static_cast<double>(rng.next() % 5) / 4.0);
        }
        drafts.push_back(std::move(d));
    }
    ConsistencyReport base = consistency_check(drafts);

    std::vector<DoubleScoredDraft> permuted = drafts;
    for (auto& d : permuted) {
        std::vector<std::size_t> order(d.pref_scores.size());
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        shuffle_inplace(order, rng);
        DoubleScoredDraft next;
        next.question_id = d.question_id;
        for (std::size_t k : order) {
            next.strategy_indices.push_back(d.strategy_indices[k]);
            next.pref_scores.push_back(d.pref_scores[k]);
            next.val_scores.push_back(d.val_scores[k]);
        }
        d = std::move(next);
    }
    ConsistencyReport moved = consistency_check(permuted);
    CHECK(moved.top_match_rate == base.top_match_rate);
    CHECK(moved.bottom_match_rate == base.bottom_match_rate);
    CHECK(moved.samples == base.samples);
}

TEST_CASE("consistency rejects missing or misaligned score sets") {
    CHECK_THROWS_WITH_AS(consistency_check({}), doctest::Contains("no double-scored drafts"),
                         MissingScoreSet);

    DoubleScoredDraft lopsided;
    lopsided.question_id = "bad";
    lopsided.strategy_indices = {0, 1, 2};
    lopsided.pref_scores = {0.1, 0.2, 0.3};
    lopsided.val_scores = {0.1, 0.2};
    CHECK_THROWS_WITH_AS(consistency_check({lopsided}), doctest::Contains("'bad'"),
                         MissingScoreSet);

    DoubleScoredDraft hollow;
    hollow.question_id = "hollow";
    CHECK_THROWS_AS(consistency_check({hollow}), MissingScoreSet);

    DoubleScoredDraft skewed;
    skewed.question_id = "skewed";
    skewed.strategy_indices = {0};
    skewed.pref_scores = {0.5, 0.6};
    skewed.val_scores = {0.5, 0.6};
    CHECK_THROWS_AS(consistency_check({skewed}), MissingScoreSet);
}

TEST_CASE("length bins partition by word count and report exact means") {
    std::vector<Rationale> rs = {
        scored_rationale(0, "a b c", 0.2),                               // 3 words -> [0,10)
        scored_rationale(1, "one two three four five", 0.6),             // 5 words -> [0,10)
        scored_rationale(2, "w w w w w w w w w w w w", 0.9),             // 12 words -> [10,20)
        scored_rationale(3, "x x x x x x x x x x x x x", 0.7),           // 13 words -> [10,20)
    };
    Rationale unscored = scored_rationale(4, "ignored entirely", 0.0);
    unscored.pref_score.reset();
    rs.push_back(unscored);

    LengthAnalysis out = length_bin_analysis(rs, 10);
    CHECK(out.total == 4);
    REQUIRE(out.bins.size() == 2);
    CHECK(out.bins[0].lo == 0);
    CHECK(out.bins[0].hi == 10);
    CHECK(out.bins[0].count == 2);
    CHECK(out.bins[0].mean_score == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(out.bins[1].lo == 10);
    CHECK(out.bins[1].hi == 20);
    CHECK(out.bins[1].count == 2);
    CHECK(out.bins[1].mean_score == doctest::Approx(0.8).epsilon(1e-12));

    // Correlation recount over (word count, score) pairs.
    std::vector<double> wc = {3, 5, 12, 13};
    std::vector<double> scores = {0.2, 0.6, 0.9, 0.7};
    CHECK(out.pearson_r == doctest::Approx(testing::pearson_oracle(wc, scores)).epsilon(1e-12));

    // A word count on the boundary lands in the upper bin.
    std::vector<Rationale> edge = {scored_rationale(0, "a a a a a a a a a a", 1.0)};  // 10 words
    LengthAnalysis eout = length_bin_analysis(edge, 10);
    REQUIRE(eout.bins.size() == 1);
    CHECK(eout.bins[0].lo == 10);
    CHECK(eout.bins[0].hi == 20);

    // Degenerate spreads report r = 0 instead of dividing by zero.
    std::vector<Rationale> flat = {scored_rationale(0, "a b", 0.5),
                                   scored_rationale(1, "c d e f", 0.5)};
    CHECK(length_bin_analysis(flat, 10).pearson_r == 0.0);
    std::vector<Rationale> same_len = {scored_rationale(0, "a b", 0.1),
                                       scored_rationale(1, "c d", 0.9)};
    CHECK(length_bin_analysis(same_len, 10).pearson_r == 0.0);

    CHECK_THROWS_AS(length_bin_analysis(rs, 0), PreconditionViolation);
    std::vector<Rationale> none = {unscored};
    CHECK_THROWS_WITH_AS(length_bin_analysis(none, 10),
                         doctest::Contains("no scored rationales"), PreconditionViolation);
}
