// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Shared test scaffolding: scratch directories, independent statistics
// oracles, tiny task factories, and a fully mocked two-task workspace the
// pipeline, CLI, and acceptance tests run end to end.

#include <stdlib.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tailor/task.hpp"

namespace tailor::testing {

// Self-deleting scratch directory under $TMPDIR.
class TempDir {
public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "tailor-XXXXXX").string();
        std::vector<char> buf(tmpl.begin(), tmpl.end());
        buf.push_back('\0');
        if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed for " + tmpl);
        path_ = buf.data();
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, std::string_view content) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Plain textbook formulas, written independently of the library so they can
// serve as oracles for its statistics.
inline double pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::runtime_error("pearson oracle misuse");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

// Average ranks (1-based); ties share the mean of their rank range.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size(), 0.0);
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double shared = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
        i = j + 1;
    }
    return ranks;
}

inline double spearman_oracle(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson_oracle(average_ranks(x), average_ranks(y));
}

// Minimal boolean task used by unit tests that do not care about content.
inline TaskSpec tiny_boolean_task(const std::string& id = "tiny_bool") {
    TaskSpec t;
    t.task_id = id;
    t.description = "Decide whether a tiny claim holds.";
    t.category = TaskCategory::logic;
    t.answer_format = AnswerFormat::boolean;
    t.seed_questions = {{"Claim s1: 2 is even.", "True"},
                        {"Claim s2: 3 is even.", "False"},
                        {"Claim s3: 4 is even.", "True"}};
    t.strategy_prompts = {
        "Check the parity of the number in the claim. Remember you should output your final "
        "answer in the end like <ans>True</ans> or <ans>False</ans>",
        "Restate the claim, reason it through, then judge it. Remember you should output your "
        "final answer in the end like <ans>True</ans> or <ans>False</ans>"};
    return t;
}

// ---------------------------------------------------------------------------
// Toy workspace: two boolean tasks, a mock teacher whose alphabet is six
// canned five-question brainstorms, and coin-flip student/probe mocks. Small
// enough that a full pipeline run finishes in a couple of seconds, varied
// enough that quartiles, argmax/argmin, and the IRT fit all get real spread.
// ---------------------------------------------------------------------------

struct ToyOptions {
    std::string run_id = "toy";
    std::uint64_t seed = 1234;
    int m = 10;
    int n = 2;
    int k = 5;
    int question_pairs = 4;
    bool pool_irt = false;
};

struct ToyWorkspace {
    std::filesystem::path root;
    std::filesystem::path config_path;
    std::vector<std::string> task_ids;
};

// One brainstorm response: five question blocks in the elicitation format.
// Inputs are globally unique across members so two distinct responses always
// cover m = 10 unique questions.
inline std::string toy_question_blob(int member) {
    std::string out = "Sure, here are five more questions (set " + std::to_string(member) + ").\n";
    for (int i = 1; i <= 5; ++i) {
        const int g = member * 5 + i;
        const int value = 2 * g + (g % 2);  // even when g is even, odd otherwise
        out += "<Question_" + std::to_string(i) + "><input>Claim " + std::to_string(g) +
               ": the number " + std::to_string(value) + " is even.</input><target>" +
               (g % 2 == 0 ? "True" : "False") + "</target></Question_" + std::to_string(i) +
               ">\n";
    }
    return out;
}

inline std::vector<std::string> toy_teacher_alphabet() {
    std::vector<std::string> alphabet;
    for (int member = 0; member < 6; ++member) alphabet.push_back(toy_question_blob(member));
    return alphabet;
}

inline nlohmann::json toy_task_json(const std::string& id, const std::string& topic) {
    nlohmann::json seeds = nlohmann::json::array();
    seeds.push_back({{"question", "Seed claim: the integer 4 is even."}, {"answer", "True"}});
    seeds.push_back({{"question", "Seed claim: the integer 7 is even."}, {"answer", "False"}});
    seeds.push_back({{"question", "Seed claim: the integer 10 is even."}, {"answer", "True"}});
    return nlohmann::json{
        {"task_id", id},
        {"description", "Decide whether a short claim about " + topic + " is true."},
        {"category", "logic"},
        {"answer_format", "boolean"},
        {"seed_questions", seeds},
        {"strategy_prompts",
         {"Check the claim by computing the parity of the number involved. Remember you should "
          "output your final answer in the end like <ans>True</ans> or <ans>False</ans>",
          "Restate the claim in your own words, reason step by step, then judge it. Remember "
          "you should output your final answer in the end like <ans>True</ans> or "
          "<ans>False</ans>"}}};
}

inline std::string toy_qa_jsonl(const std::string& prefix, int count, int stride, int offset) {
    std::string out;
    for (int i = 0; i < count; ++i) {
        const int value = stride * i + offset;
        nlohmann::json line = {
            {"question", prefix + " " + std::to_string(i) + ": the integer " +
                             std::to_string(value) + " is even."},
            {"answer", value % 2 == 0 ? "True" : "False"}};
        out += line.dump();
        out += "\n";
    }
    return out;
}

// Writes tasks/, validation/, test/, and config.json under root. The caller
// owns root (usually a TempDir).
inline ToyWorkspace write_toy_workspace(const std::filesystem::path& root,
                                        const ToyOptions& opts = {}) {
    ToyWorkspace ws;
    ws.root = root;
    ws.task_ids = {"toy_parity", "toy_negation"};

    write_file(root / "tasks/toy_parity.json", toy_task_json("toy_parity", "parity").dump(2) + "\n");
    write_file(root / "tasks/toy_negation.json",
               toy_task_json("toy_negation", "negation").dump(2) + "\n");

    write_file(root / "validation/toy_parity.jsonl", toy_qa_jsonl("Validation claim p", 12, 7, 3));
    write_file(root / "validation/toy_negation.jsonl", toy_qa_jsonl("Validation claim n", 12, 5, 2));
    write_file(root / "test/toy_parity.jsonl", toy_qa_jsonl("Test claim p", 6, 9, 4));
    write_file(root / "test/toy_negation.jsonl", toy_qa_jsonl("Test claim n", 6, 11, 6));

    const nlohmann::json coin = nlohmann::json::array({"<ans>True</ans>", "<ans>False</ans>"});
    nlohmann::json cfg = {
        {"run_id", opts.run_id},
        {"seed", opts.seed},
        {"tasks", ws.task_ids},
        {"m", opts.m},
        {"n", opts.n},
        {"k", opts.k},
        {"question_pairs", opts.question_pairs},
        {"per_prompt_count", 5},
        {"max_in_flight", 4},
        {"max_tokens", 256},
        {"pool_irt", opts.pool_irt},
        {"teacher",
         {{"name", "toy-teacher"}, {"kind", "mock"}, {"alphabet", toy_teacher_alphabet()},
          {"seed", 7}}},
        {"student", {{"name", "toy-student"}, {"kind", "mock"}, {"alphabet", coin}, {"seed", 11}}},
        {"matrix_models",
         {{{"name", "toy-student"}, {"kind", "mock"}, {"alphabet", coin}, {"seed", 11}},
          {{"name", "toy-probe"}, {"kind", "mock"}, {"alphabet", coin}, {"seed", 13}}}},
        {"matrix_shots", {0, 1}}};

    ws.config_path = root / "config.json";
    write_file(ws.config_path, cfg.dump(2) + "\n");
    return ws;
}

}  // namespace tailor::testing
