// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

// Private adapters between domain structs and nlohmann JSON. Kept out of the
// public headers so the vendored parser is not part of the installed API.

#pragma once

#include <json.hpp>

#include <optional>
#include <string>

#include "tailor/backend.hpp"
#include "tailor/dpo_builder.hpp"
#include "tailor/elicitation.hpp"
#include "tailor/errors.hpp"
#include "tailor/irt.hpp"
#include "tailor/preference.hpp"
#include "tailor/task.hpp"

namespace tailor::detail {

using nlohmann::json;

// Field accessors that fail with the offending key in the message. The
// Err template parameter picks the exception type per file family.
template <typename Err = IoError>
const json& require(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw Err(std::string("missing field '") + key + "'");
    return *it;
}

template <typename T, typename Err = IoError>
T require_as(const json& j, const char* key) {
    try {
        return require<Err>(j, key).template get<T>();
    } catch (const json::exception& e) {
        throw Err(std::string("field '") + key + "': " + e.what());
    }
}

template <typename T, typename Err = IoError>
T get_or(const json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    try {
        return it->template get<T>();
    } catch (const json::exception& e) {
        throw Err(std::string("field '") + key + "': " + e.what());
    }
}

inline std::string_view finish_reason_name(FinishReason r) {
    switch (r) {
        case FinishReason::stop: return "stop";
        case FinishReason::length: return "length";
        case FinishReason::error: return "error";
    }
    return "stop";
}

inline FinishReason finish_reason_from(std::string_view s) {
    if (s == "length") return FinishReason::length;
    if (s == "error") return FinishReason::error;
    return FinishReason::stop;
}

inline json to_json(const CompletionRequest& r) {
    json j;
    j["prompt"] = r.prompt;
    j["temperature"] = r.temperature;
    j["max_tokens"] = r.max_tokens;
    j["stop_sequences"] = r.stop_sequences;
    if (r.seed) {
        j["seed"] = *r.seed;
    } else {
        j["seed"] = nullptr;
    }
    return j;
}

inline CompletionRequest request_from_json(const json& j) {
    CompletionRequest r;
    r.prompt = require_as<std::string>(j, "prompt");
    r.temperature = get_or<double>(j, "temperature", 0.0);
    r.max_tokens = get_or<int>(j, "max_tokens", 1024);
    r.stop_sequences = get_or<std::vector<std::string>>(j, "stop_sequences", {});
    auto it = j.find("seed");
    if (it != j.end() && !it->is_null()) r.seed = it->get<std::uint64_t>();
    return r;
}

inline json to_json(const CompletionResponse& r) {
    json j;
    j["text"] = r.text;
    j["finish_reason"] = finish_reason_name(r.finish_reason);
    j["usage"] = {{"prompt_tokens", r.usage.prompt_tokens},
                  {"completion_tokens", r.usage.completion_tokens},
                  {"total_tokens", r.usage.total_tokens}};
    if (r.token_logprobs) {
        json arr = json::array();
        for (const auto& tl : *r.token_logprobs) {
            arr.push_back({{"token", tl.token}, {"logprob", tl.logprob}});
        }
        j["token_logprobs"] = arr;
    } else {
        j["token_logprobs"] = nullptr;
    }
    j["error_message"] = r.error_message;
    return j;
}

inline CompletionResponse response_from_json(const json& j) {
    CompletionResponse r;
    r.text = require_as<std::string>(j, "text");
    r.finish_reason = finish_reason_from(get_or<std::string>(j, "finish_reason", "stop"));
    if (auto it = j.find("usage"); it != j.end() && it->is_object()) {
        r.usage.prompt_tokens = get_or<int>(*it, "prompt_tokens", 0);
        r.usage.completion_tokens = get_or<int>(*it, "completion_tokens", 0);
        r.usage.total_tokens = get_or<int>(*it, "total_tokens", 0);
    }
    if (auto it = j.find("token_logprobs"); it != j.end() && it->is_array()) {
        std::vector<TokenLogprob> v;
        for (const auto& e : *it) {
            v.push_back({get_or<std::string>(e, "token", ""), get_or<double>(e, "logprob", 0.0)});
        }
        r.token_logprobs = std::move(v);
    }
    r.error_message = get_or<std::string>(j, "error_message", "");
    return r;
}

inline json to_json(const QAPair& qa) { return json{{"question", qa.question}, {"answer", qa.answer}}; }

inline QAPair qa_from_json(const json& j) {
    return {require_as<std::string>(j, "question"), require_as<std::string>(j, "answer")};
}

inline json to_json(const DraftQuestion& q) {
    json j;
    j["id"] = q.id;
    j["task_id"] = q.task_id;
    j["input"] = q.input;
    j["target"] = q.target;
    j["prompt_digest"] = q.prompt_digest;
    j["batch_index"] = q.batch_index;
    if (q.pref_score) j["pref_score"] = *q.pref_score;
    return j;
}

inline DraftQuestion draft_question_from_json(const json& j) {
    DraftQuestion q;
    q.id = require_as<std::string>(j, "id");
    q.task_id = require_as<std::string>(j, "task_id");
    q.input = require_as<std::string>(j, "input");
    q.target = require_as<std::string>(j, "target");
    q.prompt_digest = get_or<std::string>(j, "prompt_digest", "");
    q.batch_index = get_or<int>(j, "batch_index", 0);
    if (auto it = j.find("pref_score"); it != j.end() && !it->is_null()) {
        q.pref_score = it->get<double>();
    }
    return q;
}

inline json to_json(const Rationale& r) {
    json j;
    j["id"] = r.id;
    j["question_id"] = r.question_id;
    j["strategy_index"] = r.strategy_index;
    j["text"] = r.text;
    if (r.pref_score) j["pref_score"] = *r.pref_score;
    return j;
}

inline Rationale rationale_from_json(const json& j) {
    Rationale r;
    r.id = require_as<std::string>(j, "id");
    r.question_id = require_as<std::string>(j, "question_id");
    r.strategy_index = require_as<int>(j, "strategy_index");
    r.text = require_as<std::string>(j, "text");
    if (auto it = j.find("pref_score"); it != j.end() && !it->is_null()) {
        r.pref_score = it->get<double>();
    }
    return r;
}

inline json to_json(const DraftExample& d) {
    return json{{"question", to_json(d.question)}, {"rationale", to_json(d.rationale)}};
}

inline DraftExample draft_example_from_json(const json& j) {
    return {draft_question_from_json(require(j, "question")),
            rationale_from_json(require(j, "rationale"))};
}

inline json to_json(const ScoreRecord& s) {
    json per = json::array();
    for (const auto& p : s.per_item) {
        per.push_back({{"item_index", p.item_index}, {"correct", p.correct}});
    }
    return json{{"subject_id", s.subject_id},
                {"question_id", s.question_id},
                {"level", s.level == ScoreLevel::question ? "question" : "rationale"},
                {"score", s.score},
                {"per_item", per},
                {"shots", s.shots}};
}

inline ScoreRecord score_record_from_json(const json& j) {
    ScoreRecord s;
    s.subject_id = require_as<std::string>(j, "subject_id");
    s.question_id = require_as<std::string>(j, "question_id");
    s.level = require_as<std::string>(j, "level") == "question" ? ScoreLevel::question
                                                                : ScoreLevel::rationale;
    s.score = require_as<double>(j, "score");
    s.shots = get_or<int>(j, "shots", 1);
    if (auto it = j.find("per_item"); it != j.end() && it->is_array()) {
        for (const auto& e : *it) {
            s.per_item.push_back(
                {require_as<int>(e, "item_index"), require_as<bool>(e, "correct")});
        }
    }
    return s;
}

inline json to_json(const PreferencePair& p) {
    return json{{"prompt", p.prompt},
                {"chosen", p.chosen},
                {"rejected", p.rejected},
                {"level", std::string(to_string(p.level))},
                {"task_id", p.task_id},
                {"chosen_score", p.chosen_score},
                {"rejected_score", p.rejected_score}};
}

inline json to_json(const SftRecord& s) {
    return json{{"prompt", s.prompt}, {"completion", s.completion}, {"task_id", s.task_id}};
}

}  // namespace tailor::detail
