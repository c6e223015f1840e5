// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace tailor {

enum class BackendKind { remote, mock };

struct BackendId {
    std::string name;
    BackendKind kind = BackendKind::mock;
};

struct CompletionRequest {
    std::string prompt;
    double temperature = 0.0;
    int max_tokens = 1024;
    std::vector<std::string> stop_sequences;
    std::optional<std::uint64_t> seed;
};

enum class FinishReason { stop, length, error };

struct TokenUsage {
    int prompt_tokens = 0;
    int completion_tokens = 0;
    int total_tokens = 0;
};

struct TokenLogprob {
    std::string token;
    double logprob = 0.0;
};

struct CompletionResponse {
    std::string text;
    FinishReason finish_reason = FinishReason::stop;
    TokenUsage usage;
    std::optional<std::vector<TokenLogprob>> token_logprobs;
    std::string error_message;  // set only when finish_reason == error
};

// Cache key over everything that determines a completion. Unseeded sampling
// at temperature > 0 is intentionally not cacheable.
std::string make_cache_key(const std::string& backend_name, const CompletionRequest& req);

// Digest a fixture file keys responses by: sha256 of the exact prompt bytes.
std::string prompt_digest(std::string_view prompt);

struct BackendStats {
    std::uint64_t completions = 0;  // requests actually sent to the backend
    std::uint64_t cache_hits = 0;
    std::uint64_t retries = 0;
    std::uint64_t failures = 0;
};

struct RetryPolicy {
    int max_attempts = 5;
    int base_delay_ms = 1000;
    double factor = 2.0;
    bool jitter = true;
};

struct MockBackendConfig {
    std::string name;
    // prompt digest -> canned response text
    std::unordered_map<std::string, std::string> fixture;
    // fallback pool for prompts absent from the fixture; selection is a
    // stable hash of (seed, request seed when sampling, prompt)
    std::vector<std::string> answer_alphabet;
    std::uint64_t seed = 0;
};

struct RemoteBackendConfig {
    std::string name;
    std::string base_url;  // e.g. https://host:8443/v1
    std::string model;
    std::string api_key_env = "OPENAI_API_KEY";
    RetryPolicy retry;
    int timeout_sec = 120;
};

// Owns every configured endpoint plus the shared response cache. Thread-safe:
// batch_complete issues requests from a worker pool over the same registry.
class BackendRegistry {
public:
    BackendRegistry();
    ~BackendRegistry();
    BackendRegistry(const BackendRegistry&) = delete;
    BackendRegistry& operator=(const BackendRegistry&) = delete;

    // Enables the on-disk response cache rooted at dir. Layout:
    //   <dir>/<backend-name>/<first two hex of key>/<key>.json
    void set_cache_dir(const std::filesystem::path& dir);

    BackendId register_mock(MockBackendConfig cfg);

    // Reads a JSONL fixture, one object per line: {"prompt_digest": ..,
    // "response": ..}. Throws FixtureParseError on any malformed line.
    BackendId mock_from_fixture(const std::string& name,
                                const std::filesystem::path& fixture_path,
                                std::vector<std::string> answer_alphabet = {},
                                std::uint64_t seed = 0);

    BackendId register_remote(RemoteBackendConfig cfg);

    // Escape hatch for tests and embedders: an arbitrary completion function
    // behind the same cache and stats machinery.
    using CompletionFn = std::function<CompletionResponse(const CompletionRequest&)>;
    BackendId register_custom(const std::string& name, CompletionFn fn);

    // Throws BackendUnavailable once retries are exhausted, MalformedResponse
    // when the endpoint answers with an uninterpretable payload.
    CompletionResponse complete(const BackendId& id, const CompletionRequest& req);

    // Responses come back in request order. Per-request failures are encoded
    // positionally with finish_reason == error instead of throwing, so one
    // bad request cannot discard its siblings' results.
    std::vector<CompletionResponse> batch_complete(const BackendId& id,
                                                   const std::vector<CompletionRequest>& requests,
                                                   int max_in_flight);

    BackendStats stats(const BackendId& id) const;
    bool has(const std::string& name) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace tailor
