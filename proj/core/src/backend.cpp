// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "tailor/backend.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>
#include <variant>

#include "json_io.hpp"
#include "tailor/digest.hpp"
#include "tailor/errors.hpp"
#include "tailor/rng.hpp"

namespace tailor {

namespace fs = std::filesystem;
using detail::json;

namespace {

std::string canonical_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string iso8601_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

int approx_tokens(std::string_view text) { return static_cast<int>((text.size() + 3) / 4); }

// Non-deterministic by design: only used to jitter retry delays.
thread_local SplitMix64 jitter_rng(
    static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count()) ^
    std::hash<std::thread::id>{}(std::this_thread::get_id()));

struct ParsedUrl {
    std::string scheme_host_port;  // what httplib::Client wants
    std::string path_prefix;       // "" or "/v1"
};

ParsedUrl parse_base_url(const std::string& base_url) {
    auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("base_url must include a scheme: " + base_url);
    }
    auto path_start = base_url.find('/', scheme_end + 3);
    ParsedUrl out;
    if (path_start == std::string::npos) {
        out.scheme_host_port = base_url;
    } else {
        out.scheme_host_port = base_url.substr(0, path_start);
        out.path_prefix = base_url.substr(path_start);
        while (!out.path_prefix.empty() && out.path_prefix.back() == '/') {
            out.path_prefix.pop_back();
        }
    }
    return out;
}

bool retryable_status(int status) {
    return status == 408 || status == 429 || (status >= 500 && status < 600);
}

struct Stats {
    std::atomic<std::uint64_t> completions{0};
    std::atomic<std::uint64_t> cache_hits{0};
    std::atomic<std::uint64_t> retries{0};
    std::atomic<std::uint64_t> failures{0};
};

}  // namespace

std::string prompt_digest(std::string_view prompt) { return sha256_hex(prompt); }

std::string make_cache_key(const std::string& backend_name, const CompletionRequest& req) {
    // A JSON array gives unambiguous framing for free.
    json key = json::array();
    key.push_back(backend_name);
    key.push_back(req.prompt);
    key.push_back(canonical_double(req.temperature));
    key.push_back(req.seed ? std::to_string(*req.seed) : "-");
    key.push_back(req.max_tokens);
    key.push_back(req.stop_sequences);
    return sha256_hex(key.dump());
}

struct BackendRegistry::Impl {
    struct MockState {
        MockBackendConfig cfg;
    };
    struct RemoteState {
        RemoteBackendConfig cfg;
        ParsedUrl url;
    };
    struct Entry {
        BackendKind kind;
        std::variant<MockState, RemoteState, CompletionFn> state;
        Stats stats;
    };

    mutable std::mutex reg_mu;  // protects the map; entries are stable after insert
    std::unordered_map<std::string, std::unique_ptr<Entry>> entries;
    std::optional<fs::path> cache_dir;
    std::mutex cache_mu;

    Entry& entry(const std::string& name) {
        std::lock_guard<std::mutex> lock(reg_mu);
        auto it = entries.find(name);
        if (it == entries.end()) throw PreconditionViolation("unknown backend: " + name);
        return *it->second;
    }

    BackendId add(const std::string& name, BackendKind kind,
                  std::variant<MockState, RemoteState, CompletionFn> state) {
        if (name.empty()) throw PreconditionViolation("backend name must be non-empty");
        std::lock_guard<std::mutex> lock(reg_mu);
        if (entries.count(name)) throw PreconditionViolation("backend already registered: " + name);
        auto e = std::make_unique<Entry>();
        e->kind = kind;
        e->state = std::move(state);
        entries.emplace(name, std::move(e));
        return BackendId{name, kind};
    }

    fs::path cache_path(const std::string& name, const std::string& key) const {
        return *cache_dir / name / key.substr(0, 2) / (key + ".json");
    }

    std::optional<CompletionResponse> cache_read(const std::string& name, const std::string& key) {
        fs::path p = cache_path(name, key);
        std::ifstream in(p, std::ios::binary);
        if (!in) return std::nullopt;
        try {
            json j = json::parse(in);
            return detail::response_from_json(detail::require(j, "response"));
        } catch (const std::exception&) {
            // Unreadable cache entries are treated as misses and rewritten.
            return std::nullopt;
        }
    }

    void cache_write(const std::string& name, const std::string& key,
                     const CompletionRequest& req, const CompletionResponse& resp) {
        json record;
        record["request"] = detail::to_json(req);
        record["response"] = detail::to_json(resp);
        record["timestamp"] = iso8601_now();
        std::string body = record.dump(2);
        body.push_back('\n');

        std::lock_guard<std::mutex> lock(cache_mu);
        fs::path p = cache_path(name, key);
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
        if (ec) throw IoError("cannot create cache dir: " + p.parent_path().string());
        fs::path tmp = p;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw IoError("cannot write cache entry: " + tmp.string());
            out << body;
        }
        fs::rename(tmp, p, ec);
        if (ec) throw IoError("cannot finalize cache entry: " + p.string());
    }

    CompletionResponse dispatch(Entry& e, const CompletionRequest& req) {
        if (auto* mock = std::get_if<MockState>(&e.state)) return run_mock(*mock, req);
        if (auto* remote = std::get_if<RemoteState>(&e.state)) return run_remote(*remote, e, req);
        return std::get<CompletionFn>(e.state)(req);
    }

    static CompletionResponse run_mock(const MockState& m, const CompletionRequest& req) {
        const std::string digest = prompt_digest(req.prompt);
        std::string text;
        if (auto it = m.cfg.fixture.find(digest); it != m.cfg.fixture.end()) {
            text = it->second;
        } else {
            if (m.cfg.answer_alphabet.empty()) {
                throw MalformedResponse("mock '" + m.cfg.name +
                                        "' has no fixture entry for prompt digest " + digest +
                                        " and no answer alphabet");
            }
            // Stable pick: mock seed, then the request seed when actually
            // sampling, then the prompt. Greedy requests ignore the request
            // seed so identical prompts collapse to one response.
            std::uint64_t h = mix_seed(m.cfg.seed, digest_u64(req.prompt));
            if (req.temperature > 0.0 && req.seed) h = mix_seed(h, *req.seed);
            text = m.cfg.answer_alphabet[h % m.cfg.answer_alphabet.size()];
        }
        CompletionResponse resp;
        resp.text = text;
        resp.finish_reason = FinishReason::stop;
        resp.usage.prompt_tokens = approx_tokens(req.prompt);
        resp.usage.completion_tokens = approx_tokens(text);
        resp.usage.total_tokens = resp.usage.prompt_tokens + resp.usage.completion_tokens;
        return resp;
    }

    CompletionResponse run_remote(const RemoteState& r, Entry& e, const CompletionRequest& req) {
        json body;
        body["model"] = r.cfg.model;
        body["messages"] = json::array({json{{"role", "user"}, {"content", req.prompt}}});
        body["temperature"] = req.temperature;
        body["max_tokens"] = req.max_tokens;
        if (!req.stop_sequences.empty()) body["stop"] = req.stop_sequences;
        if (req.seed) body["seed"] = *req.seed;
        const std::string payload = body.dump();

        std::string api_key;
        if (const char* v = std::getenv(r.cfg.api_key_env.c_str()); v && *v) api_key = v;

        std::string last_error;
        for (int attempt = 1; attempt <= r.cfg.retry.max_attempts; ++attempt) {
            httplib::Client cli(r.url.scheme_host_port);
            cli.set_connection_timeout(r.cfg.timeout_sec, 0);
            cli.set_read_timeout(r.cfg.timeout_sec, 0);
            cli.set_write_timeout(r.cfg.timeout_sec, 0);
            httplib::Headers headers;
            if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

            auto res = cli.Post(r.url.path_prefix + "/chat/completions", headers, payload,
                                "application/json");
            std::optional<int> retry_after;
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
            } else if (res->status == 200) {
                return parse_chat_completion(r.cfg.name, res->body);
            } else if (retryable_status(res->status)) {
                last_error = "HTTP " + std::to_string(res->status);
                if (res->has_header("Retry-After")) {
                    try {
                        retry_after = std::stoi(res->get_header_value("Retry-After"));
                    } catch (const std::exception&) {
                    }
                }
            } else {
                throw BackendUnavailable("backend '" + r.cfg.name + "' rejected request: HTTP " +
                                         std::to_string(res->status));
            }

            if (attempt == r.cfg.retry.max_attempts) break;
            e.stats.retries.fetch_add(1, std::memory_order_relaxed);
            double delay = r.cfg.retry.base_delay_ms;
            for (int i = 1; i < attempt; ++i) delay *= r.cfg.retry.factor;
            if (retry_after) delay = std::max(delay, std::min(*retry_after, 30) * 1000.0);
            if (r.cfg.retry.jitter) delay *= 1.0 + 0.5 * jitter_rng.unit();
            std::this_thread::sleep_for(
                std::chrono::milliseconds(static_cast<long long>(delay)));
        }
        throw BackendUnavailable("backend '" + r.cfg.name + "' failed after " +
                                 std::to_string(r.cfg.retry.max_attempts) +
                                 " attempts; last error: " + last_error);
    }

    static CompletionResponse parse_chat_completion(const std::string& name,
                                                    const std::string& body) {
        json j;
        try {
            j = json::parse(body);
        } catch (const json::exception& e) {
            throw MalformedResponse("backend '" + name + "' returned invalid JSON: " + e.what());
        }
        auto choices = j.find("choices");
        if (choices == j.end() || !choices->is_array() || choices->empty()) {
            throw MalformedResponse("backend '" + name + "' response has no choices");
        }
        const json& choice = (*choices)[0];
        auto message = choice.find("message");
        if (message == choice.end() || !message->is_object()) {
            throw MalformedResponse("backend '" + name + "' choice has no message");
        }
        auto content = message->find("content");
        if (content == message->end() || !content->is_string()) {
            throw MalformedResponse("backend '" + name + "' message has no string content");
        }

        CompletionResponse resp;
        resp.text = content->get<std::string>();
        std::string fr = detail::get_or<std::string>(choice, "finish_reason", "stop");
        resp.finish_reason = fr == "length" ? FinishReason::length : FinishReason::stop;
        if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
            resp.usage.prompt_tokens = detail::get_or<int>(*u, "prompt_tokens", 0);
            resp.usage.completion_tokens = detail::get_or<int>(*u, "completion_tokens", 0);
            resp.usage.total_tokens = detail::get_or<int>(*u, "total_tokens", 0);
        }
        if (auto lp = choice.find("logprobs"); lp != choice.end() && lp->is_object()) {
            if (auto content_arr = lp->find("content");
                content_arr != lp->end() && content_arr->is_array()) {
                std::vector<TokenLogprob> v;
                for (const auto& tok : *content_arr) {
                    v.push_back({detail::get_or<std::string>(tok, "token", ""),
                                 detail::get_or<double>(tok, "logprob", 0.0)});
                }
                resp.token_logprobs = std::move(v);
            }
        }
        return resp;
    }
};

BackendRegistry::BackendRegistry() : impl_(std::make_unique<Impl>()) {}
BackendRegistry::~BackendRegistry() = default;

void BackendRegistry::set_cache_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create cache dir: " + dir.string());
    impl_->cache_dir = dir;
}

BackendId BackendRegistry::register_mock(MockBackendConfig cfg) {
    std::string name = cfg.name;
    return impl_->add(name, BackendKind::mock, Impl::MockState{std::move(cfg)});
}

BackendId BackendRegistry::mock_from_fixture(const std::string& name,
                                             const fs::path& fixture_path,
                                             std::vector<std::string> answer_alphabet,
                                             std::uint64_t seed) {
    std::ifstream in(fixture_path, std::ios::binary);
    if (!in) throw IoError("cannot open fixture: " + fixture_path.string());
    MockBackendConfig cfg;
    cfg.name = name;
    cfg.answer_alphabet = std::move(answer_alphabet);
    cfg.seed = seed;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw FixtureParseError(fixture_path.string() + ":" + std::to_string(line_no) +
                                    ": invalid JSON: " + e.what());
        }
        if (!j.is_object() || !j.contains("prompt_digest") || !j["prompt_digest"].is_string() ||
            !j.contains("response") || !j["response"].is_string()) {
            throw FixtureParseError(fixture_path.string() + ":" + std::to_string(line_no) +
                                    ": expected {\"prompt_digest\": .., \"response\": ..}");
        }
        // Later lines override earlier ones, matching append-style fixtures.
        cfg.fixture[j["prompt_digest"].get<std::string>()] = j["response"].get<std::string>();
    }
    return register_mock(std::move(cfg));
}

BackendId BackendRegistry::register_remote(RemoteBackendConfig cfg) {
    if (cfg.retry.max_attempts < 1) throw PreconditionViolation("retry.max_attempts must be >= 1");
    Impl::RemoteState state{cfg, parse_base_url(cfg.base_url)};
    std::string name = cfg.name;
    return impl_->add(name, BackendKind::remote, std::move(state));
}

BackendId BackendRegistry::register_custom(const std::string& name, CompletionFn fn) {
    if (!fn) throw PreconditionViolation("custom backend needs a completion function");
    return impl_->add(name, BackendKind::mock, std::move(fn));
}

CompletionResponse BackendRegistry::complete(const BackendId& id, const CompletionRequest& req) {
    if (req.prompt.empty()) throw PreconditionViolation("completion prompt must be non-empty");
    if (req.max_tokens <= 0) throw PreconditionViolation("max_tokens must be positive");
    auto& entry = impl_->entry(id.name);

    // Sampling without a seed is not reproducible, so it is never cached.
    const bool cacheable =
        impl_->cache_dir && (req.temperature == 0.0 || req.seed.has_value());
    std::string key;
    if (cacheable) {
        key = make_cache_key(id.name, req);
        if (auto hit = impl_->cache_read(id.name, key)) {
            entry.stats.cache_hits.fetch_add(1, std::memory_order_relaxed);
            return *hit;
        }
    }

    CompletionResponse resp;
    try {
        resp = impl_->dispatch(entry, req);
    } catch (...) {
        entry.stats.failures.fetch_add(1, std::memory_order_relaxed);
        throw;
    }
    entry.stats.completions.fetch_add(1, std::memory_order_relaxed);

    if (cacheable && resp.finish_reason != FinishReason::error) {
        impl_->cache_write(id.name, key, req, resp);
    }
    return resp;
}

std::vector<CompletionResponse> BackendRegistry::batch_complete(
    const BackendId& id, const std::vector<CompletionRequest>& requests, int max_in_flight) {
    if (max_in_flight < 1) throw PreconditionViolation("max_in_flight must be >= 1");
    std::vector<CompletionResponse> results(requests.size());
    if (requests.empty()) return results;

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= requests.size()) return;
            try {
                results[i] = complete(id, requests[i]);
            } catch (const std::exception& e) {
                CompletionResponse err;
                err.finish_reason = FinishReason::error;
                err.error_message = e.what();
                results[i] = std::move(err);
            }
        }
    };

    const std::size_t n_threads =
        std::min<std::size_t>(static_cast<std::size_t>(max_in_flight), requests.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return results;
}

BackendStats BackendRegistry::stats(const BackendId& id) const {
    auto& entry = impl_->entry(id.name);
    BackendStats s;
    s.completions = entry.stats.completions.load(std::memory_order_relaxed);
    s.cache_hits = entry.stats.cache_hits.load(std::memory_order_relaxed);
    s.retries = entry.stats.retries.load(std::memory_order_relaxed);
    s.failures = entry.stats.failures.load(std::memory_order_relaxed);
    return s;
}

bool BackendRegistry::has(const std::string& name) const {
    std::lock_guard<std::mutex> lock(impl_->reg_mu);
    return impl_->entries.count(name) > 0;
}

}  // namespace tailor
