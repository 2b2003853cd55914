#pragma once

#include "hsd/core/error.hpp"
#include "hsd/core/io.hpp"
#include "hsd/moderation/lexicon.hpp"

#include "httplib.h"
#include "json.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cstdlib>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

namespace hsd::moderation {

inline constexpr std::string_view default_prompt = "Rewrite the following to be polite and non-offensive: ";
inline constexpr std::string_view api_key_env = "REWRITER_API_KEY";

enum class FailureMode { closed, open };

struct RewriterConfig {
    std::string backend = "stub";  // stub | lexicon | remote_llm
    std::string prompt_template{default_prompt};
    int max_tokens = 100;
    double temperature = 0.7;
    int timeout_ms = 30000;
    int retries = 2;
    int backoff_ms = 500;  // first retry delay, doubled per attempt
    std::string endpoint = "https://api.openai.com/v1/completions";
    std::string model = "gpt-3.5-turbo-instruct";
    std::string lexicon_path;
    std::string cassette_path;  // remote_llm replays recorded responses from here when set
    int max_concurrent = 4;
    FailureMode on_failure = FailureMode::closed;

    void validate() const {
        if (backend != "stub" && backend != "lexicon" && backend != "remote_llm") {
            throw ConfigError("unknown rewriter backend '" + backend + "' (stub, lexicon, remote_llm)");
        }
        if (max_tokens < 1) {
            throw ConfigError("max_tokens must be >= 1");
        }
        if (temperature < 0.0) {
            throw ConfigError("temperature must be >= 0");
        }
        if (timeout_ms < 1) {
            throw ConfigError("timeout_ms must be >= 1");
        }
        if (retries < 0) {
            throw ConfigError("retries must be >= 0");
        }
        if (backoff_ms < 0) {
            throw ConfigError("backoff_ms must be >= 0");
        }
        if (max_concurrent < 1 || max_concurrent > 64) {
            throw ConfigError("max_concurrent must be in [1, 64]");
        }
        if (backend == "lexicon" && lexicon_path.empty()) {
            throw ConfigError("lexicon backend needs lexicon_path");
        }
    }

    [[nodiscard]] nlohmann::json to_json() const {
        return {{"backend", backend},
                {"prompt_template", prompt_template},
                {"max_tokens", max_tokens},
                {"temperature", temperature},
                {"timeout_ms", timeout_ms},
                {"retries", retries},
                {"backoff_ms", backoff_ms},
                {"endpoint", endpoint},
                {"model", model},
                {"lexicon_path", lexicon_path},
                {"cassette_path", cassette_path},
                {"max_concurrent", max_concurrent},
                {"on_failure", on_failure == FailureMode::closed ? "closed" : "open"}};
    }

    static RewriterConfig from_json(const nlohmann::json &j) {
        RewriterConfig c;
        const auto known = c.to_json();
        try {
            for (const auto &[key, _] : j.items()) {
                if (!known.contains(key)) {
                    throw ConfigError("unknown rewriter config field '" + key + "'");
                }
            }
            c.backend = j.value("backend", c.backend);
            c.prompt_template = j.value("prompt_template", c.prompt_template);
            c.max_tokens = j.value("max_tokens", c.max_tokens);
            c.temperature = j.value("temperature", c.temperature);
            c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
            c.retries = j.value("retries", c.retries);
            c.backoff_ms = j.value("backoff_ms", c.backoff_ms);
            c.endpoint = j.value("endpoint", c.endpoint);
            c.model = j.value("model", c.model);
            c.lexicon_path = j.value("lexicon_path", c.lexicon_path);
            c.cassette_path = j.value("cassette_path", c.cassette_path);
            c.max_concurrent = j.value("max_concurrent", c.max_concurrent);
            const auto mode = j.value("on_failure", std::string("closed"));
            if (mode != "closed" && mode != "open") {
                throw ConfigError("on_failure must be 'closed' or 'open'");
            }
            c.on_failure = mode == "closed" ? FailureMode::closed : FailureMode::open;
        } catch (const nlohmann::json::exception &e) {
            throw ConfigError(std::string("bad rewriter config: ") + e.what());
        }
        c.validate();
        return c;
    }
};

// Takes the ORIGINAL raw text, returns the neutralised text. Throws
// BackendError when no rewrite can be produced.
class Rewriter {
  public:
    virtual ~Rewriter() = default;
    virtual std::string rewrite(const std::string &raw) = 0;
    [[nodiscard]] virtual std::string id() const = 0;
};

class StubRewriter final : public Rewriter {
  public:
    static constexpr std::string_view prefix = "[neutralized] ";
    std::string rewrite(const std::string &raw) override { return std::string(prefix) + raw; }
    [[nodiscard]] std::string id() const override { return "stub"; }
};

class LexiconRewriter final : public Rewriter {
  public:
    explicit LexiconRewriter(Lexicon lex) : lex_(std::move(lex)) {}
    std::string rewrite(const std::string &raw) override { return lex_.rewrite(raw); }
    [[nodiscard]] std::string id() const override { return "lexicon"; }
    [[nodiscard]] const Lexicon &lexicon() const noexcept { return lex_; }

  private:
    Lexicon lex_;
};

// ---------------------------------------------------------------- transport

struct HttpRequest {
    std::string url;
    std::vector<std::pair<std::string, std::string>> headers;
    std::string body;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

// No response at all (connect failure, timeout). Always worth a retry.
class TransportFailure : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class Transport {
  public:
    virtual ~Transport() = default;
    virtual HttpResponse post(const HttpRequest &req, std::chrono::milliseconds timeout) = 0;
};

class HttplibTransport final : public Transport {
  public:
    HttpResponse post(const HttpRequest &req, std::chrono::milliseconds timeout) override {
        const auto scheme_end = req.url.find("://");
        if (scheme_end == std::string::npos) {
            throw ConfigError("endpoint '" + req.url + "' has no scheme");
        }
        const auto path_start = req.url.find('/', scheme_end + 3);
        const std::string base = req.url.substr(0, path_start);
        const std::string path = path_start == std::string::npos ? "/" : req.url.substr(path_start);
        httplib::Client cli(base);
        const auto secs = static_cast<time_t>(timeout.count() / 1000);
        const auto usecs = static_cast<time_t>((timeout.count() % 1000) * 1000);
        cli.set_connection_timeout(secs, usecs);
        cli.set_read_timeout(secs, usecs);
        cli.set_write_timeout(secs, usecs);
        httplib::Headers headers;
        for (const auto &[k, v] : req.headers) {
            headers.emplace(k, v);
        }
        auto res = cli.Post(path, headers, req.body, "application/json");
        if (!res) {
            throw TransportFailure("request to " + base + " failed: " + httplib::to_string(res.error()));
        }
        return {res->status, res->body};
    }
};

// Recorded request/response pairs:
//   {"schema": "hsd.cassette", "version": 1,
//    "interactions": [{"request": {"url": ..., "body": {...}},
//                      "response": {"status": 200, "body": {...}} | {"error": "timeout"}}]}
// A request is answered by the first unused interaction whose url and JSON
// body match. Credentials are never recorded.
class CassetteTransport final : public Transport {
  public:
    explicit CassetteTransport(nlohmann::json cassette, std::string origin = "<cassette>")
        : origin_(std::move(origin)) {
        if (cassette.value("schema", "") != "hsd.cassette" || cassette.value("version", 0) != 1) {
            throw SchemaError(origin_ + ": not an hsd.cassette v1 file");
        }
        for (auto &i : cassette.at("interactions")) {
            interactions_.push_back({std::move(i), false});
        }
    }

    static std::shared_ptr<CassetteTransport> load(const std::filesystem::path &path) {
        try {
            return std::make_shared<CassetteTransport>(nlohmann::json::parse(read_file(path)), path.string());
        } catch (const nlohmann::json::exception &e) {
            throw SchemaError(path.string() + ": " + e.what());
        }
    }

    HttpResponse post(const HttpRequest &req, std::chrono::milliseconds) override {
        const std::lock_guard lock(mu_);
        const auto body = nlohmann::json::parse(req.body, nullptr, false);
        for (auto &[i, used] : interactions_) {
            const auto &r = i.at("request");
            if (used || r.at("url") != req.url || r.at("body") != body) {
                continue;
            }
            used = true;
            ++replayed_;
            const auto &resp = i.at("response");
            if (resp.contains("error")) {
                throw TransportFailure("recorded failure: " + resp["error"].get<std::string>());
            }
            const auto &b = resp.at("body");
            return {resp.at("status").get<int>(), b.is_string() ? b.get<std::string>() : b.dump()};
        }
        throw BackendError(origin_ + ": no recorded interaction for this request", false);
    }

    [[nodiscard]] std::size_t replayed() const {
        const std::lock_guard lock(mu_);
        return replayed_;
    }

  private:
    std::string origin_;
    std::vector<std::pair<nlohmann::json, bool>> interactions_;
    std::size_t replayed_ = 0;
    mutable std::mutex mu_;
};

// Simulated outage: the first `failures` calls fail (with `status`, or with no
// response when status is 0), later calls go to `inner` if there is one.
class OutageTransport final : public Transport {
  public:
    explicit OutageTransport(int failures = -1, int status = 0, std::shared_ptr<Transport> inner = nullptr)
        : failures_(failures), status_(status), inner_(std::move(inner)) {}

    HttpResponse post(const HttpRequest &req, std::chrono::milliseconds timeout) override {
        int call = 0;
        {
            const std::lock_guard lock(mu_);
            call = calls_++;
        }
        if (failures_ < 0 || call < failures_ || !inner_) {
            if (status_ == 0) {
                throw TransportFailure("simulated outage");
            }
            return {status_, R"({"error":{"message":"simulated outage"}})"};
        }
        return inner_->post(req, timeout);
    }

    [[nodiscard]] int calls() const {
        const std::lock_guard lock(mu_);
        return calls_;
    }

  private:
    int failures_;
    int status_;
    std::shared_ptr<Transport> inner_;
    int calls_ = 0;
    mutable std::mutex mu_;
};

// ---------------------------------------------------------------- remote

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline void real_sleep(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

// Completion-style endpoint: POST {model, prompt, max_tokens, temperature},
// reads choices[0].text. Retries with exponential backoff on transport
// failures, 408, 429 and 5xx; authentication failures (401/403) and other
// client errors fail at once.
class RemoteRewriter final : public Rewriter {
  public:
    RemoteRewriter(RewriterConfig cfg, std::shared_ptr<Transport> transport, std::string api_key,
                   Sleeper sleep = real_sleep)
        : cfg_(std::move(cfg)), transport_(std::move(transport)), key_(std::move(api_key)), sleep_(std::move(sleep)),
          slots_(cfg_.max_concurrent) {}

    [[nodiscard]] std::string id() const override { return "remote_llm:" + cfg_.model; }

    [[nodiscard]] std::string request_body(const std::string &raw) const {
        return nlohmann::json{{"model", cfg_.model},
                              {"prompt", cfg_.prompt_template + raw},
                              {"max_tokens", cfg_.max_tokens},
                              {"temperature", cfg_.temperature}}
            .dump();
    }

    std::string rewrite(const std::string &raw) override {
        const HttpRequest req{cfg_.endpoint,
                              {{"Authorization", "Bearer " + key_}, {"Content-Type", "application/json"}},
                              request_body(raw)};
        std::string last;
        for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
            if (attempt > 0) {
                sleep_(std::chrono::milliseconds(static_cast<long long>(cfg_.backoff_ms) << std::min(attempt - 1, 16)));
            }
            HttpResponse res;
            try {
                slots_.acquire();
                struct Release {
                    std::counting_semaphore<64> &s;
                    ~Release() { s.release(); }
                } release{slots_};
                res = transport_->post(req, std::chrono::milliseconds(cfg_.timeout_ms));
            } catch (const TransportFailure &e) {
                last = e.what();
                continue;
            }
            if (res.status == 401 || res.status == 403) {
                throw BackendError(fmt::format("authentication rejected (HTTP {})", res.status), false);
            }
            if (res.status == 408 || res.status == 429 || res.status >= 500) {
                last = fmt::format("HTTP {}", res.status);
                continue;
            }
            if (res.status < 200 || res.status >= 300) {
                throw BackendError(fmt::format("HTTP {}: {}", res.status, res.body.substr(0, 200)), false);
            }
            return parse_completion(res.body);
        }
        throw BackendError(fmt::format("gave up after {} attempt(s): {}", cfg_.retries + 1, last));
    }

    static std::string parse_completion(const std::string &body) {
        const auto j = nlohmann::json::parse(body, nullptr, false);
        if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty() ||
            !j["choices"][0].contains("text") || !j["choices"][0]["text"].is_string()) {
            throw BackendError("malformed completion response", false);
        }
        return trim(j["choices"][0]["text"].get<std::string>());
    }

    static std::string trim(std::string_view s) {
        const auto ws = " \t\r\n\f\v";
        const auto b = s.find_first_not_of(ws);
        if (b == std::string_view::npos) {
            return {};
        }
        return std::string(s.substr(b, s.find_last_not_of(ws) - b + 1));
    }

  private:
    RewriterConfig cfg_;
    std::shared_ptr<Transport> transport_;
    std::string key_;
    Sleeper sleep_;
    std::counting_semaphore<64> slots_;
};

// Builds the configured backend. remote_llm reads REWRITER_API_KEY unless a
// cassette or an explicit transport stands in for the network.
inline std::unique_ptr<Rewriter> make_rewriter(const RewriterConfig &cfg,
                                               std::shared_ptr<Transport> transport = nullptr,
                                               Sleeper sleep = real_sleep) {
    cfg.validate();
    if (cfg.backend == "stub") {
        return std::make_unique<StubRewriter>();
    }
    if (cfg.backend == "lexicon") {
        return std::make_unique<LexiconRewriter>(Lexicon::load(cfg.lexicon_path));
    }
    std::string key;
    if (const char *k = std::getenv(std::string(api_key_env).c_str())) {
        key = k;
    }
    if (!transport && !cfg.cassette_path.empty()) {
        transport = CassetteTransport::load(cfg.cassette_path);
    }
    if (!transport) {
        if (key.empty()) {
            throw ConfigError("remote_llm backend needs " + std::string(api_key_env) + " in the environment");
        }
        transport = std::make_shared<HttplibTransport>();
    }
    return std::make_unique<RemoteRewriter>(cfg, std::move(transport), key, std::move(sleep));
}

}  // namespace hsd::moderation
