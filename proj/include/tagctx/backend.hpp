#pragma once

#include "tagctx/errors.hpp"

#include <json.hpp>

#include <chrono>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace tagctx::backend {

class Error : public tagctx::Error {
public:
    explicit Error(const std::string& message) : tagctx::Error(message) {}
};

class AuthError : public Error {
public:
    explicit AuthError(const std::string& message) : Error(message) {}
};

class RateLimitedError : public Error {
public:
    explicit RateLimitedError(const std::string& message) : Error(message) {}
};

class TimeoutError : public Error {
public:
    explicit TimeoutError(const std::string& message) : Error(message) {}
};

class UpstreamError : public Error {
public:
    UpstreamError(int status, const std::string& message) : Error(message), status(status) {}
    int status = 0;
};

class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& message) : Error(message) {}
};

class MissingFixtureError : public Error {
public:
    explicit MissingFixtureError(const std::string& message) : Error(message) {}
};

struct BackendConfig {
    std::string engine;
    std::string endpoint;
    std::string api_style = "chat"; // "chat" or "completion"
    std::string api_key_env;
    double temperature = 0.0;
    int max_tokens = 1024;
    std::chrono::milliseconds request_timeout{30000};
    int max_retries = 3;
    int requests_per_minute = 60;
    std::chrono::milliseconds retry_initial_delay{1000};
};

void to_json(nlohmann::json& j, const BackendConfig& c);
void from_json(const nlohmann::json& j, BackendConfig& c);

/// One completion call. `instruction` is an optional system-style preface
/// (used by summarization and question generation); `input` is the user
/// content. Experiment cells arrive with an empty instruction and the fully
/// assembled prompt in `input`.
struct CompletionRequest {
    std::string engine;
    std::string instruction;
    std::string input;
};

/// The request's single-string form: instruction and input joined by a blank
/// line, or just the input when there is no instruction.
std::string rendered_prompt(const CompletionRequest& req);

/// FNV-1a 64-bit digest of (engine, rendered prompt), as 16 hex chars.
/// Identifies a prompt across record/replay runs independent of order.
std::string prompt_hash(const CompletionRequest& req);

struct Completion {
    std::string engine;
    std::string prompt_hash;
    std::string text;
    std::chrono::milliseconds latency{0};
    int attempt_count = 1;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual Completion complete(const CompletionRequest& req) = 0;
    virtual std::string name() const = 0;
};

/// Returns the request's user content verbatim. Instruction-bearing calls
/// (summarization) therefore echo only the text under summarization.
class EchoBackend final : public Backend {
public:
    Completion complete(const CompletionRequest& req) override;
    std::string name() const override { return "echo"; }
};

struct FixtureEntry {
    std::string engine;
    std::string prompt_hash;
    std::string prompt_text;
    std::string response_text;
};

void to_json(nlohmann::json& j, const FixtureEntry& e);
void from_json(const nlohmann::json& j, FixtureEntry& e);

/// Answers from a recorded prompt_hash -> response map. Unknown prompts are
/// an error rather than a fallback so fixture gaps surface immediately.
class ReplayBackend final : public Backend {
public:
    explicit ReplayBackend(std::vector<FixtureEntry> entries);
    static ReplayBackend from_file(const std::string& path);

    Completion complete(const CompletionRequest& req) override;
    std::string name() const override { return "replay"; }
    std::size_t size() const { return entries_.size(); }

private:
    std::map<std::string, FixtureEntry> entries_;
};

ReplayBackend load_replay_fixture(const std::string& path);

/// Forwards to an inner backend while capturing fixture entries that a
/// ReplayBackend can later serve.
class RecordingBackend final : public Backend {
public:
    explicit RecordingBackend(Backend& inner) : inner_(inner) {}

    Completion complete(const CompletionRequest& req) override;
    std::string name() const override { return "recording(" + inner_.name() + ")"; }

    const std::vector<FixtureEntry>& entries() const { return entries_; }
    void save(const std::string& path) const;

private:
    Backend& inner_;
    std::vector<FixtureEntry> entries_;
    std::mutex mutex_;
};

/// Sliding-window limiter: at most `max_requests` acquisitions start within
/// any `window`-long interval. acquire() blocks until a slot frees up.
class RateLimiter {
public:
    RateLimiter(std::chrono::milliseconds window, int max_requests)
        : window_(window), max_requests_(max_requests) {}

    void acquire();

private:
    std::chrono::milliseconds window_;
    int max_requests_; // <= 0 means unlimited
    std::mutex mutex_;
    std::deque<std::chrono::steady_clock::time_point> starts_;
};

/// Live HTTP backend speaking the common chat/completion JSON shapes.
/// Retries transient failures (429, 5xx, timeouts) with exponential backoff
/// and jitter; request starts are paced by a per-engine rate limiter.
class HttpBackend final : public Backend {
public:
    explicit HttpBackend(BackendConfig config);

    Completion complete(const CompletionRequest& req) override;
    std::string name() const override { return "live:" + config_.engine; }

    const BackendConfig& config() const { return config_; }

private:
    BackendConfig config_;
    std::shared_ptr<RateLimiter> limiter_;
};

/// Routes each engine label to its backend, with an optional shared fallback
/// (echo and replay backends serve every engine).
class BackendSet {
public:
    void set_fallback(std::shared_ptr<Backend> be) { fallback_ = std::move(be); }
    void add(const std::string& engine, std::shared_ptr<Backend> be);
    Backend& for_engine(const std::string& engine) const;

private:
    std::map<std::string, std::shared_ptr<Backend>> by_engine_;
    std::shared_ptr<Backend> fallback_;
};

} // namespace tagctx::backend
