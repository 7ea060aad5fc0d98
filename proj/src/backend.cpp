#include "tagctx/backend.hpp"

#include <httplib.h>

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <random>
#include <thread>

namespace tagctx::backend {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv1a64(std::string_view data, std::uint64_t h = kFnvOffset) {
    for (unsigned char c : data) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

std::string to_hex(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

struct ParsedUrl {
    std::string base; // scheme://host[:port]
    std::string path; // path + query, never empty
};

ParsedUrl split_endpoint(const std::string& endpoint) {
    auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) {
        throw Error("endpoint is not an http(s) URL: " + endpoint);
    }
    auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

std::chrono::milliseconds backoff_delay(std::chrono::milliseconds base, int attempt) {
    auto delay = base * (1LL << (attempt - 1));
    thread_local std::mt19937 jitter_rng{std::random_device{}()};
    auto jitter = delay.count() > 0
                      ? std::chrono::milliseconds(jitter_rng() % (delay.count() / 2 + 1))
                      : std::chrono::milliseconds(0);
    return delay + jitter;
}

} // namespace

void to_json(nlohmann::json& j, const BackendConfig& c) {
    j = nlohmann::json{{"engine", c.engine},
                       {"endpoint", c.endpoint},
                       {"api_style", c.api_style},
                       {"api_key_env", c.api_key_env},
                       {"temperature", c.temperature},
                       {"max_tokens", c.max_tokens},
                       {"request_timeout_ms", c.request_timeout.count()},
                       {"max_retries", c.max_retries},
                       {"requests_per_minute", c.requests_per_minute},
                       {"retry_initial_delay_ms", c.retry_initial_delay.count()}};
}

void from_json(const nlohmann::json& j, BackendConfig& c) {
    j.at("engine").get_to(c.engine);
    c.endpoint = j.value("endpoint", "");
    c.api_style = j.value("api_style", "chat");
    c.api_key_env = j.value("api_key_env", "");
    c.temperature = j.value("temperature", 0.0);
    c.max_tokens = j.value("max_tokens", 1024);
    c.request_timeout = std::chrono::milliseconds(j.value("request_timeout_ms", 30000));
    c.max_retries = j.value("max_retries", 3);
    c.requests_per_minute = j.value("requests_per_minute", 60);
    c.retry_initial_delay = std::chrono::milliseconds(j.value("retry_initial_delay_ms", 1000));
}

std::string rendered_prompt(const CompletionRequest& req) {
    if (req.instruction.empty()) return req.input;
    return req.instruction + "\n\n" + req.input;
}

std::string prompt_hash(const CompletionRequest& req) {
    auto h = fnv1a64(req.engine);
    h = fnv1a64("\n", h);
    h = fnv1a64(rendered_prompt(req), h);
    return to_hex(h);
}

Completion EchoBackend::complete(const CompletionRequest& req) {
    return Completion{req.engine, prompt_hash(req), req.input,
                      std::chrono::milliseconds(0), 1};
}

void to_json(nlohmann::json& j, const FixtureEntry& e) {
    j = nlohmann::json{{"engine", e.engine},
                       {"prompt_hash", e.prompt_hash},
                       {"prompt_text", e.prompt_text},
                       {"response_text", e.response_text}};
}

void from_json(const nlohmann::json& j, FixtureEntry& e) {
    if (!j.is_object()) throw SchemaError("fixture entry is not an object");
    for (const char* field : {"engine", "prompt_hash", "prompt_text", "response_text"}) {
        if (!j.contains(field) || !j.at(field).is_string()) {
            throw SchemaError(std::string("fixture entry missing string field: ") + field);
        }
    }
    j.at("engine").get_to(e.engine);
    j.at("prompt_hash").get_to(e.prompt_hash);
    j.at("prompt_text").get_to(e.prompt_text);
    j.at("response_text").get_to(e.response_text);
}

ReplayBackend::ReplayBackend(std::vector<FixtureEntry> entries) {
    for (auto& e : entries) {
        auto hash = e.prompt_hash;
        entries_[hash] = std::move(e);
    }
}

ReplayBackend ReplayBackend::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open replay fixture: " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_array()) {
        throw SchemaError("replay fixture is not a JSON array: " + path);
    }
    return ReplayBackend(j.get<std::vector<FixtureEntry>>());
}

Completion ReplayBackend::complete(const CompletionRequest& req) {
    auto hash = prompt_hash(req);
    auto it = entries_.find(hash);
    if (it == entries_.end()) {
        auto excerpt = rendered_prompt(req).substr(0, 80);
        throw MissingFixtureError("no recorded response for prompt hash " + hash +
                                  " (engine " + req.engine + "): " + excerpt);
    }
    return Completion{req.engine, hash, it->second.response_text,
                      std::chrono::milliseconds(0), 1};
}

ReplayBackend load_replay_fixture(const std::string& path) {
    return ReplayBackend::from_file(path);
}

Completion RecordingBackend::complete(const CompletionRequest& req) {
    auto completion = inner_.complete(req);
    std::lock_guard lock(mutex_);
    for (const auto& e : entries_) {
        if (e.prompt_hash == completion.prompt_hash) return completion;
    }
    entries_.push_back(FixtureEntry{req.engine, completion.prompt_hash,
                                    rendered_prompt(req), completion.text});
    return completion;
}

void RecordingBackend::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write replay fixture: " + path);
    out << nlohmann::json(entries_).dump(2) << '\n';
}

void RateLimiter::acquire() {
    if (max_requests_ <= 0) return;
    for (;;) {
        std::chrono::steady_clock::duration wait;
        {
            std::lock_guard lock(mutex_);
            auto now = std::chrono::steady_clock::now();
            while (!starts_.empty() && now - starts_.front() >= window_) starts_.pop_front();
            if (static_cast<int>(starts_.size()) < max_requests_) {
                starts_.push_back(now);
                return;
            }
            wait = starts_.front() + window_ - now;
        }
        std::this_thread::sleep_for(wait);
    }
}

HttpBackend::HttpBackend(BackendConfig config)
    : config_(std::move(config)),
      limiter_(std::make_shared<RateLimiter>(std::chrono::milliseconds(60000),
                                             config_.requests_per_minute)) {}

Completion HttpBackend::complete(const CompletionRequest& req) {
    std::string api_key;
    if (!config_.api_key_env.empty()) {
        const char* key = std::getenv(config_.api_key_env.c_str());
        if (key == nullptr || *key == '\0') {
            throw AuthError("environment variable " + config_.api_key_env +
                            " is not set for engine " + config_.engine);
        }
        api_key = key;
    }

    auto url = split_endpoint(config_.endpoint);
    nlohmann::json body;
    body["model"] = config_.engine;
    body["temperature"] = config_.temperature;
    body["max_tokens"] = config_.max_tokens;
    if (config_.api_style == "completion") {
        body["prompt"] = rendered_prompt(req);
    } else {
        auto messages = nlohmann::json::array();
        if (!req.instruction.empty()) {
            messages.push_back({{"role", "system"}, {"content", req.instruction}});
        }
        messages.push_back({{"role", "user"}, {"content", req.input}});
        body["messages"] = std::move(messages);
    }
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

    const auto started = std::chrono::steady_clock::now();
    const int max_attempts = config_.max_retries + 1;
    enum class FailKind { Upstream, RateLimit, Timeout };
    FailKind last_kind = FailKind::Upstream;
    std::string last_failure;
    int last_status = 0;

    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        limiter_->acquire();

        httplib::Client client(url.base);
        client.set_connection_timeout(config_.request_timeout);
        client.set_read_timeout(config_.request_timeout);
        client.set_write_timeout(config_.request_timeout);

        auto res = client.Post(url.path, headers, payload, "application/json");

        auto finish = [&](std::string text) {
            auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - started);
            return Completion{req.engine, prompt_hash(req), std::move(text), latency, attempt};
        };

        if (res) {
            last_status = res->status;
            if (res->status == 200) {
                nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
                if (reply.is_discarded()) {
                    throw UpstreamError(200, "engine " + config_.engine +
                                                 " returned a non-JSON body");
                }
                try {
                    const auto& choice = reply.at("choices").at(0);
                    std::string text = config_.api_style == "completion"
                                           ? choice.at("text").get<std::string>()
                                           : choice.at("message").at("content").get<std::string>();
                    return finish(std::move(text));
                } catch (const nlohmann::json::exception& e) {
                    throw UpstreamError(200, "engine " + config_.engine +
                                                 " returned an unexpected shape: " + e.what());
                }
            }
            if (res->status == 401 || res->status == 403) {
                throw AuthError("engine " + config_.engine + " rejected the API key (HTTP " +
                                std::to_string(res->status) + ")");
            }
            if (res->status == 429) {
                last_kind = FailKind::RateLimit;
                last_failure = "HTTP 429";
            } else if (res->status >= 500) {
                last_kind = FailKind::Upstream;
                last_failure = "HTTP " + std::to_string(res->status);
            } else {
                throw UpstreamError(res->status,
                                    "engine " + config_.engine + " returned HTTP " +
                                        std::to_string(res->status) + ": " + res->body);
            }
        } else {
            auto err = res.error();
            last_kind = (err == httplib::Error::ConnectionTimeout ||
                         err == httplib::Error::Read || err == httplib::Error::Write)
                            ? FailKind::Timeout
                            : FailKind::Upstream;
            last_failure = httplib::to_string(err);
        }

        if (attempt < max_attempts) {
            std::this_thread::sleep_for(backoff_delay(config_.retry_initial_delay, attempt));
        }
    }

    switch (last_kind) {
    case FailKind::RateLimit:
        throw RateLimitedError("engine " + config_.engine + " still rate-limited after " +
                               std::to_string(max_attempts) + " attempts");
    case FailKind::Timeout:
        throw TimeoutError("engine " + config_.engine + " timed out after " +
                           std::to_string(max_attempts) + " attempts: " + last_failure);
    case FailKind::Upstream:
    default:
        throw UpstreamError(last_status, "engine " + config_.engine + " failed after " +
                                             std::to_string(max_attempts) +
                                             " attempts: " + last_failure);
    }
}

void BackendSet::add(const std::string& engine, std::shared_ptr<Backend> be) {
    by_engine_[engine] = std::move(be);
}

Backend& BackendSet::for_engine(const std::string& engine) const {
    auto it = by_engine_.find(engine);
    if (it != by_engine_.end()) return *it->second;
    if (fallback_) return *fallback_;
    throw Error("no backend configured for engine: " + engine);
}

} // namespace tagctx::backend
