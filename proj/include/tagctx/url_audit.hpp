#pragma once

#include "tagctx/errors.hpp"

#include <json.hpp>

#include <chrono>
#include <string>
#include <string_view>
#include <vector>

namespace tagctx::experiment {
struct RunRecord;
}

namespace tagctx::url_audit {

class InvalidUrlError : public Error {
public:
    explicit InvalidUrlError(const std::string& message) : Error(message) {}
};

enum class UrlStatusKind { Good, BadStatus, Timeout, ConnectError };

const char* to_string(UrlStatusKind k);
UrlStatusKind url_status_kind_from_string(std::string_view s);

struct UrlStatus {
    UrlStatusKind kind = UrlStatusKind::ConnectError;
    int code = 0; // final HTTP status for Good/BadStatus

    bool is_good() const { return kind == UrlStatusKind::Good; }
    bool operator==(const UrlStatus&) const = default;
};

struct UrlRecord {
    std::string url;
    UrlStatus status;
    std::string checked_at; // ISO 8601 UTC
    std::string engine;
    std::string condition; // "no-context" or "with-context"
};

/// Pulls every http(s) URL out of the text, in order, with trailing
/// punctuation (.,;:)]) stripped. Duplicates are preserved; dedup happens
/// at audit time.
std::vector<std::string> extract_urls(std::string_view text);

struct CheckOptions {
    std::chrono::milliseconds timeout{2000};
    // When set, every request is sent to this base URL with the original
    // path and query, so audits can run against a local stub.
    std::string host_override;
    std::string user_agent = "tagctx-url-audit/0.1";
};

/// GET with up to 5 redirects. Final status 200 within the timeout is Good;
/// any other status is BadStatus; no reply in time is Timeout; DNS or
/// connection failure is ConnectError.
UrlRecord check_url(const std::string& url, const CheckOptions& opts = {});

/// Extracts URLs from every record's raw response, checks each distinct URL
/// exactly once with bounded parallelism, and joins the result back onto
/// every record that cited it. Output is sorted by (url, engine, condition).
std::vector<UrlRecord> audit(const std::vector<experiment::RunRecord>& records,
                             int parallelism, const CheckOptions& opts = {});

void to_json(nlohmann::json& j, const UrlRecord& r);
void from_json(const nlohmann::json& j, UrlRecord& r);

std::vector<UrlRecord> load_url_records(const std::string& path); // JSON lines
void save_url_records(const std::vector<UrlRecord>& records, const std::string& path);

} // namespace tagctx::url_audit
