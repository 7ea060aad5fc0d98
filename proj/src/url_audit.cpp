#include "tagctx/url_audit.hpp"

#include "tagctx/experiment.hpp"
#include "tagctx/prompting.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <thread>

namespace tagctx::url_audit {

using nlohmann::json;

namespace {

bool is_url_char(char ch) {
    // Everything a URL may carry up to a natural boundary: stop at
    // whitespace and at characters that delimit links in prose or markup.
    unsigned char c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) return false;
    switch (ch) {
    case '<':
    case '>':
    case '"':
    case '\'':
    case '`':
        return false;
    default:
        return c > 0x20 && c < 0x7f;
    }
}

constexpr std::string_view kTrailingPunctuation = ".,;:)]";

struct ParsedUrl {
    std::string base; // scheme://host[:port]
    std::string path; // path + query, "/" at minimum
};

ParsedUrl parse_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw InvalidUrlError("no scheme in url: " + url);
    std::string scheme = url.substr(0, scheme_end);
    std::transform(scheme.begin(), scheme.end(), scheme.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (scheme != "http" && scheme != "https") throw InvalidUrlError("unsupported scheme in url: " + url);
    const std::string rest = url.substr(scheme_end + 3);
    const auto host_end = rest.find_first_of("/?#");
    std::string host = rest.substr(0, host_end);
    if (host.empty()) throw InvalidUrlError("missing host in url: " + url);
    std::string path = host_end == std::string::npos ? std::string("/") : rest.substr(host_end);
    if (!path.empty() && path.front() == '?') path.insert(path.begin(), '/');
    // Fragments are client-side only; never send them.
    if (const auto hash = path.find('#'); hash != std::string::npos) path.erase(hash);
    if (path.empty()) path = "/";
    return {scheme + "://" + host, path};
}

} // namespace

const char* to_string(UrlStatusKind k) {
    switch (k) {
    case UrlStatusKind::Good: return "good";
    case UrlStatusKind::BadStatus: return "bad-status";
    case UrlStatusKind::Timeout: return "timeout";
    case UrlStatusKind::ConnectError: return "connect-error";
    }
    return "connect-error";
}

UrlStatusKind url_status_kind_from_string(std::string_view s) {
    if (s == "good") return UrlStatusKind::Good;
    if (s == "bad-status") return UrlStatusKind::BadStatus;
    if (s == "timeout") return UrlStatusKind::Timeout;
    if (s == "connect-error") return UrlStatusKind::ConnectError;
    throw Error("unknown url status kind: " + std::string(s));
}

std::vector<std::string> extract_urls(std::string_view text) {
    std::vector<std::string> out;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t start = text.find("http", pos);
        if (start == std::string_view::npos) break;
        // Word boundary on the left so "xhttp://" is not a link.
        if (start > 0 && std::isalnum(static_cast<unsigned char>(text[start - 1]))) {
            pos = start + 4;
            continue;
        }
        std::string_view at = text.substr(start);
        size_t scheme_len = 0;
        if (at.rfind("https://", 0) == 0) scheme_len = 8;
        else if (at.rfind("http://", 0) == 0) scheme_len = 7;
        if (scheme_len == 0) {
            pos = start + 4;
            continue;
        }
        size_t end = scheme_len;
        while (end < at.size() && is_url_char(at[end])) ++end;
        while (end > scheme_len && kTrailingPunctuation.find(at[end - 1]) != std::string_view::npos) --end;
        if (end > scheme_len) out.emplace_back(at.substr(0, end));
        pos = start + end;
    }
    return out;
}

UrlRecord check_url(const std::string& url, const CheckOptions& opts) {
    const ParsedUrl parsed = parse_url(url);
    const std::string base = opts.host_override.empty() ? parsed.base : opts.host_override;

    httplib::Client client(base);
    client.set_follow_location(true);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(opts.timeout);
    const auto usecs =
        std::chrono::duration_cast<std::chrono::microseconds>(opts.timeout - secs).count();
    client.set_connection_timeout(static_cast<time_t>(secs.count()), static_cast<time_t>(usecs));
    client.set_read_timeout(static_cast<time_t>(secs.count()), static_cast<time_t>(usecs));
    client.set_write_timeout(static_cast<time_t>(secs.count()), static_cast<time_t>(usecs));
    client.set_default_headers({{"User-Agent", opts.user_agent}});

    UrlRecord rec;
    rec.url = url;
    httplib::Result res = client.Get(parsed.path);
    rec.checked_at = experiment::now_iso8601_utc();
    if (res) {
        rec.status = res->status == 200 ? UrlStatus{UrlStatusKind::Good, 200}
                                        : UrlStatus{UrlStatusKind::BadStatus, res->status};
        return rec;
    }
    switch (res.error()) {
    case httplib::Error::ConnectionTimeout:
    case httplib::Error::Read:
        rec.status = {UrlStatusKind::Timeout, 0};
        break;
    default:
        rec.status = {UrlStatusKind::ConnectError, 0};
        break;
    }
    return rec;
}

std::vector<UrlRecord> audit(const std::vector<experiment::RunRecord>& records, int parallelism,
                             const CheckOptions& opts) {
    // One reference per (record, distinct url in that record); one fetch per
    // globally distinct url.
    struct Ref {
        std::string url;
        std::string engine;
        std::string condition;
    };
    std::vector<Ref> refs;
    std::set<std::string> unique;
    for (const auto& rec : records) {
        std::set<std::string> in_record;
        for (auto& url : extract_urls(rec.raw_response)) {
            if (!in_record.insert(url).second) continue;
            refs.push_back({url, rec.engine, prompting::condition_label(rec.condition)});
            unique.insert(std::move(url));
        }
    }

    std::vector<std::string> urls(unique.begin(), unique.end());
    std::vector<UrlStatus> statuses(urls.size());
    std::vector<std::string> checked_at(urls.size());
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= urls.size()) return;
            try {
                UrlRecord r = check_url(urls[i], opts);
                statuses[i] = r.status;
                checked_at[i] = r.checked_at;
            } catch (const InvalidUrlError&) {
                statuses[i] = {UrlStatusKind::ConnectError, 0};
                checked_at[i] = experiment::now_iso8601_utc();
            }
        }
    };
    size_t workers = std::min<size_t>(static_cast<size_t>(std::max(1, parallelism)), urls.size());
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::map<std::string, size_t> slot;
    for (size_t i = 0; i < urls.size(); ++i) slot[urls[i]] = i;

    std::vector<UrlRecord> out;
    out.reserve(refs.size());
    for (const auto& ref : refs) {
        size_t i = slot.at(ref.url);
        out.push_back({ref.url, statuses[i], checked_at[i], ref.engine, ref.condition});
    }
    std::sort(out.begin(), out.end(), [](const UrlRecord& a, const UrlRecord& b) {
        return std::tie(a.url, a.engine, a.condition) < std::tie(b.url, b.engine, b.condition);
    });
    return out;
}

void to_json(json& j, const UrlRecord& r) {
    j = json{{"url", r.url},
             {"status", to_string(r.status.kind)},
             {"code", r.status.code},
             {"checked_at", r.checked_at},
             {"engine", r.engine},
             {"condition", r.condition}};
}

void from_json(const json& j, UrlRecord& r) {
    r.url = j.at("url").get<std::string>();
    r.status.kind = url_status_kind_from_string(j.at("status").get<std::string>());
    r.status.code = j.value("code", 0);
    r.checked_at = j.value("checked_at", "");
    r.engine = j.value("engine", "");
    r.condition = j.value("condition", "");
}

std::vector<UrlRecord> load_url_records(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open url records " + path);
    std::vector<UrlRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(json::parse(line).get<UrlRecord>());
        } catch (const json::exception& e) {
            throw IoError("invalid url record in " + path + ": " + e.what());
        }
    }
    return out;
}

void save_url_records(const std::vector<UrlRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    for (const auto& rec : records) out << json(rec).dump() << "\n";
    out.flush();
    if (!out) throw IoError("short write to " + path);
}

} // namespace tagctx::url_audit
