#pragma once

#include "tagctx/experiment.hpp"
#include "tagctx/url_audit.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace tagctx::reporting {

/// Per-engine verification outcomes over context cells. The four-way
/// classification maps onto columns as grounded=present, ungrounded=missing,
/// cross-reference=mismatch, declined=declined.
struct TagStatsRow {
    std::string engine;
    long present = 0;
    long missing = 0;
    long mismatch = 0;
    long declined = 0;

    bool operator==(const TagStatsRow&) const = default;
};

/// Per-(engine, condition) liveness outcomes over unique URLs.
struct UrlStatsRow {
    std::string engine;
    std::string condition;
    long good = 0;
    long bad = 0;

    bool operator==(const UrlStatsRow&) const = default;
};

/// Rows sorted by engine, with a final TOTAL row summing every column.
/// Records without verification results (no-context cells) are ignored.
/// No records with verification -> empty table, no TOTAL row.
std::vector<TagStatsRow> tag_table(const std::vector<experiment::RunRecord>& records);

/// Groups by (engine, condition) and counts unique URLs per group; a URL
/// cited by several records in one group counts once. Sorted by engine then
/// condition.
std::vector<UrlStatsRow> url_table(const std::vector<url_audit::UrlRecord>& records);

struct ReductionSummary {
    long no_context_urls = 0;
    long no_context_bad = 0;
    long with_context_urls = 0;
    long with_context_bad = 0;
    // 100 * (1 - with_context_bad / no_context_bad); absent when the
    // baseline has no bad URLs.
    std::optional<double> bad_reduction_pct;
    // with-context unique URLs as a percentage of no-context unique URLs.
    std::optional<double> url_ratio_pct;
    std::string note; // set for degenerate inputs instead of crashing
};

ReductionSummary reduction_summary(const std::vector<UrlStatsRow>& no_context_stats,
                                   const std::vector<UrlStatsRow>& context_stats);

ReductionSummary reduction_from_counts(long no_context_urls, long no_context_bad,
                                       long with_context_urls, long with_context_bad);

/// "99.875" formats as "99.88%"; trailing zeros are dropped, so 98.0
/// formats as "98%".
std::string format_percent(double pct);

/// One-line human rendering of the reduction, e.g.
/// "bad URLs: 1605 -> 2 (reduction 99.88%)".
std::string format_reduction(const ReductionSummary& s);

void to_json(nlohmann::json& j, const TagStatsRow& r);
void to_json(nlohmann::json& j, const UrlStatsRow& r);
void to_json(nlohmann::json& j, const ReductionSummary& s);

// CSV: header row exactly matches the field names; RFC 4180 quoting.
std::string to_csv(const std::vector<TagStatsRow>& rows);
std::string to_csv(const std::vector<UrlStatsRow>& rows);
std::vector<TagStatsRow> tag_rows_from_csv(const std::string& text);
std::vector<UrlStatsRow> url_rows_from_csv(const std::string& text);

// SVG grouped bar charts: one <g class="engine-group"> per engine; the
// TOTAL row is excluded from charts. Empty input is an error.
std::string to_svg(const std::vector<TagStatsRow>& rows);
std::string to_svg(const std::vector<UrlStatsRow>& rows);

void write_text_file(const std::string& path, const std::string& body);

} // namespace tagctx::reporting
