#include "tagctx/reporting.hpp"

#include "tagctx/errors.hpp"
#include "tagctx/verification.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace tagctx::reporting {

using nlohmann::json;

namespace {

constexpr const char* kTotalLabel = "TOTAL";

std::string csv_field(const std::string& value) {
    if (value.find_first_of(",\"\r\n") == std::string::npos) return value;
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
        case '"':
            quoted = true;
            any = true;
            break;
        case ',':
            row.push_back(std::move(field));
            field.clear();
            any = true;
            break;
        case '\r':
            break;
        case '\n':
            if (any || !field.empty() || !row.empty()) {
                row.push_back(std::move(field));
                rows.push_back(std::move(row));
            }
            field.clear();
            row.clear();
            any = false;
            break;
        default:
            field += c;
            any = true;
        }
    }
    if (any || !field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

long parse_count(const std::string& s, const char* what) {
    try {
        return std::stol(s);
    } catch (const std::exception&) {
        throw Error(std::string("invalid ") + what + " count in csv: " + s);
    }
}

struct Bar {
    std::string label;
    long value = 0;
    const char* color = "#888888";
};

struct BarGroup {
    std::string label;
    std::vector<Bar> bars;
};

std::string fmt1(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

std::string svg_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string render_bar_chart(const std::vector<BarGroup>& groups, const std::string& title) {
    if (groups.empty()) throw Error("cannot chart an empty table");
    constexpr double bar_w = 22.0;
    constexpr double bar_gap = 4.0;
    constexpr double group_gap = 28.0;
    constexpr double margin = 40.0;
    constexpr double chart_h = 220.0;
    constexpr double top = 36.0;

    long max_value = 1;
    size_t max_bars = 1;
    for (const auto& g : groups) {
        max_bars = std::max(max_bars, g.bars.size());
        for (const auto& b : g.bars) max_value = std::max(max_value, b.value);
    }
    const double group_w = static_cast<double>(max_bars) * (bar_w + bar_gap) - bar_gap;
    const double width = 2 * margin + groups.size() * (group_w + group_gap) - group_gap;
    const double height = top + chart_h + 48.0;
    const double scale = chart_h / static_cast<double>(max_value);

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt1(width) << "\" height=\""
        << fmt1(height) << "\" viewBox=\"0 0 " << fmt1(width) << " " << fmt1(height) << "\">\n";
    svg << "  <title>" << svg_escape(title) << "</title>\n";
    svg << "  <text x=\"" << fmt1(width / 2) << "\" y=\"18\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"14\">" << svg_escape(title) << "</text>\n";
    double x = margin;
    for (const auto& g : groups) {
        svg << "  <g class=\"engine-group\" transform=\"translate(" << fmt1(x) << ",0)\">\n";
        double bx = 0.0;
        for (const auto& b : g.bars) {
            const double h = static_cast<double>(b.value) * scale;
            const double y = top + chart_h - h;
            svg << "    <rect class=\"bar\" x=\"" << fmt1(bx) << "\" y=\"" << fmt1(y)
                << "\" width=\"" << fmt1(bar_w) << "\" height=\"" << fmt1(h) << "\" fill=\""
                << b.color << "\"><title>" << svg_escape(g.label) << " " << svg_escape(b.label)
                << ": " << b.value << "</title></rect>\n";
            svg << "    <text x=\"" << fmt1(bx + bar_w / 2) << "\" y=\"" << fmt1(y - 4)
                << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"9\">"
                << b.value << "</text>\n";
            bx += bar_w + bar_gap;
        }
        svg << "    <text x=\"" << fmt1(group_w / 2) << "\" y=\"" << fmt1(top + chart_h + 16)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << svg_escape(g.label) << "</text>\n";
        svg << "  </g>\n";
        x += group_w + group_gap;
    }
    svg << "</svg>\n";
    return svg.str();
}

} // namespace

std::vector<TagStatsRow> tag_table(const std::vector<experiment::RunRecord>& records) {
    std::map<std::string, TagStatsRow> by_engine;
    for (const auto& rec : records) {
        if (!rec.verification) continue;
        TagStatsRow& row = by_engine[rec.engine];
        row.engine = rec.engine;
        switch (rec.verification->classification) {
        case verification::Classification::Grounded: ++row.present; break;
        case verification::Classification::Ungrounded: ++row.missing; break;
        case verification::Classification::CrossReference: ++row.mismatch; break;
        case verification::Classification::Declined: ++row.declined; break;
        }
    }
    std::vector<TagStatsRow> rows;
    rows.reserve(by_engine.size() + 1);
    TagStatsRow total;
    total.engine = kTotalLabel;
    for (auto& [engine, row] : by_engine) {
        total.present += row.present;
        total.missing += row.missing;
        total.mismatch += row.mismatch;
        total.declined += row.declined;
        rows.push_back(std::move(row));
    }
    if (!rows.empty()) rows.push_back(std::move(total));
    return rows;
}

std::vector<UrlStatsRow> url_table(const std::vector<url_audit::UrlRecord>& records) {
    // Unique URLs per (engine, condition); statuses are keyed per URL so a
    // URL cited by several records in one group is counted once.
    std::map<std::pair<std::string, std::string>, std::map<std::string, bool>> groups;
    for (const auto& rec : records) {
        groups[{rec.engine, rec.condition}][rec.url] = rec.status.is_good();
    }
    std::vector<UrlStatsRow> rows;
    rows.reserve(groups.size());
    for (const auto& [key, urls] : groups) {
        UrlStatsRow row;
        row.engine = key.first;
        row.condition = key.second;
        for (const auto& [url, good] : urls) {
            (void)url;
            if (good) ++row.good;
            else ++row.bad;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

ReductionSummary reduction_summary(const std::vector<UrlStatsRow>& no_context_stats,
                                   const std::vector<UrlStatsRow>& context_stats) {
    long nc_urls = 0, nc_bad = 0, ctx_urls = 0, ctx_bad = 0;
    for (const auto& row : no_context_stats) {
        nc_urls += row.good + row.bad;
        nc_bad += row.bad;
    }
    for (const auto& row : context_stats) {
        ctx_urls += row.good + row.bad;
        ctx_bad += row.bad;
    }
    return reduction_from_counts(nc_urls, nc_bad, ctx_urls, ctx_bad);
}

ReductionSummary reduction_from_counts(long no_context_urls, long no_context_bad,
                                       long with_context_urls, long with_context_bad) {
    ReductionSummary s;
    s.no_context_urls = no_context_urls;
    s.no_context_bad = no_context_bad;
    s.with_context_urls = with_context_urls;
    s.with_context_bad = with_context_bad;
    if (no_context_bad > 0) {
        s.bad_reduction_pct =
            100.0 * (1.0 - static_cast<double>(with_context_bad) / static_cast<double>(no_context_bad));
    } else {
        s.note = "no baseline hallucinations";
    }
    if (no_context_urls > 0) {
        s.url_ratio_pct =
            100.0 * static_cast<double>(with_context_urls) / static_cast<double>(no_context_urls);
    }
    return s;
}

std::string format_percent(double pct) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", pct);
    std::string out = buf;
    while (!out.empty() && out.back() == '0') out.pop_back();
    if (!out.empty() && out.back() == '.') out.pop_back();
    return out + "%";
}

std::string format_reduction(const ReductionSummary& s) {
    std::ostringstream out;
    out << "bad URLs: " << s.no_context_bad << " -> " << s.with_context_bad;
    if (s.bad_reduction_pct) {
        out << " (reduction " << format_percent(*s.bad_reduction_pct) << ")";
    } else {
        out << " (" << s.note << ")";
    }
    return out.str();
}

void to_json(json& j, const TagStatsRow& r) {
    j = json{{"engine", r.engine},
             {"present", r.present},
             {"missing", r.missing},
             {"mismatch", r.mismatch},
             {"declined", r.declined}};
}

void to_json(json& j, const UrlStatsRow& r) {
    j = json{{"engine", r.engine}, {"condition", r.condition}, {"good", r.good}, {"bad", r.bad}};
}

void to_json(json& j, const ReductionSummary& s) {
    j = json{{"no_context_urls", s.no_context_urls},
             {"no_context_bad", s.no_context_bad},
             {"with_context_urls", s.with_context_urls},
             {"with_context_bad", s.with_context_bad}};
    j["bad_reduction_pct"] = s.bad_reduction_pct ? json(*s.bad_reduction_pct) : json(nullptr);
    j["url_ratio_pct"] = s.url_ratio_pct ? json(*s.url_ratio_pct) : json(nullptr);
    j["note"] = s.note;
}

std::string to_csv(const std::vector<TagStatsRow>& rows) {
    std::ostringstream out;
    out << "engine,present,missing,mismatch,declined\n";
    for (const auto& r : rows) {
        out << csv_field(r.engine) << ',' << r.present << ',' << r.missing << ',' << r.mismatch
            << ',' << r.declined << '\n';
    }
    return out.str();
}

std::string to_csv(const std::vector<UrlStatsRow>& rows) {
    std::ostringstream out;
    out << "engine,condition,good,bad\n";
    for (const auto& r : rows) {
        out << csv_field(r.engine) << ',' << csv_field(r.condition) << ',' << r.good << ',' << r.bad
            << '\n';
    }
    return out.str();
}

std::vector<TagStatsRow> tag_rows_from_csv(const std::string& text) {
    auto rows = parse_csv(text);
    if (rows.empty() || rows.front() != std::vector<std::string>{"engine", "present", "missing",
                                                                 "mismatch", "declined"}) {
        throw Error("unexpected tag-stats csv header");
    }
    std::vector<TagStatsRow> out;
    for (size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 5) throw Error("malformed tag-stats csv row");
        out.push_back({rows[i][0], parse_count(rows[i][1], "present"), parse_count(rows[i][2], "missing"),
                       parse_count(rows[i][3], "mismatch"), parse_count(rows[i][4], "declined")});
    }
    return out;
}

std::vector<UrlStatsRow> url_rows_from_csv(const std::string& text) {
    auto rows = parse_csv(text);
    if (rows.empty() ||
        rows.front() != std::vector<std::string>{"engine", "condition", "good", "bad"}) {
        throw Error("unexpected url-stats csv header");
    }
    std::vector<UrlStatsRow> out;
    for (size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 4) throw Error("malformed url-stats csv row");
        out.push_back(
            {rows[i][0], rows[i][1], parse_count(rows[i][2], "good"), parse_count(rows[i][3], "bad")});
    }
    return out;
}

std::string to_svg(const std::vector<TagStatsRow>& rows) {
    std::vector<BarGroup> groups;
    for (const auto& r : rows) {
        if (r.engine == kTotalLabel) continue;
        BarGroup g;
        g.label = r.engine;
        g.bars = {{"present", r.present, "#4caf50"},
                  {"missing", r.missing, "#f44336"},
                  {"mismatch", r.mismatch, "#ff9800"},
                  {"declined", r.declined, "#9e9e9e"}};
        groups.push_back(std::move(g));
    }
    return render_bar_chart(groups, "Tag verification by engine");
}

std::string to_svg(const std::vector<UrlStatsRow>& rows) {
    std::map<std::string, BarGroup> by_engine;
    for (const auto& r : rows) {
        BarGroup& g = by_engine[r.engine];
        g.label = r.engine;
        g.bars.push_back({r.condition + " good", r.good, "#4caf50"});
        g.bars.push_back({r.condition + " bad", r.bad, "#f44336"});
    }
    std::vector<BarGroup> groups;
    groups.reserve(by_engine.size());
    for (auto& [engine, g] : by_engine) groups.push_back(std::move(g));
    return render_bar_chart(groups, "URL liveness by engine");
}

void write_text_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << body;
    out.flush();
    if (!out) throw IoError("short write to " + path);
}

} // namespace tagctx::reporting
