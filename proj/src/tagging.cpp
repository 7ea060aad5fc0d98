#include "tagctx/tagging.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace tagctx::tagging {

namespace {

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

/// Collapses whitespace runs to single spaces and trims the ends.
std::string normalize_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        if (is_space(c)) {
            pending_space = !out.empty();
        } else {
            if (pending_space) out.push_back(' ');
            pending_space = false;
            out.push_back(c);
        }
    }
    return out;
}

struct StrictTagMatch {
    std::size_t begin = 0; // position of '('
    std::size_t end = 0;   // one past ')'
    int value = 0;
};

/// Attempts to match "(source NNNN)" starting at text[pos] (which must be
/// '('). Case-insensitive; whitespace inside the parentheses is flexible,
/// but at least one space must separate the keyword from the digits.
bool match_strict_tag(std::string_view text, std::size_t pos, StrictTagMatch& out) {
    static constexpr std::string_view kKeyword = "source";
    std::size_t i = pos;
    if (i >= text.size() || text[i] != '(') return false;
    ++i;
    while (i < text.size() && is_space(text[i])) ++i;
    for (char k : kKeyword) {
        if (i >= text.size() || lower(text[i]) != k) return false;
        ++i;
    }
    std::size_t ws = i;
    while (i < text.size() && is_space(text[i])) ++i;
    if (i == ws) return false; // keyword must be followed by whitespace
    std::size_t digits_begin = i;
    while (i < text.size() && is_digit(text[i])) ++i;
    std::size_t digits_len = i - digits_begin;
    if (digits_len == 0 || digits_len > 9) return false;
    while (i < text.size() && is_space(text[i])) ++i;
    if (i >= text.size() || text[i] != ')') return false;
    out.begin = pos;
    out.end = i + 1;
    out.value = std::stoi(std::string(text.substr(digits_begin, digits_len)));
    return true;
}

std::vector<StrictTagMatch> find_strict_tags(std::string_view text) {
    std::vector<StrictTagMatch> matches;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '(') continue;
        StrictTagMatch m;
        if (match_strict_tag(text, i, m)) {
            matches.push_back(m);
            i = m.end - 1;
        }
    }
    return matches;
}

/// Sentence spans over the raw text, using the same boundary rule as
/// segment_sentences but without normalizing, so offsets stay valid.
std::vector<std::pair<std::size_t, std::size_t>> sentence_spans(std::string_view text) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (is_terminal(text[i]) && (i + 1 == text.size() || is_space(text[i + 1]))) {
            spans.emplace_back(start, i + 1);
            start = i + 1;
        }
    }
    if (start < text.size()) spans.emplace_back(start, text.size());
    return spans;
}

/// True when the sentence contains "source" or "sources" as a whole word.
bool has_citation_keyword(std::string_view sentence) {
    static constexpr std::string_view kKeyword = "source";
    for (std::size_t i = 0; i + kKeyword.size() <= sentence.size(); ++i) {
        if (i > 0 && is_alnum(sentence[i - 1])) continue;
        bool hit = true;
        for (std::size_t k = 0; k < kKeyword.size(); ++k) {
            if (lower(sentence[i + k]) != kKeyword[k]) {
                hit = false;
                break;
            }
        }
        if (!hit) continue;
        std::size_t after = i + kKeyword.size();
        if (after < sentence.size() && (lower(sentence[after]) == 's')) ++after;
        if (after < sentence.size() && is_alnum(sentence[after])) continue;
        return true;
    }
    return false;
}

/// Appends the tag to a single sentence, before its terminal punctuation.
std::string tag_sentence(std::string_view sentence, int tag) {
    std::size_t punct = sentence.size();
    while (punct > 0 && is_terminal(sentence[punct - 1])) --punct;
    std::string marker = " (source " + std::to_string(tag) + ")";
    std::string out;
    out.reserve(sentence.size() + marker.size());
    out.append(sentence.substr(0, punct));
    out.append(marker);
    out.append(sentence.substr(punct));
    return out;
}

} // namespace

std::set<int> TagRegistry::tag_set() const {
    std::set<int> out;
    for (const auto& [tag, loc] : entries) out.insert(tag);
    return out;
}

std::vector<int> generate_tags(std::size_t count, std::uint32_t seed) {
    if (count > kMaxTagCount) {
        throw TooManyTagsError("cannot generate " + std::to_string(count) +
                               " distinct 4-digit tags; only " + std::to_string(kMaxTagCount) +
                               " exist");
    }
    std::vector<int> pool(kMaxTagCount);
    std::iota(pool.begin(), pool.end(), kMinTag);
    // Partial Fisher-Yates with an explicit index formula so the sequence is
    // identical across standard library implementations.
    std::mt19937 rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng() % (pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
}

std::vector<std::string> segment_sentences(std::string_view line_text) {
    std::string normalized = normalize_whitespace(line_text);
    if (normalized.empty()) return {};
    std::vector<std::string> sentences;
    std::size_t start = 0;
    for (std::size_t i = 0; i < normalized.size(); ++i) {
        if (is_terminal(normalized[i]) &&
            (i + 1 == normalized.size() || normalized[i + 1] == ' ')) {
            sentences.push_back(normalized.substr(start, i + 1 - start));
            start = i + 2; // skip the single separating space
        }
    }
    if (start < normalized.size()) sentences.push_back(normalized.substr(start));
    return sentences;
}

std::string normalized_document_text(const corpus::SourceDocument& doc) {
    std::string out;
    for (std::size_t i = 0; i < doc.lines.size(); ++i) {
        if (i > 0) out.push_back('\n');
        auto sentences = segment_sentences(doc.lines[i].text);
        for (std::size_t s = 0; s < sentences.size(); ++s) {
            if (s > 0) out.push_back(' ');
            out.append(sentences[s]);
        }
    }
    return out;
}

TaggedContext insert_tags(const corpus::SourceDocument& doc, std::uint32_t seed) {
    std::size_t sentence_count = 0;
    for (const auto& line : doc.lines) sentence_count += segment_sentences(line.text).size();
    if (sentence_count > kMaxTagCount) {
        throw TooManyTagsError("document has " + std::to_string(sentence_count) +
                               " sentences; the 4-digit tag space holds only " +
                               std::to_string(kMaxTagCount));
    }
    return insert_tags(doc, generate_tags(sentence_count, seed));
}

TaggedContext insert_tags(const corpus::SourceDocument& doc, std::span<const int> tags) {
    TaggedContext ctx;
    ctx.context_id = doc.doc_id + "-tagged";
    ctx.topic = doc.topic;
    ctx.registry.context_id = ctx.context_id;

    std::size_t next_tag = 0;
    std::string text;
    for (std::size_t i = 0; i < doc.lines.size(); ++i) {
        const auto& line = doc.lines[i];
        auto sentences = segment_sentences(line.text);
        if (i > 0) text.push_back('\n');
        for (std::size_t s = 0; s < sentences.size(); ++s) {
            if (next_tag >= tags.size()) {
                throw TooManyTagsError("tag sequence exhausted at line " +
                                       std::to_string(line.line_no));
            }
            int tag = tags[next_tag++];
            if (s > 0) text.push_back(' ');
            text.append(tag_sentence(sentences[s], tag));
            ctx.registry.entries[tag] =
                TagLocation{line.doc_id, line.line_no, static_cast<int>(s)};
        }
    }
    ctx.tagged_text = std::move(text);
    return ctx;
}

ExtractedTags extract_tags(std::string_view text) {
    ExtractedTags out;

    auto strict = find_strict_tags(text);
    for (const auto& m : strict) {
        out.values.insert(m.value);
        out.mentions.push_back(TagMention{m.value, m.begin, true});
    }

    auto inside_strict = [&strict](std::size_t pos) {
        for (const auto& m : strict) {
            if (pos >= m.begin && pos < m.end) return true;
        }
        return false;
    };

    for (const auto& [begin, end] : sentence_spans(text)) {
        std::string_view sentence = text.substr(begin, end - begin);
        if (!has_citation_keyword(sentence)) continue;
        for (std::size_t i = 0; i < sentence.size(); ++i) {
            if (!is_digit(sentence[i])) continue;
            std::size_t run = i;
            while (run < sentence.size() && is_digit(sentence[run])) ++run;
            bool standalone = (i == 0 || !is_alnum(sentence[i - 1])) &&
                              (run == sentence.size() || !is_alnum(sentence[run]));
            if (standalone && run - i == 4 && sentence[i] != '0' &&
                !inside_strict(begin + i)) {
                int value = std::stoi(std::string(sentence.substr(i, 4)));
                out.values.insert(value);
                out.mentions.push_back(TagMention{value, begin + i, false});
            }
            i = run;
        }
    }

    std::sort(out.mentions.begin(), out.mentions.end(),
              [](const TagMention& a, const TagMention& b) { return a.offset < b.offset; });
    return out;
}

std::string strip_tags(std::string_view text) {
    std::string current(text);
    for (;;) {
        auto matches = find_strict_tags(current);
        if (matches.empty()) return current;
        std::string next;
        next.reserve(current.size());
        std::size_t pos = 0;
        for (const auto& m : matches) {
            std::size_t begin = m.begin;
            if (begin > pos && current[begin - 1] == ' ') --begin; // eat one preceding space
            next.append(current, pos, begin - pos);
            pos = m.end;
        }
        next.append(current, pos, current.size() - pos);
        current = std::move(next);
    }
}

void to_json(nlohmann::json& j, const TaggedContext& c) {
    nlohmann::json registry = nlohmann::json::array();
    for (const auto& [tag, loc] : c.registry.entries) {
        registry.push_back({{"tag", tag},
                            {"doc_id", loc.doc_id},
                            {"line_no", loc.line_no},
                            {"sentence_index", loc.sentence_index}});
    }
    j = nlohmann::json{{"context_id", c.context_id},
                       {"topic", c.topic},
                       {"tagged_text", c.tagged_text},
                       {"registry", std::move(registry)}};
}

void from_json(const nlohmann::json& j, TaggedContext& c) {
    j.at("context_id").get_to(c.context_id);
    j.at("topic").get_to(c.topic);
    j.at("tagged_text").get_to(c.tagged_text);
    c.registry.context_id = c.context_id;
    c.registry.entries.clear();
    for (const auto& e : j.at("registry")) {
        TagLocation loc{e.at("doc_id").get<std::string>(), e.at("line_no").get<int>(),
                        e.at("sentence_index").get<int>()};
        c.registry.entries[e.at("tag").get<int>()] = std::move(loc);
    }
}

std::vector<TaggedContext> load_contexts(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open contexts file: " + path);
    nlohmann::json j;
    in >> j;
    return j.get<std::vector<TaggedContext>>();
}

void save_contexts(const std::vector<TaggedContext>& contexts, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write contexts file: " + path);
    out << nlohmann::json(contexts).dump(2) << '\n';
}

} // namespace tagctx::tagging
