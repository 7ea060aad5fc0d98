#pragma once

#include "tagctx/corpus.hpp"
#include "tagctx/errors.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tagctx::tagging {

inline constexpr int kMinTag = 1000;
inline constexpr int kMaxTag = 9999;
inline constexpr std::size_t kMaxTagCount = 9000; // |[1000, 9999]|

class TooManyTagsError : public Error {
public:
    explicit TooManyTagsError(const std::string& message) : Error(message) {}
};

/// Where a tag points: one sentence of one source line.
struct TagLocation {
    std::string doc_id;
    int line_no = 0;        // 1-based
    int sentence_index = 0; // 0-based within the line

    bool operator==(const TagLocation&) const = default;
};

/// Injective map from tag values to source locations.
struct TagRegistry {
    std::string context_id;
    std::map<int, TagLocation> entries;

    bool contains(int tag) const { return entries.count(tag) != 0; }
    std::set<int> tag_set() const;
};

struct TaggedContext {
    std::string context_id;
    std::string topic;
    std::string tagged_text;
    TagRegistry registry;
};

/// `count` distinct 4-digit values drawn without replacement from
/// [1000, 9999]. Same seed, same sequence.
std::vector<int> generate_tags(std::size_t count, std::uint32_t seed);

/// Splits after '.', '!' or '?' when followed by whitespace or end of input;
/// terminal punctuation stays attached. A line without terminal punctuation
/// is one sentence. Joining the result with single spaces reproduces the
/// whitespace-normalized input.
std::vector<std::string> segment_sentences(std::string_view line_text);

/// The document text as insert_tags normalizes it: each line's sentences
/// joined by single spaces, lines joined by newlines.
std::string normalized_document_text(const corpus::SourceDocument& doc);

/// Places one " (source NNNN)" tag per sentence, before the sentence's
/// terminal punctuation (appended at the end when there is none), and
/// records every tag's location in the registry.
TaggedContext insert_tags(const corpus::SourceDocument& doc, std::uint32_t seed);

/// Same, with a caller-supplied tag sequence (must cover every sentence).
TaggedContext insert_tags(const corpus::SourceDocument& doc, std::span<const int> tags);

struct TagMention {
    int value = 0;
    std::size_t offset = 0; // byte offset into the scanned text
    bool strict = false;    // true: "(source NNNN)" form; false: bare number
};

struct ExtractedTags {
    std::set<int> values;
    std::vector<TagMention> mentions; // in order of appearance
};

/// Two-pass tag extraction. The strict pass matches the parenthesized
/// "(source NNNN)" form, case-insensitive with flexible whitespace. The
/// lenient pass scans sentences that mention the word "source"/"sources"
/// for standalone 4-digit numbers, so bare citation lists are caught while
/// years and quantities in ordinary text are not.
ExtractedTags extract_tags(std::string_view text);

/// Removes every strict-form tag plus one preceding space when present.
/// Applied to a fixpoint, so the result never contains a tag.
std::string strip_tags(std::string_view text);

void to_json(nlohmann::json& j, const TaggedContext& c);
void from_json(const nlohmann::json& j, TaggedContext& c);

std::vector<TaggedContext> load_contexts(const std::string& path);
void save_contexts(const std::vector<TaggedContext>& contexts, const std::string& path);

} // namespace tagctx::tagging
