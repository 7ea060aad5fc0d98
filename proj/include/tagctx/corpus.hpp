#pragma once

#include "tagctx/backend.hpp"
#include "tagctx/errors.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tagctx::corpus {

/// Links a summary line back to the range of original lines it condenses.
struct OriginSpan {
    std::string doc_id;
    int first_line = 0;
    int last_line = 0;

    bool operator==(const OriginSpan&) const = default;
};

struct SourceLine {
    std::string doc_id;
    int line_no = 0; // 1-based, contiguous within a document
    std::string text;
    std::optional<OriginSpan> origin_span;
};

struct SourceDocument {
    std::string doc_id;
    std::string topic;
    std::vector<SourceLine> lines;
};

struct Question {
    std::string question_id;
    std::string topic;
    std::string text;
};

/// Keyed collection of documents, used to resolve attributions.
class DocumentStore {
public:
    void add(SourceDocument doc);
    const SourceDocument* find(const std::string& doc_id) const;
    const std::vector<SourceDocument>& documents() const { return docs_; }

private:
    std::vector<SourceDocument> docs_;
};

class EmptyDocumentError : public Error {
public:
    explicit EmptyDocumentError(const std::string& message) : Error(message) {}
};

/// Raised when a backend call made on behalf of a line group fails; carries
/// the group's span so the caller can tell which part of the input broke.
class SummarizeBackendError : public Error {
public:
    SummarizeBackendError(const std::string& message, OriginSpan span)
        : Error(message), span(std::move(span)) {}
    OriginSpan span;
};

/// Raised when a question list cannot be parsed in full; carries whatever
/// questions were recovered before the shortfall.
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::vector<Question> recovered)
        : Error(message), recovered(std::move(recovered)) {}
    std::vector<Question> recovered;
};

inline constexpr const char* kDefaultSummarizeInstruction =
    "Summarize the following text in one or two sentences.";

/// Splits raw text into non-blank, whitespace-trimmed lines numbered from 1.
SourceDocument ingest_document(std::string_view raw_text, std::string_view topic,
                               std::string_view doc_id = {});

struct SummarizeOptions {
    int window = 1;
    std::string engine;
    std::string instruction = kDefaultSummarizeInstruction;
};

/// Summarizes each group of up to `window` consecutive lines through the
/// backend. Every sentence of a group's reply becomes one line of the result,
/// with an origin_span covering the group.
SourceDocument summarize_document(const SourceDocument& doc, backend::Backend& be,
                                  const SummarizeOptions& opts);

struct GenerateQuestionsOptions {
    int n = 1;
    std::string engine;
};

/// Asks the backend for `n` numbered questions about the document and parses
/// them back out. Accepts "1.", "1)" and "Q1:" list markers.
std::vector<Question> generate_questions(const SourceDocument& context,
                                         backend::Backend& be,
                                         const GenerateQuestionsOptions& opts);

void to_json(nlohmann::json& j, const OriginSpan& s);
void from_json(const nlohmann::json& j, OriginSpan& s);
void to_json(nlohmann::json& j, const SourceLine& l);
void from_json(const nlohmann::json& j, SourceLine& l);
void to_json(nlohmann::json& j, const SourceDocument& d);
void from_json(const nlohmann::json& j, SourceDocument& d);
void to_json(nlohmann::json& j, const Question& q);
void from_json(const nlohmann::json& j, Question& q);

std::vector<SourceDocument> load_documents(const std::string& path);
void save_documents(const std::vector<SourceDocument>& docs, const std::string& path);
std::vector<Question> load_questions(const std::string& path);
void save_questions(const std::vector<Question>& questions, const std::string& path);

} // namespace tagctx::corpus
