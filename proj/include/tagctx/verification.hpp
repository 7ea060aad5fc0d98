#pragma once

#include "tagctx/corpus.hpp"
#include "tagctx/tagging.hpp"

#include <json.hpp>

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace tagctx::verification {

/// Where a response stands against its tag registry:
///  - Grounded:       relevant context, at least one registry tag cited
///  - Ungrounded:     relevant context, no registry tags cited
///  - CrossReference: mismatched context, yet registry tags cited
///  - Declined:       mismatched context, no registry tags cited (expected)
enum class Classification { Grounded, Ungrounded, CrossReference, Declined };

const char* to_string(Classification c);
Classification classification_from_string(std::string_view s);

struct VerificationResult {
    Classification classification = Classification::Declined;
    std::set<int> matched_tags;
    std::set<int> foreign_tags; // cited numbers absent from the registry
    bool relevant = false;
};

class UnknownDocumentError : public Error {
public:
    explicit UnknownDocumentError(const std::string& message) : Error(message) {}
};

/// Extracts tag citations from the response, splits them into registry
/// matches and foreign numbers, and classifies. Foreign tags never influence
/// the classification; they are fabrication evidence, not grounding.
VerificationResult classify_response(std::string_view response_text,
                                     const tagging::TagRegistry& registry, bool relevant);

struct Attribution {
    int tag = 0;
    std::string doc_id;
    int line_no = 0;
    int sentence_index = 0;
    std::string source_text;
};

/// Resolves each matched tag to its source sentence. When the tagged line is
/// a summary line, source_text carries the original text its origin_span
/// covers instead of the summary sentence.
std::vector<Attribution> attribute(const VerificationResult& result,
                                   const tagging::TagRegistry& registry,
                                   const corpus::DocumentStore& store);

/// Only a Grounded response is automatically verifiable. Declined is the
/// expected mismatched-context outcome but proves nothing about the answer.
bool is_trustworthy(const VerificationResult& result);

void to_json(nlohmann::json& j, const VerificationResult& r);
void from_json(const nlohmann::json& j, VerificationResult& r);

} // namespace tagctx::verification
