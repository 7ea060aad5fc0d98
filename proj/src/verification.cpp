#include "tagctx/verification.hpp"

namespace tagctx::verification {

const char* to_string(Classification c) {
    switch (c) {
    case Classification::Grounded: return "grounded";
    case Classification::Ungrounded: return "ungrounded";
    case Classification::CrossReference: return "cross-reference";
    case Classification::Declined: return "declined";
    }
    return "unknown";
}

Classification classification_from_string(std::string_view s) {
    if (s == "grounded") return Classification::Grounded;
    if (s == "ungrounded") return Classification::Ungrounded;
    if (s == "cross-reference") return Classification::CrossReference;
    if (s == "declined") return Classification::Declined;
    throw Error("unknown classification: " + std::string(s));
}

VerificationResult classify_response(std::string_view response_text,
                                     const tagging::TagRegistry& registry, bool relevant) {
    VerificationResult result;
    result.relevant = relevant;

    auto extracted = tagging::extract_tags(response_text);
    for (int value : extracted.values) {
        if (registry.contains(value)) {
            result.matched_tags.insert(value);
        } else {
            result.foreign_tags.insert(value);
        }
    }

    const bool cited = !result.matched_tags.empty();
    if (relevant) {
        result.classification = cited ? Classification::Grounded : Classification::Ungrounded;
    } else {
        result.classification = cited ? Classification::CrossReference : Classification::Declined;
    }
    return result;
}

std::vector<Attribution> attribute(const VerificationResult& result,
                                   const tagging::TagRegistry& registry,
                                   const corpus::DocumentStore& store) {
    std::vector<Attribution> attributions;
    for (int tag : result.matched_tags) {
        auto it = registry.entries.find(tag);
        if (it == registry.entries.end()) {
            throw Error("matched tag " + std::to_string(tag) + " is not in the registry");
        }
        const auto& loc = it->second;

        const auto* doc = store.find(loc.doc_id);
        if (doc == nullptr) {
            throw UnknownDocumentError("document '" + loc.doc_id + "' for tag " +
                                       std::to_string(tag) + " is not in the store");
        }
        if (loc.line_no < 1 || loc.line_no > static_cast<int>(doc->lines.size())) {
            throw Error("tag " + std::to_string(tag) + " points at line " +
                        std::to_string(loc.line_no) + " outside document '" + loc.doc_id + "'");
        }
        const auto& line = doc->lines[static_cast<std::size_t>(loc.line_no - 1)];

        Attribution a;
        a.tag = tag;
        a.doc_id = loc.doc_id;
        a.line_no = loc.line_no;
        a.sentence_index = loc.sentence_index;

        if (line.origin_span) {
            const auto& span = *line.origin_span;
            const auto* origin = store.find(span.doc_id);
            if (origin == nullptr) {
                throw UnknownDocumentError("origin document '" + span.doc_id +
                                           "' for tag " + std::to_string(tag) +
                                           " is not in the store");
            }
            std::string text;
            for (const auto& origin_line : origin->lines) {
                if (origin_line.line_no < span.first_line ||
                    origin_line.line_no > span.last_line) {
                    continue;
                }
                if (!text.empty()) text.push_back(' ');
                text += origin_line.text;
            }
            a.source_text = std::move(text);
        } else {
            auto sentences = tagging::segment_sentences(line.text);
            if (loc.sentence_index < 0 ||
                loc.sentence_index >= static_cast<int>(sentences.size())) {
                throw Error("tag " + std::to_string(tag) + " points at sentence " +
                            std::to_string(loc.sentence_index) + " outside line " +
                            std::to_string(loc.line_no) + " of '" + loc.doc_id + "'");
            }
            a.source_text = sentences[static_cast<std::size_t>(loc.sentence_index)];
        }
        attributions.push_back(std::move(a));
    }
    return attributions;
}

bool is_trustworthy(const VerificationResult& result) {
    return result.classification == Classification::Grounded;
}

void to_json(nlohmann::json& j, const VerificationResult& r) {
    j = nlohmann::json{{"classification", to_string(r.classification)},
                       {"matched_tags", r.matched_tags},
                       {"foreign_tags", r.foreign_tags},
                       {"relevant", r.relevant}};
}

void from_json(const nlohmann::json& j, VerificationResult& r) {
    r.classification = classification_from_string(j.at("classification").get<std::string>());
    j.at("matched_tags").get_to(r.matched_tags);
    j.at("foreign_tags").get_to(r.foreign_tags);
    j.at("relevant").get_to(r.relevant);
}

} // namespace tagctx::verification
