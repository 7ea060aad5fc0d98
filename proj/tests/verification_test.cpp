#include "tagctx/corpus.hpp"
#include "tagctx/tagging.hpp"
#include "tagctx/verification.hpp"

#include "support/test_support.hpp"

#include <doctest.h>

#include <random>
#include <set>

using namespace tagctx;
using verification::Classification;

namespace {

tagging::TagRegistry registry_of(std::initializer_list<int> tags) {
    tagging::TagRegistry reg;
    reg.context_id = "ctx";
    int line = 1;
    for (int tag : tags) reg.entries[tag] = {"doc", line++, 0};
    return reg;
}

/// The brute-force oracle: classification derived straight from the cited
/// set and the relevance flag, never from text or extract_tags.
Classification oracle(const std::set<int>& cited, const std::set<int>& registry, bool relevant) {
    bool any_match = false;
    for (int tag : cited) {
        if (registry.count(tag)) any_match = true;
    }
    if (relevant) return any_match ? Classification::Grounded : Classification::Ungrounded;
    return any_match ? Classification::CrossReference : Classification::Declined;
}

} // namespace

TEST_SUITE("verification") {

TEST_CASE("relevant response citing a registry tag is grounded") {
    auto reg = registry_of({3626});
    auto result = verification::classify_response(
        "The riders split the herd, nudging them off the stampede trajectory (source 3626).", reg,
        true);
    CHECK(result.classification == Classification::Grounded);
    CHECK(result.matched_tags == std::set<int>{3626});
    CHECK(result.foreign_tags.empty());
    CHECK(result.relevant);
    CHECK(verification::is_trustworthy(result));
}

TEST_CASE("relevant response with no tags is ungrounded") {
    auto reg = registry_of({4100, 4200});
    auto result = verification::classify_response(
        "Ocean basins open and close over long spans as plates drift apart and collide again.",
        reg, true);
    CHECK(result.classification == Classification::Ungrounded);
    CHECK(result.matched_tags.empty());
    CHECK(!verification::is_trustworthy(result));
}

TEST_CASE("mismatched response listing bare registry numbers is a cross-reference") {
    auto reg = registry_of({2342, 1698, 1331, 4488, 4940, 1235, 5973, 6812, 1014, 8200, 2581, 4274,
                            5926, 7679, 4033, 5736});
    auto result = verification::classify_response(
        "The given context does not discuss this topic. Sources mentioned in the context are "
        "2342, 1698, 1331, 4488, 4940, 1235, 5973, 6812, 1014, 8200, 2581, 4274, 5926, 7679, "
        "4033, and 5736.",
        reg, false);
    CHECK(result.classification == Classification::CrossReference);
    CHECK(result.matched_tags.size() == 16);
    CHECK(result.foreign_tags.empty());
    CHECK(!verification::is_trustworthy(result));
}

TEST_CASE("mismatched response declining to answer is declined") {
    auto reg = registry_of({1000, 2000});
    auto result = verification::classify_response(
        "The provided context does not match the question.", reg, false);
    CHECK(result.classification == Classification::Declined);
    CHECK(result.matched_tags.empty());
    CHECK(result.foreign_tags.empty());
    CHECK(!verification::is_trustworthy(result));
}

TEST_CASE("foreign tags are recorded but never influence classification") {
    auto reg = registry_of({1500});
    auto grounded = verification::classify_response(
        "Claim (source 1500). Another claim (source 8888).", reg, true);
    CHECK(grounded.classification == Classification::Grounded);
    CHECK(grounded.matched_tags == std::set<int>{1500});
    CHECK(grounded.foreign_tags == std::set<int>{8888});

    auto fabricated_only =
        verification::classify_response("Bold claim (source 8888).", reg, true);
    CHECK(fabricated_only.classification == Classification::Ungrounded);
    CHECK(fabricated_only.foreign_tags == std::set<int>{8888});

    auto mismatched_foreign =
        verification::classify_response("Bold claim (source 8888).", reg, false);
    CHECK(mismatched_foreign.classification == Classification::Declined);
}

TEST_CASE("classification agrees with the brute-force oracle on random triples") {
    std::mt19937 rng(99);
    std::uniform_int_distribution<int> tag_dist(1000, 9999);
    std::uniform_int_distribution<int> count_dist(0, 6);
    for (int trial = 0; trial < 300; ++trial) {
        std::set<int> registry_tags;
        const int reg_count = 1 + count_dist(rng);
        while (static_cast<int>(registry_tags.size()) < reg_count) {
            registry_tags.insert(tag_dist(rng));
        }

        // The cited set mixes registry members and outsiders.
        std::set<int> cited;
        const int cite_count = count_dist(rng);
        auto reg_it = registry_tags.begin();
        for (int i = 0; i < cite_count; ++i) {
            if (rng() % 2 == 0 && reg_it != registry_tags.end()) {
                cited.insert(*reg_it++);
            } else {
                cited.insert(tag_dist(rng));
            }
        }
        const bool relevant = rng() % 2 == 0;

        tagging::TagRegistry reg;
        reg.context_id = "ctx";
        int line = 1;
        for (int tag : registry_tags) reg.entries[tag] = {"doc", line++, 0};

        // Render the citation text in mixed strict/lenient forms.
        std::string response = "Findings follow.";
        bool lenient_started = false;
        for (int tag : cited) {
            if (rng() % 2 == 0) {
                response += " Point made (source " + std::to_string(tag) + ").";
                lenient_started = false;
            } else if (!lenient_started) {
                response += " Sources cited: " + std::to_string(tag) + ".";
                lenient_started = true;
            } else {
                response.insert(response.size() - 1, ", " + std::to_string(tag));
            }
        }

        auto result = verification::classify_response(response, reg, relevant);
        CHECK(result.classification == oracle(cited, registry_tags, relevant));

        std::set<int> expect_matched, expect_foreign;
        for (int tag : cited) {
            (registry_tags.count(tag) ? expect_matched : expect_foreign).insert(tag);
        }
        CHECK(result.matched_tags == expect_matched);
        CHECK(result.foreign_tags == expect_foreign);
    }
}

TEST_CASE("cleaned tagged text classifies as ungrounded") {
    std::mt19937 rng(5);
    auto doc = testsupport::random_document(rng, "clean");
    auto ctx = tagging::insert_tags(doc, 31);
    auto result = verification::classify_response(tagging::strip_tags(ctx.tagged_text),
                                                  ctx.registry, true);
    CHECK(result.classification == Classification::Ungrounded);
}

TEST_CASE("attribute resolves a single tag to its source sentence") {
    corpus::DocumentStore store;
    store.add(corpus::ingest_document("First fact. Second fact.\nThird fact.", "t", "doc"));
    tagging::TagRegistry reg;
    reg.context_id = "ctx";
    reg.entries[3626] = {"doc", 1, 1};

    verification::VerificationResult result;
    result.matched_tags = {3626};
    auto attributions = verification::attribute(result, reg, store);
    REQUIRE(attributions.size() == 1);
    CHECK(attributions[0].tag == 3626);
    CHECK(attributions[0].doc_id == "doc");
    CHECK(attributions[0].line_no == 1);
    CHECK(attributions[0].sentence_index == 1);
    CHECK(attributions[0].source_text == "Second fact.");
}

TEST_CASE("attribute with no matches is empty") {
    corpus::DocumentStore store;
    verification::VerificationResult result;
    CHECK(verification::attribute(result, registry_of({1000}), store).empty());
}

TEST_CASE("attribute follows origin spans back to the original text") {
    corpus::DocumentStore store;
    auto original =
        corpus::ingest_document("Line one text.\nLine two text.\nLine three text.\nLine four text.",
                                "t", "orig");
    store.add(original);

    corpus::SourceDocument summary;
    summary.doc_id = "orig-summary";
    summary.topic = "t";
    summary.lines.push_back({"orig-summary", 1, "Condensed A.", corpus::OriginSpan{"orig", 1, 2}});
    summary.lines.push_back({"orig-summary", 2, "Condensed B.", corpus::OriginSpan{"orig", 3, 4}});
    store.add(summary);

    tagging::TagRegistry reg;
    reg.context_id = "ctx";
    reg.entries[1111] = {"orig-summary", 1, 0};
    reg.entries[2222] = {"orig-summary", 2, 0};

    verification::VerificationResult result;
    result.matched_tags = {1111, 2222};
    auto attributions = verification::attribute(result, reg, store);
    REQUIRE(attributions.size() == 2);
    CHECK(attributions[0].source_text == "Line one text. Line two text.");
    CHECK(attributions[1].source_text == "Line three text. Line four text.");
}

TEST_CASE("attributions over a summarized context stay span-consistent") {
    corpus::DocumentStore store;
    std::string raw;
    for (int i = 1; i <= 10; ++i) raw += "Original line " + std::to_string(i) + ".\n";
    auto original = corpus::ingest_document(raw, "t", "orig");
    store.add(original);

    backend::EchoBackend echo;
    corpus::SummarizeOptions sum_opts;
    sum_opts.window = 2;
    auto summary = corpus::summarize_document(original, echo, sum_opts);
    store.add(summary);

    auto ctx = tagging::insert_tags(summary, 404);
    verification::VerificationResult result;
    result.matched_tags = ctx.registry.tag_set();
    REQUIRE(result.matched_tags.size() == summary.lines.size());

    auto attributions = verification::attribute(result, ctx.registry, store);
    REQUIRE(attributions.size() == result.matched_tags.size());
    for (const auto& a : attributions) {
        const auto& line = summary.lines[static_cast<std::size_t>(a.line_no - 1)];
        REQUIRE(line.origin_span.has_value());
        // source_text must contain exactly the original lines of the span.
        std::string expected;
        for (int n = line.origin_span->first_line; n <= line.origin_span->last_line; ++n) {
            if (!expected.empty()) expected += ' ';
            expected += original.lines[static_cast<std::size_t>(n - 1)].text;
        }
        CHECK(a.source_text == expected);
    }
}

TEST_CASE("attribute reports unknown documents") {
    corpus::DocumentStore store; // empty
    tagging::TagRegistry reg;
    reg.context_id = "ctx";
    reg.entries[1234] = {"ghost", 1, 0};
    verification::VerificationResult result;
    result.matched_tags = {1234};
    CHECK_THROWS_AS(verification::attribute(result, reg, store),
                    verification::UnknownDocumentError);
}

TEST_CASE("verification results round-trip through JSON") {
    verification::VerificationResult result;
    result.classification = Classification::CrossReference;
    result.matched_tags = {1, 2};
    result.foreign_tags = {3};
    result.relevant = false;
    nlohmann::json j = result;
    auto back = j.get<verification::VerificationResult>();
    CHECK(back.classification == result.classification);
    CHECK(back.matched_tags == result.matched_tags);
    CHECK(back.foreign_tags == result.foreign_tags);
    CHECK(back.relevant == result.relevant);
}

TEST_CASE("classification strings are total and invertible") {
    for (auto c : {Classification::Grounded, Classification::Ungrounded,
                   Classification::CrossReference, Classification::Declined}) {
        CHECK(verification::classification_from_string(verification::to_string(c)) == c);
    }
    CHECK_THROWS_AS(verification::classification_from_string("nonsense"), Error);
}

} // TEST_SUITE("verification")
