#include "tagctx/backend.hpp"
#include "tagctx/corpus.hpp"
#include "tagctx/tagging.hpp"

#include "support/test_support.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace tagctx;

namespace {

/// Replay backend answering a single fixed request.
backend::ReplayBackend single_reply(const backend::CompletionRequest& req,
                                    const std::string& response) {
    backend::FixtureEntry entry;
    entry.engine = req.engine;
    entry.prompt_hash = backend::prompt_hash(req);
    entry.prompt_text = backend::rendered_prompt(req);
    entry.response_text = response;
    return backend::ReplayBackend({entry});
}

} // namespace

TEST_SUITE("corpus") {

TEST_CASE("ingest splits on newlines and drops blanks") {
    auto doc = corpus::ingest_document("A.\n\nB.", "t", "d");
    REQUIRE(doc.lines.size() == 2);
    CHECK(doc.lines[0].line_no == 1);
    CHECK(doc.lines[0].text == "A.");
    CHECK(doc.lines[1].line_no == 2);
    CHECK(doc.lines[1].text == "B.");
    CHECK(doc.topic == "t");
    CHECK(doc.doc_id == "d");
}

TEST_CASE("ingest rejects empty input") {
    CHECK_THROWS_AS(corpus::ingest_document("", "t", "d"), corpus::EmptyDocumentError);
    CHECK_THROWS_AS(corpus::ingest_document("  \n\t\n", "t", "d"), corpus::EmptyDocumentError);
}

TEST_CASE("ingest round-trips a multi-line file") {
    const std::string original = "First line.\nSecond line!\n\nThird line?\n";
    auto doc = corpus::ingest_document(original, "t", "d");
    REQUIRE(doc.lines.size() == 3);
    // Oracle: joining the lines recovers the original with blanks removed.
    std::string rejoined;
    for (const auto& line : doc.lines) {
        rejoined += line.text;
        rejoined += '\n';
    }
    CHECK(rejoined == "First line.\nSecond line!\nThird line?\n");
}

TEST_CASE("ingest trims carriage returns and surrounding whitespace") {
    auto doc = corpus::ingest_document("  padded  \r\nplain\r\n", "t", "d");
    REQUIRE(doc.lines.size() == 2);
    CHECK(doc.lines[0].text == "padded");
    CHECK(doc.lines[1].text == "plain");
}

TEST_CASE("line numbers are contiguous for random inputs") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        auto doc = testsupport::random_document(rng, "doc" + std::to_string(trial));
        REQUIRE(!doc.lines.empty());
        for (std::size_t i = 0; i < doc.lines.size(); ++i) {
            CHECK(doc.lines[i].line_no == static_cast<int>(i) + 1);
            CHECK(!doc.lines[i].text.empty());
        }
    }
}

TEST_CASE("summarize window=2 records spans (1,2) and (3,4)") {
    auto doc = corpus::ingest_document("L1.\nL2.\nL3.\nL4.", "t", "orig");
    backend::EchoBackend echo;
    corpus::SummarizeOptions opts;
    opts.window = 2;
    auto summary = corpus::summarize_document(doc, echo, opts);
    REQUIRE(summary.lines.size() == 4); // echo returns both lines of each group
    REQUIRE(summary.lines[0].origin_span.has_value());
    CHECK(summary.lines[0].origin_span->first_line == 1);
    CHECK(summary.lines[0].origin_span->last_line == 2);
    CHECK(summary.lines[1].origin_span->first_line == 1);
    CHECK(summary.lines[3].origin_span->first_line == 3);
    CHECK(summary.lines[3].origin_span->last_line == 4);
    CHECK(summary.doc_id == "orig-summary");
}

TEST_CASE("summarize window=1 with echo reproduces the document") {
    auto doc = corpus::ingest_document("One sentence per line.\nAnother here.", "t", "d");
    backend::EchoBackend echo;
    corpus::SummarizeOptions opts;
    opts.window = 1;
    auto summary = corpus::summarize_document(doc, echo, opts);
    REQUIRE(summary.lines.size() == doc.lines.size());
    for (std::size_t i = 0; i < doc.lines.size(); ++i) {
        CHECK(summary.lines[i].text == doc.lines[i].text);
        REQUIRE(summary.lines[i].origin_span.has_value());
        CHECK(summary.lines[i].origin_span->first_line == doc.lines[i].line_no);
        CHECK(summary.lines[i].origin_span->last_line == doc.lines[i].line_no);
    }
}

TEST_CASE("summarize 10 lines window=3 yields ceiling(10/3)=4 groups") {
    std::string raw;
    for (int i = 1; i <= 10; ++i) raw += "Line number " + std::to_string(i) + ".\n";
    auto doc = corpus::ingest_document(raw, "t", "ten");

    corpus::SummarizeOptions opts;
    opts.window = 3;
    opts.engine = "fix";
    // Replay fixture: every group reply is a single sentence, so groups map
    // 1:1 onto summary lines.
    std::vector<backend::FixtureEntry> entries;
    for (std::size_t begin = 0; begin < doc.lines.size(); begin += 3) {
        std::size_t end = std::min(begin + 3, doc.lines.size());
        std::string group_text;
        for (std::size_t i = begin; i < end; ++i) {
            if (i > begin) group_text.push_back('\n');
            group_text += doc.lines[i].text;
        }
        backend::CompletionRequest req{opts.engine, opts.instruction, group_text};
        entries.push_back({req.engine, backend::prompt_hash(req), backend::rendered_prompt(req),
                           "Summary of group " + std::to_string(begin / 3 + 1) + "."});
    }
    backend::ReplayBackend replay(entries);

    auto summary = corpus::summarize_document(doc, replay, opts);
    REQUIRE(summary.lines.size() == 4);
    const std::pair<int, int> expected[] = {{1, 3}, {4, 6}, {7, 9}, {10, 10}};
    for (int i = 0; i < 4; ++i) {
        REQUIRE(summary.lines[i].origin_span.has_value());
        CHECK(summary.lines[i].origin_span->first_line == expected[i].first);
        CHECK(summary.lines[i].origin_span->last_line == expected[i].second);
    }
}

TEST_CASE("summarize propagates backend failure with the failing span") {
    auto doc = corpus::ingest_document("A.\nB.", "t", "d");
    backend::ReplayBackend empty_replay(std::vector<backend::FixtureEntry>{});
    corpus::SummarizeOptions opts;
    try {
        corpus::summarize_document(doc, empty_replay, opts);
        FAIL("expected SummarizeBackendError");
    } catch (const corpus::SummarizeBackendError& e) {
        CHECK(e.span.doc_id == "d");
        CHECK(e.span.first_line == 1);
        CHECK(e.span.last_line == 1);
    }
}

TEST_CASE("summary spans cover the input exactly, no gaps or overlaps") {
    std::mt19937 rng(11);
    backend::EchoBackend echo;
    for (int trial = 0; trial < 40; ++trial) {
        auto doc = testsupport::random_document(rng, "cov" + std::to_string(trial));
        corpus::SummarizeOptions opts;
        opts.window = 1 + static_cast<int>(rng() % 4);
        auto summary = corpus::summarize_document(doc, echo, opts);
        int expected_next = 1;
        for (std::size_t i = 0; i < summary.lines.size(); ++i) {
            REQUIRE(summary.lines[i].origin_span.has_value());
            const auto& span = *summary.lines[i].origin_span;
            if (span.first_line != expected_next) {
                // Same group as the previous summary line.
                REQUIRE(i > 0);
                CHECK(span.first_line == summary.lines[i - 1].origin_span->first_line);
                CHECK(span.last_line == summary.lines[i - 1].origin_span->last_line);
                continue;
            }
            CHECK(span.last_line >= span.first_line);
            expected_next = span.last_line + 1;
        }
        CHECK(expected_next == static_cast<int>(doc.lines.size()) + 1);
    }
}

TEST_CASE("gen-questions parses a numbered list") {
    auto doc = corpus::ingest_document("France is a country in Europe.", "France", "france");
    corpus::GenerateQuestionsOptions opts;
    opts.n = 2;
    opts.engine = "fix";
    backend::CompletionRequest req{
        "fix",
        "Write 2 questions that the following text can answer. Respond with a numbered list, "
        "one question per line.",
        "France is a country in Europe."};
    auto replay = single_reply(req, "1. What is the capital of France?\n2. Where is France?");
    auto questions = corpus::generate_questions(doc, replay, opts);
    REQUIRE(questions.size() == 2);
    CHECK(questions[0].text == "What is the capital of France?");
    CHECK(questions[0].topic == "France");
    CHECK(questions[0].question_id == "France-q1");
    CHECK(questions[1].text == "Where is France?");
    CHECK(questions[1].question_id == "France-q2");
}

TEST_CASE("gen-questions accepts alternative list markers") {
    auto doc = corpus::ingest_document("Stub text.", "T", "d");
    corpus::GenerateQuestionsOptions opts;
    opts.n = 3;
    opts.engine = "fix";
    backend::CompletionRequest req{
        "fix",
        "Write 3 questions that the following text can answer. Respond with a numbered list, "
        "one question per line.",
        "Stub text."};
    auto replay = single_reply(req, "1) First?\nQ2: Second?\n3. Third?");
    auto questions = corpus::generate_questions(doc, replay, opts);
    REQUIRE(questions.size() == 3);
    CHECK(questions[0].text == "First?");
    CHECK(questions[1].text == "Second?");
    CHECK(questions[2].text == "Third?");
}

TEST_CASE("gen-questions n=1 accepts a single unnumbered line") {
    auto doc = corpus::ingest_document("Stub text.", "T", "d");
    corpus::GenerateQuestionsOptions opts;
    opts.n = 1;
    opts.engine = "fix";
    backend::CompletionRequest req{
        "fix",
        "Write 1 questions that the following text can answer. Respond with a numbered list, "
        "one question per line.",
        "Stub text."};
    auto replay = single_reply(req, "What does the stub describe?");
    auto questions = corpus::generate_questions(doc, replay, opts);
    REQUIRE(questions.size() == 1);
    CHECK(questions[0].text == "What does the stub describe?");
}

TEST_CASE("gen-questions short reply raises ParseError carrying recovered questions") {
    auto doc = corpus::ingest_document("Stub text.", "T", "d");
    corpus::GenerateQuestionsOptions opts;
    opts.n = 5;
    opts.engine = "fix";
    backend::CompletionRequest req{
        "fix",
        "Write 5 questions that the following text can answer. Respond with a numbered list, "
        "one question per line.",
        "Stub text."};
    auto replay = single_reply(req, "1. A?\n2. B?\n3. C?");
    try {
        corpus::generate_questions(doc, replay, opts);
        FAIL("expected ParseError");
    } catch (const corpus::ParseError& e) {
        REQUIRE(e.recovered.size() == 3);
        CHECK(e.recovered[0].text == "A?");
        CHECK(e.recovered[2].text == "C?");
    }
}

TEST_CASE("gen-questions is deterministic with a replay backend") {
    auto doc = corpus::ingest_document("Deterministic text.", "T", "d");
    corpus::GenerateQuestionsOptions opts;
    opts.n = 2;
    opts.engine = "fix";
    backend::CompletionRequest req{
        "fix",
        "Write 2 questions that the following text can answer. Respond with a numbered list, "
        "one question per line.",
        "Deterministic text."};
    auto replay = single_reply(req, "1. One?\n2. Two?");
    auto first = corpus::generate_questions(doc, replay, opts);
    auto second = corpus::generate_questions(doc, replay, opts);
    REQUIRE(first.size() == second.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        CHECK(first[i].question_id == second[i].question_id);
        CHECK(first[i].text == second[i].text);
    }
}

TEST_CASE("documents and questions round-trip through JSON files") {
    testsupport::TempDir dir("corpus-io");
    auto doc = corpus::ingest_document("A.\nB then C.\n", "Topic", "doc1");
    doc.lines[1].origin_span = corpus::OriginSpan{"orig", 3, 5};

    corpus::save_documents({doc}, dir.str("docs.json"));
    auto docs = corpus::load_documents(dir.str("docs.json"));
    REQUIRE(docs.size() == 1);
    CHECK(docs[0].doc_id == "doc1");
    CHECK(docs[0].topic == "Topic");
    REQUIRE(docs[0].lines.size() == 2);
    CHECK(docs[0].lines[0].text == "A.");
    CHECK(!docs[0].lines[0].origin_span.has_value());
    REQUIRE(docs[0].lines[1].origin_span.has_value());
    CHECK(docs[0].lines[1].origin_span->doc_id == "orig");
    CHECK(docs[0].lines[1].origin_span->first_line == 3);
    CHECK(docs[0].lines[1].origin_span->last_line == 5);

    std::vector<corpus::Question> questions{{"q1", "Topic", "What is A?"}};
    corpus::save_questions(questions, dir.str("questions.json"));
    auto loaded = corpus::load_questions(dir.str("questions.json"));
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].question_id == "q1");
    CHECK(loaded[0].topic == "Topic");
    CHECK(loaded[0].text == "What is A?");
}

TEST_CASE("document store finds documents by id") {
    corpus::DocumentStore store;
    store.add(corpus::ingest_document("A.", "t", "one"));
    store.add(corpus::ingest_document("B.", "t", "two"));
    REQUIRE(store.find("two") != nullptr);
    CHECK(store.find("two")->lines[0].text == "B.");
    CHECK(store.find("missing") == nullptr);
    CHECK(store.documents().size() == 2);
}

} // TEST_SUITE("corpus")
