#include "tagctx/reporting.hpp"
#include "tagctx/tagging.hpp"

#include "support/test_support.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <set>
#include <string>

using namespace tagctx;
namespace fs = std::filesystem;

namespace {

#ifndef TAGCTX_CLI_BIN
#error "TAGCTX_CLI_BIN must point at the built CLI"
#endif

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

/// Runs the CLI with `args` inside `cwd`, capturing exit code and streams.
CliResult run_cli(const fs::path& cwd, const std::string& args,
                  const std::string& stdin_text = {}) {
    const fs::path out_path = cwd / ".cli-stdout";
    const fs::path err_path = cwd / ".cli-stderr";
    std::string command = "cd '" + cwd.string() + "' && '" + TAGCTX_CLI_BIN + "' " + args;
    if (!stdin_text.empty()) {
        const fs::path in_path = cwd / ".cli-stdin";
        testsupport::write_file(in_path.string(), stdin_text);
        command += " < '" + in_path.string() + "'";
    }
    command += " > '" + out_path.string() + "' 2> '" + err_path.string() + "'";
    int raw = std::system(command.c_str());
    CliResult result;
    result.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    result.out = fs::exists(out_path) ? testsupport::read_file(out_path.string()) : "";
    result.err = fs::exists(err_path) ? testsupport::read_file(err_path.string()) : "";
    return result;
}

/// Lays out a two-topic corpus with embedded URLs routed at the stub.
void write_corpus(const fs::path& dir) {
    testsupport::write_file((dir / "alpine.txt").string(),
                            "Terraces climb the north face in even steps.\n"
                            "Survey notes live at https://alpine.example/status/404 today.\n"
                            "Snowmelt feeds the lower basin all summer.\n");
    testsupport::write_file((dir / "tides.txt").string(),
                            "Spring tides run highest after the new moon.\n"
                            "Gauge readings stream from https://tides.example/status/200 hourly.\n");
    testsupport::write_file((dir / "manifest.json").string(),
                            R"({"documents": [)"
                            R"({"path": "alpine.txt", "topic": "alpine"},)"
                            R"({"path": "tides.txt", "topic": "tides"})"
                            R"(]})");
    nlohmann::json questions = nlohmann::json::array();
    questions.push_back({{"question_id", "alpine-q1"},
                         {"topic", "alpine"},
                         {"text", "How do the terraces climb the north face?"}});
    questions.push_back({{"question_id", "tides-q1"},
                         {"topic", "tides"},
                         {"text", "When do spring tides run highest?"}});
    testsupport::write_file((dir / "questions.json").string(), questions.dump(2) + "\n");
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("clean strips tags from a text stream") {
    testsupport::TempDir dir("cliclean");
    auto res = run_cli(dir.path(), "clean",
                       "The herd turned west (source 3626). Riders followed (source 4550).\n");
    CHECK(res.exit_code == 0);
    CHECK(res.out == "The herd turned west. Riders followed.\n");
}

TEST_CASE("usage errors exit with 2") {
    testsupport::TempDir dir("cliusage");
    CHECK(run_cli(dir.path(), "no-such-command").exit_code == 2);
    CHECK(run_cli(dir.path(), "verify").exit_code == 2);             // missing --plan-id
    CHECK(run_cli(dir.path(), "run --store s").exit_code == 2);      // missing --plan
    CHECK(run_cli(dir.path(), "tag --in x.json --seed NaN").exit_code == 2);
    CHECK(run_cli(dir.path(), "--help").exit_code == 0);
}

TEST_CASE("operational errors exit with 1") {
    testsupport::TempDir dir("clioper");
    auto res = run_cli(dir.path(), "ingest --manifest missing.json");
    CHECK(res.exit_code == 1);
    CHECK(!res.err.empty());
    CHECK(run_cli(dir.path(), "tag --in nowhere.json").exit_code == 1);
}

TEST_CASE("tagging from the command line is deterministic per seed") {
    testsupport::TempDir dir("cliseed");
    write_corpus(dir.path());
    REQUIRE(run_cli(dir.path(), "ingest --manifest manifest.json --out documents.json")
                .exit_code == 0);
    REQUIRE(run_cli(dir.path(), "tag --in documents.json --seed 77 --out a.json").exit_code == 0);
    REQUIRE(run_cli(dir.path(), "tag --in documents.json --seed 77 --out b.json").exit_code == 0);
    REQUIRE(run_cli(dir.path(), "tag --in documents.json --seed 78 --out c.json").exit_code == 0);
    CHECK(testsupport::read_file((dir.path() / "a.json").string()) ==
          testsupport::read_file((dir.path() / "b.json").string()));
    CHECK(testsupport::read_file((dir.path() / "a.json").string()) !=
          testsupport::read_file((dir.path() / "c.json").string()));

    // Tags never collide across the contexts of one tagging run.
    auto contexts = tagging::load_contexts((dir.path() / "a.json").string());
    REQUIRE(contexts.size() == 2);
    std::set<int> seen;
    for (const auto& ctx : contexts) {
        for (int tag : ctx.registry.tag_set()) CHECK(seen.insert(tag).second);
    }
}

TEST_CASE("the offline pipeline runs end to end with exact reports") {
    testsupport::StubServer stub;
    testsupport::TempDir dir("clipipe");
    write_corpus(dir.path());

    REQUIRE(run_cli(dir.path(), "ingest --manifest manifest.json --out documents.json")
                .exit_code == 0);
    auto docs = corpus::load_documents((dir.path() / "documents.json").string());
    REQUIRE(docs.size() == 2);
    CHECK(docs[0].doc_id == "alpine");
    CHECK(docs[1].doc_id == "tides");

    REQUIRE(run_cli(dir.path(), "tag --in documents.json --seed 4242 --out contexts.json")
                .exit_code == 0);
    REQUIRE(run_cli(dir.path(),
                    "plan --plan-id demo --questions questions.json --contexts contexts.json "
                    "--engines ember,quartz --out plan.json")
                .exit_code == 0);

    auto run1 = run_cli(dir.path(),
                        "run --plan plan.json --questions questions.json "
                        "--contexts contexts.json --store store --backend echo --json");
    REQUIRE(run1.exit_code == 0);
    auto summary1 = nlohmann::json::parse(run1.out);
    CHECK(summary1.at("total_cells") == 12); // 2 engines x 2 questions x (1 + 2 contexts)
    CHECK(summary1.at("newly_complete") == 12);
    CHECK(summary1.at("failed") == 0);
    CHECK(summary1.at("by_classification").at("grounded") == 4);
    CHECK(summary1.at("by_classification").at("cross-reference") == 4);

    // The second run touches nothing.
    auto run2 = run_cli(dir.path(),
                        "run --plan plan.json --questions questions.json "
                        "--contexts contexts.json --store store --backend echo --json");
    REQUIRE(run2.exit_code == 0);
    auto summary2 = nlohmann::json::parse(run2.out);
    CHECK(summary2.at("already_complete") == 12);
    CHECK(summary2.at("newly_complete") == 0);

    auto verify = run_cli(dir.path(), "verify --store store --plan-id demo --json");
    REQUIRE(verify.exit_code == 0);
    auto rows = nlohmann::json::parse(verify.out);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].at("engine") == "ember");
    CHECK(rows[0].at("present") == 2);
    CHECK(rows[0].at("mismatch") == 2);
    CHECK(rows[2].at("engine") == "TOTAL");
    CHECK(rows[2].at("present") == 4);

    auto audit = run_cli(dir.path(),
                         "audit-urls --store store --plan-id demo --out urls.jsonl "
                         "--offline " + stub.base_url() + " --json");
    REQUIRE(audit.exit_code == 0);
    CHECK(stub.hits("/status/200") == 1); // distinct URLs fetched once
    CHECK(stub.hits("/status/404") == 1);

    auto report = run_cli(dir.path(),
                          "report --store store --plan-id demo --urls urls.jsonl "
                          "--out reports --formats csv,svg,json --json");
    REQUIRE(report.exit_code == 0);
    auto report_json = nlohmann::json::parse(report.out);
    CHECK(report_json.at("plan_id") == "demo");
    CHECK(report_json.at("reduction").at("note") == "no baseline hallucinations");

    CHECK(testsupport::read_file((dir.path() / "reports" / "demo.tags.csv").string()) ==
          "engine,present,missing,mismatch,declined\n"
          "ember,2,0,2,0\n"
          "quartz,2,0,2,0\n"
          "TOTAL,4,0,4,0\n");
    // Every with-context response echoes both contexts' URLs; the good and
    // bad one each count once per engine. No-context responses cite nothing.
    CHECK(testsupport::read_file((dir.path() / "reports" / "demo.urls.csv").string()) ==
          "engine,condition,good,bad\n"
          "ember,with-context,1,1\n"
          "quartz,with-context,1,1\n");
    auto svg = testsupport::read_file((dir.path() / "reports" / "demo.urls.svg").string());
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(fs::exists(dir.path() / "reports" / "demo.report.json"));

    // svg output without audit results is an operational error.
    CHECK(run_cli(dir.path(), "report --store store --plan-id demo --formats svg").exit_code ==
          1);

    // Repeating audit and report yields the same tables.
    auto report2 = run_cli(dir.path(),
                           "report --store store --plan-id demo --urls urls.jsonl "
                           "--out reports2 --formats csv --json");
    REQUIRE(report2.exit_code == 0);
    CHECK(testsupport::read_file((dir.path() / "reports" / "demo.tags.csv").string()) ==
          testsupport::read_file((dir.path() / "reports2" / "demo.tags.csv").string()));
}

TEST_CASE("summarize and gen-questions run offline with the echo backend") {
    testsupport::TempDir dir("cliecho");
    write_corpus(dir.path());
    REQUIRE(run_cli(dir.path(), "ingest --manifest manifest.json --out documents.json")
                .exit_code == 0);

    auto sum = run_cli(dir.path(),
                       "summarize --in documents.json --out summaries.json "
                       "--backend echo --window 2");
    REQUIRE(sum.exit_code == 0);
    auto summaries = corpus::load_documents((dir.path() / "summaries.json").string());
    REQUIRE(summaries.size() == 2);
    for (const auto& doc : summaries) {
        REQUIRE(!doc.lines.empty());
        CHECK(doc.lines[0].origin_span.has_value());
    }

    // Echo replies are only list-shaped for one-line documents, so question
    // generation gets its own miniature corpus.
    testsupport::write_file((dir.path() / "moss.txt").string(),
                            "Moss holds the clearing's moisture through the dry weeks.\n");
    testsupport::write_file((dir.path() / "manifest-moss.json").string(),
                            R"({"documents": [{"path": "moss.txt", "topic": "moss"}]})");
    REQUIRE(run_cli(dir.path(), "ingest --manifest manifest-moss.json --out moss-docs.json")
                .exit_code == 0);
    auto genq = run_cli(dir.path(),
                        "gen-questions --in moss-docs.json --out generated.json "
                        "--backend echo -n 1");
    REQUIRE(genq.exit_code == 0);
    auto questions = corpus::load_questions((dir.path() / "generated.json").string());
    REQUIRE(questions.size() == 1);
    CHECK(questions[0].question_id == "moss-q1");
    CHECK(questions[0].topic == "moss");

    // A reply that cannot cover the requested count is an operational error.
    CHECK(run_cli(dir.path(), "gen-questions --in moss-docs.json --out bad.json "
                              "--backend echo -n 3")
              .exit_code == 1);
}

TEST_CASE("config files supply defaults without being required") {
    testsupport::TempDir dir("clicfg");
    write_corpus(dir.path());
    testsupport::write_file((dir.path() / "tagctx.json").string(),
                            R"({"seed": 4242, "store_root": "store"})");
    REQUIRE(run_cli(dir.path(), "--config tagctx.json ingest --manifest manifest.json "
                                "--out documents.json")
                .exit_code == 0);
    // Config seed and explicit --seed 4242 agree byte for byte.
    REQUIRE(run_cli(dir.path(), "--config tagctx.json tag --in documents.json --out cfg.json")
                .exit_code == 0);
    REQUIRE(run_cli(dir.path(), "tag --in documents.json --seed 4242 --out flag.json")
                .exit_code == 0);
    CHECK(testsupport::read_file((dir.path() / "cfg.json").string()) ==
          testsupport::read_file((dir.path() / "flag.json").string()));
}

} // TEST_SUITE("cli")
