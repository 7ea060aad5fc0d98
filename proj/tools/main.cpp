#include "tagctx/backend.hpp"
#include "tagctx/corpus.hpp"
#include "tagctx/errors.hpp"
#include "tagctx/experiment.hpp"
#include "tagctx/prompting.hpp"
#include "tagctx/reporting.hpp"
#include "tagctx/tagging.hpp"
#include "tagctx/url_audit.hpp"
#include "tagctx/verification.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tagctx;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOperational = 1;
constexpr int kExitUsage = 2;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// ---------------------------------------------------------------------------
// Config

struct ToolConfig {
    std::string manifest;
    std::string store_root = "store";
    unsigned int seed = 1234;
    std::string instruction_suffix;    // empty: library default
    std::string summarize_instruction; // empty: library default
    int url_timeout_ms = 2000;
    int url_parallelism = 8;
    std::vector<backend::BackendConfig> backends;
};

ToolConfig load_config(const std::string& path) {
    ToolConfig cfg;
    if (path.empty()) return cfg;
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw Error("invalid config " + path + ": " + e.what());
    }
    cfg.manifest = j.value("manifest", "");
    cfg.store_root = j.value("store_root", cfg.store_root);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.instruction_suffix = j.value("instruction_suffix", "");
    cfg.summarize_instruction = j.value("summarize_instruction", "");
    if (j.contains("url_audit")) {
        const json& u = j.at("url_audit");
        cfg.url_timeout_ms = u.value("timeout_ms", cfg.url_timeout_ms);
        cfg.url_parallelism = u.value("parallelism", cfg.url_parallelism);
    }
    if (j.contains("backends")) {
        cfg.backends = j.at("backends").get<std::vector<backend::BackendConfig>>();
    }
    if (!cfg.manifest.empty()) {
        // Relative manifest paths resolve against the config file's directory.
        fs::path m = fs::path(cfg.manifest);
        if (m.is_relative()) m = fs::path(path).parent_path() / m;
        cfg.manifest = m.string();
        if (!fs::exists(cfg.manifest)) throw Error("config manifest not found: " + cfg.manifest);
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Backend selection

struct BackendChoice {
    enum class Kind { Live, Replay, Echo } kind = Kind::Echo;
    std::string replay_path;
};

BackendChoice parse_backend_flag(const std::string& value) {
    BackendChoice choice;
    if (value == "live") {
        choice.kind = BackendChoice::Kind::Live;
    } else if (value == "echo") {
        choice.kind = BackendChoice::Kind::Echo;
    } else if (value.rfind("replay:", 0) == 0) {
        choice.kind = BackendChoice::Kind::Replay;
        choice.replay_path = value.substr(7);
        if (choice.replay_path.empty()) {
            throw CLI::ValidationError("--backend", "replay needs a fixture path (replay:FILE)");
        }
    } else {
        throw CLI::ValidationError("--backend", "expected live, echo, or replay:FILE");
    }
    return choice;
}

backend::BackendSet make_backend_set(const BackendChoice& choice,
                                     const std::vector<std::string>& engine_labels,
                                     const ToolConfig& cfg) {
    backend::BackendSet set;
    switch (choice.kind) {
    case BackendChoice::Kind::Echo:
        set.set_fallback(std::make_shared<backend::EchoBackend>());
        break;
    case BackendChoice::Kind::Replay:
        set.set_fallback(std::make_shared<backend::ReplayBackend>(
            backend::ReplayBackend::from_file(choice.replay_path)));
        break;
    case BackendChoice::Kind::Live: {
        std::map<std::string, backend::BackendConfig> by_label;
        for (const auto& bc : cfg.backends) by_label[bc.engine] = bc;
        for (const auto& label : engine_labels) {
            auto it = by_label.find(label);
            if (it == by_label.end()) {
                throw Error("no backend config for engine '" + label + "'");
            }
            set.add(label, std::make_shared<backend::HttpBackend>(it->second));
        }
        break;
    }
    }
    return set;
}

// ---------------------------------------------------------------------------
// Shared helpers

std::vector<backend::BackendConfig> engine_configs(const std::vector<std::string>& labels) {
    std::vector<backend::BackendConfig> out;
    out.reserve(labels.size());
    for (const auto& label : labels) {
        backend::BackendConfig bc;
        bc.engine = label;
        out.push_back(std::move(bc));
    }
    return out;
}

prompting::PromptOptions prompt_options(const ToolConfig& cfg) {
    prompting::PromptOptions opts;
    if (!cfg.instruction_suffix.empty()) opts.instruction_suffix = cfg.instruction_suffix;
    return opts;
}

experiment::ExperimentPlan resolve_plan(const experiment::PlanFile& pf,
                                        const std::string& questions_path,
                                        const std::string& contexts_path, const ToolConfig& cfg) {
    std::map<std::string, corpus::Question> questions;
    for (auto& q : corpus::load_questions(questions_path)) questions[q.question_id] = std::move(q);
    std::map<std::string, tagging::TaggedContext> contexts;
    if (!contexts_path.empty()) {
        for (auto& c : tagging::load_contexts(contexts_path)) contexts[c.context_id] = std::move(c);
    }

    std::vector<corpus::Question> plan_questions;
    for (const auto& id : pf.question_ids) {
        auto it = questions.find(id);
        if (it == questions.end()) throw Error("plan question '" + id + "' not in " + questions_path);
        plan_questions.push_back(it->second);
    }
    std::vector<tagging::TaggedContext> plan_contexts;
    for (const auto& id : pf.context_ids) {
        auto it = contexts.find(id);
        if (it == contexts.end()) {
            throw Error("plan context '" + id + "' not in " +
                        (contexts_path.empty() ? std::string("(no contexts file)") : contexts_path));
        }
        plan_contexts.push_back(it->second);
    }
    return experiment::build_plan(pf.plan_id, engine_configs(pf.engine_labels),
                                  std::move(plan_questions), std::move(plan_contexts),
                                  prompt_options(cfg));
}

void print_tag_rows(const std::vector<reporting::TagStatsRow>& rows) {
    std::printf("%-24s %8s %8s %8s %8s\n", "engine", "present", "missing", "mismatch", "declined");
    for (const auto& r : rows) {
        std::printf("%-24s %8ld %8ld %8ld %8ld\n", r.engine.c_str(), r.present, r.missing,
                    r.mismatch, r.declined);
    }
}

void print_url_rows(const std::vector<reporting::UrlStatsRow>& rows) {
    std::printf("%-24s %-14s %8s %8s\n", "engine", "condition", "good", "bad");
    for (const auto& r : rows) {
        std::printf("%-24s %-14s %8ld %8ld\n", r.engine.c_str(), r.condition.c_str(), r.good,
                    r.bad);
    }
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_ingest(const std::string& manifest_path, const std::string& out_path) {
    json manifest;
    try {
        manifest = json::parse(read_file(manifest_path));
    } catch (const json::exception& e) {
        throw Error("invalid manifest " + manifest_path + ": " + e.what());
    }
    const fs::path base = fs::path(manifest_path).parent_path();
    std::vector<corpus::SourceDocument> docs;
    for (const json& entry : manifest.at("documents")) {
        fs::path p = fs::path(entry.at("path").get<std::string>());
        if (p.is_relative()) p = base / p;
        const std::string topic = entry.at("topic").get<std::string>();
        const std::string doc_id = entry.value("doc_id", p.stem().string());
        docs.push_back(corpus::ingest_document(read_file(p.string()), topic, doc_id));
    }
    corpus::save_documents(docs, out_path);
    std::printf("ingested %zu document(s) -> %s\n", docs.size(), out_path.c_str());
    return kExitOk;
}

int cmd_summarize(const std::string& in_path, const std::string& out_path,
                  const BackendChoice& choice, const std::string& engine, int window,
                  const ToolConfig& cfg) {
    backend::BackendSet set = make_backend_set(choice, {engine}, cfg);
    corpus::SummarizeOptions opts;
    opts.window = window;
    opts.engine = engine;
    if (!cfg.summarize_instruction.empty()) opts.instruction = cfg.summarize_instruction;
    std::vector<corpus::SourceDocument> out;
    for (const auto& doc : corpus::load_documents(in_path)) {
        out.push_back(corpus::summarize_document(doc, set.for_engine(engine), opts));
    }
    corpus::save_documents(out, out_path);
    std::printf("summarized %zu document(s) -> %s\n", out.size(), out_path.c_str());
    return kExitOk;
}

int cmd_gen_questions(const std::string& in_path, const std::string& out_path,
                      const BackendChoice& choice, const std::string& engine, int per_doc,
                      const ToolConfig& cfg) {
    backend::BackendSet set = make_backend_set(choice, {engine}, cfg);
    corpus::GenerateQuestionsOptions opts;
    opts.n = per_doc;
    opts.engine = engine;
    std::vector<corpus::Question> questions;
    for (const auto& doc : corpus::load_documents(in_path)) {
        auto qs = corpus::generate_questions(doc, set.for_engine(engine), opts);
        questions.insert(questions.end(), qs.begin(), qs.end());
    }
    corpus::save_questions(questions, out_path);
    std::printf("generated %zu question(s) -> %s\n", questions.size(), out_path.c_str());
    return kExitOk;
}

int cmd_tag(const std::string& in_path, const std::string& out_path, unsigned int seed) {
    const auto docs = corpus::load_documents(in_path);
    // One global draw keeps tags unique across every context, not just
    // within one document.
    std::size_t total_sentences = 0;
    std::vector<std::size_t> per_doc;
    per_doc.reserve(docs.size());
    for (const auto& doc : docs) {
        std::size_t n = 0;
        for (const auto& line : doc.lines) n += tagging::segment_sentences(line.text).size();
        per_doc.push_back(n);
        total_sentences += n;
    }
    const std::vector<int> pool = tagging::generate_tags(total_sentences, seed);
    std::vector<tagging::TaggedContext> contexts;
    contexts.reserve(docs.size());
    std::size_t offset = 0;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        std::span<const int> slice(pool.data() + offset, per_doc[i]);
        contexts.push_back(tagging::insert_tags(docs[i], slice));
        offset += per_doc[i];
    }
    tagging::save_contexts(contexts, out_path);
    std::printf("tagged %zu context(s), %zu tag(s) -> %s\n", contexts.size(), total_sentences,
                out_path.c_str());
    return kExitOk;
}

int cmd_plan(const std::string& plan_id, const std::string& questions_path,
             const std::string& contexts_path, std::vector<std::string> engines,
             const std::string& out_path, const ToolConfig& cfg) {
    if (engines.empty()) {
        for (const auto& bc : cfg.backends) engines.push_back(bc.engine);
    }
    if (engines.empty()) {
        throw CLI::ValidationError("--engines", "no engines given and none configured");
    }
    experiment::PlanFile pf;
    pf.plan_id = plan_id;
    pf.engine_labels = std::move(engines);
    for (const auto& q : corpus::load_questions(questions_path)) {
        pf.question_ids.push_back(q.question_id);
    }
    if (!contexts_path.empty()) {
        for (const auto& c : tagging::load_contexts(contexts_path)) {
            pf.context_ids.push_back(c.context_id);
        }
    }
    experiment::save_plan_file(pf, out_path);
    const std::size_t cells =
        pf.engine_labels.size() * pf.question_ids.size() * (1 + pf.context_ids.size());
    std::printf("plan %s: %zu engine(s) x %zu question(s) x (1 + %zu context(s)) = %zu cell(s) -> %s\n",
                pf.plan_id.c_str(), pf.engine_labels.size(), pf.question_ids.size(),
                pf.context_ids.size(), cells, out_path.c_str());
    return kExitOk;
}

int cmd_run(const std::string& plan_path, const std::string& questions_path,
            const std::string& contexts_path, const std::string& store_dir, int parallelism,
            const BackendChoice& choice, bool as_json, const ToolConfig& cfg) {
    experiment::PlanFile pf = experiment::load_plan_file(plan_path);
    experiment::ExperimentPlan plan = resolve_plan(pf, questions_path, contexts_path, cfg);
    backend::BackendSet set = make_backend_set(choice, pf.engine_labels, cfg);
    experiment::RunStore store(store_dir);
    experiment::RunOptions opts;
    opts.parallelism = parallelism;
    // Offline backends get frozen timestamps so reruns are byte-identical.
    opts.deterministic_timestamps = choice.kind != BackendChoice::Kind::Live;
    experiment::RunSummary summary = experiment::run_plan(plan, set, store, opts);
    if (as_json) {
        std::cout << json(summary).dump(2) << "\n";
    } else {
        std::printf("plan %s: %d cell(s), %d already done, %d newly done, %d failed\n",
                    plan.plan_id.c_str(), summary.total_cells, summary.already_complete,
                    summary.newly_complete, summary.failed);
        for (const auto& [label, count] : summary.by_classification) {
            std::printf("  %-16s %d\n", label.c_str(), count);
        }
        for (const auto& [label, count] : summary.by_error) {
            std::printf("  error:%-10s %d\n", label.c_str(), count);
        }
    }
    return summary.failed == 0 ? kExitOk : kExitOperational;
}

int cmd_verify(const std::string& store_dir, const std::string& plan_id, bool as_json) {
    experiment::RunStore store(store_dir);
    const auto records = store.load_all(plan_id);
    const auto rows = reporting::tag_table(records);
    if (as_json) {
        std::cout << json(rows).dump(2) << "\n";
    } else {
        print_tag_rows(rows);
    }
    return kExitOk;
}

int cmd_audit_urls(const std::string& store_dir, const std::string& plan_id,
                   const std::string& out_path, int timeout_ms, int parallelism,
                   const std::string& offline_base, bool as_json) {
    experiment::RunStore store(store_dir);
    const auto records = store.load_all(plan_id);
    url_audit::CheckOptions opts;
    opts.timeout = std::chrono::milliseconds(timeout_ms);
    opts.host_override = offline_base;
    const auto audited = url_audit::audit(records, parallelism, opts);
    url_audit::save_url_records(audited, out_path);
    const auto rows = reporting::url_table(audited);
    if (as_json) {
        std::cout << json(rows).dump(2) << "\n";
    } else {
        std::printf("audited %zu url reference(s) -> %s\n", audited.size(), out_path.c_str());
        print_url_rows(rows);
    }
    return kExitOk;
}

int cmd_report(const std::string& store_dir, const std::string& plan_id,
               const std::string& urls_path, const std::string& out_dir,
               const std::vector<std::string>& formats, bool as_json) {
    for (const auto& f : formats) {
        if (f != "csv" && f != "svg" && f != "json") {
            throw CLI::ValidationError("--formats", "unknown format '" + f + "'");
        }
    }
    auto wants = [&](const char* f) {
        return std::find(formats.begin(), formats.end(), f) != formats.end();
    };

    experiment::RunStore store(store_dir);
    const auto records = store.load_all(plan_id);
    const auto tag_rows = reporting::tag_table(records);

    std::vector<reporting::UrlStatsRow> url_rows;
    std::vector<reporting::UrlStatsRow> no_context_rows, with_context_rows;
    const bool have_urls = !urls_path.empty();
    if (have_urls) {
        url_rows = reporting::url_table(url_audit::load_url_records(urls_path));
        for (const auto& row : url_rows) {
            (row.condition == "no-context" ? no_context_rows : with_context_rows).push_back(row);
        }
    }

    fs::create_directories(out_dir);
    const fs::path base = fs::path(out_dir) / plan_id;
    std::vector<std::string> written;
    if (wants("csv")) {
        reporting::write_text_file(base.string() + ".tags.csv", reporting::to_csv(tag_rows));
        written.push_back(base.string() + ".tags.csv");
        if (have_urls) {
            reporting::write_text_file(base.string() + ".urls.csv", reporting::to_csv(url_rows));
            written.push_back(base.string() + ".urls.csv");
        }
    }
    if (wants("svg")) {
        if (!have_urls) throw Error("svg report needs --urls with audit results");
        reporting::write_text_file(base.string() + ".urls.svg", reporting::to_svg(url_rows));
        written.push_back(base.string() + ".urls.svg");
    }

    json report{{"plan_id", plan_id}, {"tags", tag_rows}};
    if (have_urls) {
        report["urls"] = url_rows;
        report["reduction"] = reporting::reduction_summary(no_context_rows, with_context_rows);
    }
    if (wants("json")) {
        reporting::write_text_file(base.string() + ".report.json", report.dump(2) + "\n");
        written.push_back(base.string() + ".report.json");
    }

    if (as_json) {
        std::cout << report.dump(2) << "\n";
    } else {
        print_tag_rows(tag_rows);
        if (have_urls) {
            std::printf("\n");
            print_url_rows(url_rows);
            std::printf("%s\n", reporting::format_reduction(
                                    reporting::reduction_summary(no_context_rows, with_context_rows))
                                    .c_str());
        }
        for (const auto& path : written) std::printf("wrote %s\n", path.c_str());
    }
    return kExitOk;
}

int cmd_clean() {
    std::ostringstream buf;
    buf << std::cin.rdbuf();
    std::cout << tagging::strip_tags(buf.str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tagctx: tagged-context prompting, verification, and audit toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "config file (JSON)");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "read raw text files listed in a manifest");
    std::string ingest_manifest, ingest_out = "documents.json";
    ingest->add_option("--manifest", ingest_manifest, "corpus manifest (JSON)");
    ingest->add_option("--out", ingest_out, "output documents file");

    // summarize
    auto* summarize = app.add_subcommand("summarize", "condense documents through a backend");
    std::string sum_in, sum_out = "summaries.json", sum_engine = "echo", sum_backend = "echo";
    int sum_window = 1;
    summarize->add_option("--in", sum_in, "documents file")->required();
    summarize->add_option("--out", sum_out, "output documents file");
    summarize->add_option("--engine", sum_engine, "engine label");
    summarize->add_option("--backend", sum_backend, "live | replay:FILE | echo");
    summarize->add_option("--window", sum_window, "lines per summarization call")
        ->check(CLI::PositiveNumber);

    // gen-questions
    auto* genq = app.add_subcommand("gen-questions", "generate questions per document");
    std::string genq_in, genq_out = "questions.json", genq_engine = "echo", genq_backend = "echo";
    int genq_n = 1;
    genq->add_option("--in", genq_in, "documents file")->required();
    genq->add_option("--out", genq_out, "output questions file");
    genq->add_option("--engine", genq_engine, "engine label");
    genq->add_option("--backend", genq_backend, "live | replay:FILE | echo");
    genq->add_option("-n,--per-doc", genq_n, "questions per document")->check(CLI::PositiveNumber);

    // tag
    auto* tag = app.add_subcommand("tag", "insert source tags into documents");
    std::string tag_in, tag_out = "contexts.json";
    unsigned int tag_seed = 0;
    bool tag_seed_set = false;
    tag->add_option("--in", tag_in, "documents file")->required();
    tag->add_option("--out", tag_out, "output contexts file");
    tag->add_option("--seed", tag_seed, "tag generator seed")->each([&](const std::string&) {
        tag_seed_set = true;
    });

    // plan
    auto* plan = app.add_subcommand("plan", "write the experiment plan file");
    std::string plan_id = "plan", plan_questions, plan_contexts, plan_out = "plan.json";
    std::vector<std::string> plan_engines;
    plan->add_option("--plan-id", plan_id, "plan identifier");
    plan->add_option("--questions", plan_questions, "questions file")->required();
    plan->add_option("--contexts", plan_contexts, "contexts file");
    plan->add_option("--engines", plan_engines, "engine labels")->delimiter(',');
    plan->add_option("--out", plan_out, "output plan file");

    // run
    auto* run = app.add_subcommand("run", "execute a plan against a backend");
    std::string run_plan_path, run_questions, run_contexts, run_store = "store",
                run_backend = "echo";
    int run_parallelism = 1;
    bool run_json = false;
    run->add_option("--plan", run_plan_path, "plan file")->required();
    run->add_option("--questions", run_questions, "questions file")->required();
    run->add_option("--contexts", run_contexts, "contexts file");
    run->add_option("--store", run_store, "run store root");
    run->add_option("--parallelism", run_parallelism, "cells in flight")
        ->check(CLI::PositiveNumber);
    run->add_option("--backend", run_backend, "live | replay:FILE | echo");
    run->add_flag("--json", run_json, "machine-readable summary");

    // verify
    auto* verify = app.add_subcommand("verify", "tabulate stored verification results");
    std::string verify_store = "store", verify_plan;
    bool verify_json = false;
    verify->add_option("--store", verify_store, "run store root");
    verify->add_option("--plan-id", verify_plan, "plan identifier")->required();
    verify->add_flag("--json", verify_json, "machine-readable rows");

    // audit-urls
    auto* audit = app.add_subcommand("audit-urls", "check liveness of URLs cited in responses");
    std::string audit_store = "store", audit_plan, audit_out = "urls.jsonl", audit_offline;
    int audit_timeout = 2000, audit_parallelism = 8;
    bool audit_timeout_set = false, audit_parallelism_set = false, audit_json = false;
    audit->add_option("--store", audit_store, "run store root");
    audit->add_option("--plan-id", audit_plan, "plan identifier")->required();
    audit->add_option("--out", audit_out, "output url records (JSON lines)");
    audit->add_option("--timeout-ms", audit_timeout, "per-request timeout")
        ->check(CLI::PositiveNumber)
        ->each([&](const std::string&) { audit_timeout_set = true; });
    audit->add_option("--parallelism", audit_parallelism, "requests in flight")
        ->check(CLI::PositiveNumber)
        ->each([&](const std::string&) { audit_parallelism_set = true; });
    audit->add_option("--offline", audit_offline,
                      "base URL that replaces every host (offline test mode)");
    audit->add_flag("--json", audit_json, "machine-readable rows");

    // report
    auto* report = app.add_subcommand("report", "export tables and charts");
    std::string report_store = "store", report_plan, report_urls, report_out = "reports";
    std::vector<std::string> report_formats{"csv"};
    bool report_json = false;
    report->add_option("--store", report_store, "run store root");
    report->add_option("--plan-id", report_plan, "plan identifier")->required();
    report->add_option("--urls", report_urls, "url records from audit-urls (JSON lines)");
    report->add_option("--out", report_out, "output directory");
    report->add_option("--formats", report_formats, "csv,svg,json")->delimiter(',');
    report->add_flag("--json", report_json, "print the full report as JSON");

    // clean
    auto* clean = app.add_subcommand("clean", "strip source tags from standard input");

    try {
        app.parse(argc, argv);

        ToolConfig cfg = load_config(config_path);

        if (*ingest) {
            std::string manifest = ingest_manifest.empty() ? cfg.manifest : ingest_manifest;
            if (manifest.empty()) {
                throw CLI::ValidationError("--manifest", "no manifest given or configured");
            }
            return cmd_ingest(manifest, ingest_out);
        }
        if (*summarize) {
            return cmd_summarize(sum_in, sum_out, parse_backend_flag(sum_backend), sum_engine,
                                 sum_window, cfg);
        }
        if (*genq) {
            return cmd_gen_questions(genq_in, genq_out, parse_backend_flag(genq_backend),
                                     genq_engine, genq_n, cfg);
        }
        if (*tag) {
            return cmd_tag(tag_in, tag_out, tag_seed_set ? tag_seed : cfg.seed);
        }
        if (*plan) {
            return cmd_plan(plan_id, plan_questions, plan_contexts, plan_engines, plan_out, cfg);
        }
        if (*run) {
            return cmd_run(run_plan_path, run_questions, run_contexts, run_store, run_parallelism,
                           parse_backend_flag(run_backend), run_json, cfg);
        }
        if (*verify) {
            return cmd_verify(verify_store, verify_plan, verify_json);
        }
        if (*audit) {
            return cmd_audit_urls(audit_store, audit_plan, audit_out,
                                  audit_timeout_set ? audit_timeout : cfg.url_timeout_ms,
                                  audit_parallelism_set ? audit_parallelism : cfg.url_parallelism,
                                  audit_offline, audit_json);
        }
        if (*report) {
            return cmd_report(report_store, report_plan, report_urls, report_out, report_formats,
                              report_json);
        }
        if (*clean) {
            return cmd_clean();
        }
        return kExitUsage; // unreachable: require_subcommand(1)
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitOperational;
    }
}
