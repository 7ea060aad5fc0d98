#include "tagctx/experiment.hpp"

#include "tagctx/errors.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

namespace tagctx::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Fixed timestamp emitted in deterministic mode so two offline runs of the
// same plan produce byte-identical stores.
constexpr const char* kEpochTimestamp = "1970-01-01T00:00:00Z";

// Test hook: when set to N, the process exits hard after persisting N cells,
// simulating a mid-run crash for resume testing.
constexpr const char* kFaultEnvVar = "TAGCTX_FAULT_EXIT_AFTER";

std::string error_kind(const backend::Error& e) {
    if (dynamic_cast<const backend::AuthError*>(&e)) return "auth";
    if (dynamic_cast<const backend::RateLimitedError*>(&e)) return "rate-limit";
    if (dynamic_cast<const backend::TimeoutError*>(&e)) return "timeout";
    if (dynamic_cast<const backend::MissingFixtureError*>(&e)) return "missing-fixture";
    if (dynamic_cast<const backend::SchemaError*>(&e)) return "schema";
    if (dynamic_cast<const backend::UpstreamError*>(&e)) return "upstream";
    return "backend";
}

void write_file_atomic(const fs::path& path, const std::string& body) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << body;
        out.flush();
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::vector<int> indices_in_dir(const fs::path& dir) {
    std::vector<int> out;
    std::error_code ec;
    for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) {
        const fs::path& p = it->path();
        if (p.extension() != ".json") continue;
        try {
            out.push_back(std::stoi(p.stem().string()));
        } catch (const std::exception&) {
            // Stray file; not one of ours.
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

ExperimentPlan build_plan(const std::string& plan_id, std::vector<backend::BackendConfig> engines,
                          std::vector<corpus::Question> questions,
                          std::vector<tagging::TaggedContext> contexts,
                          const prompting::PromptOptions& opts) {
    ExperimentPlan plan;
    plan.plan_id = plan_id;
    plan.engines = std::move(engines);
    plan.questions = std::move(questions);
    plan.contexts = std::move(contexts);
    plan.cells.reserve(plan.engines.size() * plan.questions.size() * (1 + plan.contexts.size()));
    for (const auto& engine : plan.engines) {
        for (const auto& question : plan.questions) {
            prompting::PromptSpec bare = prompting::build_no_context_prompt(question, opts);
            bare.engine = engine.engine;
            plan.cells.push_back(std::move(bare));
            for (const auto& context : plan.contexts) {
                prompting::PromptSpec spec = prompting::build_context_prompt(context, question, opts);
                spec.engine = engine.engine;
                plan.cells.push_back(std::move(spec));
            }
        }
    }
    return plan;
}

void to_json(json& j, const RunRecord& r) {
    j = json{
        {"plan_id", r.plan_id},
        {"cell_index", r.cell_index},
        {"engine", r.engine},
        {"condition", prompting::condition_label(r.condition)},
        {"question_id", r.question_id},
        {"prompt_text", r.prompt_text},
        {"raw_response", r.raw_response},
        {"cleaned_response", r.cleaned_response},
        {"cited_tag_ids", r.cited_tag_ids},
        {"started_at", r.started_at},
        {"completed_at", r.completed_at},
    };
    if (r.condition.kind == prompting::ConditionKind::WithContext) {
        j["context_id"] = r.condition.context_id;
        j["relevant"] = r.condition.relevant;
    }
    if (r.verification) j["verification"] = *r.verification;
}

void from_json(const json& j, RunRecord& r) {
    r.plan_id = j.at("plan_id").get<std::string>();
    r.cell_index = j.at("cell_index").get<int>();
    r.engine = j.at("engine").get<std::string>();
    const auto label = j.at("condition").get<std::string>();
    if (label == "with-context") {
        r.condition.kind = prompting::ConditionKind::WithContext;
        r.condition.context_id = j.at("context_id").get<std::string>();
        r.condition.relevant = j.value("relevant", false);
    } else {
        r.condition = {};
    }
    r.question_id = j.at("question_id").get<std::string>();
    r.prompt_text = j.at("prompt_text").get<std::string>();
    r.raw_response = j.at("raw_response").get<std::string>();
    r.cleaned_response = j.at("cleaned_response").get<std::string>();
    r.cited_tag_ids = j.value("cited_tag_ids", std::vector<int>{});
    if (j.contains("verification")) {
        r.verification = j.at("verification").get<verification::VerificationResult>();
    } else {
        r.verification.reset();
    }
    r.started_at = j.value("started_at", "");
    r.completed_at = j.value("completed_at", "");
}

RunStore::RunStore(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) throw IoError("cannot create store root " + root_.string() + ": " + ec.message());
}

fs::path RunStore::plan_dir(const std::string& plan_id) const { return root_ / plan_id; }

fs::path RunStore::cell_path(const std::string& plan_id, int cell_index) const {
    return plan_dir(plan_id) / "cells" / (std::to_string(cell_index) + ".json");
}

fs::path RunStore::failure_path(const std::string& plan_id, int cell_index) const {
    return plan_dir(plan_id) / "failures" / (std::to_string(cell_index) + ".json");
}

bool RunStore::has_cell(const std::string& plan_id, int cell_index) const {
    std::error_code ec;
    return fs::exists(cell_path(plan_id, cell_index), ec);
}

void RunStore::put_cell(const RunRecord& record) {
    fs::path path = cell_path(record.plan_id, record.cell_index);
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
    write_file_atomic(path, json(record).dump(2) + "\n");
}

std::optional<RunRecord> RunStore::get_cell(const std::string& plan_id, int cell_index) const {
    std::ifstream in(cell_path(plan_id, cell_index), std::ios::binary);
    if (!in) return std::nullopt;
    try {
        return json::parse(in).get<RunRecord>();
    } catch (const std::exception& e) {
        throw IoError("corrupt cell file " + cell_path(plan_id, cell_index).string() + ": " + e.what());
    }
}

std::vector<int> RunStore::done_indices(const std::string& plan_id) const {
    return indices_in_dir(plan_dir(plan_id) / "cells");
}

std::vector<RunRecord> RunStore::load_all(const std::string& plan_id) const {
    std::vector<RunRecord> out;
    for (int index : done_indices(plan_id)) {
        if (auto rec = get_cell(plan_id, index)) out.push_back(std::move(*rec));
    }
    return out;
}

void RunStore::put_failure(const std::string& plan_id, int cell_index, const std::string& error_type,
                           const std::string& message) {
    fs::path path = failure_path(plan_id, cell_index);
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
    json j{{"cell_index", cell_index}, {"error_type", error_type}, {"message", message}};
    write_file_atomic(path, j.dump(2) + "\n");
}

void RunStore::clear_failure(const std::string& plan_id, int cell_index) {
    std::error_code ec;
    fs::remove(failure_path(plan_id, cell_index), ec);
}

std::vector<int> RunStore::failed_indices(const std::string& plan_id) const {
    return indices_in_dir(plan_dir(plan_id) / "failures");
}

void RunStore::write_index(const std::string& plan_id, int total_cells) {
    std::vector<int> done = done_indices(plan_id);
    std::vector<int> failed = failed_indices(plan_id);
    json j{
        {"plan_id", plan_id},
        {"total_cells", total_cells},
        {"completed", static_cast<int>(done.size())},
        {"done_indices", done},
        {"failed_indices", failed},
        {"complete", static_cast<int>(done.size()) == total_cells},
    };
    write_file_atomic(plan_dir(plan_id) / "index.json", j.dump(2) + "\n");
}

PlanLock::PlanLock(const fs::path& plan_dir, const std::string& plan_id) {
    std::error_code ec;
    fs::create_directories(plan_dir, ec);
    if (ec) throw IoError("cannot create " + plan_dir.string() + ": " + ec.message());
    path_ = plan_dir / ".lock";
    for (int attempt = 0; attempt < 3; ++attempt) {
        int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd >= 0) {
            std::string body = std::to_string(::getpid()) + "\n";
            ssize_t n = ::write(fd, body.data(), body.size());
            ::close(fd);
            if (n != static_cast<ssize_t>(body.size())) {
                fs::remove(path_, ec);
                throw IoError("cannot write lock file " + path_.string());
            }
            return;
        }
        // Lock exists. A lock whose pid is still alive blocks us; anything
        // else (dead pid, unreadable file) is stale and gets swept.
        long pid = 0;
        {
            std::ifstream in(path_);
            in >> pid;
        }
        if (pid > 0) {
            const bool owner_alive = pid == static_cast<long>(::getpid()) ||
                                     ::kill(static_cast<pid_t>(pid), 0) == 0 || errno == EPERM;
            if (owner_alive) {
                path_.clear();
                throw PlanLockedError("plan " + plan_id + " is locked by running process " +
                                      std::to_string(pid));
            }
        }
        fs::remove(path_, ec);
    }
    path_.clear();
    throw PlanLockedError("could not acquire lock for plan " + plan_id);
}

PlanLock::~PlanLock() {
    if (path_.empty()) return;
    std::error_code ec;
    fs::remove(path_, ec);
}

void to_json(json& j, const RunSummary& s) {
    j = json{
        {"total_cells", s.total_cells},       {"already_complete", s.already_complete},
        {"newly_complete", s.newly_complete}, {"failed", s.failed},
        {"by_classification", s.by_classification}, {"by_error", s.by_error},
    };
}

RunSummary run_plan(const ExperimentPlan& plan, const backend::BackendSet& backends, RunStore& store,
                    const RunOptions& opts) {
    RunSummary summary;
    summary.total_cells = static_cast<int>(plan.cells.size());

    PlanLock lock(store.plan_dir(plan.plan_id), plan.plan_id);

    long fault_after = -1;
    if (const char* env = std::getenv(kFaultEnvVar)) fault_after = std::strtol(env, nullptr, 10);

    std::map<std::string, const tagging::TaggedContext*> context_by_id;
    for (const auto& ctx : plan.contexts) context_by_id[ctx.context_id] = &ctx;

    std::vector<int> pending;
    for (int i = 0; i < summary.total_cells; ++i) {
        if (store.has_cell(plan.plan_id, i)) {
            ++summary.already_complete;
        } else {
            pending.push_back(i);
        }
    }

    auto timestamp = [&]() { return opts.deterministic_timestamps ? kEpochTimestamp : now_iso8601_utc(); };

    std::mutex store_mutex; // single-writer contract per plan
    std::atomic<size_t> next{0};
    long persisted = 0; // guarded by store_mutex
    std::exception_ptr store_error;

    auto worker = [&]() {
        for (;;) {
            size_t slot = next.fetch_add(1);
            if (slot >= pending.size()) return;
            int index = pending[slot];
            const prompting::PromptSpec& cell = plan.cells[static_cast<size_t>(index)];

            RunRecord rec;
            rec.plan_id = plan.plan_id;
            rec.cell_index = index;
            rec.engine = cell.engine;
            rec.condition = cell.condition;
            rec.question_id = cell.question_id;
            rec.prompt_text = cell.prompt_text;
            rec.started_at = timestamp();

            try {
                backend::Backend& be = backends.for_engine(cell.engine);
                backend::CompletionRequest req;
                req.engine = cell.engine;
                req.input = cell.prompt_text;
                rec.raw_response = be.complete(req).text;
            } catch (const backend::Error& e) {
                std::lock_guard<std::mutex> g(store_mutex);
                if (store_error) return;
                try {
                    store.put_failure(plan.plan_id, index, error_kind(e), e.what());
                } catch (...) {
                    store_error = std::current_exception();
                    return;
                }
                ++summary.failed;
                ++summary.by_error[error_kind(e)];
                continue;
            }

            rec.cleaned_response = tagging::strip_tags(rec.raw_response);
            if (cell.condition.kind == prompting::ConditionKind::WithContext) {
                const auto it = context_by_id.find(cell.condition.context_id);
                if (it != context_by_id.end()) {
                    const tagging::TagRegistry& registry = it->second->registry;
                    tagging::ExtractedTags extracted = tagging::extract_tags(rec.raw_response);
                    std::set<int> seen;
                    for (const auto& mention : extracted.mentions) {
                        if (registry.contains(mention.value) && seen.insert(mention.value).second) {
                            rec.cited_tag_ids.push_back(mention.value);
                        }
                    }
                    rec.verification = verification::classify_response(rec.raw_response, registry,
                                                                       cell.condition.relevant);
                }
            }
            rec.completed_at = timestamp();

            std::lock_guard<std::mutex> g(store_mutex);
            if (store_error) return;
            try {
                store.put_cell(rec);
                store.clear_failure(plan.plan_id, index);
            } catch (...) {
                store_error = std::current_exception();
                return;
            }
            ++summary.newly_complete;
            ++persisted;
            if (fault_after >= 0 && persisted >= fault_after) {
                std::_Exit(137); // crash-injection hook; lock file is left behind on purpose
            }
        }
    };

    int workers = std::max(1, opts.parallelism);
    if (workers == 1 || pending.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(workers));
        for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (store_error) std::rethrow_exception(store_error);

    for (const RunRecord& rec : store.load_all(plan.plan_id)) {
        if (rec.verification) {
            ++summary.by_classification[verification::to_string(rec.verification->classification)];
        }
    }
    store.write_index(plan.plan_id, summary.total_cells);
    return summary;
}

void to_json(json& j, const PlanFile& p) {
    j = json{{"plan_id", p.plan_id},
             {"engine_labels", p.engine_labels},
             {"question_ids", p.question_ids},
             {"context_ids", p.context_ids}};
}

void from_json(const json& j, PlanFile& p) {
    p.plan_id = j.at("plan_id").get<std::string>();
    p.engine_labels = j.at("engine_labels").get<std::vector<std::string>>();
    p.question_ids = j.at("question_ids").get<std::vector<std::string>>();
    p.context_ids = j.at("context_ids").get<std::vector<std::string>>();
}

PlanFile plan_file_from(const ExperimentPlan& plan) {
    PlanFile file;
    file.plan_id = plan.plan_id;
    for (const auto& e : plan.engines) file.engine_labels.push_back(e.engine);
    for (const auto& q : plan.questions) file.question_ids.push_back(q.question_id);
    for (const auto& c : plan.contexts) file.context_ids.push_back(c.context_id);
    return file;
}

PlanFile load_plan_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open plan file " + path);
    try {
        return json::parse(in).get<PlanFile>();
    } catch (const json::exception& e) {
        throw IoError("invalid plan file " + path + ": " + e.what());
    }
}

void save_plan_file(const PlanFile& plan, const std::string& path) {
    write_file_atomic(path, json(plan).dump(2) + "\n");
}

std::string now_iso8601_utc() {
    std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace tagctx::experiment
