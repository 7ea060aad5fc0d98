#pragma once

#include "tagctx/backend.hpp"
#include "tagctx/corpus.hpp"
#include "tagctx/prompting.hpp"
#include "tagctx/tagging.hpp"
#include "tagctx/verification.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tagctx::experiment {

struct ExperimentPlan {
    std::string plan_id;
    std::vector<backend::BackendConfig> engines;
    std::vector<corpus::Question> questions;
    std::vector<tagging::TaggedContext> contexts;
    std::vector<prompting::PromptSpec> cells;
};

/// The full permutation grid: for every engine and question, one no-context
/// cell followed by one cell per context. Cell order is engine-major, then
/// question, then condition, so |cells| = engines x questions x (1 + contexts).
ExperimentPlan build_plan(const std::string& plan_id,
                          std::vector<backend::BackendConfig> engines,
                          std::vector<corpus::Question> questions,
                          std::vector<tagging::TaggedContext> contexts,
                          const prompting::PromptOptions& opts = {});

struct RunRecord {
    std::string plan_id;
    int cell_index = 0;
    std::string engine;
    prompting::Condition condition;
    std::string question_id;
    std::string prompt_text;
    std::string raw_response;
    std::string cleaned_response;
    std::vector<int> cited_tag_ids; // registry matches, in order of first mention
    std::optional<verification::VerificationResult> verification; // context cells only
    std::string started_at;
    std::string completed_at;
};

void to_json(nlohmann::json& j, const RunRecord& r);
void from_json(const nlohmann::json& j, RunRecord& r);

/// One directory per plan: <root>/<plan_id>/cells/<index>.json holds a
/// RunRecord, failures/<index>.json the latest error for a cell, and
/// index.json a summary derived from the cell files. Cell writes go through
/// a temp file and rename, so a crash never leaves a half-written cell.
class RunStore {
public:
    explicit RunStore(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path plan_dir(const std::string& plan_id) const;

    bool has_cell(const std::string& plan_id, int cell_index) const;
    void put_cell(const RunRecord& record);
    std::optional<RunRecord> get_cell(const std::string& plan_id, int cell_index) const;
    std::vector<int> done_indices(const std::string& plan_id) const;
    std::vector<RunRecord> load_all(const std::string& plan_id) const;

    void put_failure(const std::string& plan_id, int cell_index, const std::string& error_type,
                     const std::string& message);
    void clear_failure(const std::string& plan_id, int cell_index);
    std::vector<int> failed_indices(const std::string& plan_id) const;

    /// Rewrites index.json from the cell files currently on disk.
    void write_index(const std::string& plan_id, int total_cells);

private:
    std::filesystem::path cell_path(const std::string& plan_id, int cell_index) const;
    std::filesystem::path failure_path(const std::string& plan_id, int cell_index) const;
    std::filesystem::path root_;
};

/// Guards a plan directory against concurrent runs. The lock file carries
/// the owning pid; a lock whose pid is gone is treated as stale and taken
/// over, so a killed run does not wedge the plan.
class PlanLock {
public:
    PlanLock(const std::filesystem::path& plan_dir, const std::string& plan_id);
    ~PlanLock();
    PlanLock(const PlanLock&) = delete;
    PlanLock& operator=(const PlanLock&) = delete;

private:
    std::filesystem::path path_;
};

class PlanLockedError : public Error {
public:
    explicit PlanLockedError(const std::string& message) : Error(message) {}
};

struct RunSummary {
    int total_cells = 0;
    int already_complete = 0;
    int newly_complete = 0;
    int failed = 0;
    std::map<std::string, int> by_classification; // over all completed cells
    std::map<std::string, int> by_error;          // this invocation's failures
};

void to_json(nlohmann::json& j, const RunSummary& s);

struct RunOptions {
    int parallelism = 1;
    // Replay/echo runs use a fixed timestamp so stores are byte-reproducible.
    bool deterministic_timestamps = false;
    const prompting::PromptOptions* prompt_options = nullptr; // unused today
};

/// Executes every cell not yet in the store. Each completion is cleaned,
/// tag-extracted, verified (context cells) and persisted before the cell
/// counts as done; backend errors mark the cell failed and the next
/// invocation retries it. Only store failures abort the run.
RunSummary run_plan(const ExperimentPlan& plan, const backend::BackendSet& backends,
                    RunStore& store, const RunOptions& opts = {});

/// Plan file exchange format: ids only; questions/contexts/engines are
/// resolved from their own files when the plan is run.
struct PlanFile {
    std::string plan_id;
    std::vector<std::string> engine_labels;
    std::vector<std::string> question_ids;
    std::vector<std::string> context_ids;
};

void to_json(nlohmann::json& j, const PlanFile& p);
void from_json(const nlohmann::json& j, PlanFile& p);

PlanFile plan_file_from(const ExperimentPlan& plan);
PlanFile load_plan_file(const std::string& path);
void save_plan_file(const PlanFile& plan, const std::string& path);

std::string now_iso8601_utc();

} // namespace tagctx::experiment
