#pragma once

#include "plandistill/backend.hpp"
#include "plandistill/config.hpp"
#include "plandistill/corpus.hpp"
#include "plandistill/dataset.hpp"
#include "plandistill/filtering.hpp"
#include "plandistill/prompting.hpp"
#include "plandistill/retrieval.hpp"
#include "plandistill/text.hpp"

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace plandistill {

// Stopwords, example pool and templates a run uses.
struct Resources {
    StopwordList stopwords = StopwordList::builtin();
    ExamplePool pool = ExamplePool::builtin();
    PromptTemplate goal_template = PromptTemplate::builtin_goal();
    PromptTemplate script_template = PromptTemplate::builtin_script();
};

// Built-ins, with any paths named in the config loaded instead.
Resources load_resources(const PipelineConfig& config);

struct Diagnostic {
    std::string abstract_goal_id;
    std::string specific_goal_id;  // empty at the goal-generation stage
    std::string stage;             // "goals", "retrieval", "scripts", "filter"
    std::string message;
};

// A generated goal and the completion it came from.
struct GeneratedGoal {
    SpecificGoal goal;
    std::string completion_digest;
};

struct GoalGeneration {
    std::vector<GeneratedGoal> goals;
    std::vector<Diagnostic> diagnostics;
    // One entry per constraint type whose backend call failed.
    std::vector<Diagnostic> errors;
};

struct ScriptGeneration {
    std::vector<CandidateScript> candidates;
    std::vector<Diagnostic> diagnostics;
    std::vector<std::string> example_ids;
    std::string prompt;
    std::size_t backend_failures = 0;
};

// Audit line for a goal that did not make it into the dataset.
struct RejectionEntry {
    std::string abstract_goal_id;
    std::string specific_goal_id;
    std::string specific_goal;
    std::string reason;  // "filtered", "unparseable" or "backend_error"
    std::optional<ScoreTable> table;
};

struct RunReport {
    std::size_t abstract_goals = 0;
    std::size_t generated_goals = 0;
    std::size_t deduplicated_goals = 0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t failed = 0;
    std::size_t goal_type_errors = 0;
    std::size_t upstream_calls = 0;
    std::size_t completion_cache_hits = 0;
    std::size_t embedding_cache_hits = 0;

    // accepted + rejected + failed == deduplicated_goals
    bool conserved() const noexcept { return accepted + rejected + failed == deduplicated_goals; }
};

struct DistillResult {
    std::vector<DatasetRecord> dataset;
    // Abstract goal id of each dataset record, parallel to `dataset`.
    std::vector<std::string> record_abstract_ids;
    std::vector<RejectionEntry> rejections;
    std::vector<Diagnostic> diagnostics;
    RunReport report;
};

// Keeps the first goal of each normalized-text class, preserving order.
std::vector<SpecificGoal> dedup_goals(const std::vector<SpecificGoal>& goals);
std::vector<GeneratedGoal> dedup_goals(const std::vector<GeneratedGoal>& goals);

// Runs the two generation stages and the filter against one backend.
// Holds references; corpus, backend and resources must outlive it.
class Distiller {
public:
    Distiller(const Corpus& corpus, const PipelineConfig& config, Backend& backend,
              const Resources& resources);

    // One goal prompt per constraint type. Failed types are recorded in
    // `errors` and skipped.
    GoalGeneration generate_specific_goals(const AbstractGoal& goal);

    // Retrieves script examples by the abstract goal's keywords, renders the
    // script prompt and draws K samples. Unparseable samples become
    // diagnostics.
    ScriptGeneration overgenerate_scripts(const AbstractGoal& parent, const SpecificGoal& goal);

    // Script stage for an already generated (and deduplicated) goal list of
    // one abstract goal.
    DistillResult distill_goals(const AbstractGoal& parent, const std::vector<GeneratedGoal>& goals);

    // Both stages over the whole corpus, `config.workers` abstract goals at a
    // time. Output order is independent of scheduling.
    DistillResult distill();

    // Goal stage only over the whole corpus, deduplicated per abstract goal.
    std::vector<GeneratedGoal> generate_all_goals(std::vector<Diagnostic>* diagnostics = nullptr);

    // Script stage over a goal list spanning many abstract goals.
    DistillResult distill_goal_list(const std::vector<GeneratedGoal>& goals);

    const Bm25Index& index() const noexcept { return index_; }

private:
    CompletionRequest base_request() const;
    DistillResult run_parallel(std::size_t count,
                               const std::function<DistillResult(std::size_t)>& work);

    const Corpus& corpus_;
    const PipelineConfig& config_;
    Backend& backend_;
    const Resources& resources_;
    Bm25Index index_;
};

// Sorts the dataset by (abstract goal id, constraint type, specific goal
// text), keeping record_abstract_ids aligned.
void sort_dataset(DistillResult& result);

std::string serialize_rejection(const RejectionEntry& entry);
std::string serialize_diagnostic(const Diagnostic& d);
std::string serialize_report(const RunReport& report);

// Specific-goal files exchanged between the two CLI stages.
std::string serialize_generated_goal(const GeneratedGoal& g);
std::vector<GeneratedGoal> read_generated_goals(const std::filesystem::path& path);

}  // namespace plandistill
