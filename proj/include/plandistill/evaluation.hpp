#pragma once

#include "plandistill/backend.hpp"
#include "plandistill/dataset.hpp"
#include "plandistill/prompting.hpp"

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace plandistill {

using Tokens = std::vector<std::string>;

std::size_t lcs_length(const Tokens& a, const Tokens& b);

// LCS-based F-measure. beta = 1 is F1; larger beta weights recall.
double rouge_l(const Tokens& candidate, const Tokens& reference, double beta = 1.0);

enum class BleuSmoothing { none, add_one };

// Add-one smoothing applies to n >= 2 only. Throws InputError if max_n < 1.
double bleu(const Tokens& candidate, const std::vector<Tokens>& references, int max_n = 4,
            BleuSmoothing smoothing = BleuSmoothing::none);

// Absent metrics stay nullopt rather than zero.
struct MetricReport {
    std::optional<double> rouge_l;
    std::optional<double> bleu;
    std::optional<double> faithfulness;
};

struct Faithfulness {
    double score = 0.0;  // (cosine + 1) / 2
    bool label = false;
    bool degenerate = false;  // no sibling differs from the record's own goal
};

// Cosine of the record's script against its own goal and the siblings'
// goals. label is true iff the own goal scores at least as high as every
// sibling, which is the filter's test with delta = 0.
Faithfulness faithfulness_score(const DatasetRecord& record, const std::vector<SpecificGoal>& siblings,
                                Embedder& embedder);

struct ConstraintDistribution {
    std::array<std::size_t, 3> per_type{};  // indexed by ConstraintType
    std::map<std::string, std::size_t> first_words;
};

ConstraintDistribution constraint_distribution(const std::vector<DatasetRecord>& dataset);

struct DatasetStats {
    std::size_t size = 0;
    std::size_t unique_tokens = 0;
    std::string tokenizer_version;
    std::size_t abstract_goals = 0;
    double avg_specific_per_abstract = 0.0;
    double avg_steps = 0.0;
    ConstraintDistribution distribution;
};

// Tokens of specific goals and steps are counted.
DatasetStats dataset_stats(const std::vector<DatasetRecord>& dataset);

std::string format_stats(const DatasetStats& stats);

// One line of a predictions file.
struct Prediction {
    std::string specific_goal;
    std::vector<std::string> steps;
};

std::vector<Prediction> read_predictions(const std::filesystem::path& path);

struct PredictionResult {
    std::string specific_goal;
    MetricReport metrics;  // empty when no reference matched
    bool matched = false;
};

struct EvalSummary {
    std::vector<PredictionResult> results;
    std::size_t matched = 0;
    MetricReport mean;  // over matched predictions
};

// Predictions are paired with reference records by normalized specific goal.
// Metrics compare whitespace/punctuation tokens of the joined steps.
EvalSummary evaluate_predictions(const std::vector<Prediction>& predictions,
                                 const std::vector<DatasetRecord>& reference,
                                 BleuSmoothing smoothing = BleuSmoothing::none);

std::string serialize_metric_report(const MetricReport& report);

}  // namespace plandistill
