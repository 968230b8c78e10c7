#pragma once

#include "crisis/error.hpp"
#include "crisis/ingest.hpp"
#include "crisis/message.hpp"
#include "crisis/prompting.hpp"
#include "crisis/triage.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace crisis {

enum class EvalErrc { empty_input, degenerate_input, missing_score, bad_dataset };
std::string_view to_string(EvalErrc e);
using EvalError = CodedError<EvalErrc>;

struct LabeledPrediction {
    std::string message_id;
    LabelSet gold;
    LabelSet predicted;
    std::map<std::string, double> scores;
};

/// Builds a prediction whose predicted set is derived from the scores.
LabeledPrediction prediction_from_scores(std::string message_id, LabelSet gold, std::map<std::string, double> scores);

struct PrfScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t tp = 0, fp = 0, fn = 0;
};

/// Pooled over every (message, label) pair. Zero denominators give 0.
PrfScores micro_prf(std::span<const LabeledPrediction> predictions);

/// Rank statistic over pooled (message, label) pairs for every label in
/// `labels`; ties count one half.
double micro_roc_auc(std::span<const LabeledPrediction> predictions, std::span<const std::string> labels);

/// Fraction of messages whose predicted set equals the gold set.
double subset_accuracy(std::span<const LabeledPrediction> predictions);

struct Table1Row {
    std::string model;
    double precision, recall, f1, roc_auc, accuracy;
};

/// The published metric rows, in publication order.
const std::vector<Table1Row>& published_table1();

struct ConsistencyFinding {
    std::string model;
    double recomputed_f1;
    double deviation;
    bool flagged;
};

/// One finding per row; `flagged` when |2PR/(P+R) - F1| exceeds tolerance.
std::vector<ConsistencyFinding> table1_consistency_check(std::span<const Table1Row> rows, double tolerance = 0.01);

/// Percent of messages carrying each label, highest first. Labels absent from
/// every message still appear (at 0) when listed in `labels`; ties keep the
/// order of `labels`, then name order for extras.
std::vector<std::pair<std::string, double>> distribution_report(std::span<const LabelSet> gold,
                                                                std::span<const std::string> labels = {});

enum class EvalTask { binary, multiclass };
std::string_view to_string(EvalTask t);

struct EvalItem {
    EmergencyMessage message;
    LabelSet gold;
};

struct EvalDataset {
    std::string name;
    EvalTask task = EvalTask::multiclass;
    std::vector<std::string> labels;
    std::vector<EvalItem> items;
    std::size_t skipped = 0;
};

/// Binary gold is {"relevant"} or {}.
inline constexpr const char* kRelevantLabel = "relevant";

EvalDataset make_eval_dataset(std::string name, const TweetDataset& tweets);
EvalDataset make_eval_dataset(std::string name, const DisasterDataset& disaster, const CategoryTaxonomy& taxonomy);

/// `.csv` loads as the disaster-message format, anything else as tweet NDJSON.
EvalDataset load_eval_dataset(const std::string& path, const CategoryTaxonomy& taxonomy);

struct EvalOptions {
    std::size_t sample_n = 1000;
    std::uint64_t seed = 0;
};

struct EvaluationReport {
    std::string backend_id;
    std::string dataset;
    EvalTask task = EvalTask::multiclass;
    double precision = 0, recall = 0, f1 = 0, accuracy = 0;
    /// Unset when the evaluated sample has only one class.
    std::optional<double> roc_auc;
    std::size_t n_samples = 0;
    std::size_t n_drawn = 0;
    std::size_t n_dataset = 0;
    std::size_t n_failed = 0;
    std::size_t n_dropped = 0;
    std::uint64_t seed = 0;
    std::string template_version;
    std::string template_hash;
    std::vector<std::pair<std::string, double>> prevalence;
    std::vector<std::string> footnotes;
};

/// Unbiased draw in [0, bound) by rejection, so results do not depend on the
/// standard library's distribution implementation.
std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound);

/// Seeded Fisher-Yates over item indices, truncated to sample_n.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t sample_n, std::uint64_t seed);

/// Classifies the sampled items with `engine`. Items whose inference failed
/// or that the short filter dropped are counted and left out of the metrics.
EvaluationReport run_evaluation(const EvalDataset& dataset, const TriageEngine& engine, const EvalOptions& options);

/// Per-item predictions of the same run, for callers that need them.
std::vector<LabeledPrediction> evaluate_predictions(const EvalDataset& dataset, const TriageEngine& engine,
                                                    std::span<const std::size_t> indices, std::size_t* failed = nullptr,
                                                    std::size_t* dropped = nullptr);

nlohmann::ordered_json report_json(const EvaluationReport& report);
/// Column order Prec., Recall, F1, ROC-AUC, Acc., then footnotes.
std::string render_table(std::span<const EvaluationReport> reports);

}  // namespace crisis
