#include "crisis/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>

namespace crisis {

std::string_view to_string(EvalErrc e) {
    switch (e) {
        case EvalErrc::empty_input: return "empty_input";
        case EvalErrc::degenerate_input: return "degenerate_input";
        case EvalErrc::missing_score: return "missing_score";
        case EvalErrc::bad_dataset: return "bad_dataset";
    }
    return "bad_dataset";
}

std::string_view to_string(EvalTask t) { return t == EvalTask::binary ? "binary" : "multiclass"; }

LabeledPrediction prediction_from_scores(std::string message_id, LabelSet gold, std::map<std::string, double> scores) {
    LabeledPrediction p{std::move(message_id), std::move(gold), {}, std::move(scores)};
    for (const auto& [label, s] : p.scores) {
        if (s >= kPredictionThreshold) p.predicted.insert(label);
    }
    return p;
}

PrfScores micro_prf(std::span<const LabeledPrediction> predictions) {
    if (predictions.empty()) throw EvalError(EvalErrc::empty_input, "micro_prf needs at least one prediction");
    PrfScores s;
    for (const auto& p : predictions) {
        for (const auto& l : p.predicted) (p.gold.contains(l) ? s.tp : s.fp)++;
        for (const auto& l : p.gold) {
            if (!p.predicted.contains(l)) s.fn++;
        }
    }
    const auto ratio = [](std::size_t num, std::size_t den) {
        return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    s.precision = ratio(s.tp, s.tp + s.fp);
    s.recall = ratio(s.tp, s.tp + s.fn);
    s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

double micro_roc_auc(std::span<const LabeledPrediction> predictions, std::span<const std::string> labels) {
    if (predictions.empty() || labels.empty()) throw EvalError(EvalErrc::empty_input, "no pairs to rank");
    std::vector<std::pair<double, bool>> pairs;
    pairs.reserve(predictions.size() * labels.size());
    for (const auto& p : predictions) {
        for (const auto& l : labels) {
            auto it = p.scores.find(l);
            if (it == p.scores.end()) {
                throw EvalError(EvalErrc::missing_score, "no score for " + l + " on " + p.message_id);
            }
            pairs.emplace_back(it->second, p.gold.contains(l));
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    // Mann-Whitney: sum of positive mid-ranks.
    double positive_rank_sum = 0.0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < pairs.size();) {
        std::size_t j = i;
        std::size_t group_pos = 0;
        while (j < pairs.size() && pairs[j].first == pairs[i].first) group_pos += pairs[j++].second;
        const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        positive_rank_sum += mid_rank * static_cast<double>(group_pos);
        positives += group_pos;
        i = j;
    }
    const std::size_t negatives = pairs.size() - positives;
    if (positives == 0 || negatives == 0) {
        throw EvalError(EvalErrc::degenerate_input, "need at least one positive and one negative pair");
    }
    const double P = static_cast<double>(positives);
    const double N = static_cast<double>(negatives);
    return (positive_rank_sum - P * (P + 1.0) / 2.0) / (P * N);
}

double subset_accuracy(std::span<const LabeledPrediction> predictions) {
    if (predictions.empty()) throw EvalError(EvalErrc::empty_input, "subset_accuracy needs at least one prediction");
    const auto hits = std::count_if(predictions.begin(), predictions.end(),
                                    [](const LabeledPrediction& p) { return p.predicted == p.gold; });
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

const std::vector<Table1Row>& published_table1() {
    static const std::vector<Table1Row> rows{
        {"LLAMA2-7B", 0.79, 0.75, 0.77, 0.87, 0.48},   {"LLAMA2-13B", 0.78, 0.78, 0.78, 0.88, 0.50},
        {"LLAMA2-70B", 0.82, 0.88, 0.85, 0.93, 0.69},  {"Mistral-7B", 0.80, 0.69, 0.74, 0.84, 0.41},
        {"Mixtral-8x7B", 0.68, 0.72, 0.70, 0.84, 0.35},
    };
    return rows;
}

std::vector<ConsistencyFinding> table1_consistency_check(std::span<const Table1Row> rows, double tolerance) {
    std::vector<ConsistencyFinding> out;
    for (const auto& r : rows) {
        const double sum = r.precision + r.recall;
        const double f1 = sum == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / sum;
        const double dev = std::abs(f1 - r.f1);
        out.push_back({r.model, f1, dev, dev > tolerance});
    }
    return out;
}

std::vector<std::pair<std::string, double>> distribution_report(std::span<const LabelSet> gold,
                                                                std::span<const std::string> labels) {
    if (gold.empty()) throw EvalError(EvalErrc::empty_input, "distribution_report needs at least one message");
    std::map<std::string, std::size_t> counts;
    for (const auto& set : gold) {
        for (const auto& l : set) counts[l]++;
    }
    std::vector<std::pair<std::string, double>> out;
    const double total = static_cast<double>(gold.size());
    std::set<std::string> listed;
    for (const auto& l : labels) {
        if (!listed.insert(l).second) continue;
        auto it = counts.find(l);
        out.emplace_back(l, it == counts.end() ? 0.0 : 100.0 * static_cast<double>(it->second) / total);
    }
    for (const auto& [l, n] : counts) {
        if (!listed.contains(l)) out.emplace_back(l, 100.0 * static_cast<double>(n) / total);
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    return out;
}

// ---------------------------------------------------------------------------
// Datasets

EvalDataset make_eval_dataset(std::string name, const TweetDataset& tweets) {
    EvalDataset ds;
    ds.name = std::move(name);
    ds.task = EvalTask::binary;
    ds.labels = {kRelevantLabel};
    ds.skipped = tweets.skipped;
    for (const auto& m : tweets.messages) {
        auto it = m.meta.find(std::string(kGoldBinaryKey));
        if (it == m.meta.end()) {
            ds.skipped++;
            continue;
        }
        ds.items.push_back({m, it->second == "1" ? LabelSet{kRelevantLabel} : LabelSet{}});
    }
    return ds;
}

EvalDataset make_eval_dataset(std::string name, const DisasterDataset& disaster, const CategoryTaxonomy& taxonomy) {
    EvalDataset ds;
    ds.name = std::move(name);
    ds.task = EvalTask::multiclass;
    ds.labels = taxonomy.keys();
    ds.skipped = disaster.skipped;
    for (const auto& item : disaster.items) ds.items.push_back({item.message, item.gold});
    return ds;
}

EvalDataset load_eval_dataset(const std::string& path, const CategoryTaxonomy& taxonomy) {
    const auto slash = path.find_last_of('/');
    const std::string name = slash == std::string::npos ? path : path.substr(slash + 1);
    const bool csv = name.size() >= 4 && name.compare(name.size() - 4, 4, ".csv") == 0;
    if (csv) return make_eval_dataset(name, load_disaster_csv(path, taxonomy), taxonomy);
    return make_eval_dataset(name, load_tweet_ndjson(path));
}

// ---------------------------------------------------------------------------
// Runs

std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("bounded_draw: zero bound");
    // Reject the top partial bucket so every residue is equally likely.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t sample_n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(bounded_draw(rng, i));
        std::swap(idx[i - 1], idx[j]);
    }
    idx.resize(std::min(n, sample_n));
    return idx;
}

std::vector<LabeledPrediction> evaluate_predictions(const EvalDataset& dataset, const TriageEngine& engine,
                                                    std::span<const std::size_t> indices, std::size_t* failed,
                                                    std::size_t* dropped) {
    std::vector<LabeledPrediction> out;
    std::size_t n_failed = 0, n_dropped = 0;
    for (const auto i : indices) {
        const EvalItem& item = dataset.items.at(i);
        try {
            if (dataset.task == EvalTask::binary) {
                const BinaryOutcome b = engine.classify_binary(item.message);
                if (b.mode == ParseMode::failed) {
                    ++n_failed;
                    continue;
                }
                LabeledPrediction p{item.message.id, item.gold, {}, {{kRelevantLabel, b.score}}};
                if (b.relevant) p.predicted.insert(kRelevantLabel);
                out.push_back(std::move(p));
            } else {
                const TriageResult r = engine.triage(item.message);
                if (r.parse_mode == ParseMode::failed) {
                    ++n_failed;
                    continue;
                }
                LabeledPrediction p{item.message.id, item.gold, {}, r.scores};
                for (const auto& [key, _] : r.categories) p.predicted.insert(key);
                out.push_back(std::move(p));
            }
        } catch (const std::invalid_argument&) {
            ++n_dropped;
        }
    }
    if (failed) *failed = n_failed;
    if (dropped) *dropped = n_dropped;
    return out;
}

EvaluationReport run_evaluation(const EvalDataset& dataset, const TriageEngine& engine, const EvalOptions& options) {
    if (dataset.items.empty()) throw EvalError(EvalErrc::bad_dataset, "dataset has no labeled items");
    const auto indices = sample_indices(dataset.items.size(), options.sample_n, options.seed);

    EvaluationReport report;
    const auto& chain = engine.config().backend_chain;
    for (const auto& b : chain) report.backend_id += (report.backend_id.empty() ? "" : ">") + b;
    report.dataset = dataset.name;
    report.task = dataset.task;
    report.n_dataset = dataset.items.size();
    report.n_drawn = indices.size();
    report.seed = options.seed;
    const auto& tmpl =
        default_template(dataset.task == EvalTask::binary ? PromptTask::binary_relevance : PromptTask::multiclass);
    report.template_version = tmpl.version;
    report.template_hash = tmpl.hash();

    const auto predictions = evaluate_predictions(dataset, engine, indices, &report.n_failed, &report.n_dropped);
    if (predictions.empty()) {
        throw EvalError(EvalErrc::empty_input, "no item produced a usable prediction (" +
                                                   std::to_string(report.n_failed) + " failed, " +
                                                   std::to_string(report.n_dropped) + " dropped)");
    }
    report.n_samples = predictions.size();
    const PrfScores prf = micro_prf(predictions);
    report.precision = prf.precision;
    report.recall = prf.recall;
    report.f1 = prf.f1;
    report.accuracy = subset_accuracy(predictions);
    try {
        report.roc_auc = micro_roc_auc(predictions, dataset.labels);
    } catch (const EvalError& e) {
        if (e.code() != EvalErrc::degenerate_input) throw;
        report.footnotes.push_back("ROC-AUC undefined: the sample has a single class.");
    }

    std::vector<LabelSet> gold;
    gold.reserve(predictions.size());
    for (const auto& p : predictions) gold.push_back(p.gold);
    report.prevalence = distribution_report(gold, dataset.labels);

    report.footnotes.insert(report.footnotes.begin(),
                            {"All metrics are micro-averaged over (message, label) pairs.",
                             "Acc. is subset accuracy: the predicted label set must equal the gold set.",
                             std::to_string(report.n_failed) + " item(s) excluded after inference failure, " +
                                 std::to_string(report.n_dropped) + " dropped by the short-message filter."});
    return report;
}

nlohmann::ordered_json report_json(const EvaluationReport& r) {
    nlohmann::ordered_json prevalence = nlohmann::ordered_json::object();
    for (const auto& [label, pct] : r.prevalence) prevalence[label] = pct;
    return {{"backend_id", r.backend_id},
            {"dataset", r.dataset},
            {"task", to_string(r.task)},
            {"precision", r.precision},
            {"recall", r.recall},
            {"f1", r.f1},
            {"roc_auc", r.roc_auc ? nlohmann::ordered_json(*r.roc_auc) : nlohmann::ordered_json(nullptr)},
            {"accuracy", r.accuracy},
            {"n_samples", r.n_samples},
            {"n_drawn", r.n_drawn},
            {"n_dataset", r.n_dataset},
            {"n_failed", r.n_failed},
            {"n_dropped", r.n_dropped},
            {"seed", r.seed},
            {"template_version", r.template_version},
            {"template_hash", r.template_hash},
            {"prevalence_pct", prevalence},
            {"footnotes", r.footnotes}};
}

std::string render_table(std::span<const EvaluationReport> reports) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "%-24s %7s %7s %7s %8s %7s %6s\n", "Backend", "Prec.", "Recall", "F1", "ROC-AUC",
                  "Acc.", "N");
    out += line;
    for (const auto& r : reports) {
        char auc[16];
        if (r.roc_auc) {
            std::snprintf(auc, sizeof auc, "%.4f", *r.roc_auc);
        } else {
            std::snprintf(auc, sizeof auc, "n/a");
        }
        std::snprintf(line, sizeof line, "%-24s %7.4f %7.4f %7.4f %8s %7.4f %6zu\n", r.backend_id.c_str(), r.precision,
                      r.recall, r.f1, auc, r.accuracy, r.n_samples);
        out += line;
    }
    std::set<std::string> seen;
    for (const auto& r : reports) {
        for (const auto& f : r.footnotes) {
            if (seen.insert(f).second) out += "  * " + f + "\n";
        }
        out += "  template " + r.template_version + " " + r.template_hash.substr(0, 12) + ", seed " +
               std::to_string(r.seed) + ", dataset " + r.dataset + "\n";
    }
    return out;
}

}  // namespace crisis
