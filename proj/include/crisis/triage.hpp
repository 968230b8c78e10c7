#pragma once

#include "crisis/inference.hpp"
#include "crisis/message.hpp"
#include "crisis/prompting.hpp"
#include "crisis/taxonomy.hpp"
#include "crisis/textprep.hpp"
#include "crisis/triage_result.hpp"

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace crisis {

/// Confidence given to every label recovered by the repair scan.
inline constexpr double kRepairConfidence = 0.51;

struct ParsedOutput {
    ParseMode mode = ParseMode::failed;
    bool relevant = false;
    std::map<std::string, double> labels;
    std::optional<EmergencyLevel> level;
    std::optional<std::string> location;
    std::optional<std::string> contact;
};

/// Strict: one JSON object `{relevant, labels:[{key, confidence}], level,
/// location, contact}` (labels optional for binary answers; unknown keys are
/// ignored; a missing confidence means 1.0). Otherwise a repair scan for
/// taxonomy keys and level words as whole words. Otherwise failed.
ParsedOutput parse_model_output(std::string_view text, const CategoryTaxonomy& taxonomy);

struct Entities {
    std::optional<std::string> contact;
    std::optional<std::string> location_text;
    std::optional<EmergencyLevel> level_hint;
};

/// Heuristics over the caller's own words:
///  - contact: first run of 7-15 digits (spaces, dashes and parens allowed
///    between them, optional leading '+'), normalized to digits and '+';
///  - location: the geo point when present, else the longest run (max 6) of
///    capitalized tokens after "at", "in", "near" or "on";
///  - level hint: highest level whose keyword phrases occur.
Entities extract_entities(std::string_view raw_text, const std::optional<GeoPoint>& geo = std::nullopt);

/// "lat,lon" in shortest round-trip decimal form.
std::string format_geo(const GeoPoint& geo);

struct PipelineConfig {
    CategoryTaxonomy taxonomy;
    /// Backends tried in order for every stage.
    std::vector<std::string> backend_chain{"baseline"};
    std::chrono::milliseconds deadline = kDefaultDeadline;
    int max_retries = 1;
    std::size_t min_tokens = kDefaultMinTokens;
    std::size_t k_shot = 0;
    std::vector<Exemplar> exemplars;
    std::vector<GuidelineSnippet> snippets;
    std::size_t snippet_count = kDefaultSnippetCount;
    /// Advisory generation is off when unset.
    std::optional<Audience> advisory_audience;
};

/// Outcome of the relevance stage alone, used by binary evaluation.
struct BinaryOutcome {
    bool relevant = false;
    double score = 0.0;
    ParseMode mode = ParseMode::failed;
    std::string backend_id;
};

class TriageEngine {
public:
    TriageEngine(PipelineConfig config, std::shared_ptr<InferenceHub> hub,
                 std::shared_ptr<const LocaleDetector> detector = nullptr);

    CleanText prepare(const EmergencyMessage& message) const;

    /// Binary relevance, then multiclass when relevant. Inference failures
    /// fall through the backend chain; a backend that failed is not retried
    /// for later stages of the same message. If every backend fails the
    /// result has parse_mode=failed. Throws std::invalid_argument when the
    /// short filter drops the message.
    TriageResult triage(const EmergencyMessage& message) const;

    BinaryOutcome classify_binary(const EmergencyMessage& message) const;

    /// Model advisory via the chain, else the matched snippet texts joined
    /// by newlines, else nullopt. Requires result.relevant.
    std::optional<std::string> generate_advisory(const TriageResult& result, std::string_view message_text,
                                                 Audience audience) const;

    const PipelineConfig& config() const noexcept { return config_; }
    InferenceHub& hub() const noexcept { return *hub_; }

private:
    struct StageOutcome {
        ParsedOutput parsed;
        std::optional<std::map<std::string, double>> label_scores;
        std::string backend_id;
    };

    std::optional<std::string> advisory_skipping(const TriageResult& result, std::string_view message_text,
                                                 Audience audience, const std::vector<std::string>& skip) const;

    std::optional<StageOutcome> run_stage(const RenderedPrompt& prompt, std::vector<std::string>& failed) const;

    PipelineConfig config_;
    std::shared_ptr<InferenceHub> hub_;
    std::shared_ptr<const LocaleDetector> detector_;
};

/// Free-function form of TriageEngine::triage.
TriageResult triage_message(const EmergencyMessage& message, const PipelineConfig& config,
                            std::shared_ptr<InferenceHub> hub, std::shared_ptr<const LocaleDetector> detector = nullptr);

}  // namespace crisis
