#pragma once

#include "crisis/message.hpp"
#include "crisis/taxonomy.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>

namespace crisis {

enum class ParseMode { strict, repaired, failed };

std::string_view to_string(ParseMode m);
std::optional<ParseMode> parse_parse_mode(std::string_view s);

inline constexpr double kPredictionThreshold = 0.5;

struct TriageResult {
    std::string message_id;
    bool relevant = false;
    /// Predicted labels (confidence >= 0.5) only.
    std::map<std::string, double> categories;
    EmergencyLevel level = EmergencyLevel::unknown;
    std::optional<std::string> location_text;
    std::optional<std::string> contact;
    std::optional<std::string> advisory;
    ParseMode parse_mode = ParseMode::failed;
    std::string backend_id;
    double total_latency_ms = 0.0;
    /// Score for every taxonomy label, predicted or not; feeds ROC-AUC.
    std::map<std::string, double> scores;

    friend bool operator==(const TriageResult&, const TriageResult&) = default;
};

/// Highest-confidence category; ties go to the earlier taxonomy label.
std::optional<std::string> top_category(const TriageResult& result, const CategoryTaxonomy& taxonomy);

void to_json(nlohmann::json& j, const TriageResult& r);
void from_json(const nlohmann::json& j, TriageResult& r);

}  // namespace crisis
