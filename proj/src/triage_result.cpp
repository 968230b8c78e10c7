#include "crisis/triage_result.hpp"

namespace crisis {

using nlohmann::json;

std::string_view to_string(ParseMode m) {
    switch (m) {
        case ParseMode::strict: return "strict";
        case ParseMode::repaired: return "repaired";
        case ParseMode::failed: return "failed";
    }
    return "failed";
}

std::optional<ParseMode> parse_parse_mode(std::string_view s) {
    if (s == "strict") return ParseMode::strict;
    if (s == "repaired") return ParseMode::repaired;
    if (s == "failed") return ParseMode::failed;
    return std::nullopt;
}

std::optional<std::string> top_category(const TriageResult& result, const CategoryTaxonomy& taxonomy) {
    std::optional<std::string> best;
    double best_conf = -1.0;
    for (const auto& label : taxonomy.labels()) {
        auto it = result.categories.find(label.key);
        if (it != result.categories.end() && it->second > best_conf) {
            best = label.key;
            best_conf = it->second;
        }
    }
    return best;
}

namespace {

json optional_string(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

std::optional<std::string> read_optional(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<std::string>();
}

}  // namespace

void to_json(json& j, const TriageResult& r) {
    j = json{{"message_id", r.message_id},
             {"relevant", r.relevant},
             {"categories", r.categories},
             {"level", to_string(r.level)},
             {"location_text", optional_string(r.location_text)},
             {"contact", optional_string(r.contact)},
             {"advisory", optional_string(r.advisory)},
             {"parse_mode", to_string(r.parse_mode)},
             {"backend_id", r.backend_id},
             {"total_latency_ms", r.total_latency_ms},
             {"scores", r.scores}};
}

void from_json(const json& j, TriageResult& r) {
    r.message_id = j.at("message_id").get<std::string>();
    r.relevant = j.at("relevant").get<bool>();
    r.categories = j.at("categories").get<std::map<std::string, double>>();
    r.level = parse_level(j.at("level").get<std::string>()).value_or(EmergencyLevel::unknown);
    r.location_text = read_optional(j, "location_text");
    r.contact = read_optional(j, "contact");
    r.advisory = read_optional(j, "advisory");
    r.parse_mode = parse_parse_mode(j.at("parse_mode").get<std::string>()).value_or(ParseMode::failed);
    r.backend_id = j.value("backend_id", std::string{});
    r.total_latency_ms = j.value("total_latency_ms", 0.0);
    r.scores = j.value("scores", std::map<std::string, double>{});
}

}  // namespace crisis
