#include "crisis/routing.hpp"

#include "crisis/codec.hpp"
#include "crisis/sha256.hpp"
#include "crisis/tomlish.hpp"
#include "crisis/utf8.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

namespace crisis {

using nlohmann::json;

std::string_view to_string(RoutingErrc e) {
    switch (e) {
        case RoutingErrc::unknown_agency: return "unknown_agency";
        case RoutingErrc::unknown_incident: return "unknown_incident";
        case RoutingErrc::illegal_transition: return "illegal_transition";
        case RoutingErrc::bad_table: return "bad_table";
        case RoutingErrc::bad_feedback: return "bad_feedback";
    }
    return "bad_table";
}

std::string_view to_string(IncidentStatus s) {
    switch (s) {
        case IncidentStatus::pending: return "pending";
        case IncidentStatus::acknowledged: return "acknowledged";
        case IncidentStatus::dismissed: return "dismissed";
        case IncidentStatus::edited: return "edited";
    }
    return "pending";
}

bool is_open(IncidentStatus s) { return s == IncidentStatus::pending || s == IncidentStatus::edited; }

// ---------------------------------------------------------------------------
// Table

const std::string& RoutingTable::agency_for(const std::string& category) const {
    auto it = category_to_agency.find(category);
    return it == category_to_agency.end() ? default_agency : it->second;
}

int RoutingTable::weight(EmergencyLevel level) const {
    auto it = level_weights.find(level);
    return it == level_weights.end() ? 1 : it->second;
}

std::set<std::string> RoutingTable::agencies() const {
    std::set<std::string> out{default_agency};
    for (const auto& [_, agency] : category_to_agency) out.insert(agency);
    return out;
}

RoutingTable load_routing_table(std::string_view text) {
    tomlish::Document doc;
    try {
        doc = tomlish::parse(text);
    } catch (const tomlish::ParseError& e) {
        throw RoutingError(RoutingErrc::bad_table, e.what());
    }
    RoutingTable table;
    const auto* def = tomlish::find(doc.root, "default_agency");
    if (!def || !def->as_string() || def->as_string()->empty()) {
        throw RoutingError(RoutingErrc::bad_table, "default_agency must be a non-empty string");
    }
    table.default_agency = *def->as_string();
    if (auto it = doc.tables.find("categories"); it != doc.tables.end()) {
        for (const auto& [key, value] : it->second) {
            if (!value.as_string() || value.as_string()->empty()) {
                throw RoutingError(RoutingErrc::bad_table, "agency for '" + key + "' must be a non-empty string");
            }
            table.category_to_agency[key] = *value.as_string();
        }
    }
    if (auto it = doc.tables.find("levels"); it != doc.tables.end()) {
        for (const auto& [key, value] : it->second) {
            const auto level = parse_level(key);
            if (!level) throw RoutingError(RoutingErrc::bad_table, "unknown level '" + key + "'");
            if (!value.as_int()) throw RoutingError(RoutingErrc::bad_table, "weight for '" + key + "' must be an integer");
            table.level_weights[*level] = static_cast<int>(*value.as_int());
        }
    }
    for (const auto& [level, w] : table.level_weights) {
        if (w <= 0) throw RoutingError(RoutingErrc::bad_table, "weights must be positive");
    }
    const std::array<EmergencyLevel, 4> named{EmergencyLevel::low, EmergencyLevel::moderate, EmergencyLevel::high,
                                              EmergencyLevel::critical};
    for (std::size_t i = 1; i < named.size(); ++i) {
        if (table.weight(named[i]) <= table.weight(named[i - 1])) {
            throw RoutingError(RoutingErrc::bad_table, "weights must increase strictly with level");
        }
    }
    return table;
}

std::vector<std::string> validate_routing(const RoutingTable& table, const CategoryTaxonomy& taxonomy) {
    std::vector<std::string> problems;
    if (table.default_agency.empty()) problems.push_back("no default agency");
    for (const auto& [key, agency] : table.category_to_agency) {
        if (!taxonomy.contains(key)) problems.push_back("routing entry for unknown category '" + key + "'");
    }
    for (const auto& [level, w] : table.level_weights) {
        if (w <= 0) problems.push_back("non-positive weight for " + std::string(to_string(level)));
    }
    return problems;
}

// ---------------------------------------------------------------------------
// JSON

void to_json(json& j, const IncidentRecord& r) {
    j = json{{"incident_id", r.incident_id},
             {"agency_id", r.agency_id},
             {"categories", r.categories},
             {"level", to_string(r.level)},
             {"location_cell", r.location_cell},
             {"message_ids", r.message_ids},
             {"created_at", format_timestamp(r.created_at)},
             {"status", to_string(r.status)},
             {"feedback", r.feedback}};
}

void to_json(json& j, const NotificationRecord& n) {
    j = json{{"incident_id", n.incident_id},
             {"agency_id", n.agency_id},
             {"payload_digest", n.payload_digest},
             {"at", format_timestamp(n.at)}};
}

void to_json(json& j, const RoutingInput& in) {
    j = json{{"result", in.result},
             {"geo", in.geo ? json(*in.geo) : json(nullptr)},
             {"received_at", format_timestamp(in.received_at)}};
}

void from_json(const json& j, RoutingInput& in) {
    in.result = j.at("result").get<TriageResult>();
    in.geo.reset();
    if (j.contains("geo") && !j["geo"].is_null()) in.geo = j["geo"].get<GeoPoint>();
    const auto at = parse_timestamp(j.at("received_at").get<std::string>());
    if (!at) throw std::invalid_argument("bad received_at in routing input");
    in.received_at = *at;
}

std::string location_cell(const std::optional<GeoPoint>& geo, const std::optional<std::string>& location_text,
                          const std::string& message_id, int decimals) {
    if (geo) {
        const double scale = std::pow(10.0, decimals);
        auto fmt = [&](double v) {
            double r = std::round(v * scale) / scale;
            if (r == 0.0) r = 0.0;  // no "-0.00"
            char buf[48];
            std::snprintf(buf, sizeof buf, "%.*f", decimals, r);
            return std::string(buf);
        };
        return "geo:" + fmt(geo->lat) + "," + fmt(geo->lon);
    }
    if (location_text) {
        std::string norm;
        for (const auto& w : utf8::split_whitespace(utf8::to_lower(*location_text))) {
            norm += (norm.empty() ? "" : " ") + w;
        }
        if (!norm.empty()) return "loc:" + norm;
    }
    return "msg:" + message_id;
}

// ---------------------------------------------------------------------------
// Router

Router::Router(RoutingTable table, CategoryTaxonomy taxonomy, RouterConfig config)
    : table_(std::move(table)), taxonomy_(std::move(taxonomy)), config_(config) {
    for (const auto& agency : table_.agencies()) queues_[agency];
}

Router::QueueKey Router::key_for(const IncidentRecord& r) const {
    return {-table_.weight(r.level), epoch_millis(r.created_at), r.incident_id};
}

void Router::enqueue(const IncidentRecord& r) { queues_[r.agency_id].insert(key_for(r)); }

void Router::dequeue(const IncidentRecord& r) { queues_[r.agency_id].erase(key_for(r)); }

NotificationRecord Router::notify(const IncidentRecord& r, Timestamp at) {
    NotificationRecord n{r.incident_id, r.agency_id, sha256_hex(json(r).dump()), at};
    notifications_.push_back(n);
    return n;
}

std::string Router::agency_for_categories(const std::map<std::string, double>& confidences) const {
    TriageResult probe;
    probe.categories = confidences;
    const auto top = top_category(probe, taxonomy_);
    return top ? table_.agency_for(*top) : table_.default_agency;
}

RouteOutcome Router::route(const RoutingInput& input) {
    const TriageResult& result = input.result;
    RouteOutcome outcome;
    if (!result.relevant || result.parse_mode == ParseMode::failed) {
        review_.push_back({result.message_id, result.relevant, result.parse_mode});
        outcome.kind = RouteOutcome::Kind::reviewed;
        return outcome;
    }

    const std::string agency = agency_for_categories(result.categories);
    const std::string cell =
        location_cell(input.geo, result.location_text, result.message_id, config_.geo_decimals);
    LabelSet categories;
    for (const auto& [key, _] : result.categories) categories.insert(key);

    for (auto& [id, incident] : incidents_) {
        if (incident.status != IncidentStatus::pending || incident.agency_id != agency ||
            incident.location_cell != cell) {
            continue;
        }
        const auto gap = input.received_at - incident.created_at;
        if (gap > config_.merge_window || -gap > config_.merge_window) continue;
        bool overlap = false;
        for (const auto& c : categories) overlap = overlap || incident.categories.contains(c);
        if (!overlap) continue;

        dequeue(incident);
        if (std::find(incident.message_ids.begin(), incident.message_ids.end(), result.message_id) ==
            incident.message_ids.end()) {
            incident.message_ids.push_back(result.message_id);
        }
        incident.categories.insert(categories.begin(), categories.end());
        incident.level = std::max(incident.level, result.level);
        enqueue(incident);
        outcome.kind = RouteOutcome::Kind::merged;
        outcome.incident = incident;
        return outcome;
    }

    char buf[32];
    std::snprintf(buf, sizeof buf, "INC-%06zu", next_id_++);
    IncidentRecord incident;
    incident.incident_id = buf;
    incident.agency_id = agency;
    incident.categories = std::move(categories);
    incident.level = result.level;
    incident.location_cell = cell;
    incident.message_ids = {result.message_id};
    incident.created_at = input.received_at;
    incident.status = IncidentStatus::pending;
    enqueue(incident);
    auto [it, _] = incidents_.emplace(incident.incident_id, std::move(incident));
    outcome.kind = RouteOutcome::Kind::created;
    outcome.incident = it->second;
    outcome.notification = notify(it->second, it->second.created_at);
    return outcome;
}

std::vector<IncidentRecord> Router::queue(const std::string& agency_id) const {
    auto it = queues_.find(agency_id);
    if (it == queues_.end()) throw RoutingError(RoutingErrc::unknown_agency, agency_id);
    std::vector<IncidentRecord> out;
    for (const auto& key : it->second) out.push_back(incidents_.at(std::get<2>(key)));
    return out;
}

std::optional<IncidentRecord> Router::next_for_agency(const std::string& agency_id) const {
    auto it = queues_.find(agency_id);
    if (it == queues_.end()) throw RoutingError(RoutingErrc::unknown_agency, agency_id);
    if (it->second.empty()) return std::nullopt;
    return incidents_.at(std::get<2>(*it->second.begin()));
}

std::optional<IncidentRecord> Router::incident(const std::string& incident_id) const {
    auto it = incidents_.find(incident_id);
    if (it == incidents_.end()) return std::nullopt;
    return it->second;
}

FeedbackOutcome Router::record_feedback(const DispatcherFeedback& feedback) {
    auto it = incidents_.find(feedback.incident_id);
    if (it == incidents_.end()) throw RoutingError(RoutingErrc::unknown_incident, feedback.incident_id);
    if (!is_well_formed(feedback)) {
        throw RoutingError(RoutingErrc::bad_feedback, "edit needs categories; accept/dismiss must not carry them");
    }
    IncidentRecord& incident = it->second;
    if (!is_open(incident.status)) {
        throw RoutingError(RoutingErrc::illegal_transition,
                           std::string(to_string(incident.status)) + " -> " + std::string(to_string(feedback.action)));
    }
    if (feedback.action == FeedbackAction::edit) {
        for (const auto& c : *feedback.edited_categories) {
            if (!taxonomy_.contains(c)) throw RoutingError(RoutingErrc::bad_feedback, "unknown category " + c);
        }
    }

    FeedbackOutcome outcome;
    dequeue(incident);
    incident.feedback.push_back(feedback);
    switch (feedback.action) {
        case FeedbackAction::accept:
            incident.status = IncidentStatus::acknowledged;
            break;
        case FeedbackAction::dismiss:
            incident.status = IncidentStatus::dismissed;
            break;
        case FeedbackAction::edit: {
            incident.status = IncidentStatus::edited;
            incident.categories = *feedback.edited_categories;
            std::map<std::string, double> flat;
            for (const auto& c : incident.categories) flat[c] = 1.0;
            const std::string agency = agency_for_categories(flat);
            const bool moved = agency != incident.agency_id;
            incident.agency_id = agency;
            enqueue(incident);
            if (moved) outcome.notification = notify(incident, feedback.at);
            break;
        }
    }
    outcome.incident = incident;
    return outcome;
}

std::map<std::string, double> Router::feedback_stats() const {
    std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
    for (const auto& [_, incident] : incidents_) {
        if (incident.status != IncidentStatus::acknowledged && incident.status != IncidentStatus::dismissed) continue;
        for (const auto& c : incident.categories) {
            auto& [acc, dis] = counts[c];
            (incident.status == IncidentStatus::acknowledged ? acc : dis)++;
        }
    }
    std::map<std::string, double> rates;
    for (const auto& [c, ad] : counts) {
        const auto total = ad.first + ad.second;
        if (total > 0) rates[c] = static_cast<double>(ad.first) / static_cast<double>(total);
    }
    return rates;
}

std::size_t Router::routed_message_count() const {
    std::size_t n = 0;
    for (const auto& [_, incident] : incidents_) n += incident.message_ids.size();
    return n;
}

json Router::dump_state() const {
    json queues = json::object();
    for (const auto& [agency, keys] : queues_) {
        json ids = json::array();
        for (const auto& key : keys) ids.push_back(std::get<2>(key));
        queues[agency] = ids;
    }
    json incidents = json::array();
    for (const auto& [_, incident] : incidents_) incidents.push_back(incident);
    json review = json::array();
    for (const auto& r : review_) {
        review.push_back({{"message_id", r.message_id}, {"relevant", r.relevant}, {"parse_mode", to_string(r.parse_mode)}});
    }
    return json{{"queues", queues},
                {"incidents", incidents},
                {"review", review},
                {"notifications", notifications_},
                {"feedback_stats", feedback_stats()},
                {"next_incident", next_id_}};
}

}  // namespace crisis
