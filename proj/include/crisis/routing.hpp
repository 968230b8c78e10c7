#pragma once

#include "crisis/error.hpp"
#include "crisis/message.hpp"
#include "crisis/taxonomy.hpp"
#include "crisis/triage_result.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace crisis {

enum class RoutingErrc { unknown_agency, unknown_incident, illegal_transition, bad_table, bad_feedback };

std::string_view to_string(RoutingErrc e);

using RoutingError = CodedError<RoutingErrc>;

struct RoutingTable {
    std::map<std::string, std::string> category_to_agency;
    std::string default_agency;
    std::map<EmergencyLevel, int> level_weights{{EmergencyLevel::critical, 8},
                                                {EmergencyLevel::high, 4},
                                                {EmergencyLevel::moderate, 2},
                                                {EmergencyLevel::low, 1},
                                                {EmergencyLevel::unknown, 1}};

    const std::string& agency_for(const std::string& category) const;
    int weight(EmergencyLevel level) const;
    /// Every agency the table can route to, default included.
    std::set<std::string> agencies() const;
};

/// `default_agency = "..."`, `[categories] key = "agency"`, `[levels] critical = 8`.
RoutingTable load_routing_table(std::string_view text);

/// Coherence problems against a taxonomy; empty when the pair is usable.
std::vector<std::string> validate_routing(const RoutingTable& table, const CategoryTaxonomy& taxonomy);

enum class IncidentStatus { pending, acknowledged, dismissed, edited };

std::string_view to_string(IncidentStatus s);

/// Pending and edited incidents stay queued; the other two are closed.
bool is_open(IncidentStatus s);

struct IncidentRecord {
    std::string incident_id;
    std::string agency_id;
    LabelSet categories;
    EmergencyLevel level = EmergencyLevel::unknown;
    std::string location_cell;
    std::vector<std::string> message_ids;
    Timestamp created_at{};
    IncidentStatus status = IncidentStatus::pending;
    std::vector<DispatcherFeedback> feedback;

    friend bool operator==(const IncidentRecord&, const IncidentRecord&) = default;
};

struct NotificationRecord {
    std::string incident_id;
    std::string agency_id;
    std::string payload_digest;
    Timestamp at{};
};

void to_json(nlohmann::json& j, const IncidentRecord& r);
void to_json(nlohmann::json& j, const NotificationRecord& n);

/// Geo rounded to `decimals` when present, else the lowercased,
/// space-collapsed location text, else a per-message cell that never merges.
std::string location_cell(const std::optional<GeoPoint>& geo, const std::optional<std::string>& location_text,
                          const std::string& message_id, int decimals = 2);

struct RoutingInput {
    TriageResult result;
    std::optional<GeoPoint> geo;
    Timestamp received_at{};
};

void to_json(nlohmann::json& j, const RoutingInput& in);
void from_json(const nlohmann::json& j, RoutingInput& in);

struct RouterConfig {
    std::chrono::milliseconds merge_window{15 * 60 * 1000};
    int geo_decimals = 2;
};

struct RouteOutcome {
    enum class Kind { created, merged, reviewed };
    Kind kind = Kind::reviewed;
    std::optional<IncidentRecord> incident;
    std::optional<NotificationRecord> notification;
};

struct FeedbackOutcome {
    IncidentRecord incident;
    std::optional<NotificationRecord> notification;
};

struct ReviewItem {
    std::string message_id;
    bool relevant = false;
    ParseMode parse_mode = ParseMode::failed;
};

/// Incident state. Not internally synchronized: one writer applies every
/// mutation, readers take copies.
class Router {
public:
    Router(RoutingTable table, CategoryTaxonomy taxonomy, RouterConfig config = {});

    /// Relevant, parsed results become a new or merged incident; the rest go
    /// to the review queue.
    RouteOutcome route(const RoutingInput& input);

    /// Highest-priority open incident, left in place. Order: weight desc,
    /// created_at asc, incident_id asc.
    std::optional<IncidentRecord> next_for_agency(const std::string& agency_id) const;
    std::vector<IncidentRecord> queue(const std::string& agency_id) const;

    std::optional<IncidentRecord> incident(const std::string& incident_id) const;

    FeedbackOutcome record_feedback(const DispatcherFeedback& feedback);

    /// accepted / (accepted + dismissed) per category over closed incidents.
    std::map<std::string, double> feedback_stats() const;

    const std::vector<ReviewItem>& review_queue() const noexcept { return review_; }
    const std::vector<NotificationRecord>& notifications() const noexcept { return notifications_; }
    std::size_t incident_count() const noexcept { return incidents_.size(); }
    std::size_t routed_message_count() const;

    const RoutingTable& table() const noexcept { return table_; }
    const CategoryTaxonomy& taxonomy() const noexcept { return taxonomy_; }

    /// Canonical JSON of queues, incidents, review queue and stats.
    nlohmann::json dump_state() const;

private:
    using QueueKey = std::tuple<int, std::int64_t, std::string>;  // (-weight, created millis, id)

    QueueKey key_for(const IncidentRecord& r) const;
    void enqueue(const IncidentRecord& r);
    void dequeue(const IncidentRecord& r);
    NotificationRecord notify(const IncidentRecord& r, Timestamp at);
    std::string agency_for_categories(const std::map<std::string, double>& confidences) const;

    RoutingTable table_;
    CategoryTaxonomy taxonomy_;
    RouterConfig config_;
    std::map<std::string, IncidentRecord> incidents_;
    std::map<std::string, std::set<QueueKey>> queues_;
    std::vector<ReviewItem> review_;
    std::vector<NotificationRecord> notifications_;
    std::size_t next_id_ = 1;
};

}  // namespace crisis
