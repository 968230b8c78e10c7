#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>

namespace crisis {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

std::int64_t epoch_millis(Timestamp t);
Timestamp from_epoch_millis(std::int64_t ms);

/// Accepts ISO-8601 (`2023-02-06T04:17:00.250Z`, optional numeric offset),
/// the `Mon Feb 06 04:17:00 +0000 2023` feed style, or bare epoch millis.
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// Always `YYYY-MM-DDTHH:MM:SS.mmmZ`.
std::string format_timestamp(Timestamp t);

enum class Source { call_transcript, social_feed, app_direct };

std::string_view to_string(Source s);
std::optional<Source> parse_source(std::string_view s);

enum class EmergencyLevel : int { unknown = 0, low = 1, moderate = 2, high = 3, critical = 4 };

std::string_view to_string(EmergencyLevel level);
std::optional<EmergencyLevel> parse_level(std::string_view s);

struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;

    friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

inline constexpr std::size_t kMaxTextChars = 10'000;

struct EmergencyMessage {
    std::string id;
    Source source = Source::social_feed;
    std::string raw_text;
    Timestamp received_at{};
    std::optional<std::string> locale_tag;
    std::optional<GeoPoint> geo;
    std::optional<std::string> reported_contact;
    std::map<std::string, std::string> meta;

    friend bool operator==(const EmergencyMessage&, const EmergencyMessage&) = default;
};

/// SHA-256 hex of `source 0x1F raw_text 0x1F epoch-millis`.
std::string message_id(Source source, std::string_view raw_text, Timestamp received_at);

/// Unvalidated candidate as it comes off a feed or an HTTP body.
struct RawRecord {
    std::string source = "social_feed";
    std::string text;
    std::string received_at;
    std::optional<double> lat;
    std::optional<double> lon;
    std::optional<std::string> contact;
    std::optional<std::string> locale;
    std::map<std::string, std::string> meta;
};

enum class RejectReason { empty_text, bad_geo, bad_timestamp, oversize_text, bad_source, bad_encoding, malformed };

std::string_view to_string(RejectReason r);

struct Rejection {
    RejectReason reason;
    std::string detail;
};

using Validated = std::variant<EmergencyMessage, Rejection>;

/// Never throws; every defect becomes a Rejection.
Validated validate_message(const RawRecord& candidate) noexcept;

using LabelSet = std::set<std::string>;

enum class FeedbackAction { accept, dismiss, edit };

std::string_view to_string(FeedbackAction a);
std::optional<FeedbackAction> parse_feedback_action(std::string_view s);

struct DispatcherFeedback {
    std::string incident_id;
    FeedbackAction action = FeedbackAction::accept;
    std::optional<LabelSet> edited_categories;
    std::optional<std::string> note;
    Timestamp at{};

    friend bool operator==(const DispatcherFeedback&, const DispatcherFeedback&) = default;
};

/// Edit carries categories; accept and dismiss must not.
bool is_well_formed(const DispatcherFeedback& fb);

}  // namespace crisis
