#pragma once

#include "crisis/message.hpp"

#include <nlohmann/json.hpp>

// JSON mappings for the shared message types. Field names here are part of
// the HTTP and journal formats.
namespace crisis {

void to_json(nlohmann::json& j, const GeoPoint& g);
void from_json(const nlohmann::json& j, GeoPoint& g);

void to_json(nlohmann::json& j, const EmergencyMessage& m);
void from_json(const nlohmann::json& j, EmergencyMessage& m);

void to_json(nlohmann::json& j, const DispatcherFeedback& f);
void from_json(const nlohmann::json& j, DispatcherFeedback& f);

void to_json(nlohmann::json& j, const Rejection& r);

/// Lenient reader for inbound bodies: `text` required; `source`,
/// `received_at` (string or epoch millis), `geo`/`lat`/`lon`, `contact`,
/// `locale`, `meta` optional. Throws nlohmann::json::exception on type errors.
RawRecord raw_record_from_json(const nlohmann::json& j);

}  // namespace crisis
