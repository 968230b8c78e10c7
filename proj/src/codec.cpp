#include "crisis/codec.hpp"

namespace crisis {

using nlohmann::json;

void to_json(json& j, const GeoPoint& g) { j = json{{"lat", g.lat}, {"lon", g.lon}}; }

void from_json(const json& j, GeoPoint& g) {
    if (j.is_array()) {
        g.lat = j.at(0).get<double>();
        g.lon = j.at(1).get<double>();
        return;
    }
    g.lat = j.at("lat").get<double>();
    g.lon = j.at("lon").get<double>();
}

void to_json(json& j, const EmergencyMessage& m) {
    j = json{{"id", m.id},
             {"source", to_string(m.source)},
             {"raw_text", m.raw_text},
             {"received_at", format_timestamp(m.received_at)},
             {"locale_tag", m.locale_tag ? json(*m.locale_tag) : json(nullptr)},
             {"geo", m.geo ? json(*m.geo) : json(nullptr)},
             {"reported_contact", m.reported_contact ? json(*m.reported_contact) : json(nullptr)},
             {"meta", m.meta}};
}

void from_json(const json& j, EmergencyMessage& m) {
    m.id = j.at("id").get<std::string>();
    const auto source = parse_source(j.at("source").get<std::string>());
    if (!source) throw std::invalid_argument("bad source in message record");
    m.source = *source;
    m.raw_text = j.at("raw_text").get<std::string>();
    const auto at = parse_timestamp(j.at("received_at").get<std::string>());
    if (!at) throw std::invalid_argument("bad received_at in message record");
    m.received_at = *at;
    m.locale_tag.reset();
    m.geo.reset();
    m.reported_contact.reset();
    if (j.contains("locale_tag") && !j["locale_tag"].is_null()) m.locale_tag = j["locale_tag"].get<std::string>();
    if (j.contains("geo") && !j["geo"].is_null()) m.geo = j["geo"].get<GeoPoint>();
    if (j.contains("reported_contact") && !j["reported_contact"].is_null()) {
        m.reported_contact = j["reported_contact"].get<std::string>();
    }
    m.meta = j.value("meta", std::map<std::string, std::string>{});
}

void to_json(json& j, const DispatcherFeedback& f) {
    j = json{{"incident_id", f.incident_id},
             {"action", to_string(f.action)},
             {"edited_categories", f.edited_categories ? json(*f.edited_categories) : json(nullptr)},
             {"note", f.note ? json(*f.note) : json(nullptr)},
             {"at", format_timestamp(f.at)}};
}

void from_json(const json& j, DispatcherFeedback& f) {
    f.incident_id = j.value("incident_id", std::string{});
    const auto action = parse_feedback_action(j.at("action").get<std::string>());
    if (!action) throw std::invalid_argument("unknown feedback action");
    f.action = *action;
    f.edited_categories.reset();
    f.note.reset();
    if (j.contains("edited_categories") && !j["edited_categories"].is_null()) {
        f.edited_categories = j["edited_categories"].get<LabelSet>();
    }
    if (j.contains("note") && !j["note"].is_null()) f.note = j["note"].get<std::string>();
    if (j.contains("at")) {
        const auto at = parse_timestamp(j["at"].get<std::string>());
        if (!at) throw std::invalid_argument("bad feedback timestamp");
        f.at = *at;
    }
}

void to_json(json& j, const Rejection& r) { j = json{{"reason", to_string(r.reason)}, {"detail", r.detail}}; }

RawRecord raw_record_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("record is not a JSON object");
    RawRecord r;
    r.text = j.at("text").get<std::string>();
    r.source = j.value("source", std::string("social_feed"));
    for (const char* key : {"received_at", "created_at"}) {
        if (!j.contains(key)) continue;
        const auto& v = j[key];
        r.received_at = v.is_number_integer() ? std::to_string(v.get<std::int64_t>()) : v.get<std::string>();
        break;
    }
    if (j.contains("geo") && !j["geo"].is_null()) {
        const auto g = j["geo"].get<GeoPoint>();
        r.lat = g.lat;
        r.lon = g.lon;
    }
    if (j.contains("lat") && !j["lat"].is_null()) r.lat = j["lat"].get<double>();
    if (j.contains("lon") && !j["lon"].is_null()) r.lon = j["lon"].get<double>();
    if (j.contains("contact") && !j["contact"].is_null()) r.contact = j["contact"].get<std::string>();
    if (j.contains("locale") && !j["locale"].is_null()) r.locale = j["locale"].get<std::string>();
    if (j.contains("meta") && j["meta"].is_object()) {
        for (const auto& [k, v] : j["meta"].items()) r.meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
    return r;
}

}  // namespace crisis
