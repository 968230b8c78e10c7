#include "crisis/message.hpp"

#include "crisis/sha256.hpp"
#include "crisis/utf8.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace crisis {

namespace {

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct Civil {
    std::int64_t y;
    unsigned m, d;
};

Civil civil_from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return {y + (m <= 2), m, d};
}

unsigned days_in_month(std::int64_t y, unsigned m) {
    static constexpr std::array<unsigned, 12> kDays{31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    return m == 2 && leap ? 29 : kDays[m - 1];
}

class Cursor {
public:
    explicit Cursor(std::string_view s) : s_(s) {}

    bool done() const { return pos_ >= s_.size(); }
    char peek() const { return done() ? '\0' : s_[pos_]; }

    bool eat(char c) {
        if (peek() != c) return false;
        ++pos_;
        return true;
    }

    std::optional<int> digits(std::size_t count) {
        if (pos_ + count > s_.size()) return std::nullopt;
        int value = 0;
        for (std::size_t i = 0; i < count; ++i) {
            const char c = s_[pos_ + i];
            if (c < '0' || c > '9') return std::nullopt;
            value = value * 10 + (c - '0');
        }
        pos_ += count;
        return value;
    }

    std::string_view word(std::size_t count) {
        if (pos_ + count > s_.size()) return {};
        auto w = s_.substr(pos_, count);
        pos_ += count;
        return w;
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
};

std::optional<Timestamp> make_time(std::int64_t y, int mo, int d, int h, int mi, int s, int ms, int offset_min) {
    if (mo < 1 || mo > 12 || d < 1 || d > static_cast<int>(days_in_month(y, static_cast<unsigned>(mo)))) {
        return std::nullopt;
    }
    if (h > 23 || mi > 59 || s > 60) return std::nullopt;
    const std::int64_t days = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
    const std::int64_t secs = days * 86400 + h * 3600 + mi * 60 + s - offset_min * 60;
    return from_epoch_millis(secs * 1000 + ms);
}

std::optional<int> parse_offset(Cursor& c) {
    if (c.eat('Z') || c.eat('z')) return 0;
    const char sign = c.peek();
    if (sign != '+' && sign != '-') return std::nullopt;
    c.eat(sign);
    auto hh = c.digits(2);
    c.eat(':');
    auto mm = c.digits(2);
    if (!hh || !mm || *hh > 23 || *mm > 59) return std::nullopt;
    const int total = *hh * 60 + *mm;
    return sign == '-' ? -total : total;
}

std::optional<Timestamp> parse_iso(std::string_view text) {
    Cursor c(text);
    auto y = c.digits(4);
    if (!y || !c.eat('-')) return std::nullopt;
    auto mo = c.digits(2);
    if (!mo || !c.eat('-')) return std::nullopt;
    auto d = c.digits(2);
    if (!d || !(c.eat('T') || c.eat('t') || c.eat(' '))) return std::nullopt;
    auto h = c.digits(2);
    if (!h || !c.eat(':')) return std::nullopt;
    auto mi = c.digits(2);
    if (!mi || !c.eat(':')) return std::nullopt;
    auto s = c.digits(2);
    if (!s) return std::nullopt;
    int ms = 0;
    if (c.eat('.')) {
        int scale = 100;
        bool any = false;
        while (c.peek() >= '0' && c.peek() <= '9') {
            ms += (c.peek() - '0') * scale;
            scale /= 10;
            any = true;
            c.eat(c.peek());
        }
        if (!any) return std::nullopt;
    }
    auto offset = parse_offset(c);
    if (!offset || !c.done()) return std::nullopt;
    return make_time(*y, *mo, *d, *h, *mi, *s, ms, *offset);
}

// "Mon Feb 06 04:17:00 +0000 2023"
std::optional<Timestamp> parse_feed_style(std::string_view text) {
    static constexpr std::array<std::string_view, 12> kMonths{"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                                              "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
    Cursor c(text);
    c.word(3);
    if (!c.eat(' ')) return std::nullopt;
    const auto mon = c.word(3);
    int month = 0;
    for (std::size_t i = 0; i < kMonths.size(); ++i) {
        if (kMonths[i] == mon) month = static_cast<int>(i) + 1;
    }
    if (month == 0 || !c.eat(' ')) return std::nullopt;
    auto d = c.digits(2);
    if (!d || !c.eat(' ')) return std::nullopt;
    auto h = c.digits(2);
    if (!h || !c.eat(':')) return std::nullopt;
    auto mi = c.digits(2);
    if (!mi || !c.eat(':')) return std::nullopt;
    auto s = c.digits(2);
    if (!s || !c.eat(' ')) return std::nullopt;
    auto offset = parse_offset(c);
    if (!offset || !c.eat(' ')) return std::nullopt;
    auto y = c.digits(4);
    if (!y || !c.done()) return std::nullopt;
    return make_time(*y, month, *d, *h, *mi, *s, 0, *offset);
}

bool finite_in(const std::optional<double>& v, double bound) {
    return v && std::isfinite(*v) && *v >= -bound && *v <= bound;
}

std::string trim(std::string_view s) {
    auto tokens = utf8::split_whitespace(s);
    if (tokens.empty()) return {};
    // Trim only; interior spacing is preserved.
    const auto first = s.find(tokens.front());
    const auto last = s.rfind(tokens.back()) + tokens.back().size();
    return std::string(s.substr(first, last - first));
}

}  // namespace

std::int64_t epoch_millis(Timestamp t) { return t.time_since_epoch().count(); }

Timestamp from_epoch_millis(std::int64_t ms) { return Timestamp{std::chrono::milliseconds{ms}}; }

std::optional<Timestamp> parse_timestamp(std::string_view text) {
    if (text.empty()) return std::nullopt;
    const bool numeric = text.find_first_not_of("-0123456789") == std::string_view::npos;
    if (numeric) {
        std::int64_t ms = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), ms);
        if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
        return from_epoch_millis(ms);
    }
    if (auto t = parse_iso(text)) return t;
    return parse_feed_style(text);
}

std::string format_timestamp(Timestamp t) {
    const std::int64_t ms_total = epoch_millis(t);
    std::int64_t days = ms_total / 86'400'000;
    std::int64_t rem = ms_total % 86'400'000;
    if (rem < 0) {
        rem += 86'400'000;
        --days;
    }
    const Civil c = civil_from_days(days);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lld.%03lldZ", static_cast<long long>(c.y), c.m,
                  c.d, static_cast<long long>(rem / 3'600'000), static_cast<long long>(rem / 60'000 % 60),
                  static_cast<long long>(rem / 1000 % 60), static_cast<long long>(rem % 1000));
    return buf;
}

std::string_view to_string(Source s) {
    switch (s) {
        case Source::call_transcript: return "call_transcript";
        case Source::social_feed: return "social_feed";
        case Source::app_direct: return "app_direct";
    }
    return "social_feed";
}

std::optional<Source> parse_source(std::string_view s) {
    if (s == "call_transcript") return Source::call_transcript;
    if (s == "social_feed") return Source::social_feed;
    if (s == "app_direct") return Source::app_direct;
    return std::nullopt;
}

std::string_view to_string(EmergencyLevel level) {
    switch (level) {
        case EmergencyLevel::critical: return "critical";
        case EmergencyLevel::high: return "high";
        case EmergencyLevel::moderate: return "moderate";
        case EmergencyLevel::low: return "low";
        case EmergencyLevel::unknown: return "unknown";
    }
    return "unknown";
}

std::optional<EmergencyLevel> parse_level(std::string_view s) {
    if (s == "critical") return EmergencyLevel::critical;
    if (s == "high") return EmergencyLevel::high;
    if (s == "moderate") return EmergencyLevel::moderate;
    if (s == "low") return EmergencyLevel::low;
    if (s == "unknown") return EmergencyLevel::unknown;
    return std::nullopt;
}

std::string message_id(Source source, std::string_view raw_text, Timestamp received_at) {
    std::string encoded;
    encoded.reserve(raw_text.size() + 40);
    encoded.append(to_string(source));
    encoded.push_back('\x1F');
    encoded.append(raw_text);
    encoded.push_back('\x1F');
    encoded.append(std::to_string(epoch_millis(received_at)));
    return sha256_hex(encoded);
}

std::string_view to_string(RejectReason r) {
    switch (r) {
        case RejectReason::empty_text: return "empty_text";
        case RejectReason::bad_geo: return "bad_geo";
        case RejectReason::bad_timestamp: return "bad_timestamp";
        case RejectReason::oversize_text: return "oversize_text";
        case RejectReason::bad_source: return "bad_source";
        case RejectReason::bad_encoding: return "bad_encoding";
        case RejectReason::malformed: return "malformed";
    }
    return "malformed";
}

Validated validate_message(const RawRecord& candidate) noexcept {
    try {
        if (!utf8::is_valid(candidate.text)) return Rejection{RejectReason::bad_encoding, "text is not valid UTF-8"};
        std::string text = trim(candidate.text);
        if (text.empty()) return Rejection{RejectReason::empty_text, "text is empty after trimming"};
        if (utf8::length(text) > kMaxTextChars) {
            return Rejection{RejectReason::oversize_text, "text exceeds 10000 characters"};
        }
        const auto source = parse_source(candidate.source);
        if (!source) return Rejection{RejectReason::bad_source, "unknown source '" + candidate.source + "'"};
        const auto at = parse_timestamp(candidate.received_at);
        if (!at) return Rejection{RejectReason::bad_timestamp, "unparseable timestamp"};

        std::optional<GeoPoint> geo;
        if (candidate.lat || candidate.lon) {
            if (!finite_in(candidate.lat, 90.0) || !finite_in(candidate.lon, 180.0)) {
                return Rejection{RejectReason::bad_geo, "coordinates out of range"};
            }
            geo = GeoPoint{*candidate.lat, *candidate.lon};
        }
        for (const auto* field : {&candidate.contact, &candidate.locale}) {
            if (*field && !utf8::is_valid(**field)) return Rejection{RejectReason::bad_encoding, "field is not UTF-8"};
        }

        EmergencyMessage msg;
        msg.source = *source;
        msg.received_at = *at;
        msg.id = message_id(*source, text, *at);
        msg.raw_text = std::move(text);
        msg.geo = geo;
        if (candidate.contact && !candidate.contact->empty()) msg.reported_contact = candidate.contact;
        if (candidate.locale && !candidate.locale->empty()) msg.locale_tag = candidate.locale;
        msg.meta = candidate.meta;
        return msg;
    } catch (const std::exception& e) {
        return Rejection{RejectReason::malformed, e.what()};
    }
}

std::string_view to_string(FeedbackAction a) {
    switch (a) {
        case FeedbackAction::accept: return "accept";
        case FeedbackAction::dismiss: return "dismiss";
        case FeedbackAction::edit: return "edit";
    }
    return "accept";
}

std::optional<FeedbackAction> parse_feedback_action(std::string_view s) {
    if (s == "accept") return FeedbackAction::accept;
    if (s == "dismiss") return FeedbackAction::dismiss;
    if (s == "edit") return FeedbackAction::edit;
    return std::nullopt;
}

bool is_well_formed(const DispatcherFeedback& fb) {
    if (fb.action == FeedbackAction::edit) return fb.edited_categories.has_value() && !fb.edited_categories->empty();
    return !fb.edited_categories.has_value();
}

}  // namespace crisis
