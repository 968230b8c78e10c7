#include "generators.hpp"

#include "crisis/utf8.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cstdio>

namespace crisis::testgen {

namespace {

template <class T, std::size_t N>
const T& pick(std::mt19937_64& rng, const std::array<T, N>& items) {
    return items[rng() % N];
}

const std::array<const char*, 12> kDistrict{"Antakya", "Kahramanmaras", "Iskenderun", "Adiyaman", "Malatya",
                                            "Gaziantep", "Osmaniye", "Elbistan", "Nurdagi", "Islahiye",
                                            "Defne", "Pazarcik"};
const std::array<const char*, 8> kStreet{"Ataturk Caddesi", "Cumhuriyet Mahallesi", "Inonu Sokak",
                                         "Gazi Bulvari", "Hurriyet Mahallesi", "Yeni Mahalle",
                                         "Istasyon Caddesi", "Saray Sokak"};

std::string phone(std::mt19937_64& rng) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "+90 5%02u %03u %04u", static_cast<unsigned>(rng() % 100),
                  static_cast<unsigned>(rng() % 1000), static_cast<unsigned>(rng() % 10000));
    return buf;
}

std::string twitter_time(std::size_t minute) {
    // Mon Feb 06 04:17:00 +0000 2023 onwards, one tweet per ~40 s.
    const std::size_t secs = 4 * 3600 + 17 * 60 + minute * 40;
    const std::size_t day = 6 + secs / 86400;
    const std::size_t s = secs % 86400;
    static const std::array<const char*, 7> kDay{"Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s Feb %02zu %02zu:%02zu:%02zu +0000 2023", kDay[(day - 6) % 7], day, s / 3600,
                  (s / 60) % 60, s % 60);
    return buf;
}

std::string distress_tweet(std::mt19937_64& rng, std::size_t i) {
    const std::string d = pick(rng, kDistrict);
    const std::string st = pick(rng, kStreet);
    const auto n = 2 + rng() % 9;
    switch (i % 6) {
        case 0:
            return "Help! " + std::to_string(n) + " people trapped under rubble at " + st + ", " + d + ". Call " +
                   phone(rng);
        case 1:
            return "Enkaz altındayım yardım edin " + d + " " + st + " no " + std::to_string(n) + " " + phone(rng);
        case 2:
            return "URGENT my family is trapped in the collapsed building " + std::to_string(i) + " near " + st +
                   " " + d + ", we hear voices #deprem";
        case 3:
            return "SOS " + d + " " + st + " apartment " + std::to_string(n) + " collapsed, rescue needed, " +
                   phone(rng);
        case 4:
            return "Acil yardım! " + d + " " + st + " bina " + std::to_string(i) + " enkaz altında " + std::to_string(n) +
                   " kişi var 🙏";
        default:
            return "We are stuck under the rubble in " + d + " since the earthquake, please send rescue, " +
                   std::to_string(n) + " of us at gate " + std::to_string(i);
    }
}

std::string similar_tweet(std::mt19937_64& rng, std::size_t i) {
    const std::string d = pick(rng, kDistrict);
    switch (i % 5) {
        case 0: return "Thoughts with everyone in " + d + " after the earthquake, stay safe " + std::to_string(i);
        case 1: return "Documentary tonight about the history of the great earthquake of 1939 part " + std::to_string(i);
        case 2: return "Magnitude figures for the earthquake near " + d + " have been revised by the observatory, report " + std::to_string(i);
        case 3: return "Our thoughts go to " + d + " 💔 deprem haberleri izlemek zor " + std::to_string(i);
        default: return "Felt a small tremor in the office, everyone laughed it off, day " + std::to_string(i);
    }
}

std::string unrelated_tweet(std::mt19937_64& rng, std::size_t i) {
    static const std::array<const char*, 6> kTopic{"the match last night", "this new coffee place", "my exam results",
                                                   "the weekend concert", "a great book", "the train schedule"};
    return std::string("Can't stop thinking about ") + pick(rng, kTopic) + " honestly " + std::to_string(i);
}

const std::map<std::string, std::string> kDistinct{
    {"emergency", "sos"},         {"aid_related", "assistance"}, {"weather_related", "rain"},
    {"direct_report", "we have"}, {"food", "bread"},             {"earthquake", "tremor"},
    {"storm", "gale"},            {"offer", "volunteer"},        {"child_alone", "unaccompanied"},
    {"shops", "supermarket"},     {"fire", "blaze"},             {"medical", "ambulance"},
    {"shelter", "tent"},          {"electricity", "blackout"},
};

const std::array<const char*, 10> kFiller{"report", "from", "district", "today", "update",
                                          "north", "sector", "number", "street", "local"};

}  // namespace

std::vector<std::string> turkey_fixture_lines(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::string> lines;
    std::size_t slot = 0;
    auto emit = [&](const std::string& text, int label, const char* subset) {
        nlohmann::ordered_json j{{"text", text}, {"created_at", twitter_time(slot++)}, {"label", label},
                                 {"subset", subset}};
        lines.push_back(j.dump());
    };
    for (std::size_t i = 0; i < 300; ++i) emit(distress_tweet(rng, i), 1, "distress");
    for (std::size_t i = 0; i < 150; ++i) emit(similar_tweet(rng, i), 0, "keyword_similar");
    for (std::size_t i = 0; i < 50; ++i) emit(unrelated_tweet(rng, i), 0, "unrelated");
    for (std::size_t i = lines.size(); i > 1; --i) std::swap(lines[i - 1], lines[rng() % i]);
    return lines;
}

std::string saturated_text(const LabelSet& labels, std::size_t variant) {
    std::string text = std::string(kFiller[variant % kFiller.size()]) + " " + kFiller[(variant / 10 + 3) % kFiller.size()] +
                       " " + std::to_string(variant);
    for (const auto& l : labels) text += " " + kDistinct.at(l);
    return text + " " + kFiller[(variant + 7) % kFiller.size()];
}

SyntheticCsv disaster_csv(const CategoryTaxonomy& taxonomy, std::size_t rows, std::uint64_t seed,
                          const std::map<std::string, double>& p, double fallback_p) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    static const std::array<const char*, 3> kGenre{"direct", "news", "social"};
    SyntheticCsv out;
    out.rows = rows;
    const auto keys = taxonomy.keys();
    out.text = "id,message,original,genre";
    for (const auto& k : keys) {
        out.text += "," + k;
        out.drawn[k] = 0;
    }
    out.text += "\n";
    for (std::size_t r = 0; r < rows; ++r) {
        LabelSet labels;
        std::string flags;
        for (const auto& k : keys) {
            auto it = p.find(k);
            const bool on = unit(rng) < (it == p.end() ? fallback_p : it->second);
            if (on) {
                labels.insert(k);
                out.drawn[k]++;
            }
            flags += on ? ",1" : ",0";
        }
        // Quoted field with an embedded comma and quote exercises RFC 4180 handling.
        const std::string message = saturated_text(labels, r);
        const std::string original = r % 7 == 0 ? "\"orijinal, \"\"metin\"\"\"" : "";
        out.text += std::to_string(r + 1) + ",\"" + message + "\"," + original + "," + pick(rng, kGenre) + flags + "\n";
    }
    return out;
}

std::vector<RawRecord> feed(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<RawRecord> out;
    out.reserve(n);
    static const std::array<const char*, 8> kEvent{
        "building collapsed, people trapped under rubble",
        "fire and heavy smoke coming from the roof",
        "injured man bleeding badly, need an ambulance",
        "we need food and bread for 20 families",
        "power lines down on the road, blackout in the whole block",
        "unaccompanied child found crying near the school",
        "we need tents and blankets, shelter is full",
        "water rising fast after the storm, flooding in basements",
    };
    static const std::array<const char*, 6> kChatter{
        "what a beautiful sunset over the bay tonight",  "anyone know a good place for lunch around here",
        "traffic is slow on the bridge again this morning", "finished my run, feeling great about it",
        "new phone arrived and the camera is amazing",   "the library opens late on thursdays",
    };
    static const std::array<const char*, 3> kSource{"social_feed", "app_direct", "call_transcript"};
    const auto base = from_epoch_millis(1675657020000);  // 2023-02-06T04:17:00Z
    for (std::size_t i = 0; i < n; ++i) {
        RawRecord r;
        r.source = pick(rng, kSource);
        const auto at = base + std::chrono::milliseconds(static_cast<std::int64_t>(i * 3600000 / std::max<std::size_t>(n, 1)));
        r.received_at = format_timestamp(at);
        const auto roll = rng() % 100;
        if (roll < 4 && !out.empty()) {
            // Exact resend from a bot: the dedup guard should catch it.
            r = out[rng() % out.size()];
            r.received_at = format_timestamp(at);
        } else if (roll < 70) {
            const std::string d = pick(rng, kDistrict);
            const std::string st = pick(rng, kStreet);
            r.text = std::string("Help, ") + pick(rng, kEvent) + " at " + st + " in " + d + " report " + std::to_string(i);
            if (rng() % 2) r.text += ", call " + phone(rng);
            if (rng() % 3 == 0) {
                r.lat = 36.2 + static_cast<double>(rng() % 40) / 100.0;
                r.lon = 36.1 + static_cast<double>(rng() % 40) / 100.0;
            }
        } else if (roll < 97) {
            r.text = std::string(pick(rng, kChatter)) + " " + std::to_string(i);
        } else {
            r.text = roll == 97 ? "   " : "ok";  // rejected or dropped downstream
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::string fuzz_text(std::mt19937_64& rng, std::size_t max_code_points) {
    static const std::array<std::pair<char32_t, char32_t>, 16> kRanges{{
        {U'a', U'z'},          {U'A', U'Z'},          {U'0', U'9'},          {U' ', U'/'},
        {0x00, 0x1F},          {0x7F, 0x9F},          {0xC0, 0x17F},         {0x0600, 0x06FF},
        {0x0400, 0x04FF},      {0x4E00, 0x4E40},      {0x0300, 0x036F},      {0x2000, 0x206F},
        {0x1F300, 0x1F64F},    {0x1F900, 0x1F9FF},    {0x2600, 0x27BF},      {0xFE00, 0xFE0F},
    }};
    static const std::array<char32_t, 10> kSpecial{0x200D, 0xFE0F, 0x1F3FB, 0x3000, 0x00A0, 0x2028, 0x0661, 0xFEFF,
                                                    0x0130, 0x0131};
    const std::size_t n = rng() % (max_code_points + 1);
    std::u32string cps;
    for (std::size_t i = 0; i < n; ++i) {
        if (rng() % 8 == 0) {
            cps.push_back(kSpecial[rng() % kSpecial.size()]);
        } else {
            const auto& [lo, hi] = kRanges[rng() % kRanges.size()];
            cps.push_back(lo + static_cast<char32_t>(rng() % (hi - lo + 1)));
        }
    }
    return utf8::encode(cps);
}

}  // namespace crisis::testgen
