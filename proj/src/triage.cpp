#include "crisis/triage.hpp"

#include "crisis/ingest.hpp"
#include "crisis/utf8.hpp"

#include <unicode/uchar.h>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <charconv>

namespace crisis {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

// ---------------------------------------------------------------------------
// Output parsing

namespace {

std::optional<ParsedOutput> parse_strict(std::string_view text, const CategoryTaxonomy& taxonomy) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception&) {
        return std::nullopt;
    }
    if (!j.is_object() || !j.contains("relevant") || !j["relevant"].is_boolean()) return std::nullopt;

    ParsedOutput out;
    out.mode = ParseMode::strict;
    out.relevant = j["relevant"].get<bool>();
    if (j.contains("labels") && !j["labels"].is_null()) {
        if (!j["labels"].is_array()) return std::nullopt;
        for (const auto& item : j["labels"]) {
            std::string key;
            double confidence = 1.0;
            if (item.is_string()) {
                key = item.get<std::string>();
            } else if (item.is_object() && item.contains("key") && item["key"].is_string()) {
                key = item["key"].get<std::string>();
                if (item.contains("confidence") && !item["confidence"].is_null()) {
                    if (!item["confidence"].is_number()) return std::nullopt;
                    confidence = item["confidence"].get<double>();
                    if (!(confidence >= 0.0 && confidence <= 1.0)) return std::nullopt;
                }
            } else {
                return std::nullopt;
            }
            if (taxonomy.contains(key)) out.labels[key] = confidence;
        }
    }
    if (j.contains("level") && j["level"].is_string()) out.level = parse_level(j["level"].get<std::string>());
    if (j.contains("location") && j["location"].is_string() && !j["location"].get<std::string>().empty()) {
        out.location = j["location"].get<std::string>();
    }
    if (j.contains("contact") && j["contact"].is_string()) {
        auto contact = normalize_contact(j["contact"].get<std::string>());
        if (!contact.empty()) out.contact = std::move(contact);
    }
    return out;
}

bool has_word(const std::vector<std::string>& words, std::string_view w) {
    return std::find(words.begin(), words.end(), w) != words.end();
}

}  // namespace

ParsedOutput parse_model_output(std::string_view text, const CategoryTaxonomy& taxonomy) {
    if (auto strict = parse_strict(text, taxonomy)) return *strict;

    ParsedOutput out;
    const auto words = word_tokens(text);
    for (const auto& label : taxonomy.labels()) {
        std::string spaced = label.key;
        std::replace(spaced.begin(), spaced.end(), '_', ' ');
        if (contains_phrase(words, label.key) || contains_phrase(words, spaced)) {
            out.labels[label.key] = kRepairConfidence;
        }
    }
    for (auto level : {EmergencyLevel::critical, EmergencyLevel::high, EmergencyLevel::moderate, EmergencyLevel::low}) {
        if (has_word(words, to_string(level))) {
            out.level = level;
            break;
        }
    }
    const bool affirmative = has_word(words, "yes") && !has_word(words, "no");
    if (out.labels.empty() && !out.level && !affirmative) return ParsedOutput{};
    out.mode = ParseMode::repaired;
    out.relevant = !out.labels.empty() || affirmative;
    return out;
}

// ---------------------------------------------------------------------------
// Entities

std::string format_geo(const GeoPoint& geo) {
    auto shortest = [](double v) {
        char buf[32];
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, ec == std::errc{} ? ptr : buf);
    };
    return shortest(geo.lat) + "," + shortest(geo.lon);
}

namespace {

std::optional<std::string> find_contact(std::string_view text) {
    auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
    auto is_sep = [](char c) { return c == ' ' || c == '-' || c == '(' || c == ')'; };
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        const bool starts = is_digit(c) || ((c == '+' || c == '(') && i + 1 < text.size() && is_digit(text[i + 1]));
        const bool glued = i > 0 && (std::isalnum(static_cast<unsigned char>(text[i - 1])) != 0);
        if (!starts || glued) {
            ++i;
            continue;
        }
        std::string digits;
        const bool plus = c == '+';
        std::size_t j = plus ? i + 1 : i;
        std::size_t last_digit = j;
        while (j < text.size() && (is_digit(text[j]) || is_sep(text[j]))) {
            if (is_digit(text[j])) {
                digits.push_back(text[j]);
                last_digit = j;
            } else if (text[j] == ' ' && j + 1 < text.size() && text[j + 1] == ' ') {
                break;
            }
            ++j;
        }
        const bool glued_after = last_digit + 1 < text.size() &&
                                 std::isalpha(static_cast<unsigned char>(text[last_digit + 1])) != 0;
        if (digits.size() >= 7 && digits.size() <= 15 && !glued_after) return (plus ? "+" : "") + digits;
        i = last_digit + 1;
    }
    return std::nullopt;
}

bool is_trailing_punct(char32_t c) {
    return c == U',' || c == U'.' || c == U';' || c == U':' || c == U'!' || c == U'?' || c == U')' || c == U'"' ||
           c == U'\'';
}

struct LocToken {
    std::string core;
    bool ends_clause = false;
};

LocToken split_token(const std::string& token) {
    auto cps = utf8::decode(token);
    bool clause = false;
    while (!cps.empty() && is_trailing_punct(cps.back())) {
        cps.pop_back();
        clause = true;
    }
    return {utf8::encode(cps), clause};
}

enum class TokenKind { other, capitalized, numbered };

TokenKind classify(const std::string& core) {
    const auto cps = utf8::decode(core);
    if (cps.empty()) return TokenKind::other;
    const auto first = static_cast<UChar32>(cps.front());
    if (u_isupper(first) || u_istitle(first)) return TokenKind::capitalized;
    if (u_isdigit(first)) {
        for (char32_t c : cps) {
            if (u_isalpha(static_cast<UChar32>(c))) return TokenKind::numbered;
        }
    }
    return TokenKind::other;
}

std::optional<std::string> find_location(std::string_view text) {
    static constexpr std::array<std::string_view, 4> kPrepositions{"at", "in", "near", "on"};
    static constexpr std::size_t kMaxRun = 6;
    const auto tokens = utf8::split_whitespace(text);
    std::vector<std::string> best;
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
        const LocToken prep = split_token(tokens[i]);
        const std::string lowered = utf8::to_lower(prep.core);
        if (prep.ends_clause ||
            std::find(kPrepositions.begin(), kPrepositions.end(), lowered) == kPrepositions.end()) {
            continue;
        }
        std::vector<std::string> run;
        std::vector<TokenKind> kinds;
        for (std::size_t j = i + 1; j < tokens.size() && run.size() < kMaxRun; ++j) {
            const LocToken t = split_token(tokens[j]);
            const TokenKind kind = classify(t.core);
            if (kind == TokenKind::other) break;
            run.push_back(t.core);
            kinds.push_back(kind);
            if (t.ends_clause) break;
        }
        while (!kinds.empty() && kinds.back() == TokenKind::numbered) {
            kinds.pop_back();
            run.pop_back();
        }
        if (run.size() > best.size()) best = std::move(run);
    }
    if (best.empty()) return std::nullopt;
    std::string out;
    for (const auto& t : best) out += (out.empty() ? "" : " ") + t;
    return out;
}

struct LevelCue {
    EmergencyLevel level;
    std::string_view phrase;
};

constexpr std::array<LevelCue, 33> kLevelCues{{
    {EmergencyLevel::critical, "trapped"},
    {EmergencyLevel::critical, "bleeding"},
    {EmergencyLevel::critical, "unconscious"},
    {EmergencyLevel::critical, "not breathing"},
    {EmergencyLevel::critical, "cannot breathe"},
    {EmergencyLevel::critical, "fire spreading"},
    {EmergencyLevel::critical, "drowning"},
    {EmergencyLevel::critical, "heart attack"},
    {EmergencyLevel::critical, "under rubble"},
    {EmergencyLevel::critical, "dying"},
    {EmergencyLevel::critical, "enkaz"},
    {EmergencyLevel::high, "fire"},
    {EmergencyLevel::high, "injured"},
    {EmergencyLevel::high, "hurt"},
    {EmergencyLevel::high, "smoke"},
    {EmergencyLevel::high, "stuck"},
    {EmergencyLevel::high, "flooding"},
    {EmergencyLevel::high, "gas leak"},
    {EmergencyLevel::high, "explosion"},
    {EmergencyLevel::high, "missing"},
    {EmergencyLevel::high, "collapsed"},
    {EmergencyLevel::moderate, "need food"},
    {EmergencyLevel::moderate, "need water"},
    {EmergencyLevel::moderate, "no water"},
    {EmergencyLevel::moderate, "shelter"},
    {EmergencyLevel::moderate, "power outage"},
    {EmergencyLevel::moderate, "hungry"},
    {EmergencyLevel::moderate, "damaged"},
    {EmergencyLevel::moderate, "medicine"},
    {EmergencyLevel::low, "information"},
    {EmergencyLevel::low, "update"},
    {EmergencyLevel::low, "question"},
    {EmergencyLevel::low, "advice"},
}};

std::optional<EmergencyLevel> find_level(std::string_view text) {
    const auto words = word_tokens(text);
    std::optional<EmergencyLevel> best;
    for (const auto& cue : kLevelCues) {
        if ((!best || cue.level > *best) && contains_phrase(words, cue.phrase)) best = cue.level;
    }
    return best;
}

}  // namespace

Entities extract_entities(std::string_view raw_text, const std::optional<GeoPoint>& geo) {
    Entities e;
    e.contact = find_contact(raw_text);
    e.location_text = geo ? std::optional<std::string>(format_geo(*geo)) : find_location(raw_text);
    e.level_hint = find_level(raw_text);
    return e;
}

// ---------------------------------------------------------------------------
// Engine

TriageEngine::TriageEngine(PipelineConfig config, std::shared_ptr<InferenceHub> hub,
                           std::shared_ptr<const LocaleDetector> detector)
    : config_(std::move(config)), hub_(std::move(hub)), detector_(std::move(detector)) {
    if (!hub_) throw std::invalid_argument("triage engine needs an inference hub");
    if (config_.backend_chain.empty()) throw std::invalid_argument("backend chain is empty");
}

CleanText TriageEngine::prepare(const EmergencyMessage& message) const {
    CleanText prep = crisis::prepare(message.raw_text, detector_.get(), config_.min_tokens);
    if (!prep.dropped && message.locale_tag) prep.locale_tag = message.locale_tag;
    return prep;
}

std::optional<TriageEngine::StageOutcome> TriageEngine::run_stage(const RenderedPrompt& prompt,
                                                                 std::vector<std::string>& failed) const {
    for (const auto& backend : config_.backend_chain) {
        if (std::find(failed.begin(), failed.end(), backend) != failed.end()) continue;
        InferenceRequest request;
        request.system_text = prompt.system_text;
        request.prompt = prompt.user_text;
        request.backend_id = backend;
        request.deadline = config_.deadline;
        request.max_retries = config_.max_retries;
        request.expect_contract = true;
        try {
            InferenceResponse response = hub_->infer(request);
            ParsedOutput parsed = parse_model_output(response.text, config_.taxonomy);
            if (parsed.mode == ParseMode::failed) {
                failed.push_back(backend);
                continue;
            }
            return StageOutcome{std::move(parsed), std::move(response.label_scores), backend};
        } catch (const InferenceError&) {
            failed.push_back(backend);
        }
    }
    return std::nullopt;
}

BinaryOutcome TriageEngine::classify_binary(const EmergencyMessage& message) const {
    const CleanText prep = prepare(message);
    if (prep.dropped) throw std::invalid_argument("message dropped by the short-message filter");
    std::vector<std::string> failed;
    const auto stage = run_stage(render_binary(prep), failed);
    BinaryOutcome out;
    if (!stage) return out;
    out.relevant = stage->parsed.relevant;
    out.mode = stage->parsed.mode;
    out.backend_id = stage->backend_id;
    out.score = out.relevant ? 1.0 : 0.0;
    if (stage->label_scores) {
        if (auto it = stage->label_scores->find("relevant"); it != stage->label_scores->end()) out.score = it->second;
    }
    return out;
}

TriageResult TriageEngine::triage(const EmergencyMessage& message) const {
    const auto start = Clock::now();
    const CleanText prep = prepare(message);
    if (prep.dropped) throw std::invalid_argument("message dropped by the short-message filter");

    TriageResult result;
    result.message_id = message.id;
    for (const auto& key : config_.taxonomy.keys()) result.scores[key] = 0.0;

    // Entities come from the caller's own words and survive every failure path.
    const Entities entities = extract_entities(message.raw_text, message.geo);
    result.level = entities.level_hint.value_or(EmergencyLevel::unknown);
    result.contact = entities.contact;
    result.location_text = entities.location_text;
    std::vector<std::string> failed;
    auto finish = [&] {
        result.total_latency_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
        return result;
    };

    const auto binary = run_stage(render_binary(prep), failed);
    if (!binary) {
        result.parse_mode = ParseMode::failed;
        result.backend_id = "none";
        return finish();
    }
    result.backend_id = binary->backend_id;
    result.parse_mode = binary->parsed.mode;
    if (!binary->parsed.relevant) {
        result.relevant = false;
        return finish();
    }

    const auto multi =
        run_stage(render_multiclass(prep, config_.taxonomy, config_.k_shot, config_.exemplars), failed);
    if (!multi) {
        result.parse_mode = ParseMode::failed;
        result.relevant = false;
        result.backend_id = "none";
        return finish();
    }
    const ParsedOutput& parsed = multi->parsed;
    result.backend_id = multi->backend_id;
    if (parsed.mode == ParseMode::repaired) result.parse_mode = ParseMode::repaired;
    result.relevant = true;
    if (multi->label_scores) {
        for (const auto& [key, score] : *multi->label_scores) {
            if (result.scores.contains(key)) result.scores[key] = std::clamp(score, 0.0, 1.0);
        }
    }
    for (const auto& [key, confidence] : parsed.labels) {
        result.scores[key] = confidence;
        if (confidence >= kPredictionThreshold) result.categories[key] = confidence;
    }

    const auto model_level = parsed.level.value_or(EmergencyLevel::unknown);
    result.level = std::max(entities.level_hint.value_or(EmergencyLevel::unknown), model_level);
    result.contact = entities.contact ? entities.contact : parsed.contact;
    result.location_text = entities.location_text ? entities.location_text : parsed.location;

    if (config_.advisory_audience) {
        result.advisory = advisory_skipping(result, prep.text, *config_.advisory_audience, failed);
    }
    return finish();
}

std::optional<std::string> TriageEngine::generate_advisory(const TriageResult& result, std::string_view message_text,
                                                           Audience audience) const {
    return advisory_skipping(result, message_text, audience, {});
}

std::optional<std::string> TriageEngine::advisory_skipping(const TriageResult& result, std::string_view message_text,
                                                           Audience audience,
                                                           const std::vector<std::string>& skip) const {
    if (!result.relevant) throw std::invalid_argument("advisory requires a relevant result");
    const RenderedPrompt prompt =
        render_advisory(result, message_text, config_.snippets, audience, config_.snippet_count);
    for (const auto& backend : config_.backend_chain) {
        if (std::find(skip.begin(), skip.end(), backend) != skip.end()) continue;
        InferenceRequest request;
        request.system_text = prompt.system_text;
        request.prompt = prompt.user_text;
        request.backend_id = backend;
        request.deadline = config_.deadline;
        request.max_retries = config_.max_retries;
        try {
            auto response = hub_->infer(request);
            const auto words = utf8::split_whitespace(response.text);
            if (!words.empty()) return response.text;
        } catch (const InferenceError&) {
        }
    }
    LabelSet categories;
    for (const auto& [key, _] : result.categories) categories.insert(key);
    const auto matched = select_snippets(categories, config_.snippets, config_.snippet_count);
    if (matched.empty()) return std::nullopt;
    std::string text;
    for (const auto& s : matched) text += (text.empty() ? "" : "\n") + s.text;
    return text;
}

TriageResult triage_message(const EmergencyMessage& message, const PipelineConfig& config,
                            std::shared_ptr<InferenceHub> hub, std::shared_ptr<const LocaleDetector> detector) {
    return TriageEngine(config, std::move(hub), std::move(detector)).triage(message);
}

}  // namespace crisis
