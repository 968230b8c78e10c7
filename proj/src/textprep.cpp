#include "crisis/textprep.hpp"

#include "crisis/utf8.hpp"

#include <unicode/uchar.h>
#include <unicode/uscript.h>

#include <filesystem>
#include <fstream>

namespace crisis {

namespace {

bool is_variation_selector(char32_t c) {
    return (c >= 0xFE00 && c <= 0xFE0F) || (c >= 0xE0100 && c <= 0xE01EF);
}

bool is_kept_punct(char32_t c) {
    return c == U'.' || c == U',' || c == U'!' || c == U'?' || c == U'\'' || c == U'-';
}

bool keep(char32_t c) {
    const auto mask = U_GET_GC_MASK(static_cast<UChar32>(c));
    if (mask & U_GC_L_MASK) return true;
    if (mask & U_GC_ND_MASK) return true;
    if (mask & (U_GC_MN_MASK | U_GC_MC_MASK)) return !is_variation_selector(c);
    return is_kept_punct(c);
}

std::string strip_token_punct(std::string_view token) {
    std::size_t b = 0;
    std::size_t e = token.size();
    auto punct = [](char c) { return c == '.' || c == ',' || c == '!' || c == '?' || c == '\'' || c == '-'; };
    while (b < e && punct(token[b])) ++b;
    while (e > b && punct(token[e - 1])) --e;
    return std::string(token.substr(b, e - b));
}

std::optional<std::string> tag_for_script(UScriptCode script) {
    switch (script) {
        case USCRIPT_ARABIC: return "ar";
        case USCRIPT_CYRILLIC: return "ru";
        case USCRIPT_GREEK: return "el";
        case USCRIPT_HEBREW: return "he";
        case USCRIPT_HAN: return "zh";
        case USCRIPT_HIRAGANA:
        case USCRIPT_KATAKANA: return "ja";
        case USCRIPT_HANGUL: return "ko";
        case USCRIPT_THAI: return "th";
        case USCRIPT_DEVANAGARI: return "hi";
        default: return std::nullopt;
    }
}

}  // namespace

std::string clean_text(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (char32_t c : utf8::decode(raw)) {
        if (u_isUWhiteSpace(static_cast<UChar32>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (!keep(c)) continue;
        if (pending_space) out.push_back(' ');
        pending_space = false;
        utf8::append(out, c);
    }
    return out;
}

std::size_t token_count(std::string_view cleaned) { return utf8::split_whitespace(cleaned).size(); }

std::vector<std::string> word_tokens(std::string_view text) {
    std::vector<std::string> words;
    std::string current;
    for (char32_t c : utf8::decode(text)) {
        const auto mask = U_GET_GC_MASK(static_cast<UChar32>(c));
        const bool word_char = (mask & (U_GC_L_MASK | U_GC_M_MASK | U_GC_ND_MASK)) || c == U'_';
        if (word_char && !is_variation_selector(c)) {
            utf8::append(current, static_cast<char32_t>(u_tolower(static_cast<UChar32>(c))));
        } else if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

bool contains_phrase(const std::vector<std::string>& words, std::string_view phrase) {
    const auto parts = utf8::split_whitespace(phrase);
    if (parts.empty() || parts.size() > words.size()) return false;
    for (std::size_t i = 0; i + parts.size() <= words.size(); ++i) {
        bool match = true;
        for (std::size_t j = 0; j < parts.size() && match; ++j) match = words[i + j] == parts[j];
        if (match) return true;
    }
    return false;
}

bool is_too_short(std::string_view cleaned, std::size_t min_tokens) { return token_count(cleaned) < min_tokens; }

HeuristicLocaleDetector::HeuristicLocaleDetector(StopwordTables tables, double threshold)
    : tables_(std::move(tables)), threshold_(threshold) {}

HeuristicLocaleDetector HeuristicLocaleDetector::from_directory(const std::string& dir, double threshold) {
    StopwordTables tables;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
        std::ifstream in(entry.path());
        auto& words = tables[entry.path().stem().string()];
        std::string line;
        while (std::getline(in, line)) {
            for (auto& w : utf8::split_whitespace(utf8::to_lower(line))) words.insert(std::move(w));
        }
    }
    if (tables.empty()) throw std::runtime_error("no stopword tables in " + dir);
    return HeuristicLocaleDetector(std::move(tables), threshold);
}

std::optional<std::string> HeuristicLocaleDetector::detect(std::string_view cleaned) const {
    std::map<UScriptCode, std::size_t> script_votes;
    std::size_t letters = 0;
    for (char32_t c : utf8::decode(cleaned)) {
        if (!u_isalpha(static_cast<UChar32>(c))) continue;
        UErrorCode status = U_ZERO_ERROR;
        const UScriptCode script = uscript_getScript(static_cast<UChar32>(c), &status);
        if (U_FAILURE(status) || script == USCRIPT_COMMON || script == USCRIPT_INHERITED) continue;
        ++script_votes[script];
        ++letters;
    }
    if (letters == 0) return std::nullopt;

    UScriptCode dominant = USCRIPT_INVALID_CODE;
    std::size_t dominant_votes = 0;
    for (const auto& [script, votes] : script_votes) {
        if (votes > dominant_votes) {
            dominant = script;
            dominant_votes = votes;
        }
    }
    const double script_share = static_cast<double>(dominant_votes) / static_cast<double>(letters);

    if (dominant != USCRIPT_LATIN) {
        auto tag = tag_for_script(dominant);
        if (tag && script_share >= threshold_) return tag;
        return std::nullopt;
    }

    std::map<std::string, std::size_t> hits;
    std::size_t total = 0;
    for (const auto& token : utf8::split_whitespace(utf8::to_lower(cleaned))) {
        const auto word = strip_token_punct(token);
        if (word.empty()) continue;
        for (const auto& [tag, words] : tables_) {
            if (words.contains(word)) {
                ++hits[tag];
                ++total;
            }
        }
    }
    if (total == 0) return std::nullopt;
    std::string best;
    std::size_t best_hits = 0;
    for (const auto& [tag, n] : hits) {
        if (n > best_hits) {
            best = tag;
            best_hits = n;
        }
    }
    const double confidence = script_share * static_cast<double>(best_hits) / static_cast<double>(total);
    if (confidence < threshold_) return std::nullopt;
    return best;
}

CleanText prepare(std::string_view raw, const LocaleDetector* detector, std::size_t min_tokens) {
    CleanText out;
    out.text = clean_text(raw);
    out.token_count = token_count(out.text);
    out.dropped = out.token_count < min_tokens;
    if (!out.dropped && detector) out.locale_tag = detector->detect(out.text);
    return out;
}

}  // namespace crisis
