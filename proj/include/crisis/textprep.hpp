#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace crisis {

/// Drops emoji, symbols and control code points. Keeps letters of any
/// script (with their combining marks), decimal digits, whitespace and
/// `. , ! ? ' -`. Whitespace runs collapse to one space; ends are trimmed.
std::string clean_text(std::string_view raw);

std::size_t token_count(std::string_view cleaned);

/// Lowercased words, split at every code point that is not a letter, mark,
/// digit or underscore.
std::vector<std::string> word_tokens(std::string_view text);

/// True when `phrase` (space-separated lowercase words) occurs as a run of
/// consecutive entries in `words`.
bool contains_phrase(const std::vector<std::string>& words, std::string_view phrase);

inline constexpr std::size_t kDefaultMinTokens = 3;

bool is_too_short(std::string_view cleaned, std::size_t min_tokens = kDefaultMinTokens);

class LocaleDetector {
public:
    virtual ~LocaleDetector() = default;
    virtual std::optional<std::string> detect(std::string_view cleaned) const = 0;
};

/// Script-range voting, then stopword voting for Latin-script text.
/// Confidence is the dominant script's share of letters times the winning
/// language's share of stopword hits.
class HeuristicLocaleDetector final : public LocaleDetector {
public:
    using StopwordTables = std::map<std::string, std::set<std::string>>;

    explicit HeuristicLocaleDetector(StopwordTables tables, double threshold = 0.6);

    /// Loads every `<tag>.txt` (one word per line) from the directory.
    static HeuristicLocaleDetector from_directory(const std::string& dir, double threshold = 0.6);

    std::optional<std::string> detect(std::string_view cleaned) const override;

    const StopwordTables& tables() const noexcept { return tables_; }

private:
    StopwordTables tables_;
    double threshold_;
};

struct CleanText {
    std::string text;
    std::size_t token_count = 0;
    std::optional<std::string> locale_tag;
    bool dropped = false;
};

/// clean -> short filter -> locale. Dropped text skips locale detection.
CleanText prepare(std::string_view raw, const LocaleDetector* detector, std::size_t min_tokens = kDefaultMinTokens);

}  // namespace crisis
