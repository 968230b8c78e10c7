#pragma once

#include "crisis/bounded_queue.hpp"
#include "crisis/error.hpp"
#include "crisis/message.hpp"
#include "crisis/taxonomy.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <deque>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

namespace crisis {

enum class IngestErrc { taxonomy_mismatch, io_error };

std::string_view to_string(IngestErrc e);

using IngestError = CodedError<IngestErrc>;

struct FeedRecord {
    std::uint64_t seq = 0;
    Source source = Source::social_feed;
    std::string raw;
};

/// One line/row off a feed: the raw record, its validation outcome, and the
/// gold labels the dataset carries (if any).
struct IngestItem {
    FeedRecord record;
    Validated parsed;
    std::optional<LabelSet> gold;
};

/// Tweet NDJSON: `text`, `created_at`, optional `geo` (`{"lat","lon"}` or
/// `[lat, lon]`), optional `label` (0/1), `contact`, `locale`, `subset`.
/// Throws nlohmann::json::exception on lines that are not usable records.
RawRecord parse_tweet_line(std::string_view line);

/// Meta key holding the tweet's 0/1 gold label.
inline constexpr std::string_view kGoldBinaryKey = "gold_binary";

class TweetNdjsonReader {
public:
    explicit TweetNdjsonReader(std::istream& in) : in_(in) {}

    /// Malformed lines come back as Rejection(malformed); blank lines are skipped.
    std::optional<IngestItem> next();

private:
    std::istream& in_;
    std::uint64_t seq_ = 0;
};

struct TweetDataset {
    std::vector<EmergencyMessage> messages;
    std::size_t skipped = 0;
};

TweetDataset load_tweet_ndjson(const std::string& path);

/// Disaster-message CSV: header `id,message,original,genre,<one 0/1 column
/// per taxonomy label>`. Rows have no timestamp; the `id` column is used as
/// milliseconds since the epoch so message ids stay distinct and stable.
class DisasterCsvReader {
public:
    /// Throws IngestError(taxonomy_mismatch) when the label columns are not
    /// exactly the taxonomy keys.
    DisasterCsvReader(std::istream& in, const CategoryTaxonomy& taxonomy);

    std::optional<IngestItem> next();

    const std::vector<std::string>& label_columns() const noexcept { return label_columns_; }

private:
    std::istream& in_;
    std::vector<std::string> label_columns_;
    std::uint64_t seq_ = 0;
};

struct LabeledMessage {
    EmergencyMessage message;
    LabelSet gold;
};

struct DisasterDataset {
    std::vector<LabeledMessage> items;
    std::size_t skipped = 0;
};

DisasterDataset load_disaster_csv(const std::string& path, const CategoryTaxonomy& taxonomy);

/// RFC 4180 record reader (quoted fields may span lines). Returns nullopt at EOF.
std::optional<std::vector<std::string>> read_csv_record(std::istream& in);

// ---------------------------------------------------------------------------
// Poisoning guards

enum class GuardStatus { pass, duplicate, flood, malformed };

std::string_view to_string(GuardStatus s);

struct GuardVerdict {
    GuardStatus status = GuardStatus::pass;
    std::string detail;
};

struct GuardConfig {
    std::size_t dedup_window = 5'000;
    std::size_t shingle_size = 8;
    std::size_t flood_limit = 30;
    std::chrono::milliseconds flood_window{60'000};
};

/// 64-bit fingerprint of the set of word-level shingles of the cleaned,
/// lowercased text. Texts shorter than the shingle size form one shingle.
std::uint64_t text_fingerprint(std::string_view raw_text, std::size_t shingle_size = 8);

/// Digits with a leading '+' kept; used to key flood counting.
std::string normalize_contact(std::string_view contact);

/// Single-writer guard state: a sliding window of recent fingerprints plus
/// per-contact arrival times.
class PoisoningGuard {
public:
    explicit PoisoningGuard(GuardConfig config = {}) : config_(config) {}

    GuardVerdict check(const EmergencyMessage& message);

    const GuardConfig& config() const noexcept { return config_; }

private:
    GuardConfig config_;
    std::deque<std::uint64_t> recent_;
    std::unordered_map<std::uint64_t, std::size_t> recent_counts_;
    std::unordered_map<std::string, std::deque<Timestamp>> contact_arrivals_;
};

/// NDJSON side journal of `{record, verdict, at}` lines.
class QuarantineJournal {
public:
    explicit QuarantineJournal(std::ostream* out = nullptr) : out_(out) {}

    void write(const nlohmann::json& record, const GuardVerdict& verdict, Timestamp at);

    std::size_t count() const noexcept { return count_; }

private:
    std::ostream* out_;
    std::size_t count_ = 0;
};

// ---------------------------------------------------------------------------
// Replay

struct ReplayOptions {
    /// Messages per second; nullopt replays as fast as possible.
    std::optional<double> rate;
};

struct ReplayStats {
    std::size_t input = 0;
    std::size_t emitted = 0;
    std::size_t quarantined = 0;
    std::size_t rejected = 0;
    std::map<std::string, std::size_t> rejected_by_reason;
    std::chrono::milliseconds wall{0};
};

struct ReplayHooks {
    std::function<void(const EmergencyMessage&)> on_admitted;
    std::function<void(const nlohmann::json& record, const GuardVerdict&)> on_quarantined;
    std::function<void(const FeedRecord&, const Rejection&)> on_rejected;
};

using ItemSource = std::function<std::optional<IngestItem>()>;

/// Pulls every item from `source`, guards it, and pushes admitted messages
/// into `out` spaced 1/rate apart. push() blocks when `out` is full, so a
/// slow consumer throttles the replay instead of losing messages.
/// `out` is not closed.
ReplayStats replay(const ItemSource& source, PoisoningGuard& guard, BoundedQueue<EmergencyMessage>& out,
                   const ReplayOptions& options = {}, QuarantineJournal* quarantine = nullptr,
                   const ReplayHooks& hooks = {});

ItemSource source_from(TweetNdjsonReader& reader);
ItemSource source_from(DisasterCsvReader& reader);
ItemSource source_from(const std::vector<EmergencyMessage>& messages);

}  // namespace crisis
