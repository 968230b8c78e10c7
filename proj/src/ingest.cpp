#include "crisis/ingest.hpp"

#include "crisis/codec.hpp"
#include "crisis/textprep.hpp"
#include "crisis/utf8.hpp"

#include <algorithm>
#include <array>
#include <memory>
#include <fstream>
#include <thread>

namespace crisis {

using nlohmann::json;

std::string_view to_string(IngestErrc e) {
    switch (e) {
        case IngestErrc::taxonomy_mismatch: return "taxonomy_mismatch";
        case IngestErrc::io_error: return "io_error";
    }
    return "io_error";
}

std::string_view to_string(GuardStatus s) {
    switch (s) {
        case GuardStatus::pass: return "pass";
        case GuardStatus::duplicate: return "duplicate";
        case GuardStatus::flood: return "flood";
        case GuardStatus::malformed: return "malformed";
    }
    return "malformed";
}

// ---------------------------------------------------------------------------
// Tweet NDJSON

RawRecord parse_tweet_line(std::string_view line) {
    const json j = json::parse(line);
    RawRecord r = raw_record_from_json(j);
    r.source = j.value("source", std::string("social_feed"));
    if (j.contains("label") && !j["label"].is_null()) {
        const auto label = j["label"].get<int>();
        if (label != 0 && label != 1) throw std::invalid_argument("label must be 0 or 1");
        r.meta[std::string(kGoldBinaryKey)] = std::to_string(label);
    }
    if (j.contains("subset") && j["subset"].is_string()) r.meta["subset"] = j["subset"].get<std::string>();
    return r;
}

std::optional<IngestItem> TweetNdjsonReader::next() {
    std::string line;
    while (std::getline(in_, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        IngestItem item{FeedRecord{++seq_, Source::social_feed, line}, Rejection{RejectReason::malformed, ""}, {}};
        try {
            const RawRecord raw = parse_tweet_line(line);
            item.parsed = validate_message(raw);
            if (auto it = raw.meta.find(std::string(kGoldBinaryKey)); it != raw.meta.end()) {
                item.gold = it->second == "1" ? LabelSet{"relevant"} : LabelSet{};
            }
        } catch (const std::exception& e) {
            item.parsed = Rejection{RejectReason::malformed, e.what()};
        }
        return item;
    }
    return std::nullopt;
}

TweetDataset load_tweet_ndjson(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError(IngestErrc::io_error, "cannot open " + path);
    TweetNdjsonReader reader(in);
    TweetDataset out;
    while (auto item = reader.next()) {
        if (auto* msg = std::get_if<EmergencyMessage>(&item->parsed)) {
            out.messages.push_back(std::move(*msg));
        } else {
            ++out.skipped;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Disaster CSV

std::optional<std::vector<std::string>> read_csv_record(std::istream& in) {
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    bool any = false;
    int ch;
    while ((ch = in.get()) != EOF) {
        any = true;
        const char c = static_cast<char>(ch);
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            fields.push_back(std::move(field));
            return fields;
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    if (!any) return std::nullopt;
    fields.push_back(std::move(field));
    return fields;
}

namespace {

constexpr std::size_t kFixedColumns = 4;

Source source_for_genre(std::string_view genre) {
    return genre == "direct" ? Source::app_direct : Source::social_feed;
}

}  // namespace

DisasterCsvReader::DisasterCsvReader(std::istream& in, const CategoryTaxonomy& taxonomy) : in_(in) {
    auto header = read_csv_record(in_);
    if (!header || header->size() < kFixedColumns) {
        throw IngestError(IngestErrc::taxonomy_mismatch, "missing header");
    }
    static constexpr std::array<std::string_view, kFixedColumns> kExpected{"id", "message", "original", "genre"};
    for (std::size_t i = 0; i < kFixedColumns; ++i) {
        if ((*header)[i] != kExpected[i]) {
            throw IngestError(IngestErrc::taxonomy_mismatch, "header must start with id,message,original,genre");
        }
    }
    label_columns_.assign(header->begin() + kFixedColumns, header->end());
    std::vector<std::string> sorted_cols = label_columns_;
    std::sort(sorted_cols.begin(), sorted_cols.end());
    std::vector<std::string> sorted_keys = taxonomy.keys();
    std::sort(sorted_keys.begin(), sorted_keys.end());
    if (std::adjacent_find(sorted_cols.begin(), sorted_cols.end()) != sorted_cols.end()) {
        throw IngestError(IngestErrc::taxonomy_mismatch, "duplicate label column");
    }
    if (sorted_cols != sorted_keys) {
        std::string detail;
        for (const auto& k : sorted_keys) {
            if (!std::binary_search(sorted_cols.begin(), sorted_cols.end(), k)) detail += " missing:" + k;
        }
        for (const auto& c : sorted_cols) {
            if (!std::binary_search(sorted_keys.begin(), sorted_keys.end(), c)) detail += " unknown:" + c;
        }
        throw IngestError(IngestErrc::taxonomy_mismatch, "label columns differ from taxonomy:" + detail);
    }
}

std::optional<IngestItem> DisasterCsvReader::next() {
    while (auto row = read_csv_record(in_)) {
        if (row->size() == 1 && (*row)[0].empty()) continue;
        IngestItem item{FeedRecord{++seq_, Source::social_feed, {}}, Rejection{RejectReason::malformed, ""}, {}};
        for (std::size_t i = 0; i < row->size(); ++i) item.record.raw += (i ? "," : "") + (*row)[i];
        if (row->size() != kFixedColumns + label_columns_.size()) {
            item.parsed = Rejection{RejectReason::malformed, "column count mismatch"};
            return item;
        }
        LabelSet gold;
        bool ok = true;
        for (std::size_t i = 0; i < label_columns_.size(); ++i) {
            const auto& cell = (*row)[kFixedColumns + i];
            if (cell == "1") {
                gold.insert(label_columns_[i]);
            } else if (cell != "0") {
                ok = false;
            }
        }
        const auto& id = (*row)[0];
        const bool numeric_id = !id.empty() && id.find_first_not_of("0123456789") == std::string::npos && id.size() < 16;
        if (!ok || !numeric_id) {
            item.parsed = Rejection{RejectReason::malformed, ok ? "id is not a number" : "label cell is not 0/1"};
            return item;
        }
        RawRecord raw;
        raw.source = std::string(to_string(source_for_genre((*row)[3])));
        item.record.source = source_for_genre((*row)[3]);
        raw.text = (*row)[1];
        raw.received_at = id;
        raw.meta["dataset_id"] = id;
        raw.meta["genre"] = (*row)[3];
        if (!(*row)[2].empty()) raw.meta["original"] = (*row)[2];
        item.parsed = validate_message(raw);
        item.gold = std::move(gold);
        return item;
    }
    return std::nullopt;
}

DisasterDataset load_disaster_csv(const std::string& path, const CategoryTaxonomy& taxonomy) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError(IngestErrc::io_error, "cannot open " + path);
    DisasterCsvReader reader(in, taxonomy);
    DisasterDataset out;
    while (auto item = reader.next()) {
        if (auto* msg = std::get_if<EmergencyMessage>(&item->parsed)) {
            out.items.push_back({std::move(*msg), std::move(*item->gold)});
        } else {
            ++out.skipped;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Guards

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = kFnvOffset) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

std::string strip_punct(const std::string& token) {
    std::string out;
    for (char c : token) {
        if (c != '.' && c != ',' && c != '!' && c != '?' && c != '\'' && c != '-') out.push_back(c);
    }
    return out;
}

}  // namespace

std::uint64_t text_fingerprint(std::string_view raw_text, std::size_t shingle_size) {
    std::vector<std::string> words;
    for (const auto& token : utf8::split_whitespace(utf8::to_lower(clean_text(raw_text)))) {
        auto w = strip_punct(token);
        if (!w.empty()) words.push_back(std::move(w));
    }
    const std::size_t k = std::max<std::size_t>(1, shingle_size);
    std::vector<std::uint64_t> shingles;
    const std::size_t count = words.size() <= k ? 1 : words.size() - k + 1;
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t h = kFnvOffset;
        for (std::size_t j = i; j < std::min(words.size(), i + k); ++j) {
            h = fnv1a(words[j], h);
            h = fnv1a("\x1F", h);
        }
        shingles.push_back(h);
    }
    std::sort(shingles.begin(), shingles.end());
    shingles.erase(std::unique(shingles.begin(), shingles.end()), shingles.end());
    std::uint64_t fp = kFnvOffset;
    for (auto s : shingles) {
        fp = fnv1a(std::string_view(reinterpret_cast<const char*>(&s), sizeof s), fp);
    }
    return fp;
}

std::string normalize_contact(std::string_view contact) {
    std::string out;
    for (char c : contact) {
        if (c >= '0' && c <= '9') {
            out.push_back(c);
        } else if (c == '+' && out.empty()) {
            out.push_back(c);
        }
    }
    return out;
}

GuardVerdict PoisoningGuard::check(const EmergencyMessage& message) {
    GuardVerdict verdict;

    const std::uint64_t fp = text_fingerprint(message.raw_text, config_.shingle_size);
    if (recent_counts_[fp] > 0) {
        verdict = {GuardStatus::duplicate, "fingerprint seen within the last " + std::to_string(config_.dedup_window) +
                                               " records"};
    }
    recent_.push_back(fp);
    ++recent_counts_[fp];
    while (recent_.size() > config_.dedup_window) {
        auto it = recent_counts_.find(recent_.front());
        if (--it->second == 0) recent_counts_.erase(it);
        recent_.pop_front();
    }

    if (message.reported_contact) {
        const std::string key = normalize_contact(*message.reported_contact);
        if (!key.empty()) {
            auto& arrivals = contact_arrivals_[key];
            const Timestamp cutoff = message.received_at - config_.flood_window;
            while (!arrivals.empty() && arrivals.front() <= cutoff) arrivals.pop_front();
            if (verdict.status == GuardStatus::pass && arrivals.size() >= config_.flood_limit) {
                verdict = {GuardStatus::flood, "more than " + std::to_string(config_.flood_limit) +
                                                   " messages per window from " + key};
            }
            auto pos = std::upper_bound(arrivals.begin(), arrivals.end(), message.received_at);
            arrivals.insert(pos, message.received_at);
        }
    }
    return verdict;
}

void QuarantineJournal::write(const json& record, const GuardVerdict& verdict, Timestamp at) {
    ++count_;
    if (!out_) return;
    const json line{{"record", record},
                    {"verdict", {{"status", to_string(verdict.status)}, {"detail", verdict.detail}}},
                    {"at", format_timestamp(at)}};
    *out_ << line.dump() << '\n';
    out_->flush();
}

// ---------------------------------------------------------------------------
// Replay

ReplayStats replay(const ItemSource& source, PoisoningGuard& guard, BoundedQueue<EmergencyMessage>& out,
                   const ReplayOptions& options, QuarantineJournal* quarantine, const ReplayHooks& hooks) {
    using clock = std::chrono::steady_clock;
    ReplayStats stats;
    const auto start = clock::now();
    const bool paced = options.rate && *options.rate > 0.0;

    while (auto item = source()) {
        ++stats.input;
        if (const auto* rejection = std::get_if<Rejection>(&item->parsed)) {
            ++stats.rejected;
            ++stats.rejected_by_reason[std::string(to_string(rejection->reason))];
            if (hooks.on_rejected) hooks.on_rejected(item->record, *rejection);
            continue;
        }
        auto& message = std::get<EmergencyMessage>(item->parsed);
        const GuardVerdict verdict = guard.check(message);
        if (verdict.status != GuardStatus::pass) {
            ++stats.quarantined;
            const json record = message;
            if (quarantine) quarantine->write(record, verdict, message.received_at);
            if (hooks.on_quarantined) hooks.on_quarantined(record, verdict);
            continue;
        }
        if (paced) {
            const auto due = start + std::chrono::duration_cast<clock::duration>(
                                         std::chrono::duration<double>(static_cast<double>(stats.emitted) / *options.rate));
            std::this_thread::sleep_until(due);
        }
        if (hooks.on_admitted) hooks.on_admitted(message);
        if (!out.push(std::move(message))) throw std::runtime_error("replay target queue closed");
        ++stats.emitted;
    }
    stats.wall = std::chrono::duration_cast<std::chrono::milliseconds>(clock::now() - start);
    return stats;
}

ItemSource source_from(TweetNdjsonReader& reader) {
    return [&reader] { return reader.next(); };
}

ItemSource source_from(DisasterCsvReader& reader) {
    return [&reader] { return reader.next(); };
}

ItemSource source_from(const std::vector<EmergencyMessage>& messages) {
    auto index = std::make_shared<std::size_t>(0);
    return [&messages, index]() -> std::optional<IngestItem> {
        if (*index >= messages.size()) return std::nullopt;
        const auto& m = messages[(*index)++];
        return IngestItem{FeedRecord{*index, m.source, m.raw_text}, m, std::nullopt};
    };
}

}  // namespace crisis
