#pragma once

#include "crisis/error.hpp"
#include "crisis/message.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace crisis {

enum class EventKind {
    message_admitted,
    triage_result,
    incident_created,
    incident_merged,
    feedback,
    notification,
    quarantine
};
std::string_view to_string(EventKind k);
std::optional<EventKind> parse_event_kind(std::string_view s);

/// Kinds written with fsync before the append returns.
bool is_durable(EventKind k);

struct JournalEvent {
    std::uint64_t seq = 0;
    Timestamp at{};
    EventKind kind = EventKind::message_admitted;
    nlohmann::json payload;
};

/// One NDJSON line, without the newline.
std::string encode_event(const JournalEvent& e);
JournalEvent decode_event(std::string_view line);

enum class JournalErrc { io_error, corrupt_line, seq_gap };
std::string_view to_string(JournalErrc e);

class JournalError : public CodedError<JournalErrc> {
public:
    JournalError(JournalErrc code, std::uint64_t last_good_seq, const std::string& detail)
        : CodedError(code, detail + " (last good seq " + std::to_string(last_good_seq) + ")"),
          last_good_seq_(last_good_seq) {}
    std::uint64_t last_good_seq() const noexcept { return last_good_seq_; }

private:
    std::uint64_t last_good_seq_;
};

/// Reads a journal file in order. A missing file is an empty journal. Throws
/// JournalError on the first unparsable line or seq discontinuity.
std::vector<JournalEvent> read_journal(const std::string& path);

/// Append-only, gapless event log. Also keeps every event in memory so
/// stream readers can resume from any seq.
class Journal {
public:
    /// Opens (creating if needed) and loads existing events via read_journal.
    explicit Journal(std::string path);
    /// In-memory only; nothing touches disk.
    Journal();
    ~Journal();
    Journal(const Journal&) = delete;
    Journal& operator=(const Journal&) = delete;

    JournalEvent append(EventKind kind, nlohmann::json payload, Timestamp at);

    /// Events with seq > after, in seq order.
    std::vector<JournalEvent> since(std::uint64_t after) const;
    /// Blocks until an event with seq > after exists, or the timeout passes.
    std::vector<JournalEvent> wait_since(std::uint64_t after, std::chrono::milliseconds timeout) const;

    std::uint64_t last_seq() const;
    std::size_t count(EventKind kind) const;
    const std::string& path() const noexcept { return path_; }

    /// Wakes every waiter; later waits return immediately.
    void shutdown();

private:
    std::string path_;
    int fd_ = -1;
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    std::vector<JournalEvent> events_;
    bool closed_ = false;
};

}  // namespace crisis
