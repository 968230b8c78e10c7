#include "crisis/journal.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <array>
#include <cstring>
#include <system_error>
#include <fstream>

namespace crisis {

namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 7> kKindNames{{
    {EventKind::message_admitted, "message_admitted"},
    {EventKind::triage_result, "triage_result"},
    {EventKind::incident_created, "incident_created"},
    {EventKind::incident_merged, "incident_merged"},
    {EventKind::feedback, "feedback"},
    {EventKind::notification, "notification"},
    {EventKind::quarantine, "quarantine"},
}};

void write_all(int fd, const std::string& data) {
    const char* p = data.data();
    std::size_t left = data.size();
    while (left > 0) {
        const ssize_t n = ::write(fd, p, left);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw std::system_error(errno, std::generic_category(), "journal write");
        }
        p += n;
        left -= static_cast<std::size_t>(n);
    }
}

}  // namespace

std::string_view to_string(EventKind k) {
    for (const auto& [kind, name] : kKindNames) {
        if (kind == k) return name;
    }
    return "message_admitted";
}

std::optional<EventKind> parse_event_kind(std::string_view s) {
    for (const auto& [kind, name] : kKindNames) {
        if (name == s) return kind;
    }
    return std::nullopt;
}

bool is_durable(EventKind k) {
    return k == EventKind::feedback || k == EventKind::incident_created || k == EventKind::incident_merged ||
           k == EventKind::notification;
}

std::string_view to_string(JournalErrc e) {
    switch (e) {
        case JournalErrc::io_error: return "io_error";
        case JournalErrc::corrupt_line: return "corrupt_line";
        case JournalErrc::seq_gap: return "seq_gap";
    }
    return "io_error";
}

std::string encode_event(const JournalEvent& e) {
    nlohmann::ordered_json j;
    j["seq"] = e.seq;
    j["at"] = format_timestamp(e.at);
    j["kind"] = to_string(e.kind);
    j["payload"] = e.payload;
    return j.dump();
}

JournalEvent decode_event(std::string_view line) {
    const auto j = nlohmann::json::parse(line);
    JournalEvent e;
    e.seq = j.at("seq").get<std::uint64_t>();
    const auto at = parse_timestamp(j.at("at").get<std::string>());
    if (!at) throw std::invalid_argument("bad event timestamp");
    e.at = *at;
    const auto kind = parse_event_kind(j.at("kind").get<std::string>());
    if (!kind) throw std::invalid_argument("unknown event kind");
    e.kind = *kind;
    e.payload = j.at("payload");
    return e;
}

std::vector<JournalEvent> read_journal(const std::string& path) {
    std::vector<JournalEvent> events;
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        if (::access(path.c_str(), F_OK) != 0) return events;
        throw JournalError(JournalErrc::io_error, 0, "cannot read " + path);
    }
    std::string line;
    std::uint64_t last = 0;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        JournalEvent e;
        try {
            e = decode_event(line);
        } catch (const std::exception& ex) {
            throw JournalError(JournalErrc::corrupt_line, last,
                               "line " + std::to_string(line_no) + ": " + ex.what());
        }
        if (e.seq != last + 1) {
            throw JournalError(JournalErrc::seq_gap, last,
                               "expected seq " + std::to_string(last + 1) + ", found " + std::to_string(e.seq));
        }
        last = e.seq;
        events.push_back(std::move(e));
    }
    return events;
}

Journal::Journal() = default;

Journal::Journal(std::string path) : path_(std::move(path)) {
    events_ = read_journal(path_);
    fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) {
        throw JournalError(JournalErrc::io_error, last_seq(), "open " + path_ + ": " + std::strerror(errno));
    }
}

Journal::~Journal() {
    if (fd_ >= 0) ::close(fd_);
}

JournalEvent Journal::append(EventKind kind, nlohmann::json payload, Timestamp at) {
    std::lock_guard lock(mu_);
    JournalEvent e{events_.size() + 1, at, kind, std::move(payload)};
    if (fd_ >= 0) {
        // One write per line keeps a killed process from leaving half a line
        // behind in the common case.
        write_all(fd_, encode_event(e) + "\n");
        if (is_durable(kind) && ::fdatasync(fd_) != 0) {
            throw std::system_error(errno, std::generic_category(), "journal fsync");
        }
    }
    events_.push_back(e);
    cv_.notify_all();
    return e;
}

std::vector<JournalEvent> Journal::since(std::uint64_t after) const {
    std::lock_guard lock(mu_);
    if (after >= events_.size()) return {};
    return {events_.begin() + static_cast<std::ptrdiff_t>(after), events_.end()};
}

std::vector<JournalEvent> Journal::wait_since(std::uint64_t after, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return closed_ || events_.size() > after; });
    if (after >= events_.size()) return {};
    return {events_.begin() + static_cast<std::ptrdiff_t>(after), events_.end()};
}

std::uint64_t Journal::last_seq() const {
    std::lock_guard lock(mu_);
    return events_.size();
}

std::size_t Journal::count(EventKind kind) const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& e : events_) n += e.kind == kind;
    return n;
}

void Journal::shutdown() {
    std::lock_guard lock(mu_);
    closed_ = true;
    cv_.notify_all();
}

}  // namespace crisis
