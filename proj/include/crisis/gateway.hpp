#pragma once

#include "crisis/bounded_queue.hpp"
#include "crisis/inference.hpp"
#include "crisis/ingest.hpp"
#include "crisis/journal.hpp"
#include "crisis/routing.hpp"
#include "crisis/triage.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace crisis {

struct BackendSpec {
    std::string id;
    /// baseline | remote | canned
    std::string type = "baseline";
    EndpointConfig endpoint;
    std::string canned_path;
};

struct GatewayConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    /// Empty paths fall back to the embedded taxonomy, the routing table and
    /// snippet store next to it, and no locale detection.
    std::string taxonomy_path;
    std::string routing_path;
    std::string snippets_path;
    std::string stopwords_dir;
    /// Empty keeps the journal in memory.
    std::string journal_path;
    std::string quarantine_path;
    std::vector<BackendSpec> backends{BackendSpec{"baseline", "baseline", {}, {}}};
    std::vector<std::string> chain{"baseline"};
    std::size_t workers = 4;
    std::size_t queue_capacity = 1024;
    std::chrono::milliseconds deadline = kDefaultDeadline;
    int max_retries = 1;
    std::chrono::minutes merge_window{15};
    GuardConfig guard;
    std::optional<Audience> advisory_audience;
    std::optional<std::string> auth_token;
};

/// JSON config; relative paths resolve against the file's directory.
/// CRISIS_PORT and CRISIS_LLM_TOKEN override the file.
GatewayConfig load_gateway_config(const std::string& path);
void apply_env_overrides(GatewayConfig& config);

/// Triage settings and backends described by a gateway config.
PipelineConfig pipeline_for(const GatewayConfig& config);
std::shared_ptr<InferenceHub> hub_for(const GatewayConfig& config, const CategoryTaxonomy& taxonomy);

struct SubmitOutcome {
    enum class Kind { admitted, quarantined, rejected, unavailable };
    Kind kind = Kind::rejected;
    std::string message_id;
    std::optional<Rejection> rejection;
    GuardVerdict verdict;
};

struct GatewayStats {
    std::size_t admitted = 0;
    std::size_t quarantined = 0;
    std::size_t rejected = 0;
    std::size_t triaged = 0;
    std::size_t dropped = 0;
    std::size_t relevant = 0;
    std::size_t queued_messages = 0;
    std::size_t reviewed = 0;
    std::size_t incidents = 0;
};

/// The running service minus HTTP: admission, worker pool, single-writer
/// routing, journal and recovery.
class Gateway {
public:
    /// Recovers from an existing journal before accepting work. A null hub
    /// is built from config.backends.
    explicit Gateway(GatewayConfig config, std::shared_ptr<InferenceHub> hub = nullptr);
    ~Gateway();
    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    /// Starts the workers; messages admitted before the crash but never
    /// triaged are re-queued first.
    void start();
    /// Stops admission, finishes queued work and joins the workers.
    void stop();

    SubmitOutcome submit(const RawRecord& raw);
    /// Blocks until every admitted message has been triaged or dropped.
    void drain();

    FeedbackOutcome feedback(DispatcherFeedback feedback);

    std::vector<IncidentRecord> queue(const std::string& agency_id) const;
    std::optional<IncidentRecord> incident(const std::string& incident_id) const;
    std::map<std::string, double> feedback_stats() const;
    nlohmann::json dump_state() const;
    GatewayStats stats() const;
    nlohmann::json health() const;

    const CategoryTaxonomy& taxonomy() const noexcept { return config_.taxonomy; }
    const RoutingTable& routing_table() const noexcept { return table_; }
    const GatewayConfig& config() const noexcept { return gateway_config_; }
    Journal& journal() noexcept { return *journal_; }
    InferenceHub& hub() noexcept { return *hub_; }
    std::uint64_t recovered_events() const noexcept { return recovered_events_; }

private:
    void recover();
    void worker_loop();
    void process(const EmergencyMessage& message);
    void finish_one();

    GatewayConfig gateway_config_;
    PipelineConfig config_;
    RoutingTable table_;
    std::shared_ptr<InferenceHub> hub_;
    std::unique_ptr<TriageEngine> engine_;
    std::unique_ptr<Journal> journal_;

    mutable std::mutex state_mu_;  // router, guard, stats, journal ordering
    Router router_;
    PoisoningGuard guard_;
    std::ofstream quarantine_file_;
    QuarantineJournal quarantine_;
    GatewayStats stats_;
    std::vector<EmergencyMessage> pending_recovery_;
    std::uint64_t recovered_events_ = 0;

    BoundedQueue<EmergencyMessage> queue_;
    std::vector<std::thread> workers_;
    std::atomic<bool> accepting_{false};
    std::mutex drain_mu_;
    std::condition_variable drain_cv_;
    std::size_t in_flight_ = 0;
};

/// HTTP/JSON and server-sent-event surface over a Gateway.
class HttpService {
public:
    explicit HttpService(Gateway& gateway);
    ~HttpService();

    /// Binds host:port (0 picks a free port) and returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace crisis
