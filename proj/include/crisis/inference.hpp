#pragma once

#include "crisis/error.hpp"
#include "crisis/taxonomy.hpp"

#include <chrono>
#include <cstddef>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace crisis {

enum class InferenceErrc { timeout, transport_error, bad_status, bad_payload, backend_tripped, unknown_backend, unsupported };

std::string_view to_string(InferenceErrc e);

class InferenceError : public CodedError<InferenceErrc> {
public:
    InferenceError(InferenceErrc code, const std::string& detail, bool retryable = false, double elapsed_ms = 0.0)
        : CodedError(code, detail), retryable_(retryable), elapsed_ms_(elapsed_ms) {}

    /// Transport failures and 5xx answers may be retried.
    bool retryable() const noexcept { return retryable_; }
    double elapsed_ms() const noexcept { return elapsed_ms_; }

private:
    bool retryable_;
    double elapsed_ms_;
};

inline constexpr std::chrono::milliseconds kDefaultDeadline{2'000};
inline constexpr std::chrono::milliseconds kRetryBackoff{100};

struct InferenceRequest {
    std::string system_text;
    std::string prompt;
    std::string backend_id;
    std::chrono::milliseconds deadline = kDefaultDeadline;
    int max_retries = 1;
    /// When set, a reply that is not a contract object counts as a parse
    /// failure for health monitoring.
    bool expect_contract = false;
};

struct InferenceResponse {
    std::string text;
    std::optional<std::map<std::string, double>> label_scores;
    double elapsed_ms = 0.0;
    std::string backend_id;
};

using Deadline = std::chrono::steady_clock::time_point;

/// A prompt-to-text service. Implementations must return or throw no later
/// than shortly after `deadline`; InferenceHub converts late successes into
/// timeouts.
class Backend {
public:
    virtual ~Backend() = default;
    virtual InferenceResponse complete(const InferenceRequest& request, Deadline deadline) = 0;
};

/// Cheap structural check: a single JSON object with a boolean `relevant`.
bool conforms_to_contract(std::string_view text);

// ---------------------------------------------------------------------------
// Health

struct BackendHealth {
    std::size_t calls = 0;
    std::size_t parse_failures = 0;
    std::size_t timeouts = 0;
    bool tripped = false;
};

/// Sliding window over the last 50 calls. Trips once parse failures exceed
/// 30% of the window size and stays tripped until reset().
class HealthMonitor {
public:
    static constexpr std::size_t kWindow = 50;
    static constexpr double kTripRate = 0.30;

    void record(bool parse_failure, bool timeout);
    BackendHealth snapshot() const;
    bool tripped() const;
    void reset();

private:
    struct Outcome {
        bool parse_failure;
        bool timeout;
    };
    mutable std::mutex mu_;
    std::deque<Outcome> window_;
    bool tripped_ = false;
};

/// Registry of named backends, each with its own health monitor.
class InferenceHub {
public:
    void register_backend(const std::string& id, std::shared_ptr<Backend> backend);
    bool has_backend(const std::string& id) const;
    std::vector<std::string> backend_ids() const;

    /// Budgeted call: retries retryable failures up to max_retries with a
    /// 100 ms backoff while time remains; never returns success later than
    /// the deadline.
    InferenceResponse infer(const InferenceRequest& request);

    BackendHealth health(const std::string& id) const;
    void reset(const std::string& id);
    bool all_tripped() const;

private:
    struct Entry {
        std::shared_ptr<Backend> backend;
        std::shared_ptr<HealthMonitor> health;
    };
    Entry entry(const std::string& id) const;

    mutable std::mutex mu_;
    std::map<std::string, Entry> entries_;
};

// ---------------------------------------------------------------------------
// Backends

/// Per-label score 1 - 2^-m, m = number of distinct lexicon terms present as
/// whole words.
std::map<std::string, double> baseline_classify(std::string_view cleaned_text, const CategoryTaxonomy& taxonomy);

/// Deterministic keyword classifier answering binary and multiclass prompts
/// in the contract format. Advisory prompts are unsupported.
class BaselineBackend final : public Backend {
public:
    explicit BaselineBackend(CategoryTaxonomy taxonomy) : taxonomy_(std::move(taxonomy)) {}
    InferenceResponse complete(const InferenceRequest& request, Deadline deadline) override;

private:
    CategoryTaxonomy taxonomy_;
};

struct MockStep {
    std::string text;
    std::chrono::milliseconds delay{0};
    std::optional<InferenceErrc> fail;
};

/// Plays back steps in order, repeating the last one once exhausted.
class ScriptedBackend final : public Backend {
public:
    explicit ScriptedBackend(std::vector<MockStep> steps);
    InferenceResponse complete(const InferenceRequest& request, Deadline deadline) override;
    std::size_t calls() const;

private:
    mutable std::mutex mu_;
    std::vector<MockStep> steps_;
    std::size_t next_ = 0;
};

/// Answers from a table keyed by the message embedded in the prompt.
/// File form: NDJSON of {"message": ..., "answer": ...}.
class CannedBackend final : public Backend {
public:
    explicit CannedBackend(std::map<std::string, std::string> answers) : answers_(std::move(answers)) {}
    static CannedBackend from_ndjson(std::string_view text);
    InferenceResponse complete(const InferenceRequest& request, Deadline deadline) override;

private:
    std::map<std::string, std::string> answers_;
};

struct EndpointConfig {
    /// scheme://host[:port]
    std::string base_url;
    std::string path = "/v1/chat/completions";
    std::string model;
    std::optional<std::string> token;
    double temperature = 0.0;
};

/// Client for a chat-completions style HTTP endpoint. `CRISIS_LLM_TOKEN`
/// overrides the configured token.
class RemoteChatBackend final : public Backend {
public:
    explicit RemoteChatBackend(EndpointConfig config);
    InferenceResponse complete(const InferenceRequest& request, Deadline deadline) override;

    /// Request body: {model, messages: [{role, content}...], temperature}.
    std::string request_body(const InferenceRequest& request) const;

private:
    EndpointConfig config_;
};

/// Single remote call without hub retries; used by InferenceHub and tests.
InferenceResponse remote_chat_call(const InferenceRequest& request, const EndpointConfig& endpoint);

}  // namespace crisis
