#include "crisis/inference.hpp"

#include "crisis/prompting.hpp"
#include "crisis/textprep.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

namespace crisis {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string_view to_string(InferenceErrc e) {
    switch (e) {
        case InferenceErrc::timeout: return "timeout";
        case InferenceErrc::transport_error: return "transport_error";
        case InferenceErrc::bad_status: return "bad_status";
        case InferenceErrc::bad_payload: return "bad_payload";
        case InferenceErrc::backend_tripped: return "backend_tripped";
        case InferenceErrc::unknown_backend: return "unknown_backend";
        case InferenceErrc::unsupported: return "unsupported";
    }
    return "transport_error";
}

namespace {

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Shared retry/budget loop for hub calls and direct remote calls.
InferenceResponse budgeted_call(Backend& backend, const InferenceRequest& request, HealthMonitor* health) {
    if (request.deadline.count() <= 0) throw std::invalid_argument("deadline must be positive");
    const auto start = Clock::now();
    const Deadline deadline = start + request.deadline;
    int attempt = 0;
    while (true) {
        std::optional<InferenceResponse> response;
        try {
            response = backend.complete(request, deadline);
        } catch (const InferenceError& e) {
            const bool can_retry =
                e.retryable() && attempt < request.max_retries && Clock::now() + kRetryBackoff < deadline;
            if (can_retry) {
                ++attempt;
                std::this_thread::sleep_for(kRetryBackoff);
                continue;
            }
            if (health) health->record(false, e.code() == InferenceErrc::timeout);
            throw InferenceError(e.code(), e.detail(), e.retryable(), ms_since(start));
        }
        const double elapsed = ms_since(start);
        if (Clock::now() > deadline) {
            if (health) health->record(false, true);
            throw InferenceError(InferenceErrc::timeout, "reply arrived after the deadline", false, elapsed);
        }
        response->elapsed_ms = elapsed;
        response->backend_id = request.backend_id;
        if (health) health->record(request.expect_contract && !conforms_to_contract(response->text), false);
        return std::move(*response);
    }
}

void sleep_or_timeout(std::chrono::milliseconds delay, Deadline deadline) {
    const auto wake = Clock::now() + delay;
    if (wake > deadline) {
        std::this_thread::sleep_until(deadline);
        throw InferenceError(InferenceErrc::timeout, "backend did not answer before the deadline");
    }
    std::this_thread::sleep_until(wake);
}

}  // namespace

bool conforms_to_contract(std::string_view text) {
    try {
        const json j = json::parse(text);
        return j.is_object() && j.contains("relevant") && j["relevant"].is_boolean();
    } catch (const json::exception&) {
        return false;
    }
}

// ---------------------------------------------------------------------------
// Health

void HealthMonitor::record(bool parse_failure, bool timeout) {
    std::lock_guard lock(mu_);
    window_.push_back({parse_failure, timeout});
    if (window_.size() > kWindow) window_.pop_front();
    std::size_t failures = 0;
    for (const auto& o : window_) failures += o.parse_failure;
    if (static_cast<double>(failures) > kTripRate * static_cast<double>(kWindow)) tripped_ = true;
}

BackendHealth HealthMonitor::snapshot() const {
    std::lock_guard lock(mu_);
    BackendHealth h;
    h.calls = window_.size();
    for (const auto& o : window_) {
        h.parse_failures += o.parse_failure;
        h.timeouts += o.timeout;
    }
    h.tripped = tripped_;
    return h;
}

bool HealthMonitor::tripped() const {
    std::lock_guard lock(mu_);
    return tripped_;
}

void HealthMonitor::reset() {
    std::lock_guard lock(mu_);
    window_.clear();
    tripped_ = false;
}

// ---------------------------------------------------------------------------
// Hub

void InferenceHub::register_backend(const std::string& id, std::shared_ptr<Backend> backend) {
    std::lock_guard lock(mu_);
    entries_[id] = Entry{std::move(backend), std::make_shared<HealthMonitor>()};
}

bool InferenceHub::has_backend(const std::string& id) const {
    std::lock_guard lock(mu_);
    return entries_.contains(id);
}

std::vector<std::string> InferenceHub::backend_ids() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> ids;
    for (const auto& [id, _] : entries_) ids.push_back(id);
    return ids;
}

InferenceHub::Entry InferenceHub::entry(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(id);
    if (it == entries_.end()) throw InferenceError(InferenceErrc::unknown_backend, id);
    return it->second;
}

InferenceResponse InferenceHub::infer(const InferenceRequest& request) {
    const Entry e = entry(request.backend_id);
    if (e.health->tripped()) throw InferenceError(InferenceErrc::backend_tripped, request.backend_id);
    return budgeted_call(*e.backend, request, e.health.get());
}

BackendHealth InferenceHub::health(const std::string& id) const { return entry(id).health->snapshot(); }

void InferenceHub::reset(const std::string& id) { entry(id).health->reset(); }

bool InferenceHub::all_tripped() const {
    std::lock_guard lock(mu_);
    if (entries_.empty()) return false;
    for (const auto& [_, e] : entries_) {
        if (!e.health->tripped()) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Baseline

std::map<std::string, double> baseline_classify(std::string_view cleaned_text, const CategoryTaxonomy& taxonomy) {
    const auto words = word_tokens(cleaned_text);
    std::map<std::string, double> scores;
    for (const auto& label : taxonomy.labels()) {
        int hits = 0;
        for (const auto& term : label.lexicon) hits += contains_phrase(words, term) ? 1 : 0;
        scores[label.key] = 1.0 - std::ldexp(1.0, -hits);
    }
    return scores;
}

InferenceResponse BaselineBackend::complete(const InferenceRequest& request, Deadline) {
    const std::string full = request.system_text + "\n\n" + request.prompt;
    const auto task = extract_task(full);
    const auto message = extract_message(full);
    if (!task || !message) throw InferenceError(InferenceErrc::bad_payload, "prompt carries no task or message");
    if (*task != PromptTask::binary_relevance && *task != PromptTask::multiclass) {
        throw InferenceError(InferenceErrc::unsupported, "baseline only classifies");
    }
    const auto scores = baseline_classify(*message, taxonomy_);
    std::map<std::string, double> predicted;
    double max_score = 0.0;
    for (const auto& [key, score] : scores) {
        max_score = std::max(max_score, score);
        if (score >= kPredictionThreshold) predicted[key] = score;
    }
    InferenceResponse response;
    if (*task == PromptTask::binary_relevance) {
        response.text = json{{"relevant", !predicted.empty()}}.dump();
        response.label_scores = std::map<std::string, double>{{"relevant", max_score}};
    } else {
        response.text = contract_answer(!predicted.empty(), predicted);
        response.label_scores = scores;
    }
    return response;
}

// ---------------------------------------------------------------------------
// Scripted and canned

ScriptedBackend::ScriptedBackend(std::vector<MockStep> steps) : steps_(std::move(steps)) {
    if (steps_.empty()) throw std::invalid_argument("scripted backend needs at least one step");
}

InferenceResponse ScriptedBackend::complete(const InferenceRequest&, Deadline deadline) {
    MockStep step;
    {
        std::lock_guard lock(mu_);
        step = steps_[std::min(next_, steps_.size() - 1)];
        ++next_;
    }
    if (step.delay.count() > 0) sleep_or_timeout(step.delay, deadline);
    if (step.fail) {
        const bool retryable = *step.fail == InferenceErrc::transport_error || *step.fail == InferenceErrc::bad_status;
        throw InferenceError(*step.fail, "scripted failure", retryable);
    }
    InferenceResponse r;
    r.text = step.text;
    return r;
}

std::size_t ScriptedBackend::calls() const {
    std::lock_guard lock(mu_);
    return next_;
}

CannedBackend CannedBackend::from_ndjson(std::string_view text) {
    std::map<std::string, std::string> answers;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const json j = json::parse(line);
        const auto& answer = j.at("answer");
        answers[j.at("message").get<std::string>()] = answer.is_string() ? answer.get<std::string>() : answer.dump();
    }
    return CannedBackend(std::move(answers));
}

InferenceResponse CannedBackend::complete(const InferenceRequest& request, Deadline) {
    const auto message = extract_message(request.prompt);
    if (!message) throw InferenceError(InferenceErrc::bad_payload, "prompt carries no message");
    const auto it = answers_.find(*message);
    if (it == answers_.end()) throw InferenceError(InferenceErrc::bad_payload, "no canned answer");
    InferenceResponse r;
    r.text = it->second;
    return r;
}

// ---------------------------------------------------------------------------
// Remote

RemoteChatBackend::RemoteChatBackend(EndpointConfig config) : config_(std::move(config)) {
    if (const char* env = std::getenv("CRISIS_LLM_TOKEN"); env && *env) config_.token = env;
}

std::string RemoteChatBackend::request_body(const InferenceRequest& request) const {
    json messages = json::array();
    if (!request.system_text.empty()) messages.push_back({{"role", "system"}, {"content", request.system_text}});
    messages.push_back({{"role", "user"}, {"content", request.prompt}});
    return json{{"model", config_.model}, {"messages", messages}, {"temperature", config_.temperature}}.dump(
        -1, ' ', false, json::error_handler_t::replace);
}

InferenceResponse RemoteChatBackend::complete(const InferenceRequest& request, Deadline deadline) {
    const auto remaining = std::chrono::duration_cast<std::chrono::microseconds>(deadline - Clock::now());
    if (remaining.count() <= 0) throw InferenceError(InferenceErrc::timeout, "no time left");

    httplib::Client client(config_.base_url);
    const auto secs = static_cast<time_t>(remaining.count() / 1'000'000);
    const auto usecs = static_cast<time_t>(remaining.count() % 1'000'000);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (config_.token && !config_.token->empty()) headers.emplace("Authorization", "Bearer " + *config_.token);

    auto result = client.Post(config_.path, headers, request_body(request), "application/json");
    if (!result) {
        if (Clock::now() >= deadline) {
            throw InferenceError(InferenceErrc::timeout, "endpoint did not answer before the deadline");
        }
        throw InferenceError(InferenceErrc::transport_error, httplib::to_string(result.error()), true);
    }
    if (result->status < 200 || result->status >= 300) {
        throw InferenceError(InferenceErrc::bad_status, "HTTP " + std::to_string(result->status),
                             result->status >= 500);
    }
    InferenceResponse r;
    try {
        const json body = json::parse(result->body);
        r.text = body.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw InferenceError(InferenceErrc::bad_payload, e.what());
    }
    return r;
}

InferenceResponse remote_chat_call(const InferenceRequest& request, const EndpointConfig& endpoint) {
    RemoteChatBackend backend(endpoint);
    return budgeted_call(backend, request, nullptr);
}

}  // namespace crisis
