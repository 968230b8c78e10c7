#include "crisis/gateway.hpp"

#include "crisis/codec.hpp"

#include <cstdlib>
#include <filesystem>

namespace crisis {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string resolve(const fs::path& base, const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return {};
    const fs::path p = j[key].get<std::string>();
    return (p.is_absolute() ? p : base / p).lexically_normal().string();
}

CategoryTaxonomy taxonomy_for(const GatewayConfig& c) {
    return c.taxonomy_path.empty() ? load_taxonomy(default_taxonomy_text()) : load_taxonomy_file(c.taxonomy_path);
}

RoutingTable table_for(const GatewayConfig& c) {
    if (c.routing_path.empty()) {
        RoutingTable t;
        t.default_agency = "emergency_management";
        return t;
    }
    return load_routing_table(read_text_file(c.routing_path));
}

}  // namespace

PipelineConfig pipeline_for(const GatewayConfig& c) {
    PipelineConfig p;
    p.taxonomy = taxonomy_for(c);
    p.backend_chain = c.chain;
    p.deadline = c.deadline;
    p.max_retries = c.max_retries;
    p.advisory_audience = c.advisory_audience;
    if (!c.snippets_path.empty()) p.snippets = load_snippets_file(c.snippets_path, &p.taxonomy);
    return p;
}

std::shared_ptr<InferenceHub> hub_for(const GatewayConfig& c, const CategoryTaxonomy& taxonomy) {
    auto hub = std::make_shared<InferenceHub>();
    for (const auto& spec : c.backends) {
        if (spec.type == "baseline") {
            hub->register_backend(spec.id, std::make_shared<BaselineBackend>(taxonomy));
        } else if (spec.type == "remote") {
            hub->register_backend(spec.id, std::make_shared<RemoteChatBackend>(spec.endpoint));
        } else if (spec.type == "canned") {
            hub->register_backend(spec.id,
                                  std::make_shared<CannedBackend>(CannedBackend::from_ndjson(read_text_file(spec.canned_path))));
        } else {
            throw std::invalid_argument("unknown backend type '" + spec.type + "'");
        }
    }
    return hub;
}

void apply_env_overrides(GatewayConfig& config) {
    if (const char* port = std::getenv("CRISIS_PORT"); port && *port) {
        char* end = nullptr;
        const long v = std::strtol(port, &end, 10);
        if (*end != '\0' || v < 0 || v > 65535) throw std::invalid_argument("CRISIS_PORT is not a port number");
        config.port = static_cast<int>(v);
    }
    if (const char* token = std::getenv("CRISIS_LLM_TOKEN"); token && *token) {
        for (auto& b : config.backends) {
            if (b.type == "remote") b.endpoint.token = token;
        }
    }
}

GatewayConfig load_gateway_config(const std::string& path) {
    const json j = json::parse(read_text_file(path));
    const fs::path base = fs::path(path).parent_path();
    GatewayConfig c;
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.taxonomy_path = resolve(base, j, "taxonomy");
    c.routing_path = resolve(base, j, "routing");
    c.snippets_path = resolve(base, j, "snippets");
    c.stopwords_dir = resolve(base, j, "stopwords");
    c.journal_path = resolve(base, j, "journal");
    c.quarantine_path = resolve(base, j, "quarantine");
    c.workers = j.value("workers", c.workers);
    c.queue_capacity = j.value("queue_capacity", c.queue_capacity);
    c.deadline = std::chrono::milliseconds(j.value("deadline_ms", c.deadline.count()));
    c.max_retries = j.value("max_retries", c.max_retries);
    c.merge_window = std::chrono::minutes(j.value("merge_window_minutes", c.merge_window.count()));
    if (j.contains("advisory_audience") && !j["advisory_audience"].is_null()) {
        c.advisory_audience = parse_audience(j["advisory_audience"].get<std::string>());
        if (!c.advisory_audience) throw std::invalid_argument("unknown advisory_audience");
    }
    if (j.contains("auth_token") && !j["auth_token"].is_null()) c.auth_token = j["auth_token"].get<std::string>();
    if (j.contains("guard")) {
        const auto& g = j["guard"];
        c.guard.dedup_window = g.value("dedup_window", c.guard.dedup_window);
        c.guard.shingle_size = g.value("shingle_size", c.guard.shingle_size);
        c.guard.flood_limit = g.value("flood_limit", c.guard.flood_limit);
        c.guard.flood_window = std::chrono::seconds(g.value(
            "flood_window_s", std::chrono::duration_cast<std::chrono::seconds>(c.guard.flood_window).count()));
    }
    if (j.contains("backends")) {
        c.backends.clear();
        for (const auto& b : j["backends"]) {
            BackendSpec spec;
            spec.id = b.at("id").get<std::string>();
            spec.type = b.value("type", spec.type);
            spec.endpoint.base_url = b.value("base_url", std::string{});
            spec.endpoint.path = b.value("path", spec.endpoint.path);
            spec.endpoint.model = b.value("model", std::string{});
            spec.endpoint.temperature = b.value("temperature", 0.0);
            if (b.contains("token") && !b["token"].is_null()) spec.endpoint.token = b["token"].get<std::string>();
            if (b.contains("file")) spec.canned_path = resolve(base, b, "file");
            c.backends.push_back(std::move(spec));
        }
    }
    if (j.contains("chain")) c.chain = j["chain"].get<std::vector<std::string>>();
    apply_env_overrides(c);
    return c;
}

// ---------------------------------------------------------------------------

Gateway::Gateway(GatewayConfig config, std::shared_ptr<InferenceHub> hub)
    : gateway_config_(std::move(config)),
      config_(pipeline_for(gateway_config_)),
      table_(table_for(gateway_config_)),
      hub_(hub ? std::move(hub) : hub_for(gateway_config_, config_.taxonomy)),
      router_(table_, config_.taxonomy, RouterConfig{gateway_config_.merge_window}),
      guard_(gateway_config_.guard),
      queue_(gateway_config_.queue_capacity) {
    for (const auto& id : config_.backend_chain) {
        if (!hub_->has_backend(id)) throw std::invalid_argument("chain names unregistered backend '" + id + "'");
    }
    if (const auto problems = validate_routing(table_, config_.taxonomy); !problems.empty()) {
        throw RoutingError(RoutingErrc::bad_table, problems.front());
    }
    std::shared_ptr<const LocaleDetector> detector;
    if (!gateway_config_.stopwords_dir.empty()) {
        detector = std::make_shared<HeuristicLocaleDetector>(
            HeuristicLocaleDetector::from_directory(gateway_config_.stopwords_dir));
    }
    engine_ = std::make_unique<TriageEngine>(config_, hub_, detector);
    for (const auto* p : {&gateway_config_.journal_path, &gateway_config_.quarantine_path}) {
        if (!p->empty() && fs::path(*p).has_parent_path()) fs::create_directories(fs::path(*p).parent_path());
    }
    journal_ = gateway_config_.journal_path.empty() ? std::make_unique<Journal>()
                                                    : std::make_unique<Journal>(gateway_config_.journal_path);
    if (!gateway_config_.quarantine_path.empty()) {
        quarantine_file_.open(gateway_config_.quarantine_path, std::ios::app);
        if (!quarantine_file_) throw std::runtime_error("cannot open " + gateway_config_.quarantine_path);
        quarantine_ = QuarantineJournal(&quarantine_file_);
    }
    recover();
}

Gateway::~Gateway() { stop(); }

void Gateway::recover() {
    std::map<std::string, EmergencyMessage> untriaged;
    std::vector<std::string> order;
    for (const auto& e : journal_->since(0)) {
        switch (e.kind) {
            case EventKind::message_admitted: {
                auto m = e.payload.get<EmergencyMessage>();
                order.push_back(m.id);
                untriaged.emplace(m.id, std::move(m));
                stats_.admitted++;
                break;
            }
            case EventKind::triage_result: {
                const auto input = e.payload.get<RoutingInput>();
                untriaged.erase(input.result.message_id);
                stats_.triaged++;
                const auto outcome = router_.route(input);
                if (outcome.kind == RouteOutcome::Kind::reviewed) {
                    stats_.reviewed++;
                } else {
                    stats_.relevant++;
                    stats_.queued_messages++;
                }
                break;
            }
            case EventKind::feedback:
                router_.record_feedback(e.payload.get<DispatcherFeedback>());
                break;
            case EventKind::quarantine:
                stats_.quarantined++;
                break;
            case EventKind::incident_created:
            case EventKind::incident_merged:
            case EventKind::notification:
                break;  // derived; the replay above regenerates them
        }
        ++recovered_events_;
    }
    for (const auto& id : order) {
        if (auto it = untriaged.find(id); it != untriaged.end()) pending_recovery_.push_back(it->second);
    }
    stats_.incidents = router_.incident_count();
}

void Gateway::start() {
    if (accepting_.exchange(true)) return;
    const std::size_t n = std::max<std::size_t>(1, gateway_config_.workers);
    for (std::size_t i = 0; i < n; ++i) workers_.emplace_back([this] { worker_loop(); });
    std::vector<EmergencyMessage> pending;
    {
        std::lock_guard lock(state_mu_);
        pending.swap(pending_recovery_);
    }
    for (auto& m : pending) {
        {
            std::lock_guard lock(drain_mu_);
            ++in_flight_;
        }
        queue_.push(std::move(m));
    }
}

void Gateway::stop() {
    if (!accepting_.exchange(false) && workers_.empty()) return;
    queue_.close();
    for (auto& t : workers_) t.join();
    workers_.clear();
    journal_->shutdown();
}

SubmitOutcome Gateway::submit(const RawRecord& raw) {
    SubmitOutcome out;
    if (!accepting_) {
        out.kind = SubmitOutcome::Kind::unavailable;
        return out;
    }
    bool all_tripped = true;
    for (const auto& id : config_.backend_chain) all_tripped = all_tripped && hub_->health(id).tripped;
    if (all_tripped) {
        out.kind = SubmitOutcome::Kind::unavailable;
        return out;
    }
    RawRecord record = raw;
    if (record.received_at.empty()) {
        record.received_at = format_timestamp(std::chrono::time_point_cast<std::chrono::milliseconds>(
            std::chrono::system_clock::now()));
    }
    auto validated = validate_message(record);
    if (auto* rejection = std::get_if<Rejection>(&validated)) {
        std::lock_guard lock(state_mu_);
        stats_.rejected++;
        out.kind = SubmitOutcome::Kind::rejected;
        out.rejection = *rejection;
        return out;
    }
    auto& message = std::get<EmergencyMessage>(validated);
    out.message_id = message.id;
    {
        std::lock_guard lock(state_mu_);
        out.verdict = guard_.check(message);
        const auto now = std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
        if (out.verdict.status != GuardStatus::pass) {
            stats_.quarantined++;
            const json record_json = message;
            quarantine_.write(record_json, out.verdict, now);
            journal_->append(EventKind::quarantine,
                             {{"record", record_json},
                              {"verdict", {{"status", to_string(out.verdict.status)}, {"detail", out.verdict.detail}}}},
                             now);
            out.kind = SubmitOutcome::Kind::quarantined;
            return out;
        }
        stats_.admitted++;
        journal_->append(EventKind::message_admitted, message, now);
    }
    {
        std::lock_guard lock(drain_mu_);
        ++in_flight_;
    }
    if (!queue_.push(std::move(message))) {
        finish_one();
        out.kind = SubmitOutcome::Kind::unavailable;
        return out;
    }
    out.kind = SubmitOutcome::Kind::admitted;
    return out;
}

void Gateway::worker_loop() {
    while (auto message = queue_.pop()) {
        try {
            process(*message);
        } catch (...) {
            // A broken message must not take a worker down; it stays in the
            // journal as admitted and will be retried on the next recovery.
        }
        finish_one();
    }
}

void Gateway::finish_one() {
    std::lock_guard lock(drain_mu_);
    --in_flight_;
    if (in_flight_ == 0) drain_cv_.notify_all();
}

void Gateway::drain() {
    std::unique_lock lock(drain_mu_);
    drain_cv_.wait(lock, [&] { return in_flight_ == 0; });
}

void Gateway::process(const EmergencyMessage& message) {
    TriageResult result;
    try {
        result = engine_->triage(message);
    } catch (const std::invalid_argument&) {
        std::lock_guard lock(state_mu_);
        stats_.dropped++;
        return;
    }
    RoutingInput input{std::move(result), message.geo, message.received_at};
    std::lock_guard lock(state_mu_);
    const auto now = std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
    journal_->append(EventKind::triage_result, input, now);
    stats_.triaged++;
    const auto outcome = router_.route(input);
    switch (outcome.kind) {
        case RouteOutcome::Kind::reviewed:
            stats_.reviewed++;
            break;
        case RouteOutcome::Kind::created:
            journal_->append(EventKind::incident_created, *outcome.incident, now);
            break;
        case RouteOutcome::Kind::merged:
            journal_->append(EventKind::incident_merged, *outcome.incident, now);
            break;
    }
    if (outcome.kind != RouteOutcome::Kind::reviewed) {
        stats_.relevant++;
        stats_.queued_messages++;
    }
    if (outcome.notification) journal_->append(EventKind::notification, *outcome.notification, now);
    stats_.incidents = router_.incident_count();
}

FeedbackOutcome Gateway::feedback(DispatcherFeedback fb) {
    std::lock_guard lock(state_mu_);
    const auto now = std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
    if (fb.at == Timestamp{}) fb.at = now;
    auto outcome = router_.record_feedback(fb);  // throws before anything is journaled
    journal_->append(EventKind::feedback, fb, now);
    if (outcome.notification) journal_->append(EventKind::notification, *outcome.notification, now);
    return outcome;
}

std::vector<IncidentRecord> Gateway::queue(const std::string& agency_id) const {
    std::lock_guard lock(state_mu_);
    return router_.queue(agency_id);
}

std::optional<IncidentRecord> Gateway::incident(const std::string& incident_id) const {
    std::lock_guard lock(state_mu_);
    return router_.incident(incident_id);
}

std::map<std::string, double> Gateway::feedback_stats() const {
    std::lock_guard lock(state_mu_);
    return router_.feedback_stats();
}

json Gateway::dump_state() const {
    std::lock_guard lock(state_mu_);
    return router_.dump_state();
}

GatewayStats Gateway::stats() const {
    std::lock_guard lock(state_mu_);
    return stats_;
}

json Gateway::health() const {
    json backends = json::object();
    bool all_tripped = true;
    for (const auto& id : config_.backend_chain) {
        const auto h = hub_->health(id);
        all_tripped = all_tripped && h.tripped;
        backends[id] = {{"calls", h.calls}, {"parse_failures", h.parse_failures}, {"timeouts", h.timeouts},
                        {"tripped", h.tripped}};
    }
    return {{"status", all_tripped ? "unavailable" : "ok"},
            {"backends", backends},
            {"queue_depth", queue_.size()},
            {"last_seq", journal_->last_seq()}};
}

}  // namespace crisis
