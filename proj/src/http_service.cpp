#include "crisis/codec.hpp"
#include "crisis/gateway.hpp"

#include <httplib.h>

namespace crisis {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& detail) {
    send_json(res, status, {{"error", code}, {"detail", detail}});
}

std::string sse_frame(const JournalEvent& e) {
    return "id: " + std::to_string(e.seq) + "\nevent: " + std::string(to_string(e.kind)) + "\ndata: " +
           encode_event(e) + "\n\n";
}

}  // namespace

struct HttpService::Impl {
    Gateway& gateway;
    httplib::Server server;
    std::atomic<bool> stopping{false};

    explicit Impl(Gateway& g) : gateway(g) { routes(); }

    bool authorized(const httplib::Request& req, httplib::Response& res) const {
        const auto& token = gateway.config().auth_token;
        if (!token) return true;
        if (req.get_header_value("Authorization") == "Bearer " + *token) return true;
        send_error(res, 401, "unauthorized", "missing or wrong bearer token");
        return false;
    }

    void routes() {
        server.Post("/messages", [this](const httplib::Request& req, httplib::Response& res) {
            if (!authorized(req, res)) return;
            RawRecord raw;
            try {
                raw = raw_record_from_json(json::parse(req.body));
            } catch (const std::exception& e) {
                send_error(res, 400, to_string(RejectReason::malformed), e.what());
                return;
            }
            const auto out = gateway.submit(raw);
            switch (out.kind) {
                case SubmitOutcome::Kind::admitted:
                    send_json(res, 202, {{"id", out.message_id}, {"status", "admitted"}});
                    break;
                case SubmitOutcome::Kind::quarantined:
                    send_json(res, 202, {{"id", out.message_id}, {"status", "quarantined"}});
                    break;
                case SubmitOutcome::Kind::rejected:
                    send_error(res, 400, to_string(out.rejection->reason), out.rejection->detail);
                    break;
                case SubmitOutcome::Kind::unavailable:
                    send_error(res, 503, "unavailable", "no healthy inference backend");
                    break;
            }
        });

        server.Get(R"(/agencies/([^/]+)/queue)", [this](const httplib::Request& req, httplib::Response& res) {
            if (!authorized(req, res)) return;
            try {
                send_json(res, 200, gateway.queue(req.matches[1]));
            } catch (const RoutingError& e) {
                send_error(res, 404, to_string(e.code()), e.detail());
            }
        });

        server.Get(R"(/incidents/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            if (!authorized(req, res)) return;
            const auto incident = gateway.incident(req.matches[1]);
            if (!incident) {
                send_error(res, 404, to_string(RoutingErrc::unknown_incident), req.matches[1]);
                return;
            }
            send_json(res, 200, *incident);
        });

        server.Post(R"(/incidents/([^/]+)/feedback)", [this](const httplib::Request& req, httplib::Response& res) {
            if (!authorized(req, res)) return;
            DispatcherFeedback fb;
            try {
                fb = json::parse(req.body).get<DispatcherFeedback>();
            } catch (const std::exception& e) {
                send_error(res, 400, to_string(RoutingErrc::bad_feedback), e.what());
                return;
            }
            fb.incident_id = req.matches[1];
            try {
                const auto out = gateway.feedback(fb);
                json body{{"incident", out.incident}};
                if (out.notification) body["notification"] = *out.notification;
                send_json(res, 200, body);
            } catch (const RoutingError& e) {
                const int status = e.code() == RoutingErrc::unknown_incident     ? 404
                                   : e.code() == RoutingErrc::illegal_transition ? 409
                                                                                 : 400;
                send_error(res, status, to_string(e.code()), e.detail());
            }
        });

        server.Get("/stream", [this](const httplib::Request& req, httplib::Response& res) {
            if (!authorized(req, res)) return;
            std::uint64_t after = 0;
            std::string resume = req.get_header_value("Last-Event-ID");
            if (resume.empty() && req.has_param("last_event_id")) resume = req.get_param_value("last_event_id");
            if (!resume.empty()) {
                try {
                    after = std::stoull(resume);
                } catch (const std::exception&) {
                    send_error(res, 400, "bad_last_event_id", resume);
                    return;
                }
            }
            auto cursor = std::make_shared<std::uint64_t>(after);
            res.set_header("Cache-Control", "no-cache");
            res.set_chunked_content_provider("text/event-stream", [this, cursor](size_t, httplib::DataSink& sink) {
                if (stopping) return false;
                const auto events = gateway.journal().wait_since(*cursor, std::chrono::milliseconds(500));
                if (events.empty()) {
                    static const std::string keepalive = ": keepalive\n\n";
                    return stopping ? false : sink.write(keepalive.data(), keepalive.size());
                }
                for (const auto& e : events) {
                    const std::string frame = sse_frame(e);
                    if (!sink.write(frame.data(), frame.size())) return false;
                    *cursor = e.seq;
                }
                return true;
            });
        });

        server.Get("/reports/feedback-stats", [this](const httplib::Request& req, httplib::Response& res) {
            if (!authorized(req, res)) return;
            send_json(res, 200, gateway.feedback_stats());
        });

        server.Get("/taxonomy", [this](const httplib::Request& req, httplib::Response& res) {
            if (!authorized(req, res)) return;
            json labels = json::array();
            for (const auto& l : gateway.taxonomy().labels()) {
                labels.push_back({{"key", l.key}, {"display_name", l.display_name},
                                  {"agency", gateway.routing_table().agency_for(l.key)}});
            }
            send_json(res, 200, labels);
        });

        // Left open so probes work without credentials.
        server.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
            const json h = gateway.health();
            send_json(res, h["status"] == "ok" ? 200 : 503, h);
        });
    }
};

HttpService::HttpService(Gateway& gateway) : impl_(std::make_unique<Impl>(gateway)) {}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
    if (port == 0) return impl_->server.bind_to_any_port(host);
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

void HttpService::run() { impl_->server.listen_after_bind(); }

void HttpService::stop() {
    impl_->stopping = true;
    impl_->server.stop();
}

}  // namespace crisis
