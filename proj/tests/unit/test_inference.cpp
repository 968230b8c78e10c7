#include "crisis/inference.hpp"
#include "crisis/prompting.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <thread>

using namespace crisis;
using namespace std::chrono_literals;

namespace {

const CategoryTaxonomy& taxonomy() {
    static const auto t = load_taxonomy(default_taxonomy_text());
    return t;
}

InferenceRequest request(const std::string& backend, std::chrono::milliseconds deadline = 2000ms) {
    InferenceRequest r;
    r.backend_id = backend;
    r.prompt = "Task: binary_relevance\nMessage to classify: \"help\"\n";
    r.deadline = deadline;
    return r;
}

InferenceErrc code_of(InferenceHub& hub, const InferenceRequest& r) {
    try {
        hub.infer(r);
    } catch (const InferenceError& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error";
    return InferenceErrc::unsupported;
}

/// Loopback chat-completions stub.
class StubServer {
public:
    explicit StubServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
        server_.Post("/v1/chat/completions", [this, handler](const httplib::Request& req, httplib::Response& res) {
            ++hits;
            last_body = req.body;
            last_auth = req.get_header_value("Authorization");
            handler(req, res);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubServer() {
        server_.stop();
        thread_.join();
    }
    EndpointConfig endpoint() const {
        EndpointConfig e;
        e.base_url = "http://127.0.0.1:" + std::to_string(port_);
        e.model = "stub-model";
        e.token = "secret";
        return e;
    }
    std::atomic<int> hits{0};
    std::string last_body, last_auth;

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

std::string completion(const std::string& content) {
    return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
}

}  // namespace

TEST(Baseline, ScoreFormula) {
    const auto one = baseline_classify("the earthquake hit", taxonomy());
    EXPECT_DOUBLE_EQ(one.at("earthquake"), 0.5);
    EXPECT_DOUBLE_EQ(one.at("fire"), 0.0);
    const auto two = baseline_classify("earthquake then a quake and another earthquake", taxonomy());
    EXPECT_DOUBLE_EQ(two.at("earthquake"), 0.75);
    EXPECT_DOUBLE_EQ(baseline_classify("Earthquake QUAKE rubble", taxonomy()).at("earthquake"), 0.875);
    // Whole words only.
    EXPECT_DOUBLE_EQ(baseline_classify("firefighters", taxonomy()).at("fire"), 0.0);
    // Phrase terms.
    EXPECT_DOUBLE_EQ(baseline_classify("no power since noon", taxonomy()).at("electricity"), 0.5);
    EXPECT_EQ(baseline_classify("a b c", taxonomy()).size(), taxonomy().size());
}

TEST(Baseline, OrderIndependentOverLexicon) {
    auto labels = taxonomy().labels();
    std::reverse(labels.begin(), labels.end());
    const CategoryTaxonomy reversed(labels);
    const std::string text = "fire and smoke, injured people need food and shelter after the storm";
    EXPECT_EQ(baseline_classify(text, taxonomy()), baseline_classify(text, reversed));
}

TEST(Baseline, AnswersContract) {
    InferenceHub hub;
    hub.register_backend("baseline", std::make_shared<BaselineBackend>(taxonomy()));
    const auto multi = render_multiclass(CleanText{"fire and smoke near the school", 6, std::nullopt, false}, taxonomy(), 0, {});
    InferenceRequest r = request("baseline");
    r.system_text = multi.system_text;
    r.prompt = multi.user_text;
    const auto res = hub.infer(r);
    EXPECT_TRUE(conforms_to_contract(res.text));
    ASSERT_TRUE(res.label_scores);
    EXPECT_DOUBLE_EQ(res.label_scores->at("fire"), 0.75);
    EXPECT_GE(res.elapsed_ms, 0.0);

    const auto adv = render_advisory(TriageResult{}, "x", {}, Audience::public_user);
    r.prompt = adv.user_text;
    EXPECT_EQ(code_of(hub, r), InferenceErrc::unsupported);
}

TEST(Scripted, FixedText) {
    InferenceHub hub;
    hub.register_backend("mock", std::make_shared<ScriptedBackend>(std::vector<MockStep>{{"{\"relevant\":true}"}}));
    const auto res = hub.infer(request("mock"));
    EXPECT_EQ(res.text, "{\"relevant\":true}");
    EXPECT_GE(res.elapsed_ms, 0.0);
    EXPECT_EQ(res.backend_id, "mock");
}

TEST(Budget, SlowMockTimesOut) {
    InferenceHub hub;
    hub.register_backend("slow", std::make_shared<ScriptedBackend>(std::vector<MockStep>{{"{\"relevant\":true}", 3000ms}}));
    const auto start = std::chrono::steady_clock::now();
    try {
        hub.infer(request("slow"));
        FAIL() << "expected timeout";
    } catch (const InferenceError& e) {
        EXPECT_EQ(e.code(), InferenceErrc::timeout);
        EXPECT_GE(e.elapsed_ms(), 2000.0);
    }
    EXPECT_LT(std::chrono::steady_clock::now() - start, 2500ms);
}

TEST(Budget, NeverLateSuccess) {
    // Delays straddling a 100 ms deadline: every success must be on time.
    for (int d : {10, 60, 95, 99, 101, 150}) {
        InferenceHub hub;
        hub.register_backend("m", std::make_shared<ScriptedBackend>(
                                      std::vector<MockStep>{{"ok", std::chrono::milliseconds(d)}}));
        try {
            const auto res = hub.infer(request("m", 100ms));
            EXPECT_LE(res.elapsed_ms, 100.0) << d;
        } catch (const InferenceError& e) {
            EXPECT_EQ(e.code(), InferenceErrc::timeout) << d;
        }
    }
}

TEST(Budget, TransportRetriedOnceThenSucceeds) {
    InferenceHub hub;
    auto mock = std::make_shared<ScriptedBackend>(
        std::vector<MockStep>{{"", 0ms, InferenceErrc::transport_error}, {"{\"relevant\":false}"}});
    hub.register_backend("flaky", mock);
    const auto start = std::chrono::steady_clock::now();
    EXPECT_EQ(hub.infer(request("flaky")).text, "{\"relevant\":false}");
    EXPECT_EQ(mock->calls(), 2u);
    EXPECT_GE(std::chrono::steady_clock::now() - start, 100ms);  // backoff
}

TEST(Budget, RetriesExhausted) {
    InferenceHub hub;
    auto mock = std::make_shared<ScriptedBackend>(std::vector<MockStep>{{"", 0ms, InferenceErrc::transport_error}});
    hub.register_backend("down", mock);
    EXPECT_EQ(code_of(hub, request("down")), InferenceErrc::transport_error);
    EXPECT_EQ(mock->calls(), 2u);
    EXPECT_EQ(code_of(hub, request("nope")), InferenceErrc::unknown_backend);
}

TEST(Health, GarbageTripsBeforeCall51) {
    InferenceHub hub;
    hub.register_backend("garbage", std::make_shared<ScriptedBackend>(std::vector<MockStep>{{"lol no json here"}}));
    InferenceRequest r = request("garbage");
    r.expect_contract = true;
    int tripped_at = 0;
    for (int i = 1; i <= 20; ++i) {
        try {
            hub.infer(r);
        } catch (const InferenceError& e) {
            EXPECT_EQ(e.code(), InferenceErrc::backend_tripped);
        }
        if (!tripped_at && hub.health("garbage").tripped) tripped_at = i;
    }
    EXPECT_GT(tripped_at, 0);
    EXPECT_LT(tripped_at, 51);
    EXPECT_EQ(tripped_at, 16);  // first count above 30% of 50
    EXPECT_EQ(code_of(hub, r), InferenceErrc::backend_tripped);
    EXPECT_TRUE(hub.all_tripped());
    hub.reset("garbage");
    EXPECT_FALSE(hub.health("garbage").tripped);
}

TEST(Health, HealthyWindowDoesNotTrip) {
    HealthMonitor m;
    for (int i = 0; i < 200; ++i) m.record(i % 4 == 0, false);  // 25% failures
    EXPECT_FALSE(m.snapshot().tripped);
    EXPECT_EQ(m.snapshot().calls, 50u);
}

TEST(Remote, EchoesCannedCompletion) {
    StubServer stub([](const httplib::Request&, httplib::Response& res) {
        res.set_content(completion("{\"relevant\": true}"), "application/json");
    });
    InferenceHub hub;
    hub.register_backend("llm", std::make_shared<RemoteChatBackend>(stub.endpoint()));
    InferenceRequest r = request("llm");
    r.system_text = "sys";
    EXPECT_EQ(hub.infer(r).text, "{\"relevant\": true}");
    const auto body = nlohmann::json::parse(stub.last_body);
    EXPECT_EQ(body["model"], "stub-model");
    EXPECT_EQ(body["temperature"], 0.0);
    EXPECT_EQ(body["messages"][0]["role"], "system");
    EXPECT_EQ(body["messages"][1]["role"], "user");
    EXPECT_EQ(body["messages"][1]["content"], r.prompt);
    EXPECT_EQ(stub.last_auth, "Bearer secret");
}

TEST(Remote, ServerErrorRetriedOnceThenBadStatus) {
    StubServer stub([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
    InferenceHub hub;
    hub.register_backend("llm", std::make_shared<RemoteChatBackend>(stub.endpoint()));
    EXPECT_EQ(code_of(hub, request("llm")), InferenceErrc::bad_status);
    EXPECT_EQ(stub.hits.load(), 2);
}

TEST(Remote, MissingContentIsBadPayload) {
    StubServer stub([](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"choices":[]})", "application/json");
    });
    EXPECT_THROW(
        {
            try {
                remote_chat_call(request("x"), stub.endpoint());
            } catch (const InferenceError& e) {
                EXPECT_EQ(e.code(), InferenceErrc::bad_payload);
                throw;
            }
        },
        InferenceError);
}

TEST(Remote, DelayPastDeadlineTimesOut) {
    StubServer stub([](const httplib::Request&, httplib::Response& res) {
        std::this_thread::sleep_for(800ms);
        res.set_content(completion("late"), "application/json");
    });
    InferenceHub hub;
    hub.register_backend("llm", std::make_shared<RemoteChatBackend>(stub.endpoint()));
    try {
        hub.infer(request("llm", 300ms));
        FAIL();
    } catch (const InferenceError& e) {
        EXPECT_EQ(e.code(), InferenceErrc::timeout);
        EXPECT_GE(e.elapsed_ms(), 300.0);
    }
}

TEST(Remote, TransportErrorWhenNothingListens) {
    EndpointConfig e;
    e.base_url = "http://127.0.0.1:1";
    try {
        remote_chat_call(request("x"), e);
        FAIL();
    } catch (const InferenceError& err) {
        EXPECT_EQ(err.code(), InferenceErrc::transport_error);
        EXPECT_TRUE(err.retryable());
    }
}

TEST(Canned, AnswersByEmbeddedMessage) {
    const auto canned = CannedBackend::from_ndjson(R"({"message":"help","answer":"{\"relevant\":true}"})" "\n");
    InferenceHub hub;
    hub.register_backend("canned", std::make_shared<CannedBackend>(canned));
    EXPECT_EQ(hub.infer(request("canned")).text, "{\"relevant\":true}");
}
