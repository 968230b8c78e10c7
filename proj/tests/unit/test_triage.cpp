#include "crisis/triage.hpp"

#include <gtest/gtest.h>

using namespace crisis;
using namespace std::chrono_literals;

namespace {

const CategoryTaxonomy& taxonomy() {
    static const auto t = load_taxonomy(default_taxonomy_text());
    return t;
}

EmergencyMessage message(const std::string& text, std::optional<GeoPoint> geo = std::nullopt) {
    RawRecord r;
    r.text = text;
    r.received_at = "2023-02-06T04:17:00Z";
    if (geo) {
        r.lat = geo->lat;
        r.lon = geo->lon;
    }
    return std::get<EmergencyMessage>(validate_message(r));
}

std::shared_ptr<InferenceHub> hub_with(std::initializer_list<std::pair<std::string, std::shared_ptr<Backend>>> extra) {
    auto hub = std::make_shared<InferenceHub>();
    hub->register_backend("baseline", std::make_shared<BaselineBackend>(taxonomy()));
    for (const auto& [id, b] : extra) hub->register_backend(id, b);
    return hub;
}

PipelineConfig config(std::vector<std::string> chain = {"baseline"}) {
    PipelineConfig c;
    c.taxonomy = taxonomy();
    c.backend_chain = std::move(chain);
    return c;
}

}  // namespace

TEST(ParseOutput, Strict) {
    const auto p = parse_model_output(
        R"({"relevant":true,"labels":[{"key":"fire","confidence":0.9}],"level":"high","location":"5th Ave","contact":null})",
        taxonomy());
    EXPECT_EQ(p.mode, ParseMode::strict);
    EXPECT_TRUE(p.relevant);
    EXPECT_EQ(p.labels, (std::map<std::string, double>{{"fire", 0.9}}));
    EXPECT_EQ(p.level, EmergencyLevel::high);
    EXPECT_EQ(p.location, "5th Ave");
    EXPECT_FALSE(p.contact);
}

TEST(ParseOutput, StrictDefaultsAndUnknownKeys) {
    const auto p = parse_model_output(R"({"relevant":true,"labels":[{"key":"fire"},{"key":"aliens","confidence":0.9}]})",
                                      taxonomy());
    EXPECT_EQ(p.mode, ParseMode::strict);
    EXPECT_EQ(p.labels, (std::map<std::string, double>{{"fire", 1.0}}));
    EXPECT_FALSE(p.level);
}

TEST(ParseOutput, Repair) {
    const auto p = parse_model_output("I think this is a fire emergency", taxonomy());
    EXPECT_EQ(p.mode, ParseMode::repaired);
    EXPECT_EQ(p.labels, (std::map<std::string, double>{{"fire", 0.51}, {"emergency", 0.51}}));
    const auto q = parse_model_output("Labels: aid related, food. Level: critical", taxonomy());
    EXPECT_EQ(q.mode, ParseMode::repaired);
    EXPECT_TRUE(q.labels.contains("aid_related"));
    EXPECT_EQ(q.level, EmergencyLevel::critical);
    EXPECT_FALSE(parse_model_output("firefighters", taxonomy()).labels.contains("fire"));
}

TEST(ParseOutput, Failed) {
    const auto p = parse_model_output("no idea", taxonomy());
    EXPECT_EQ(p.mode, ParseMode::failed);
    EXPECT_TRUE(p.labels.empty());
    EXPECT_FALSE(p.relevant);
    EXPECT_EQ(parse_model_output(R"({"relevant":true,"labels":[{"key":"fire","confidence":7}]})", taxonomy()).mode,
              ParseMode::repaired);
}

TEST(Entities, Examples) {
    EXPECT_EQ(extract_entities("call +90 555 111 2233").contact, "+905551112233");
    EXPECT_EQ(extract_entities("flooding near Cedar Rapids Iowa").location_text, "Cedar Rapids Iowa");
    const auto none = extract_entities("we are fine, thanks");
    EXPECT_FALSE(none.contact);
    EXPECT_FALSE(none.location_text);
    EXPECT_FALSE(none.level_hint);
    EXPECT_EQ(extract_entities("(0532) 111-22-33 is my number").contact, "05321112233");
    EXPECT_FALSE(extract_entities("only 123 456").contact);  // too short
    EXPECT_EQ(extract_entities("stuck at home", GeoPoint{36.2, 36.16}).location_text, "36.2,36.16");
    EXPECT_EQ(extract_entities("people trapped, help").level_hint, EmergencyLevel::critical);
    EXPECT_EQ(extract_entities("he is bleeding").level_hint.value_or(EmergencyLevel::unknown) >= EmergencyLevel::high,
              true);
}

TEST(Triage, BaselineExample) {
    const TriageEngine engine(config(), hub_with({}));
    const auto r = engine.triage(message("Trapped under rubble at Konak, call +90 555 111 2233"));
    EXPECT_TRUE(r.relevant);
    EXPECT_TRUE(r.categories.contains("earthquake"));
    EXPECT_EQ(r.contact, "+905551112233");
    EXPECT_EQ(r.location_text, "Konak");
    EXPECT_EQ(r.level, EmergencyLevel::critical);
    EXPECT_EQ(r.parse_mode, ParseMode::strict);
    EXPECT_EQ(r.backend_id, "baseline");
    for (const auto& [k, v] : r.categories) {
        EXPECT_TRUE(taxonomy().contains(k));
        EXPECT_GE(v, 0.5);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Triage, IrrelevantSkipsMulticlass) {
    const TriageEngine engine(config(), hub_with({}));
    const auto r = engine.triage(message("lovely sunset over the bay tonight"));
    EXPECT_FALSE(r.relevant);
    EXPECT_TRUE(r.categories.empty());
}

TEST(Triage, DroppedMessageThrows) {
    const TriageEngine engine(config(), hub_with({}));
    EXPECT_THROW(engine.triage(message("ok")), std::invalid_argument);
}

TEST(Triage, TimeoutFallsBackToBaseline) {
    auto slow = std::make_shared<ScriptedBackend>(std::vector<MockStep>{{"{\"relevant\":true}", 3000ms}});
    auto cfg = config({"remote", "baseline"});
    cfg.deadline = 300ms;
    const TriageEngine engine(cfg, hub_with({{"remote", slow}}));
    const auto start = std::chrono::steady_clock::now();
    const auto r = engine.triage(message("fire in the building, people trapped"));
    EXPECT_EQ(r.backend_id, "baseline");
    EXPECT_TRUE(r.relevant);
    EXPECT_TRUE(r.categories.contains("fire"));
    EXPECT_EQ(slow->calls(), 1u);  // not retried for the multiclass stage
    EXPECT_LT(std::chrono::steady_clock::now() - start, 1000ms);
    EXPECT_LE(r.total_latency_ms, 300.0 * 2 + 100.0);
}

TEST(Triage, AllBackendsFailIsStillEmitted) {
    auto down = std::make_shared<ScriptedBackend>(std::vector<MockStep>{{"", 0ms, InferenceErrc::transport_error}});
    const TriageEngine engine(config({"down"}), hub_with({{"down", down}}));
    const auto r = engine.triage(message("fire in the building, call 0532 111 2233"));
    EXPECT_EQ(r.parse_mode, ParseMode::failed);
    EXPECT_FALSE(r.relevant);
    EXPECT_TRUE(r.categories.empty());
    EXPECT_EQ(r.contact, "05321112233");  // entities still extracted
    EXPECT_EQ(r.backend_id, "none");
}

TEST(Triage, EntitiesWinOverModelFields) {
    auto model = std::make_shared<ScriptedBackend>(std::vector<MockStep>{
        {R"({"relevant":true,"labels":[{"key":"fire","confidence":0.8}],"level":"low","location":"Somewhere Else","contact":"+1 000 000 0000"})"}});
    const TriageEngine engine(config({"m"}), hub_with({{"m", model}}));
    const auto r = engine.triage(message("smoke everywhere at Ataturk Caddesi, call 0532 111 2233"));
    EXPECT_EQ(r.contact, "05321112233");
    EXPECT_EQ(r.location_text, "Ataturk Caddesi");
    EXPECT_EQ(r.categories, (std::map<std::string, double>{{"fire", 0.8}}));

    const auto gap = engine.triage(message("smoke everywhere, nobody hurt yet"));
    EXPECT_EQ(gap.location_text, "Somewhere Else");
    EXPECT_EQ(gap.contact, "+10000000000");
}

TEST(Triage, RepairedModeCarried) {
    auto model = std::make_shared<ScriptedBackend>(std::vector<MockStep>{{"yes, relevant. labels: fire, medical"}});
    const TriageEngine engine(config({"m"}), hub_with({{"m", model}}));
    const auto r = engine.triage(message("smoke and an injured man on the stairs"));
    EXPECT_EQ(r.parse_mode, ParseMode::repaired);
    EXPECT_TRUE(r.relevant);
    EXPECT_DOUBLE_EQ(r.categories.at("fire"), 0.51);
}

TEST(Advisory, FromModel) {
    auto model = std::make_shared<ScriptedBackend>(std::vector<MockStep>{{"evacuate now"}});
    auto cfg = config({"m"});
    cfg.snippets = {{"s1", "doc", "Get everyone out.", {"fire"}}};
    const TriageEngine engine(cfg, hub_with({{"m", model}}));
    TriageResult r;
    r.relevant = true;
    r.categories = {{"fire", 0.9}};
    EXPECT_EQ(engine.generate_advisory(r, "fire on the roof", Audience::public_user), "evacuate now");
}

TEST(Advisory, FallbackToSnippetAndAbsent) {
    auto down = std::make_shared<ScriptedBackend>(std::vector<MockStep>{{"", 0ms, InferenceErrc::transport_error}});
    auto cfg = config({"down"});
    cfg.snippets = {{"s1", "doc", "Get everyone out.", {"fire"}}};
    const TriageEngine engine(cfg, hub_with({{"down", down}}));
    TriageResult r;
    r.relevant = true;
    r.categories = {{"fire", 0.9}};
    EXPECT_EQ(engine.generate_advisory(r, "fire", Audience::dispatcher), "Get everyone out.");
    r.categories = {{"food", 0.9}};
    EXPECT_EQ(engine.generate_advisory(r, "hungry", Audience::dispatcher), std::nullopt);
    r.relevant = false;
    EXPECT_THROW(engine.generate_advisory(r, "x", Audience::dispatcher), std::invalid_argument);
}

TEST(Advisory, AttachedWhenConfigured) {
    auto cfg = config();
    cfg.snippets = {{"s1", "doc", "Get everyone out.", {"fire"}}};
    cfg.advisory_audience = Audience::dispatcher;
    const TriageEngine engine(cfg, hub_with({}));
    const auto r = engine.triage(message("fire spreading through the market stalls"));
    EXPECT_EQ(r.advisory, "Get everyone out.");  // baseline has no advisory mode
}

TEST(TriageResultCodec, RoundTrip) {
    const TriageEngine engine(config(), hub_with({}));
    const auto r = engine.triage(message("Trapped under rubble at Konak, call +90 555 111 2233"));
    const nlohmann::json j = r;
    const auto back = j.get<TriageResult>();
    EXPECT_EQ(nlohmann::json(back), j);
    EXPECT_EQ(top_category(r, taxonomy()), "emergency");
}
