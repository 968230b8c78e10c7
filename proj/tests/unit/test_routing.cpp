#include "crisis/routing.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace crisis;
using namespace std::chrono_literals;

namespace {

const CategoryTaxonomy& taxonomy() {
    static const auto t = load_taxonomy(default_taxonomy_text());
    return t;
}

const RoutingTable& table() {
    static const auto t = load_routing_table(read_text_file(std::string(CRISIS_DATA_DIR) + "/config/routing.toml"));
    return t;
}

const Timestamp t0 = from_epoch_millis(1675657020000);

int next_msg = 0;

RoutingInput input(std::map<std::string, double> cats, EmergencyLevel level, std::optional<GeoPoint> geo,
                   Timestamp at, std::optional<std::string> location = std::nullopt) {
    RoutingInput in;
    in.result.message_id = "m" + std::to_string(++next_msg);
    in.result.relevant = true;
    in.result.parse_mode = ParseMode::strict;
    in.result.categories = std::move(cats);
    in.result.level = level;
    in.result.location_text = std::move(location);
    in.geo = geo;
    in.received_at = at;
    return in;
}

DispatcherFeedback fb(const std::string& id, FeedbackAction action, std::optional<LabelSet> cats = std::nullopt) {
    DispatcherFeedback f;
    f.incident_id = id;
    f.action = action;
    f.edited_categories = std::move(cats);
    f.at = t0 + 1h;
    return f;
}

}  // namespace

TEST(RoutingTable, ShippedTableIsCoherent) {
    EXPECT_TRUE(validate_routing(table(), taxonomy()).empty());
    EXPECT_EQ(table().agency_for("fire"), "fire_dept");
    EXPECT_EQ(table().agency_for("storm"), "emergency_management");  // no explicit entry
    EXPECT_EQ(table().weight(EmergencyLevel::critical), 8);
    EXPECT_EQ(table().weight(EmergencyLevel::unknown), 1);
}

TEST(RoutingTable, RejectsBadTables) {
    EXPECT_THROW(load_routing_table("[categories]\nfire = \"x\"\n"), RoutingError);  // no default
    EXPECT_THROW(load_routing_table("default_agency = \"d\"\n[levels]\ncritical = 2\nhigh = 4\n"), RoutingError);
    EXPECT_THROW(load_routing_table("default_agency = \"d\"\n[levels]\nlow = 0\n"), RoutingError);
    const auto t = load_routing_table("default_agency = \"d\"\n[categories]\nnot_a_label = \"x\"\n");
    EXPECT_EQ(validate_routing(t, taxonomy()).size(), 1u);
}

TEST(Route, MergeSameCellWithinWindow) {
    Router router(table(), taxonomy());
    const GeoPoint g{38.42, 27.14};
    const auto a = router.route(input({{"earthquake", 0.9}}, EmergencyLevel::high, g, t0));
    const auto b = router.route(input({{"earthquake", 0.7}, {"medical", 0.6}}, EmergencyLevel::critical,
                                      GeoPoint{38.4211, 27.1403}, t0 + 10min));
    EXPECT_EQ(a.kind, RouteOutcome::Kind::created);
    EXPECT_EQ(b.kind, RouteOutcome::Kind::merged);
    EXPECT_EQ(router.incident_count(), 1u);
    const auto inc = router.incident(a.incident->incident_id);
    EXPECT_EQ(inc->message_ids.size(), 2u);
    EXPECT_EQ(inc->level, EmergencyLevel::critical);
    EXPECT_EQ(inc->categories, (LabelSet{"earthquake", "medical"}));
    EXPECT_EQ(inc->location_cell, "geo:38.42,27.14");
    EXPECT_EQ(router.notifications().size(), 1u);
    EXPECT_FALSE(b.notification);
}

TEST(Route, SixteenMinutesApartDoNotMerge) {
    Router router(table(), taxonomy());
    const GeoPoint g{38.42, 27.14};
    router.route(input({{"earthquake", 0.9}}, EmergencyLevel::high, g, t0));
    router.route(input({{"earthquake", 0.9}}, EmergencyLevel::high, g, t0 + 16min));
    EXPECT_EQ(router.incident_count(), 2u);
}

TEST(Route, NoMergeAcrossAgencyCellOrCategories) {
    Router router(table(), taxonomy());
    router.route(input({{"earthquake", 0.9}}, EmergencyLevel::high, GeoPoint{38.42, 27.14}, t0));
    router.route(input({{"earthquake", 0.9}}, EmergencyLevel::high, GeoPoint{38.45, 27.14}, t0));  // other cell
    router.route(input({{"fire", 0.9}}, EmergencyLevel::high, GeoPoint{38.42, 27.14}, t0));        // other agency
    router.route(input({{"earthquake", 0.9}}, EmergencyLevel::high, std::nullopt, t0));           // message cell
    router.route(input({{"earthquake", 0.9}}, EmergencyLevel::high, std::nullopt, t0));
    EXPECT_EQ(router.incident_count(), 5u);
}

TEST(Route, LocationTextCellNormalized) {
    Router router(table(), taxonomy());
    router.route(input({{"fire", 0.9}}, EmergencyLevel::high, std::nullopt, t0, "Ataturk  Caddesi"));
    const auto b = router.route(input({{"fire", 0.8}}, EmergencyLevel::low, std::nullopt, t0 + 1min, "ataturk caddesi"));
    EXPECT_EQ(b.kind, RouteOutcome::Kind::merged);
    EXPECT_EQ(b.incident->location_cell, "loc:ataturk caddesi");
}

TEST(Route, AgencyFromTopCategoryWithTaxonomyTieBreak) {
    Router router(table(), taxonomy());
    EXPECT_EQ(router.route(input({{"fire", 0.6}, {"medical", 0.9}}, EmergencyLevel::low, std::nullopt, t0))
                  .incident->agency_id,
              "ems");
    // fire precedes medical in taxonomy order
    EXPECT_EQ(router.route(input({{"medical", 0.7}, {"fire", 0.7}}, EmergencyLevel::low, std::nullopt, t0))
                  .incident->agency_id,
              "fire_dept");
    EXPECT_EQ(router.route(input({{"storm", 0.7}}, EmergencyLevel::low, std::nullopt, t0)).incident->agency_id,
              "emergency_management");
}

TEST(Route, FailedAndIrrelevantGoToReview) {
    Router router(table(), taxonomy());
    auto failed = input({}, EmergencyLevel::unknown, std::nullopt, t0);
    failed.result.parse_mode = ParseMode::failed;
    failed.result.relevant = false;
    auto irrelevant = input({}, EmergencyLevel::unknown, std::nullopt, t0);
    irrelevant.result.relevant = false;
    EXPECT_EQ(router.route(failed).kind, RouteOutcome::Kind::reviewed);
    EXPECT_EQ(router.route(irrelevant).kind, RouteOutcome::Kind::reviewed);
    EXPECT_EQ(router.review_queue().size(), 2u);
    EXPECT_EQ(router.incident_count(), 0u);
}

TEST(Queue, PriorityOrder) {
    Router router(table(), taxonomy());
    const auto low = router.route(input({{"fire", 0.9}}, EmergencyLevel::low, std::nullopt, t0));
    const auto crit_late = router.route(input({{"fire", 0.9}}, EmergencyLevel::critical, std::nullopt, t0 + 2min));
    const auto crit_early = router.route(input({{"fire", 0.9}}, EmergencyLevel::critical, std::nullopt, t0 + 1min));
    EXPECT_EQ(router.next_for_agency("fire_dept")->incident_id, crit_early.incident->incident_id);
    const auto q = router.queue("fire_dept");
    ASSERT_EQ(q.size(), 3u);
    EXPECT_EQ(q[1].incident_id, crit_late.incident->incident_id);
    EXPECT_EQ(q[2].incident_id, low.incident->incident_id);
    EXPECT_FALSE(router.next_for_agency("police"));
    EXPECT_THROW(router.next_for_agency("nasa"), RoutingError);
}

TEST(Queue, MergeRaisesPriority) {
    Router router(table(), taxonomy());
    const auto a = router.route(input({{"fire", 0.9}}, EmergencyLevel::low, GeoPoint{1, 1}, t0));
    const auto b = router.route(input({{"fire", 0.9}}, EmergencyLevel::moderate, GeoPoint{2, 2}, t0));
    EXPECT_EQ(router.next_for_agency("fire_dept")->incident_id, b.incident->incident_id);
    router.route(input({{"fire", 0.9}}, EmergencyLevel::critical, GeoPoint{1, 1}, t0 + 1min));
    EXPECT_EQ(router.next_for_agency("fire_dept")->incident_id, a.incident->incident_id);
    EXPECT_EQ(router.queue("fire_dept").size(), 2u);
}

TEST(Feedback, AcceptRemovesAndDismissTwiceIsIllegal) {
    Router router(table(), taxonomy());
    const auto a = router.route(input({{"fire", 0.9}}, EmergencyLevel::high, std::nullopt, t0));
    const auto b = router.route(input({{"fire", 0.9}}, EmergencyLevel::high, std::nullopt, t0));
    const auto out = router.record_feedback(fb(a.incident->incident_id, FeedbackAction::accept));
    EXPECT_EQ(out.incident.status, IncidentStatus::acknowledged);
    EXPECT_EQ(router.queue("fire_dept").size(), 1u);
    router.record_feedback(fb(b.incident->incident_id, FeedbackAction::dismiss));
    try {
        router.record_feedback(fb(b.incident->incident_id, FeedbackAction::dismiss));
        FAIL();
    } catch (const RoutingError& e) {
        EXPECT_EQ(e.code(), RoutingErrc::illegal_transition);
    }
    try {
        router.record_feedback(fb("INC-999999", FeedbackAction::accept));
        FAIL();
    } catch (const RoutingError& e) {
        EXPECT_EQ(e.code(), RoutingErrc::unknown_incident);
    }
    EXPECT_THROW(router.record_feedback(fb(b.incident->incident_id, FeedbackAction::edit)), RoutingError);
}

TEST(Feedback, EditReroutesWithOneNotification) {
    Router router(table(), taxonomy());
    auto in = input({{"fire", 0.9}}, EmergencyLevel::high, std::nullopt, t0);
    const auto a = router.route(in);
    const auto before = router.notifications().size();
    const auto out = router.record_feedback(fb(a.incident->incident_id, FeedbackAction::edit, LabelSet{"medical"}));
    EXPECT_EQ(out.incident.status, IncidentStatus::edited);
    EXPECT_EQ(out.incident.agency_id, "ems");
    EXPECT_EQ(out.incident.message_ids, a.incident->message_ids);
    ASSERT_TRUE(out.notification);
    EXPECT_EQ(out.notification->agency_id, "ems");
    EXPECT_EQ(router.notifications().size(), before + 1);
    EXPECT_TRUE(router.queue("fire_dept").empty());
    EXPECT_EQ(router.queue("ems").size(), 1u);
    // Edited incidents can still be closed.
    router.record_feedback(fb(a.incident->incident_id, FeedbackAction::accept));
    EXPECT_TRUE(router.queue("ems").empty());
    EXPECT_THROW(router.record_feedback(fb(a.incident->incident_id, FeedbackAction::edit, LabelSet{"bogus"})),
                 RoutingError);
}

TEST(Feedback, Stats) {
    Router router(table(), taxonomy());
    EXPECT_TRUE(router.feedback_stats().empty());
    for (int i = 0; i < 4; ++i) {
        const auto r = router.route(input({{"fire", 0.9}}, EmergencyLevel::high, std::nullopt, t0));
        router.record_feedback(fb(r.incident->incident_id, i < 3 ? FeedbackAction::accept : FeedbackAction::dismiss));
    }
    EXPECT_DOUBLE_EQ(router.feedback_stats().at("fire"), 0.75);
}

TEST(Conservation, RandomScenario) {
    Router router(table(), taxonomy());
    std::mt19937_64 rng(11);
    const auto keys = taxonomy().keys();
    std::size_t routed = 0, total = 0;
    for (int i = 0; i < 2000; ++i) {
        std::map<std::string, double> cats;
        for (int k = 0; k < 1 + static_cast<int>(rng() % 3); ++k) cats[keys[rng() % keys.size()]] = 0.5 + (rng() % 50) / 100.0;
        auto in = input(cats, static_cast<EmergencyLevel>(rng() % 5), GeoPoint{36.0 + (rng() % 5) / 100.0, 36.0},
                        t0 + std::chrono::seconds(i * 3));
        if (rng() % 5 == 0) in.result.relevant = false;
        ++total;
        if (router.route(in).kind != RouteOutcome::Kind::reviewed) ++routed;
        if (rng() % 10 == 0 && router.incident_count() > 0) {
            char id[32];
            std::snprintf(id, sizeof id, "INC-%06zu", static_cast<std::size_t>(1 + rng() % router.incident_count()));
            try {
                router.record_feedback(fb(id, rng() % 2 ? FeedbackAction::accept : FeedbackAction::edit,
                                          std::nullopt));
            } catch (const RoutingError&) {
            }
        }
    }
    EXPECT_EQ(router.routed_message_count(), routed);
    EXPECT_EQ(router.routed_message_count() + router.review_queue().size(), total);
    // Queue order is a strict total order.
    for (const auto& agency : table().agencies()) {
        const auto q = router.queue(agency);
        for (std::size_t i = 1; i < q.size(); ++i) {
            const auto w0 = table().weight(q[i - 1].level), w1 = table().weight(q[i].level);
            EXPECT_TRUE(w0 > w1 || (w0 == w1 && (q[i - 1].created_at < q[i].created_at ||
                                                 (q[i - 1].created_at == q[i].created_at &&
                                                  q[i - 1].incident_id < q[i].incident_id))));
        }
    }
}

TEST(Dump, DeterministicAcrossIdenticalReplays) {
    auto run = [] {
        next_msg = 1000;
        Router router(table(), taxonomy());
        for (int i = 0; i < 50; ++i) {
            router.route(input({{i % 2 ? "fire" : "medical", 0.8}}, EmergencyLevel::high, GeoPoint{36.0 + i % 3, 36.0},
                               t0 + std::chrono::minutes(i)));
        }
        router.record_feedback(fb("INC-000001", FeedbackAction::accept));
        return router.dump_state().dump();
    };
    EXPECT_EQ(run(), run());
}
