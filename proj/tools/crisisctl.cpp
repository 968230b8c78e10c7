// crisisctl: command-line front end for ingest, triage, evaluation, the
// service and config validation. Exit 0 success, 1 operational error,
// 2 usage error.

#include "crisis/codec.hpp"
#include "crisis/evalkit.hpp"
#include "crisis/gateway.hpp"
#include "crisis/ingest.hpp"
#include "crisis/triage.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#ifndef CRISIS_DATA_DIR
#define CRISIS_DATA_DIR "data"
#endif

namespace {

using namespace crisis;
using nlohmann::json;

const std::string kDefaultConfig = std::string(CRISIS_DATA_DIR) + "/config/crisis.json";

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

GatewayConfig config_or_default(const std::string& path) {
    if (path.empty()) {
        GatewayConfig c;
        apply_env_overrides(c);
        return c;
    }
    return load_gateway_config(path);
}

std::shared_ptr<InferenceHub> hub_with_canned(const GatewayConfig& config, const CategoryTaxonomy& taxonomy,
                                              const std::string& canned) {
    auto hub = hub_for(config, taxonomy);
    if (!canned.empty()) {
        hub->register_backend("canned", std::make_shared<CannedBackend>(CannedBackend::from_ndjson(read_text_file(canned))));
    }
    if (!hub->has_backend("baseline")) hub->register_backend("baseline", std::make_shared<BaselineBackend>(taxonomy));
    return hub;
}

int cmd_ingest(const std::string& file, const std::string& format, std::optional<double> rate,
               const std::string& config_path, const std::string& quarantine_path) {
    const GatewayConfig config = config_or_default(config_path);
    const CategoryTaxonomy taxonomy = pipeline_for(config).taxonomy;
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + file);

    std::optional<TweetNdjsonReader> tweets;
    std::optional<DisasterCsvReader> csv;
    ItemSource source;
    if (format == "ndjson") {
        tweets.emplace(in);
        source = source_from(*tweets);
    } else {
        csv.emplace(in, taxonomy);
        source = source_from(*csv);
    }

    std::ofstream qfile;
    QuarantineJournal quarantine;
    if (!quarantine_path.empty()) {
        qfile.open(quarantine_path, std::ios::app);
        if (!qfile) throw std::runtime_error("cannot open " + quarantine_path);
        quarantine = QuarantineJournal(&qfile);
    }

    PoisoningGuard guard(config.guard);
    BoundedQueue<EmergencyMessage> queue(config.queue_capacity);
    std::thread writer([&] {
        while (auto m = queue.pop()) std::cout << json(*m).dump() << '\n';
    });
    ReplayStats stats;
    try {
        stats = replay(source, guard, queue, ReplayOptions{rate}, &quarantine);
    } catch (...) {
        queue.close();
        writer.join();
        throw;
    }
    queue.close();
    writer.join();
    std::cerr << json{{"input", stats.input},
                      {"admitted", stats.emitted},
                      {"quarantined", stats.quarantined},
                      {"rejected", stats.rejected},
                      {"rejected_by_reason", stats.rejected_by_reason},
                      {"wall_ms", stats.wall.count()}}
                     .dump()
              << '\n';
    return 0;
}

int cmd_triage(const std::string& backend, const std::string& text, const std::string& source,
               const std::string& received_at, const std::string& config_path) {
    const GatewayConfig config = config_or_default(config_path);
    PipelineConfig pipeline = pipeline_for(config);
    pipeline.backend_chain = {backend};
    auto hub = hub_with_canned(config, pipeline.taxonomy, "");
    if (!hub->has_backend(backend)) throw UsageError("unknown backend '" + backend + "'");

    RawRecord raw;
    raw.text = text;
    raw.source = source;
    raw.received_at = received_at.empty() ? format_timestamp(std::chrono::time_point_cast<std::chrono::milliseconds>(
                                                std::chrono::system_clock::now()))
                                          : received_at;
    auto validated = validate_message(raw);
    if (auto* r = std::get_if<Rejection>(&validated)) {
        std::cerr << "rejected: " << to_string(r->reason) << ": " << r->detail << '\n';
        return 1;
    }
    std::shared_ptr<const LocaleDetector> detector;
    if (!config.stopwords_dir.empty()) {
        detector = std::make_shared<HeuristicLocaleDetector>(HeuristicLocaleDetector::from_directory(config.stopwords_dir));
    }
    TriageEngine engine(pipeline, hub, detector);
    try {
        std::cout << json(engine.triage(std::get<EmergencyMessage>(validated))).dump(2) << '\n';
    } catch (const std::invalid_argument& e) {
        std::cerr << "dropped: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

int cmd_evaluate(const std::string& dataset_path, const std::string& backend, std::size_t sample_n,
                 std::uint64_t seed, bool as_json, const std::string& config_path, const std::string& canned) {
    const GatewayConfig config = config_or_default(config_path);
    PipelineConfig pipeline = pipeline_for(config);
    pipeline.backend_chain = {backend};
    pipeline.advisory_audience.reset();
    auto hub = hub_with_canned(config, pipeline.taxonomy, canned);
    if (!hub->has_backend(backend)) throw UsageError("unknown backend '" + backend + "'");
    const EvalDataset dataset = load_eval_dataset(dataset_path, pipeline.taxonomy);
    TriageEngine engine(pipeline, hub);
    const EvaluationReport report = run_evaluation(dataset, engine, EvalOptions{sample_n, seed});
    if (as_json) {
        std::cout << report_json(report).dump(2) << '\n';
    } else {
        std::cout << render_table(std::span(&report, 1));
    }
    return 0;
}

std::atomic<HttpService*> g_service{nullptr};

extern "C" void on_signal(int) {
    if (auto* s = g_service.load()) s->stop();
}

int cmd_serve(const std::string& config_path) {
    Gateway gateway(load_gateway_config(config_path));
    gateway.start();
    HttpService service(gateway);
    const int port = service.bind(gateway.config().host, gateway.config().port);
    if (port < 0) throw std::runtime_error("cannot bind " + gateway.config().host + ":" + std::to_string(gateway.config().port));
    std::cerr << "listening on " << gateway.config().host << ':' << port << " (recovered "
              << gateway.recovered_events() << " events)\n";
    g_service = &service;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    service.run();
    g_service = nullptr;
    gateway.stop();
    return 0;
}

int cmd_validate(const std::string& config_path) {
    const GatewayConfig config = load_gateway_config(config_path);
    std::vector<std::string> problems;
    const PipelineConfig pipeline = pipeline_for(config);  // throws on bad taxonomy or snippets
    if (config.routing_path.empty()) {
        problems.push_back("no routing table configured");
    } else {
        const RoutingTable table = load_routing_table(read_text_file(config.routing_path));
        problems = validate_routing(table, pipeline.taxonomy);
    }
    std::set<std::string> ids;
    for (const auto& b : config.backends) {
        if (!ids.insert(b.id).second) problems.push_back("duplicate backend id '" + b.id + "'");
        if (b.type != "baseline" && b.type != "remote" && b.type != "canned") {
            problems.push_back("backend '" + b.id + "' has unknown type '" + b.type + "'");
        }
    }
    for (const auto& id : config.chain) {
        if (!ids.contains(id)) problems.push_back("chain names unknown backend '" + id + "'");
    }
    if (config.chain.empty()) problems.push_back("empty backend chain");
    for (const auto& p : problems) std::cerr << p << '\n';
    if (!problems.empty()) return 1;
    std::cout << "ok: " << pipeline.taxonomy.size() << " labels, " << pipeline.snippets.size() << " snippets, "
              << config.backends.size() << " backend(s)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Emergency-message triage and dispatch"};
    app.require_subcommand(1);

    std::string file, format, config_path, quarantine_path, backend, text, source = "social_feed", received_at,
        dataset, canned;
    std::optional<double> rate;
    std::size_t sample_n = 1000;
    std::uint64_t seed = 0;
    bool as_json = false;

    auto* ingest = app.add_subcommand("ingest", "Guard and replay a feed file; admitted messages go to stdout");
    ingest->add_option("--file", file, "Input file")->required()->check(CLI::ExistingFile);
    ingest->add_option("--format", format, "ndjson or ddcsv")->required()->check(CLI::IsMember({"ndjson", "ddcsv"}));
    ingest->add_option("--rate", rate, "Messages per second")->check(CLI::PositiveNumber);
    ingest->add_option("--config", config_path, "Gateway config (taxonomy, guard settings)");
    ingest->add_option("--quarantine", quarantine_path, "Append quarantined records here");

    auto* triage = app.add_subcommand("triage", "Triage one message and print the result JSON");
    triage->add_option("--backend", backend, "Backend id")->required();
    triage->add_option("--text", text, "Message text")->required();
    triage->add_option("--source", source, "call_transcript, social_feed or app_direct");
    triage->add_option("--received-at", received_at, "Timestamp; defaults to now");
    triage->add_option("--config", config_path, "Gateway config");

    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a backend on a labeled dataset");
    evaluate->add_option("--dataset", dataset, "Tweet NDJSON or disaster CSV")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--backend", backend, "Backend id")->required();
    evaluate->add_option("--sample-n", sample_n, "Items to draw")->check(CLI::PositiveNumber);
    evaluate->add_option("--seed", seed, "Shuffle seed");
    evaluate->add_flag("--json", as_json, "Print the JSON report instead of the table");
    evaluate->add_option("--config", config_path, "Gateway config");
    evaluate->add_option("--canned", canned, "NDJSON {message, answer} file served as backend 'canned'")
        ->check(CLI::ExistingFile);

    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    serve->add_option("--config", config_path, "Gateway config")->check(CLI::ExistingFile);

    auto* validate = app.add_subcommand("validate", "Check taxonomy, routing table and backend coherence");
    validate->add_option("--config", config_path, "Gateway config")->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*ingest) return cmd_ingest(file, format, rate, config_path, quarantine_path);
        if (*triage) return cmd_triage(backend, text, source, received_at, config_path);
        if (*evaluate) return cmd_evaluate(dataset, backend, sample_n, seed, as_json, config_path, canned);
        if (*serve) return cmd_serve(config_path.empty() ? kDefaultConfig : config_path);
        if (*validate) return cmd_validate(config_path.empty() ? kDefaultConfig : config_path);
    } catch (const UsageError& e) {
        std::cerr << "crisisctl: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "crisisctl: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
