// fedflex: aggregator service, participant client, simulation and metrics.
#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>

#include "fedflex/aggregator.hpp"
#include "fedflex/client_node.hpp"
#include "fedflex/metrics.hpp"
#include "fedflex/server.hpp"
#include "fedflex/simulation.hpp"
#include "fedflex/transport.hpp"

using namespace fedflex;

namespace {

AggregatorServer* g_server = nullptr;
StudyUiServer* g_ui = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
  if (g_ui) g_ui->stop();
}

int cmd_serve(const std::string& catalog_path, const std::string& host, int port, int k, std::uint64_t seed,
              const std::string& log_path, double agg_sigma, double agg_clip) {
  const Catalog catalog = load_catalog_file(catalog_path);
  AggregatorConfig cfg;
  cfg.item_ids = catalog.ids();
  cfg.k = k;
  cfg.seed = seed;
  cfg.telemetry_log = log_path;
  if (agg_sigma > 0.0 || std::isfinite(agg_clip)) {
    cfg.dp.aggregator_side = true;
    cfg.dp.noise_sigma = agg_sigma;
    cfg.dp.clip_norm = agg_clip;
    cfg.dp.rng_seed = seed;
  }
  Aggregator aggregator(cfg);
  AggregatorServer server(aggregator, host, port);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "aggregator: " << catalog.size() << " items, k=" << k << ", listening on " << host << ':' << port
            << '\n';
  server.run();
  return 0;
}

int cmd_aggregate(const std::string& host, int port, const std::string& variant) {
  HttpTransport transport(host, port);
  AggregatorClient client(transport);
  std::cout << "round " << client.trigger_aggregation(parse_variant(variant)) << '\n';
  return 0;
}

int cmd_client(const std::string& config_path, bool serve_ui) {
  const ClientConfig cfg = load_client_config(config_path);
  Catalog catalog = load_catalog_file(cfg.catalog_path);
  auto history = parse_history_file(cfg.history_path);
  EmbeddingTable embeddings = resolve_embeddings(catalog, cfg.embeddings_path);
  HttpTransport transport(cfg.server_host, cfg.server_port);
  ClientNode node(cfg, std::move(catalog), std::move(history.events), std::move(embeddings), transport);

  if (auto n = node.retry_pending()) std::cerr << "resubmitted " << n << " retained session(s)\n";
  const RoundReport report = node.run_round();
  std::cerr << "round " << report.model_round << ": " << report.rated_items << " rated items ("
            << history.failures << " unparseable rows, " << report.unresolved_events << " unmatched titles), "
            << report.trained_items << " item deltas";
  if (report.update_ack) std::cerr << ", update " << to_string(report.update_ack->status);
  std::cerr << '\n';
  std::cout << node.session_payload().dump(2) << '\n';

  if (!serve_ui) return 0;
  StudyUiServer ui(node, cfg.ui_port);
  g_ui = &ui;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "study API on http://127.0.0.1:" << cfg.ui_port << "/session/current\n";
  ui.run();
  return 0;
}

int cmd_metrics(const std::string& log_path, const std::string& catalog_path, const std::string& embeddings_path,
                const std::string& out_dir) {
  std::ifstream log(log_path);
  if (!log) throw Error("cannot open telemetry log " + log_path);
  const auto sessions = read_telemetry_log(log);
  const Catalog catalog = load_catalog_file(catalog_path);
  const EmbeddingTable embeddings = resolve_embeddings(catalog, embeddings_path);
  const auto report = compute_report(sessions, embeddings);
  const auto genres = genre_distribution(sessions, catalog);
  const auto json = report_to_json(report).dump(2);
  if (out_dir.empty()) {
    std::cout << json << '\n';
    write_genre_csv(std::cout, genres);
    return 0;
  }
  std::filesystem::create_directories(out_dir);
  std::ofstream(std::filesystem::path(out_dir) / "metrics.json") << json << '\n';
  std::ofstream genre_out(std::filesystem::path(out_dir) / "genre_distribution.csv");
  write_genre_csv(genre_out, genres);
  std::cout << json << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated matrix-factorization recommender with MMR re-ranking"};
  app.require_subcommand(1);

  std::string catalog_path, host = "127.0.0.1", log_path = "telemetry.ndjson";
  int port = 8080, k = 16;
  std::uint64_t seed = 0;
  double agg_sigma = 0.0, agg_clip = std::numeric_limits<double>::infinity();
  auto* serve = app.add_subcommand("serve", "Run the aggregator service");
  serve->add_option("--catalog", catalog_path, "Catalog file (.csv or .json)")->required();
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port");
  serve->add_option("--latent-dim", k, "Latent dimension k");
  serve->add_option("--seed", seed, "Model initialization seed");
  serve->add_option("--telemetry-log", log_path, "Newline-delimited JSON telemetry log");
  serve->add_option("--agg-dp-sigma", agg_sigma, "Aggregator-side noise multiplier");
  serve->add_option("--agg-dp-clip", agg_clip, "Aggregator-side clip norm");

  std::string variant = "svd";
  auto* aggregate = app.add_subcommand("aggregate", "Close the current round on a running aggregator");
  aggregate->add_option("--host", host);
  aggregate->add_option("--port", port);
  aggregate->add_option("--variant", variant)->check(CLI::IsMember({"svd", "bpr"}));

  std::string config_path;
  bool serve_ui = false;
  auto* client = app.add_subcommand("client", "Run one participant round");
  client->add_option("--config", config_path, "Client config JSON")->required();
  client->add_flag("--serve-ui", serve_ui, "Keep serving the loopback study API after the round");

  std::string embeddings_path, out_dir;
  auto* metrics = app.add_subcommand("metrics", "Compute metrics from a telemetry log");
  metrics->add_option("--log", log_path, "Telemetry log")->required();
  metrics->add_option("--catalog", catalog_path, "Catalog file")->required();
  metrics->add_option("--embeddings", embeddings_path, "Embedding JSON (title trigram fallback if omitted)");
  metrics->add_option("--out", out_dir, "Directory for metrics.json and genre_distribution.csv");

  SimConfig sim;
  std::string sim_variant = "svd", sim_out = "sim_out";
  double dp_clip = std::numeric_limits<double>::infinity();
  auto* simulate = app.add_subcommand("simulate", "Run a synthetic federated study");
  simulate->add_option("--clients", sim.clients);
  simulate->add_option("--rounds", sim.rounds);
  simulate->add_option("--items", sim.catalog_size);
  simulate->add_option("--variant", sim_variant)->check(CLI::IsMember({"svd", "bpr"}));
  simulate->add_option("--latent-dim", sim.model_dim);
  simulate->add_option("--true-dim", sim.true_dim);
  simulate->add_option("--mmr-lambda", sim.mmr.lambda);
  simulate->add_option("--dp-sigma", sim.dp.noise_sigma);
  simulate->add_option("--dp-clip", dp_clip);
  simulate->add_option("--temperature", sim.click_temperature);
  simulate->add_option("--threads", sim.threads);
  simulate->add_option("--watch-fraction", sim.watch_fraction, "Share of the catalog each client has watched");
  simulate->add_option("--item-noise", sim.item_noise, "Spread of item factors around genre centers");
  simulate->add_option("--learning-rate", sim.training.learning_rate);
  simulate->add_option("--regularization", sim.training.regularization);
  simulate->add_option("--epochs", sim.training.epochs);
  simulate->add_option("--negatives", sim.training.negatives_per_positive, "BPR negatives per positive");
  simulate->add_option("--seed", sim.seed);
  simulate->add_option("--out", sim_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) return cmd_serve(catalog_path, host, port, k, seed, log_path, agg_sigma, agg_clip);
    if (*aggregate) return cmd_aggregate(host, port, variant);
    if (*client) return cmd_client(config_path, serve_ui);
    if (*metrics) return cmd_metrics(log_path, catalog_path, embeddings_path, out_dir);
    if (*simulate) {
      sim.variant = parse_variant(sim_variant);
      sim.dp.clip_norm = dp_clip;
      if (sim.dp.noise_sigma > 0.0 && !std::isfinite(sim.dp.clip_norm)) sim.dp.clip_norm = 1.0;
      const auto result = run_simulation(sim);
      write_simulation_outputs(result, sim, sim_out);
      const auto& first = result.trace.front();
      const auto& last = result.trace.back();
      std::cout << "rmse " << first.rmse << " -> " << last.rmse << ", auc " << first.auc << " -> " << last.auc
                << ", ILD A/B " << result.mean_ild_a << '/' << result.mean_ild_b << ", unique shown A/B "
                << result.unique_shown_a << '/' << result.unique_shown_b << "\nwrote " << sim_out << '\n';
      return 0;
    }
  } catch (const TransportError& e) {
    std::cerr << "error (retriable): " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
