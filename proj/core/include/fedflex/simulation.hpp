#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedflex/catalog.hpp"
#include "fedflex/history.hpp"
#include "fedflex/metrics.hpp"
#include "fedflex/mmr.hpp"
#include "fedflex/privacy.hpp"
#include "fedflex/protocol.hpp"
#include "fedflex/training.hpp"

namespace fedflex {

struct SimConfig {
  std::size_t clients = 20;
  std::size_t rounds = 30;
  std::size_t catalog_size = 200;
  int true_dim = 8;
  int model_dim = 8;
  Variant variant = Variant::Svd;
  double click_temperature = 0.5;
  std::uint64_t seed = 42;
  double watch_fraction = 0.8;     // share of the catalog each client has a rating for
  double heldout_fraction = 0.2;   // of those, never written to history
  double movie_fraction = 0.1;
  double item_noise = 0.2;         // spread of item factors around their genre center
  bool nonnegative_factors = false;
  std::size_t threads = 1;
  TrainingConfig training;
  DpConfig dp;
  MmrConfig mmr;

  void validate() const;
};

struct SimClient {
  std::string participant_id;
  std::vector<double> true_factors;
  std::uint64_t training_seed = 0;
  std::uint64_t dp_seed = 0;
  std::vector<ViewingEvent> history;
  std::map<ItemId, int> observed;  // ratings the history was generated from
  std::map<ItemId, int> heldout;
};

struct World {
  Catalog catalog;
  std::vector<SimClient> clients;
  /// Ground-truth stars, clients x catalog, indexed by catalog position.
  std::vector<std::vector<int>> true_ratings;

  int true_rating(std::size_t client, ItemId item) const;
};

World generate_world(const SimConfig& cfg);

/// Netflix-style `Title,Date` CSV for a client.
std::string history_csv(const SimClient& client);

/// logistic((r - 3) / tau)
double click_probability(int true_rating, double temperature);

/// Independent Bernoulli click per shown item; returns the clicked ids.
std::vector<ItemId> simulate_clicks(std::span<const ItemId> list, std::span<const int> true_ratings,
                                    double temperature, std::uint64_t seed);

struct RoundMetrics {
  std::size_t round = 0;
  double rmse = 0.0;
  double auc = 0.0;
};

struct SimResult {
  MetricReport report;
  std::vector<RoundMetrics> trace;  // round 0 is the untrained model
  std::vector<SessionRecord> sessions;
  std::vector<GenreCount> genres;
  FactorModel final_model;
  Catalog catalog;
  std::vector<std::pair<std::string, std::string>> histories;  // participant id, history CSV
  double mean_ild_a = 0.0;
  double mean_ild_b = 0.0;
  std::size_t unique_shown_a = 0;
  std::size_t unique_shown_b = 0;
};

/// Non-finite factors after aggregation.
class SimulationDivergedError : public Error {
 public:
  SimulationDivergedError(std::size_t round)
      : Error("simulation diverged in round " + std::to_string(round)), round_(round) {}
  std::size_t round() const { return round_; }

 private:
  std::size_t round_;
};

/// Runs cfg.rounds federated rounds of the full client pipeline against an
/// in-process aggregator. Held-out RMSE/AUC are measured before the first
/// round and after every aggregation.
SimResult run_simulation(const SimConfig& cfg);

/// Held-out RMSE and pairwise AUC of `model` for every client, with user
/// factors fitted locally the same way a client does.
RoundMetrics evaluate_model(const World& world, const FactorModel& model, const SimConfig& cfg,
                            std::size_t round);

/// metrics.json, trace.csv, genre_distribution.csv, telemetry.ndjson
void write_simulation_outputs(const SimResult& result, const SimConfig& cfg,
                              const std::filesystem::path& out_dir);

}  // namespace fedflex
