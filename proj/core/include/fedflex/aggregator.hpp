#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "fedflex/factor_model.hpp"
#include "fedflex/privacy.hpp"
#include "fedflex/protocol.hpp"

namespace fedflex {

/// Append-only store of SessionRecords, one JSON object per line. With an
/// empty path it is memory-only. Duplicate (participant_id, timestamp)
/// pairs are stored once.
class TelemetryLog {
 public:
  explicit TelemetryLog(std::filesystem::path path = {});

  /// False if the record was a duplicate and therefore not stored.
  bool append(const SessionRecord& rec);
  std::vector<SessionRecord> records() const;
  std::size_t size() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::ofstream out_;
  std::set<std::pair<std::string, std::int64_t>> seen_;
  std::vector<SessionRecord> records_;
};

struct AggregatorConfig {
  std::vector<ItemId> item_ids;
  int k = 16;
  std::uint64_t seed = 0;
  /// Applied to each round's mean delta when aggregator_side is set.
  DpConfig dp;
  std::filesystem::path telemetry_log;
};

/// Holds one global model per variant and buffers client updates between
/// rounds. Thread-safe: serve/submit take a shared lock, aggregation an
/// exclusive one.
class Aggregator {
 public:
  explicit Aggregator(AggregatorConfig cfg);

  ModelSnapshot serve_model(Variant variant) const;
  FactorModel model(Variant variant) const;

  Ack submit_update(const UpdateMessage& msg);

  /// Adds the per-item mean of buffered deltas (over the clients that sent
  /// that item) to Q, clears the buffer and returns the new round.
  /// Throws Error("nothing to aggregate") on an empty buffer.
  std::uint64_t aggregate_round(Variant variant);
  std::size_t pending_updates(Variant variant) const;

  Ack submit_telemetry(const SessionRecord& rec);
  std::vector<SessionRecord> telemetry() const { return log_.records(); }

  const AggregatorConfig& config() const { return cfg_; }

 private:
  struct VariantState {
    FactorModel model;
    // Keyed by participant so accumulation order never depends on arrival.
    std::map<std::string, UpdateMessage> buffer;
  };

  VariantState& state(Variant v) { return states_[static_cast<std::size_t>(v)]; }
  const VariantState& state(Variant v) const { return states_[static_cast<std::size_t>(v)]; }

  AggregatorConfig cfg_;
  mutable std::shared_mutex mu_;
  mutable std::mutex buffer_mu_;
  std::array<VariantState, 2> states_;
  TelemetryLog log_;
};

}  // namespace fedflex
