#include "fedflex/aggregator.hpp"

#include <cmath>
#include <stdexcept>

#include "fedflex/training.hpp"

namespace fedflex {

TelemetryLog::TelemetryLog(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.empty()) return;
  if (std::filesystem::exists(path_)) {
    std::ifstream in(path_);
    for (auto& rec : read_telemetry_log(in)) {
      if (seen_.emplace(rec.participant_id, rec.timestamp).second) records_.push_back(std::move(rec));
    }
  } else if (path_.has_parent_path()) {
    std::filesystem::create_directories(path_.parent_path());
  }
  out_.open(path_, std::ios::app);
  if (!out_) throw Error("cannot open telemetry log " + path_.string());
}

bool TelemetryLog::append(const SessionRecord& rec) {
  std::lock_guard lock(mu_);
  if (!seen_.emplace(rec.participant_id, rec.timestamp).second) return false;
  records_.push_back(rec);
  if (out_.is_open()) {
    out_ << encode(rec) << '\n';
    out_.flush();
    if (!out_) throw Error("failed to append to telemetry log " + path_.string());
  }
  return true;
}

std::vector<SessionRecord> TelemetryLog::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::size_t TelemetryLog::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

Aggregator::Aggregator(AggregatorConfig cfg) : cfg_(std::move(cfg)), log_(cfg_.telemetry_log) {
  if (cfg_.dp.aggregator_side) cfg_.dp.validate();
  for (auto v : kAllVariants) state(v).model = init_model(cfg_.item_ids, cfg_.k, cfg_.seed);
}

ModelSnapshot Aggregator::serve_model(Variant variant) const {
  std::shared_lock lock(mu_);
  return ModelSnapshot::from_model(variant, state(variant).model);
}

FactorModel Aggregator::model(Variant variant) const {
  std::shared_lock lock(mu_);
  return state(variant).model;
}

Ack Aggregator::submit_update(const UpdateMessage& msg) {
  std::shared_lock lock(mu_);
  auto& st = state(msg.variant);
  const auto round = st.model.round();
  if (msg.participant_id.empty()) return {AckStatus::Invalid, "participant_id is empty", round};
  if (msg.base_round < round) return {AckStatus::Stale, "base_round " + std::to_string(msg.base_round) + " < " + std::to_string(round), round};
  if (msg.base_round > round) return {AckStatus::Invalid, "base_round is ahead of the aggregator", round};
  for (const auto& [id, v] : msg.item_deltas) {
    if (!st.model.contains(id)) return {AckStatus::Invalid, "unknown item_id " + std::to_string(id), round};
    if (v.size() != static_cast<std::size_t>(st.model.k())) {
      return {AckStatus::Invalid, "dimension mismatch for item " + std::to_string(id), round};
    }
    for (double x : v) {
      if (!std::isfinite(x)) return {AckStatus::Invalid, "non-finite delta for item " + std::to_string(id), round};
    }
  }
  std::lock_guard buffer_lock(buffer_mu_);
  // A participant's latest update for the round replaces an earlier one.
  st.buffer.insert_or_assign(msg.participant_id, msg);
  return {AckStatus::Accepted, {}, round};
}

std::uint64_t Aggregator::aggregate_round(Variant variant) {
  std::unique_lock lock(mu_);
  auto& st = state(variant);
  if (st.buffer.empty()) throw Error("nothing to aggregate");

  const auto k = static_cast<std::size_t>(st.model.k());
  std::map<ItemId, std::pair<std::vector<double>, std::size_t>> sums;
  for (const auto& [participant, msg] : st.buffer) {
    for (const auto& [id, v] : msg.item_deltas) {
      auto& [sum, count] = sums.try_emplace(id, std::vector<double>(k, 0.0), 0).first->second;
      for (std::size_t f = 0; f < k; ++f) sum[f] += v[f];
      ++count;
    }
  }
  ItemDeltas mean;
  for (auto& [id, entry] : sums) {
    auto& [sum, count] = entry;
    for (auto& x : sum) x /= static_cast<double>(count);
    mean.emplace(id, std::move(sum));
  }
  if (cfg_.dp.aggregator_side) {
    DpConfig dp = cfg_.dp;
    dp.rng_seed = derive_seed(cfg_.dp.rng_seed, {static_cast<std::uint64_t>(variant), st.model.round()});
    mean = clip_and_noise(mean, dp);
  }
  for (const auto& [id, d] : mean) {
    auto q = st.model.factors(id);
    for (std::size_t f = 0; f < k; ++f) q[f] += d[f];
  }
  st.buffer.clear();
  st.model.set_round(st.model.round() + 1);
  return st.model.round();
}

std::size_t Aggregator::pending_updates(Variant variant) const {
  std::shared_lock lock(mu_);
  std::lock_guard buffer_lock(buffer_mu_);
  return state(variant).buffer.size();
}

Ack Aggregator::submit_telemetry(const SessionRecord& rec) {
  if (auto err = validate_session(rec)) return {AckStatus::Invalid, *err, 0};
  const bool stored = log_.append(rec);
  std::shared_lock lock(mu_);
  return {AckStatus::Accepted, stored ? std::string{} : "duplicate", state(rec.variant).model.round()};
}

}  // namespace fedflex
