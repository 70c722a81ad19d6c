#include "fedflex/factor_model.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "fedflex/json.hpp"

namespace fedflex {

FactorModel::FactorModel(int k, std::vector<ItemId> item_ids, std::vector<double> q, std::uint64_t round)
    : k_(k), item_ids_(std::move(item_ids)), q_(std::move(q)), round_(round) {
  if (k_ < 1) throw std::invalid_argument("latent dimension must be >= 1");
  if (q_.size() != item_ids_.size() * static_cast<std::size_t>(k_)) {
    throw std::invalid_argument("factor matrix has " + std::to_string(q_.size()) + " entries, expected " +
                                std::to_string(item_ids_.size()) + " x " + std::to_string(k_));
  }
  if (!all_finite()) throw std::invalid_argument("factor matrix contains non-finite entries");
  index_.reserve(item_ids_.size());
  for (std::size_t r = 0; r < item_ids_.size(); ++r) {
    if (!index_.emplace(item_ids_[r], r).second) {
      throw std::invalid_argument("duplicate item_id " + std::to_string(item_ids_[r]) + " in model");
    }
  }
}

std::optional<std::size_t> FactorModel::row_of(ItemId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<double> FactorModel::factors(ItemId id) {
  auto r = row_of(id);
  if (!r) throw UnknownItemError(id, "model");
  return row(*r);
}

std::span<const double> FactorModel::factors(ItemId id) const {
  auto r = row_of(id);
  if (!r) throw UnknownItemError(id, "model");
  return row(*r);
}

bool FactorModel::all_finite() const {
  return std::all_of(q_.begin(), q_.end(), [](double v) { return std::isfinite(v); });
}

FactorModel init_model(std::vector<ItemId> item_ids, int k, std::uint64_t seed) {
  if (item_ids.empty()) throw std::invalid_argument("catalog_size must be >= 1");
  if (k < 1) throw std::invalid_argument("latent dimension must be >= 1");
  Rng rng(seed);
  std::uniform_real_distribution<double> dist(-kInitRange, kInitRange);
  std::vector<double> q(item_ids.size() * static_cast<std::size_t>(k));
  for (auto& v : q) v = dist(rng);
  return FactorModel(k, std::move(item_ids), std::move(q), 0);
}

FactorModel init_model(std::size_t catalog_size, int k, std::uint64_t seed) {
  std::vector<ItemId> ids(catalog_size);
  std::iota(ids.begin(), ids.end(), ItemId{0});
  return init_model(std::move(ids), k, seed);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double predict(const UserFactors& user, const FactorModel& model, ItemId item) {
  auto q = model.factors(item);
  if (user.p.size() != q.size()) throw std::invalid_argument("user factor length does not match model k");
  return dot(user.p, q);
}

std::vector<ScoredItem> rank_items(const UserFactors& user, const FactorModel& model,
                                   const std::set<ItemId>& exclude, bool series_only, const Catalog& catalog) {
  if (user.p.size() != static_cast<std::size_t>(model.k())) {
    throw std::invalid_argument("user factor length does not match model k");
  }
  std::vector<ScoredItem> out;
  out.reserve(model.rows());
  for (std::size_t r = 0; r < model.rows(); ++r) {
    const ItemId id = model.item_ids()[r];
    if (exclude.contains(id)) continue;
    if (series_only) {
      const auto* item = catalog.find(id);
      if (!item || item->kind != ItemKind::Series) continue;
    }
    out.push_back({id, dot(user.p, model.row(r))});
  }
  std::sort(out.begin(), out.end(), [](const ScoredItem& a, const ScoredItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.item_id < b.item_id;
  });
  return out;
}

void write_checkpoint(std::ostream& out, const FactorModel& model) {
  Json q = Json::array();
  for (std::size_t r = 0; r < model.rows(); ++r) {
    auto row = model.row(r);
    q.push_back(std::vector<double>(row.begin(), row.end()));
  }
  Json doc{{"format_version", 1},
           {"round", model.round()},
           {"k", model.k()},
           {"item_ids", model.item_ids()},
           {"Q", std::move(q)}};
  out << doc.dump() << '\n';
}

FactorModel read_checkpoint(std::istream& in) {
  try {
    Json doc = Json::parse(in);
    if (doc.at("format_version").get<int>() != 1) throw ParseError("unsupported checkpoint version");
    const int k = doc.at("k").get<int>();
    auto ids = doc.at("item_ids").get<std::vector<ItemId>>();
    std::vector<double> q;
    q.reserve(ids.size() * static_cast<std::size_t>(std::max(k, 0)));
    for (const auto& row : doc.at("Q")) {
      auto values = row.get<std::vector<double>>();
      if (values.size() != static_cast<std::size_t>(k)) throw ParseError("checkpoint row length != k");
      q.insert(q.end(), values.begin(), values.end());
    }
    return FactorModel(k, std::move(ids), std::move(q), doc.at("round").get<std::uint64_t>());
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("invalid checkpoint: ") + e.what());
  }
}

}  // namespace fedflex
