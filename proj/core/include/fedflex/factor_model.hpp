#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>
#include <vector>

#include "fedflex/catalog.hpp"
#include "fedflex/types.hpp"

namespace fedflex {

/// Item-factor matrix Q (row-major, one row of length k per item) plus the
/// round it belongs to.
class FactorModel {
 public:
  FactorModel() = default;
  /// Throws std::invalid_argument if shapes disagree, ids repeat, or an
  /// entry is not finite.
  FactorModel(int k, std::vector<ItemId> item_ids, std::vector<double> q, std::uint64_t round = 0);

  int k() const { return k_; }
  std::size_t rows() const { return item_ids_.size(); }
  std::uint64_t round() const { return round_; }
  void set_round(std::uint64_t round) { round_ = round; }

  const std::vector<ItemId>& item_ids() const { return item_ids_; }
  const std::vector<double>& data() const { return q_; }

  bool contains(ItemId id) const { return index_.contains(id); }
  std::optional<std::size_t> row_of(ItemId id) const;

  std::span<double> row(std::size_t r) { return {q_.data() + r * k_, static_cast<std::size_t>(k_)}; }
  std::span<const double> row(std::size_t r) const {
    return {q_.data() + r * k_, static_cast<std::size_t>(k_)};
  }
  /// Throws UnknownItemError.
  std::span<double> factors(ItemId id);
  std::span<const double> factors(ItemId id) const;

  bool all_finite() const;

  friend bool operator==(const FactorModel& a, const FactorModel& b) {
    return a.k_ == b.k_ && a.round_ == b.round_ && a.item_ids_ == b.item_ids_ && a.q_ == b.q_;
  }

 private:
  int k_ = 0;
  std::vector<ItemId> item_ids_;
  std::vector<double> q_;
  std::uint64_t round_ = 0;
  std::unordered_map<ItemId, std::size_t> index_;
};

/// User-side factor vector p_u. Stays on the client.
struct UserFactors {
  std::vector<double> p;

  static UserFactors zeros(int k) { return {std::vector<double>(static_cast<std::size_t>(k), 0.0)}; }
};

inline constexpr double kInitRange = 0.05;

/// Q ~ U[-0.05, 0.05] i.i.d., round 0. Item ids are 0..catalog_size-1.
FactorModel init_model(std::size_t catalog_size, int k, std::uint64_t seed);
FactorModel init_model(std::vector<ItemId> item_ids, int k, std::uint64_t seed);

double dot(std::span<const double> a, std::span<const double> b);

/// p . q_item. Throws UnknownItemError.
double predict(const UserFactors& user, const FactorModel& model, ItemId item);

struct ScoredItem {
  ItemId item_id = 0;
  double score = 0.0;
};

/// Every model item not in `exclude` (and, with `series_only`, whose catalog
/// kind is Series) by score descending; ties go to the smaller id.
std::vector<ScoredItem> rank_items(const UserFactors& user, const FactorModel& model,
                                   const std::set<ItemId>& exclude, bool series_only,
                                   const Catalog& catalog);

/// JSON checkpoint: {"format_version":1,"round","k","item_ids","Q"}.
void write_checkpoint(std::ostream& out, const FactorModel& model);
FactorModel read_checkpoint(std::istream& in);

}  // namespace fedflex
