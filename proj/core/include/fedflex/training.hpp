#pragma once

#include <set>
#include <span>
#include <vector>

#include "fedflex/factor_model.hpp"
#include "fedflex/history.hpp"
#include "fedflex/types.hpp"

namespace fedflex {

struct TrainingConfig {
  double learning_rate = 0.05;
  double regularization = 0.01;
  int epochs = 10;
  std::uint64_t rng_seed = 0;
  int negatives_per_positive = 1;  // BPR only

  /// Throws std::invalid_argument.
  void validate() const;
};

/// Outcome of local training. Only `item_deltas` may leave the client.
struct LocalDelta {
  ItemDeltas item_deltas;
  UserFactors user;
};

/// Thrown when a training step produces a non-finite value.
class TrainingDivergedError : public Error {
 public:
  using Error::Error;
};

double logistic(double x);

/// Ascent direction of -e^2/2 - reg/2 (|p|^2 + |q|^2), e = rating - p.q.
struct SvdGradient {
  double error = 0.0;
  std::vector<double> p;
  std::vector<double> q;
};
SvdGradient svd_gradient(std::span<const double> p, std::span<const double> q, double rating,
                         double regularization);

/// Ascent direction of ln sigmoid(p.(q_pos - q_neg)) - reg/2 (|p|^2 + |q_pos|^2 + |q_neg|^2).
struct BprGradient {
  double weight = 0.0;  // sigmoid(-x)
  std::vector<double> p;
  std::vector<double> q_pos;
  std::vector<double> q_neg;
};
BprGradient bpr_gradient(std::span<const double> p, std::span<const double> q_pos,
                         std::span<const double> q_neg, double regularization);

/// One pass over the rated items in shuffled order. Mutates `user` and
/// `model`; the returned deltas are relative to `model` on entry.
LocalDelta svd_sgd_epoch(UserFactors& user, FactorModel& model, const RatingVector& ratings,
                         const TrainingConfig& cfg, Rng& rng);

/// One pass over `positives`, each paired with cfg.negatives_per_positive
/// uniformly drawn non-positive items.
LocalDelta bpr_epoch(UserFactors& user, FactorModel& model, const std::set<ItemId>& positives,
                     const TrainingConfig& cfg, Rng& rng);

/// cfg.epochs epochs seeded from cfg.rng_seed; deltas are final minus initial.
/// Touched rows are left at exactly `initial + delta`, which can differ from
/// the raw SGD result by a rounding step.
LocalDelta train_svd(UserFactors& user, FactorModel& model, const RatingVector& ratings,
                     const TrainingConfig& cfg);
LocalDelta train_bpr(UserFactors& user, FactorModel& model, const std::set<ItemId>& positives,
                     const TrainingConfig& cfg);

inline constexpr int kBprPositiveThreshold = 4;

/// Items rated >= 4 plus any item clicked in an earlier session.
std::set<ItemId> bpr_positives(const RatingVector& ratings, const std::set<ItemId>& clicked);

/// Coordinate-wise `after - before`, nudged by at most a few ulps so that
/// `before + delta` evaluates to exactly `after` whenever some double does.
std::vector<double> exact_difference(std::span<const double> after, std::span<const double> before);

}  // namespace fedflex
