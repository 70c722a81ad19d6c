#include "fedflex/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedflex {

void TrainingConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(regularization >= 0.0) || !std::isfinite(regularization)) {
    throw std::invalid_argument("regularization must be >= 0");
  }
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (negatives_per_positive < 1) throw std::invalid_argument("negatives_per_positive must be >= 1");
}

double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

SvdGradient svd_gradient(std::span<const double> p, std::span<const double> q, double rating, double reg) {
  SvdGradient g;
  g.error = rating - dot(p, q);
  g.p.resize(p.size());
  g.q.resize(q.size());
  for (std::size_t f = 0; f < p.size(); ++f) {
    g.p[f] = g.error * q[f] - reg * p[f];
    g.q[f] = g.error * p[f] - reg * q[f];
  }
  return g;
}

BprGradient bpr_gradient(std::span<const double> p, std::span<const double> q_pos, std::span<const double> q_neg,
                         double reg) {
  BprGradient g;
  double x = 0.0;
  for (std::size_t f = 0; f < p.size(); ++f) x += p[f] * (q_pos[f] - q_neg[f]);
  g.weight = logistic(-x);
  g.p.resize(p.size());
  g.q_pos.resize(p.size());
  g.q_neg.resize(p.size());
  for (std::size_t f = 0; f < p.size(); ++f) {
    g.p[f] = g.weight * (q_pos[f] - q_neg[f]) - reg * p[f];
    g.q_pos[f] = g.weight * p[f] - reg * q_pos[f];
    g.q_neg[f] = -g.weight * p[f] - reg * q_neg[f];
  }
  return g;
}

namespace {

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw TrainingDivergedError(std::string("non-finite ") + what + " during training; learning_rate too large?");
    }
  }
}

void check_user(const UserFactors& user, const FactorModel& model) {
  if (user.p.size() != static_cast<std::size_t>(model.k())) {
    throw std::invalid_argument("user factor length does not match model k");
  }
}

void step(std::span<double> v, const std::vector<double>& grad, double eta) {
  for (std::size_t f = 0; f < v.size(); ++f) v[f] += eta * grad[f];
}

// Delta from `before` to `row`, after which `row` is rewritten as
// `before + delta` so that anyone applying the delta lands on the same bits.
// Only differs from the trained value where no exact delta exists.
std::vector<double> settle_row(std::span<double> row, std::span<const double> before) {
  auto delta = exact_difference(row, before);
  for (std::size_t f = 0; f < row.size(); ++f) row[f] = before[f] + delta[f];
  return delta;
}

// Snapshot of the rows an epoch is about to touch, to diff against later.
class RowSnapshot {
 public:
  void remember(const FactorModel& model, ItemId id) {
    if (rows_.contains(id)) return;
    auto q = model.factors(id);
    rows_.emplace(id, std::vector<double>(q.begin(), q.end()));
  }
  ItemDeltas diff(FactorModel& model) const {
    ItemDeltas out;
    for (const auto& [id, before] : rows_) out.emplace(id, settle_row(model.factors(id), before));
    return out;
  }

 private:
  std::map<ItemId, std::vector<double>> rows_;
};

}  // namespace

std::vector<double> exact_difference(std::span<const double> after, std::span<const double> before) {
  std::vector<double> d(after.size());
  for (std::size_t f = 0; f < after.size(); ++f) {
    const double a = before[f];
    const double b = after[f];
    double delta = b - a;
    if (a + delta != b) {
      // A few ulps either way usually restores a + delta == b exactly.
      double up = delta, down = delta;
      for (int i = 0; i < 4; ++i) {
        up = std::nextafter(up, INFINITY);
        down = std::nextafter(down, -INFINITY);
        if (a + up == b) { delta = up; break; }
        if (a + down == b) { delta = down; break; }
      }
    }
    d[f] = delta;
  }
  return d;
}

LocalDelta svd_sgd_epoch(UserFactors& user, FactorModel& model, const RatingVector& ratings,
                         const TrainingConfig& cfg, Rng& rng) {
  cfg.validate();
  check_user(user, model);
  std::vector<ItemId> order;
  order.reserve(ratings.size());
  RowSnapshot snapshot;
  for (const auto& [id, stars] : ratings.ratings) {
    snapshot.remember(model, id);  // throws on unknown ids before any update
    order.push_back(id);
  }
  std::shuffle(order.begin(), order.end(), rng);

  for (ItemId id : order) {
    auto q = model.factors(id);
    auto g = svd_gradient(user.p, q, static_cast<double>(ratings.ratings.at(id)), cfg.regularization);
    step(user.p, g.p, cfg.learning_rate);
    step(q, g.q, cfg.learning_rate);
    check_finite(user.p, "user factor");
    check_finite(q, "item factor");
  }
  return {snapshot.diff(model), user};
}

LocalDelta bpr_epoch(UserFactors& user, FactorModel& model, const std::set<ItemId>& positives,
                     const TrainingConfig& cfg, Rng& rng) {
  cfg.validate();
  check_user(user, model);
  for (ItemId id : positives) {
    if (!model.contains(id)) throw UnknownItemError(id, "model");
  }
  std::vector<ItemId> negatives;
  for (ItemId id : model.item_ids()) {
    if (!positives.contains(id)) negatives.push_back(id);
  }
  if (negatives.empty()) throw std::invalid_argument("BPR needs at least one non-positive item");

  std::vector<ItemId> order(positives.begin(), positives.end());
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_int_distribution<std::size_t> pick(0, negatives.size() - 1);

  RowSnapshot snapshot;
  for (ItemId pos : order) {
    for (int s = 0; s < cfg.negatives_per_positive; ++s) {
      const ItemId neg = negatives[pick(rng)];
      snapshot.remember(model, pos);
      snapshot.remember(model, neg);
      auto qi = model.factors(pos);
      auto qj = model.factors(neg);
      auto g = bpr_gradient(user.p, qi, qj, cfg.regularization);
      step(user.p, g.p, cfg.learning_rate);
      step(qi, g.q_pos, cfg.learning_rate);
      step(qj, g.q_neg, cfg.learning_rate);
      check_finite(user.p, "user factor");
      check_finite(qi, "item factor");
      check_finite(qj, "item factor");
    }
  }
  return {snapshot.diff(model), user};
}

namespace {

template <typename Epoch>
LocalDelta train_epochs(UserFactors& user, FactorModel& model, const TrainingConfig& cfg, Epoch&& epoch) {
  cfg.validate();
  const FactorModel initial = model;
  Rng rng(cfg.rng_seed);
  std::set<ItemId> touched;
  for (int e = 0; e < cfg.epochs; ++e) {
    auto d = epoch(rng);
    for (const auto& [id, v] : d.item_deltas) touched.insert(id);
  }
  LocalDelta out;
  out.user = user;
  for (ItemId id : touched) out.item_deltas.emplace(id, settle_row(model.factors(id), initial.factors(id)));
  return out;
}

}  // namespace

LocalDelta train_svd(UserFactors& user, FactorModel& model, const RatingVector& ratings, const TrainingConfig& cfg) {
  return train_epochs(user, model, cfg, [&](Rng& rng) { return svd_sgd_epoch(user, model, ratings, cfg, rng); });
}

LocalDelta train_bpr(UserFactors& user, FactorModel& model, const std::set<ItemId>& positives,
                     const TrainingConfig& cfg) {
  return train_epochs(user, model, cfg, [&](Rng& rng) { return bpr_epoch(user, model, positives, cfg, rng); });
}

std::set<ItemId> bpr_positives(const RatingVector& ratings, const std::set<ItemId>& clicked) {
  std::set<ItemId> out(clicked.begin(), clicked.end());
  for (const auto& [id, stars] : ratings.ratings) {
    if (stars >= kBprPositiveThreshold) out.insert(id);
  }
  return out;
}

}  // namespace fedflex
