#include "fedflex/mmr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fedflex {

void MmrConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("MMR lambda must be in [0, 1]");
  if (list_size < 1) throw std::invalid_argument("MMR list_size must be >= 1");
  if (candidate_pool < 1) throw std::invalid_argument("MMR candidate_pool must be >= 1");
}

std::vector<ItemId> mmr_rerank(std::span<const ScoredItem> candidates, const EmbeddingTable& embeddings,
                               const MmrConfig& cfg) {
  cfg.validate();
  const std::size_t n = candidates.size();
  if (n == 0) return {};
  for (std::size_t i = 1; i < n; ++i) {
    if (candidates[i].score > candidates[i - 1].score) {
      throw std::invalid_argument("MMR candidates must be sorted by relevance descending");
    }
  }
  std::vector<std::span<const double>> emb;
  emb.reserve(n);
  for (const auto& c : candidates) emb.push_back(embeddings.at(c.item_id));

  std::vector<double> rel(n);
  const double hi = candidates.front().score;
  const double lo = candidates.back().score;
  for (std::size_t i = 0; i < n; ++i) {
    if (!cfg.normalize_relevance) {
      rel[i] = candidates[i].score;
    } else {
      rel[i] = (hi > lo) ? (candidates[i].score - lo) / (hi - lo) : 1.0;
    }
  }

  const std::size_t want = std::min(cfg.list_size, n);
  std::vector<ItemId> out{candidates.front().item_id};
  std::vector<bool> taken(n, false);
  taken[0] = true;
  // Highest similarity of each candidate to anything selected so far.
  std::vector<double> max_sim(n, -std::numeric_limits<double>::infinity());
  std::size_t last = 0;
  while (out.size() < want) {
    std::size_t best = n;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      max_sim[i] = std::max(max_sim[i], cosine_sim(emb[i], emb[last]));
      const double score = cfg.lambda * rel[i] - (1.0 - cfg.lambda) * max_sim[i];
      if (best == n || score > best_score) {
        best = i;
        best_score = score;
      }
    }
    taken[best] = true;
    last = best;
    out.push_back(candidates[best].item_id);
  }
  return out;
}

}  // namespace fedflex
