#pragma once

#include <span>
#include <vector>

#include "fedflex/embedding.hpp"
#include "fedflex/factor_model.hpp"

namespace fedflex {

struct MmrConfig {
  double lambda = 0.3;
  std::size_t list_size = 5;
  bool normalize_relevance = true;
  std::size_t candidate_pool = 50;

  void validate() const;
};

/// Greedy maximal marginal relevance over relevance-sorted candidates.
///
/// The first candidate is always kept. Each further pick maximizes
///   lambda * rel(i) - (1 - lambda) * max_{j selected} cos(e_i, e_j)
/// where rel is min-max normalized over the candidates (all-equal -> 1) unless
/// normalize_relevance is off. Ties go to the earlier candidate. Returns
/// min(list_size, |candidates|) ids.
///
/// Throws std::invalid_argument if candidates are not sorted by score
/// descending, UnknownItemError if one has no embedding.
std::vector<ItemId> mmr_rerank(std::span<const ScoredItem> candidates, const EmbeddingTable& embeddings,
                               const MmrConfig& cfg);

}  // namespace fedflex
