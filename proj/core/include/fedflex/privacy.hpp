#pragma once

#include <limits>
#include <span>

#include "fedflex/types.hpp"

namespace fedflex {

struct DpConfig {
  double clip_norm = std::numeric_limits<double>::infinity();
  double noise_sigma = 0.0;
  std::uint64_t rng_seed = 0;
  bool aggregator_side = false;

  /// C > 0, sigma >= 0, and sigma > 0 requires a finite C.
  void validate() const;
};

double l2_norm(std::span<const double> v);

/// Scales each vector by min(1, C/|v|) then adds N(0, (sigma*C)^2) to every
/// coordinate, drawing from a generator seeded with cfg.rng_seed.
ItemDeltas clip_and_noise(const ItemDeltas& deltas, const DpConfig& cfg);
ItemDeltas clip_and_noise(const ItemDeltas& deltas, const DpConfig& cfg, Rng& rng);

}  // namespace fedflex
