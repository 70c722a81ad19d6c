#include "fedflex/privacy.hpp"

#include <cmath>
#include <stdexcept>

namespace fedflex {

void DpConfig::validate() const {
  if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be > 0");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw std::invalid_argument("noise_sigma must be >= 0");
  if (noise_sigma > 0.0 && !std::isfinite(clip_norm)) {
    throw std::invalid_argument("noise_sigma > 0 requires a finite clip_norm");
  }
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

ItemDeltas clip_and_noise(const ItemDeltas& deltas, const DpConfig& cfg, Rng& rng) {
  cfg.validate();
  const double stddev = cfg.noise_sigma * cfg.clip_norm;
  std::normal_distribution<double> noise(0.0, stddev > 0.0 ? stddev : 1.0);
  ItemDeltas out;
  for (const auto& [id, v] : deltas) {
    std::vector<double> w = v;
    const double norm = l2_norm(w);
    if (norm > cfg.clip_norm) {
      const double scale = cfg.clip_norm / norm;
      for (auto& x : w) x *= scale;
    }
    if (stddev > 0.0) {
      for (auto& x : w) x += noise(rng);
    }
    out.emplace(id, std::move(w));
  }
  return out;
}

ItemDeltas clip_and_noise(const ItemDeltas& deltas, const DpConfig& cfg) {
  Rng rng(cfg.rng_seed);
  return clip_and_noise(deltas, cfg, rng);
}

}  // namespace fedflex
