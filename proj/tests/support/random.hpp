#pragma once

#include <random>
#include <vector>

#include "acone/cone_algebra.hpp"

namespace acone::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline bool random_bool(Rng& rng) { return std::bernoulli_distribution(0.5)(rng); }

inline Cone random_cone(Rng& rng, double max_aperture = 0.8 * kTwoPi) {
  const double alpha = uniform(rng, -kPi, kPi);
  return {alpha, alpha + uniform(rng, 0.0, max_aperture)};
}

/// Mostly 0..3 random arcs; occasionally the empty or full region.
inline Multicone random_multicone(Rng& rng) {
  const double pick = uniform(rng, 0.0, 1.0);
  if (pick < 0.04) return Multicone::empty();
  if (pick < 0.08) return Multicone::full();
  const int n = std::uniform_int_distribution<int>(1, 3)(rng);
  std::vector<Cone> cones;
  for (int i = 0; i < n; ++i) cones.push_back(random_cone(rng, 0.35 * kTwoPi));
  return Multicone(cones);
}

inline Rotation random_additive(Rng& rng, double max_delta = 1.5) {
  return {uniform(rng, -kPi, kPi), 1.0, uniform(rng, 0.0, max_delta)};
}

}  // namespace acone::testing
