#pragma once

#include <cstdint>
#include <random>

#include "latsplit/tensor.hpp"

namespace latsplit {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

template <typename Scalar>
Tensor<Scalar> normal_tensor(Shape shape, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor<Scalar> t(shape);
  Scalar* p = t.matrix().data();
  for (long i = 0; i < t.size(); ++i) p[i] = static_cast<Scalar>(dist(rng));
  return t;
}

}  // namespace latsplit
