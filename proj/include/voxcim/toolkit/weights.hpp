#pragma once

#include <cstdint>
#include <random>

#include "voxcim/spconv.hpp"
#include "voxcim/toolkit/scene.hpp"

namespace voxcim {

// Weights uniform in [-1, 1), reproducible from the seed.
inline WeightTensor random_weights(int kernel_size, std::size_t c1, std::size_t c2, std::uint64_t seed) {
  WeightTensor w = WeightTensor::zeros(kernel_size, c1, c2);
  std::mt19937_64 rng(seed);
  for (std::size_t d = 0; d < w.offsets(); ++d)
    for (std::size_t i = 0; i < c1; ++i)
      for (std::size_t o = 0; o < c2; ++o) w.at(d, i, o) = 2.0 * detail::unit_open0(rng) - 1.0;
  return w;
}

// Copy of `t` with features uniform in [-1, 1) and `channels` per voxel.
inline SparseTensor with_random_features(const SparseTensor& t, std::size_t channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> f(t.size() * channels);
  for (auto& v : f) v = 2.0 * detail::unit_open0(rng) - 1.0;
  return SparseTensor(t.shape(), {t.coords().begin(), t.coords().end()}, std::move(f), channels);
}

}  // namespace voxcim
