#pragma once

// Synthetic voxel scenes. All sampling goes through mt19937_64 with
// hand-written uniform/normal transforms, so a seed gives the same scene on
// every platform.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "voxcim/core.hpp"

namespace voxcim {

enum class SceneDistribution { Uniform, Clustered, Surface };

inline std::string to_string(SceneDistribution d) {
  switch (d) {
    case SceneDistribution::Uniform: return "uniform";
    case SceneDistribution::Clustered: return "clustered";
    case SceneDistribution::Surface: return "surface";
  }
  return "?";
}

inline SceneDistribution parse_distribution(const std::string& s) {
  if (s == "uniform") return SceneDistribution::Uniform;
  if (s == "clustered") return SceneDistribution::Clustered;
  if (s == "surface") return SceneDistribution::Surface;
  throw ConfigError("unknown distribution '" + s + "'");
}

struct SceneSpec {
  GridShape shape;
  double sparsity = 0.005;
  SceneDistribution distribution = SceneDistribution::Uniform;
  int num_clusters = 8;  // Clustered
  double spread = 4.0;   // Clustered: per-axis standard deviation in voxels
  double noise = 0.5;    // Surface: height noise standard deviation in voxels
  std::uint64_t seed = 0;

  void validate() const {
    if (!(sparsity > 0.0 && sparsity <= 1.0)) throw ConfigError("sparsity must lie in (0, 1]");
    if (distribution == SceneDistribution::Clustered && (num_clusters < 1 || !(spread > 0.0))) {
      throw ConfigError("clustered scenes need clusters >= 1 and spread > 0");
    }
    if (distribution == SceneDistribution::Surface && !(noise >= 0.0)) {
      throw ConfigError("surface noise must be >= 0");
    }
  }
  double expected_count() const { return sparsity * static_cast<double>(shape.volume()); }
};

namespace detail {

// Uniform in (0, 1].
inline double unit_open0(std::mt19937_64& rng) {
  return static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
}

inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  return static_cast<std::uint64_t>(unit_open0(rng) * static_cast<double>(n)) % n;
}

// Box-Muller, one value per call.
inline double standard_normal(std::mt19937_64& rng) {
  const double u1 = unit_open0(rng);
  const double u2 = unit_open0(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Each cell occupied independently with probability p. Walks the canonical
// order with geometric gaps, so cost is proportional to the voxel count.
inline std::vector<VoxelCoord> bernoulli_cells(const GridShape& shape, double p, std::mt19937_64& rng) {
  std::vector<VoxelCoord> out;
  const std::uint64_t volume = shape.volume();
  if (p >= 1.0) {
    out.reserve(volume);
    for (std::uint64_t l = 0; l < volume; ++l) out.push_back(shape.from_linear(l));
    return out;
  }
  out.reserve(static_cast<std::size_t>(p * static_cast<double>(volume) * 1.1) + 16);
  const double denom = std::log1p(-p);
  std::uint64_t l = 0;
  while (true) {
    const double gap = std::floor(std::log(unit_open0(rng)) / denom);
    if (gap >= static_cast<double>(volume - l)) break;
    l += static_cast<std::uint64_t>(gap);
    out.push_back(shape.from_linear(l));
    if (++l >= volume) break;
  }
  return out;
}

// Draws distinct cells from `sample` until `target` are collected or the
// attempt budget runs out.
template <typename Sample>
std::vector<VoxelCoord> draw_distinct(const GridShape& shape, std::uint64_t target, Sample sample) {
  std::unordered_set<std::uint64_t> seen;
  std::vector<VoxelCoord> out;
  const std::uint64_t budget = 50 * target + 1000;
  for (std::uint64_t attempt = 0; attempt < budget && out.size() < target; ++attempt) {
    const VoxelCoord c = sample();
    if (!shape.contains(c)) continue;
    if (seen.insert(shape.linear(c)).second) out.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::int32_t round_coord(double v) { return static_cast<std::int32_t>(std::floor(v + 0.5)); }

}  // namespace detail

// Uniform: every cell independently occupied with probability `sparsity`.
// Clustered: Gaussian blobs around uniformly placed centres.
// Surface: a smooth height field z(x, y) plus Gaussian noise, sampled at
// random (x, y) columns, like a LiDAR return of the ground.
// If sparsity * volume < 1 the scene is empty and a warning is appended.
inline SparseTensor generate_scene(const SceneSpec& spec, std::vector<std::string>* warnings = nullptr) {
  spec.validate();
  const GridShape& g = spec.shape;
  if (spec.expected_count() < 1.0) {
    if (warnings) {
      warnings->push_back("EmptySceneWarning: sparsity * volume < 1 for grid " + to_string(g) +
                          "; scene is empty");
    }
    return SparseTensor::occupancy(g, {});
  }
  std::mt19937_64 rng(spec.seed);
  const auto target = static_cast<std::uint64_t>(std::llround(spec.expected_count()));
  std::vector<VoxelCoord> coords;
  switch (spec.distribution) {
    case SceneDistribution::Uniform:
      coords = detail::bernoulli_cells(g, spec.sparsity, rng);
      break;
    case SceneDistribution::Clustered: {
      struct Centre {
        double x, y, z;
      };
      std::vector<Centre> centres;
      for (int k = 0; k < spec.num_clusters; ++k) {
        centres.push_back({detail::unit_open0(rng) * g.nx, detail::unit_open0(rng) * g.ny,
                           detail::unit_open0(rng) * g.nz});
      }
      coords = detail::draw_distinct(g, target, [&] {
        const Centre& c = centres[detail::uniform_below(rng, centres.size())];
        return VoxelCoord{detail::round_coord(c.x + spec.spread * detail::standard_normal(rng)),
                          detail::round_coord(c.y + spec.spread * detail::standard_normal(rng)),
                          detail::round_coord(c.z + spec.spread * detail::standard_normal(rng))};
      });
      break;
    }
    case SceneDistribution::Surface: {
      const double base = 0.5 * (g.nz - 1);
      const double amp = 0.25 * g.nz;
      const double wx = 2.0 * std::numbers::pi / std::max(8, g.nx / 2);
      const double wy = 2.0 * std::numbers::pi / std::max(8, g.ny / 2);
      const double phase = 2.0 * std::numbers::pi * detail::unit_open0(rng);
      coords = detail::draw_distinct(g, target, [&] {
        const auto x = static_cast<std::int32_t>(detail::uniform_below(rng, static_cast<std::uint64_t>(g.nx)));
        const auto y = static_cast<std::int32_t>(detail::uniform_below(rng, static_cast<std::uint64_t>(g.ny)));
        const double h = base + amp * std::sin(wx * x + phase) * std::cos(wy * y) +
                         spec.noise * detail::standard_normal(rng);
        return VoxelCoord{x, y, detail::round_coord(h)};
      });
      break;
    }
  }
  return SparseTensor::occupancy(g, std::move(coords));
}

}  // namespace voxcim
