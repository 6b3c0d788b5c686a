#pragma once

// Sparse voxel tensors, canonical ordering and kernel-offset arithmetic.
//
// Canonical order is (z, y, x) lexicographic, so every depth (fixed z) is a
// contiguous slice of the coordinate stream and every row (fixed z, y) a
// contiguous run inside it. The depth-encoding tables and all streaming map
// searches rely on this.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "voxcim/errors.hpp"

namespace voxcim {

struct VoxelCoord {
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t z = 0;

  friend constexpr bool operator==(const VoxelCoord&, const VoxelCoord&) = default;
  friend constexpr bool operator<(const VoxelCoord& a, const VoxelCoord& b) {
    return std::tie(a.z, a.y, a.x) < std::tie(b.z, b.y, b.x);
  }
  friend constexpr bool operator>(const VoxelCoord& a, const VoxelCoord& b) { return b < a; }
  friend constexpr bool operator<=(const VoxelCoord& a, const VoxelCoord& b) { return !(b < a); }
};

inline std::string to_string(const VoxelCoord& c) {
  return "(" + std::to_string(c.x) + "," + std::to_string(c.y) + "," + std::to_string(c.z) + ")";
}

struct VoxelCoordHash {
  std::size_t operator()(const VoxelCoord& c) const noexcept {
    std::uint64_t h = static_cast<std::uint32_t>(c.x);
    h = h * 0x9E3779B97F4A7C15ull ^ static_cast<std::uint32_t>(c.y);
    h = h * 0x9E3779B97F4A7C15ull ^ static_cast<std::uint32_t>(c.z);
    h ^= h >> 29;
    return static_cast<std::size_t>(h * 0xBF58476D1CE4E5B9ull);
  }
};

struct GridShape {
  std::int32_t nx = 1;
  std::int32_t ny = 1;
  std::int32_t nz = 1;

  GridShape() = default;
  GridShape(std::int64_t x, std::int64_t y, std::int64_t z) {
    constexpr std::int64_t kMax = std::numeric_limits<std::int32_t>::max();
    if (x < 1 || y < 1 || z < 1) throw InvalidShape("grid dims must be >= 1");
    if (x > kMax || y > kMax || z > kMax) throw InvalidShape("grid dim exceeds 2^31-1");
    nx = static_cast<std::int32_t>(x);
    ny = static_cast<std::int32_t>(y);
    nz = static_cast<std::int32_t>(z);
  }

  std::uint64_t volume() const {
    return static_cast<std::uint64_t>(nx) * static_cast<std::uint64_t>(ny) *
           static_cast<std::uint64_t>(nz);
  }
  bool contains(const VoxelCoord& c) const {
    return c.x >= 0 && c.y >= 0 && c.z >= 0 && c.x < nx && c.y < ny && c.z < nz;
  }
  // Linear index in canonical order.
  std::uint64_t linear(const VoxelCoord& c) const {
    return (static_cast<std::uint64_t>(c.z) * static_cast<std::uint64_t>(ny) +
            static_cast<std::uint64_t>(c.y)) * static_cast<std::uint64_t>(nx) +
           static_cast<std::uint64_t>(c.x);
  }
  VoxelCoord from_linear(std::uint64_t i) const {
    VoxelCoord c;
    c.x = static_cast<std::int32_t>(i % static_cast<std::uint64_t>(nx));
    i /= static_cast<std::uint64_t>(nx);
    c.y = static_cast<std::int32_t>(i % static_cast<std::uint64_t>(ny));
    c.z = static_cast<std::int32_t>(i / static_cast<std::uint64_t>(ny));
    return c;
  }

  friend bool operator==(const GridShape&, const GridShape&) = default;
};

inline std::string to_string(const GridShape& s) {
  return std::to_string(s.nx) + "x" + std::to_string(s.ny) + "x" + std::to_string(s.nz);
}

// Result of canonical_sort: sorted coordinates plus old index -> new index.
struct SortResult {
  std::vector<VoxelCoord> coords;
  std::vector<std::size_t> permutation;
};

inline SortResult canonical_sort(std::span<const VoxelCoord> coords) {
  std::vector<std::size_t> order(coords.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return coords[a] < coords[b]; });
  SortResult out;
  out.coords.reserve(coords.size());
  out.permutation.assign(coords.size(), 0);
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (rank > 0 && coords[order[rank]] == coords[order[rank - 1]]) {
      throw DuplicateVoxel("coordinate " + to_string(coords[order[rank]]) + " appears twice");
    }
    out.coords.push_back(coords[order[rank]]);
    out.permutation[order[rank]] = rank;
  }
  return out;
}

inline bool is_canonical(std::span<const VoxelCoord> coords) {
  for (std::size_t i = 1; i < coords.size(); ++i) {
    if (!(coords[i - 1] < coords[i])) return false;
  }
  return true;
}

// Coordinates + row-major features. Immutable once built; the constructor
// enforces canonical order, uniqueness and grid bounds.
class SparseTensor {
 public:
  SparseTensor() = default;

  SparseTensor(GridShape shape, std::vector<VoxelCoord> coords, std::vector<double> features,
               std::size_t channels)
      : shape_(shape), coords_(std::move(coords)), features_(std::move(features)),
        channels_(channels) {
    if (channels_ == 0) throw ShapeError("channel count must be positive");
    if (features_.size() != coords_.size() * channels_) {
      throw ShapeError("feature matrix has " + std::to_string(features_.size()) +
                       " values, expected " + std::to_string(coords_.size() * channels_));
    }
    for (std::size_t i = 0; i < coords_.size(); ++i) {
      if (!shape_.contains(coords_[i])) {
        throw InvalidShape("voxel " + to_string(coords_[i]) + " outside grid " + to_string(shape_));
      }
      if (i > 0 && !(coords_[i - 1] < coords_[i])) {
        if (coords_[i - 1] == coords_[i]) {
          throw DuplicateVoxel("coordinate " + to_string(coords_[i]) + " appears twice");
        }
        throw InvalidShape("coordinates are not in canonical (z,y,x) order");
      }
    }
  }

  // Sorts coords into canonical order and permutes feature rows along.
  static SparseTensor from_unsorted(GridShape shape, std::span<const VoxelCoord> coords,
                                    std::span<const double> features, std::size_t channels) {
    if (channels == 0 || features.size() != coords.size() * channels) {
      throw ShapeError("feature matrix does not match coordinate count");
    }
    SortResult sorted = canonical_sort(coords);
    std::vector<double> feats(features.size());
    for (std::size_t i = 0; i < coords.size(); ++i) {
      std::copy_n(features.begin() + static_cast<std::ptrdiff_t>(i * channels), channels,
                  feats.begin() + static_cast<std::ptrdiff_t>(sorted.permutation[i] * channels));
    }
    return SparseTensor(shape, std::move(sorted.coords), std::move(feats), channels);
  }

  // Occupancy-only tensor: one channel, all ones.
  static SparseTensor occupancy(GridShape shape, std::vector<VoxelCoord> coords) {
    std::vector<double> ones(coords.size(), 1.0);
    return SparseTensor(shape, std::move(coords), std::move(ones), 1);
  }

  const GridShape& shape() const { return shape_; }
  std::span<const VoxelCoord> coords() const { return coords_; }
  std::span<const double> features() const { return features_; }
  std::span<const double> feature(std::size_t i) const {
    return std::span<const double>(features_).subspan(i * channels_, channels_);
  }
  std::size_t size() const { return coords_.size(); }
  bool empty() const { return coords_.empty(); }
  std::size_t channels() const { return channels_; }

  friend bool operator==(const SparseTensor&, const SparseTensor&) = default;

 private:
  GridShape shape_;
  std::vector<VoxelCoord> coords_;
  std::vector<double> features_;
  std::size_t channels_ = 1;
};

enum class ConvVariant { Submanifold, Generalized, Transposed };

inline std::string to_string(ConvVariant v) {
  switch (v) {
    case ConvVariant::Submanifold: return "submanifold";
    case ConvVariant::Generalized: return "generalized";
    case ConvVariant::Transposed: return "transposed";
  }
  return "?";
}

struct KernelSpec {
  int size = 3;
  int stride = 1;
  ConvVariant variant = ConvVariant::Submanifold;

  KernelSpec() = default;
  KernelSpec(int k, int s, ConvVariant v) : size(k), stride(s), variant(v) {
    if (k < 1) throw InvalidKernel("kernel size must be >= 1");
    if (s < 1) throw InvalidKernel("stride must be >= 1");
    if (v == ConvVariant::Submanifold && s != 1) {
      throw InvalidKernel("submanifold convolution requires stride 1");
    }
  }

  static KernelSpec subm(int k = 3) { return {k, 1, ConvVariant::Submanifold}; }
  static KernelSpec gconv(int k = 2, int s = 2) { return {k, s, ConvVariant::Generalized}; }
  static KernelSpec tconv(int k = 2, int s = 2) { return {k, s, ConvVariant::Transposed}; }

  std::size_t volume() const {
    return static_cast<std::size_t>(size) * static_cast<std::size_t>(size) *
           static_cast<std::size_t>(size);
  }
  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

struct KernelOffset {
  std::int32_t dx = 0;
  std::int32_t dy = 0;
  std::int32_t dz = 0;

  KernelOffset operator-() const { return {-dx, -dy, -dz}; }
  bool is_zero() const { return dx == 0 && dy == 0 && dz == 0; }
  // First nonzero of (dz, dy, dx) is positive.
  bool lexicographically_positive() const {
    if (dz != 0) return dz > 0;
    if (dy != 0) return dy > 0;
    return dx > 0;
  }
  friend bool operator==(const KernelOffset&, const KernelOffset&) = default;
};

inline VoxelCoord operator+(const VoxelCoord& c, const KernelOffset& d) {
  return {c.x + d.dx, c.y + d.dy, c.z + d.dz};
}
inline VoxelCoord operator-(const VoxelCoord& c, const KernelOffset& d) {
  return {c.x - d.dx, c.y - d.dy, c.z - d.dz};
}

// Odd K: centered {-(K-1)/2 .. (K-1)/2}; even K: {0 .. K-1} anchored at the
// window origin. Order is (dz, dy, dx) lexicographic.
inline std::vector<KernelOffset> kernel_offsets(const KernelSpec& spec) {
  const int lo = spec.size % 2 == 1 ? -(spec.size - 1) / 2 : 0;
  const int hi = lo + spec.size - 1;
  std::vector<KernelOffset> out;
  out.reserve(spec.volume());
  for (int dz = lo; dz <= hi; ++dz)
    for (int dy = lo; dy <= hi; ++dy)
      for (int dx = lo; dx <= hi; ++dx) out.push_back({dx, dy, dz});
  return out;
}

inline std::size_t center_offset_index(const KernelSpec& spec) {
  if (spec.size % 2 == 0) throw UnsupportedSymmetry("even kernel has no center offset");
  return (spec.volume() - 1) / 2;
}

// With the symmetric ordering above, -offsets[i] == offsets[K^3 - 1 - i].
inline std::size_t negated_offset_index(const KernelSpec& spec, std::size_t idx) {
  if (spec.size % 2 == 0) throw UnsupportedSymmetry("even kernel offsets are not symmetric");
  return spec.volume() - 1 - idx;
}

// Indices into kernel_offsets(spec) of the lexicographically positive half.
inline std::vector<std::size_t> half_offset_indices(const KernelSpec& spec) {
  if (spec.size % 2 == 0) {
    throw UnsupportedSymmetry("half offsets need an odd kernel, got K=" + std::to_string(spec.size));
  }
  if (spec.variant != ConvVariant::Submanifold) {
    throw UnsupportedSymmetry("half offsets only apply to submanifold kernels");
  }
  const auto all = kernel_offsets(spec);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i].lexicographically_positive()) out.push_back(i);
  }
  return out;
}

inline std::vector<KernelOffset> half_offsets(const KernelSpec& spec) {
  const auto all = kernel_offsets(spec);
  std::vector<KernelOffset> out;
  for (std::size_t i : half_offset_indices(spec)) out.push_back(all[i]);
  return out;
}

// Hash index coordinate -> position in a coordinate list.
class CoordIndex {
 public:
  CoordIndex() = default;
  explicit CoordIndex(std::span<const VoxelCoord> coords) {
    index_.reserve(coords.size() * 2);
    for (std::size_t i = 0; i < coords.size(); ++i) index_.emplace(coords[i], i);
  }
  const std::size_t* find(const VoxelCoord& c) const {
    auto it = index_.find(c);
    return it == index_.end() ? nullptr : &it->second;
  }
  bool contains(const VoxelCoord& c) const { return index_.count(c) != 0; }

 private:
  std::unordered_map<VoxelCoord, std::size_t, VoxelCoordHash> index_;
};

namespace detail {

inline std::int32_t ceil_div(std::int32_t a, std::int32_t b) { return (a + b - 1) / b; }

// Exact division test that behaves for negative numerators.
inline bool divides(std::int32_t value, std::int32_t by, std::int32_t& quotient) {
  if (value % by != 0) return false;
  quotient = value / by;
  return true;
}

inline bool exact_div(const VoxelCoord& c, std::int32_t s, VoxelCoord& q) {
  return divides(c.x, s, q.x) && divides(c.y, s, q.y) && divides(c.z, s, q.z);
}

}  // namespace detail

// Grid of a generalized (downsampling) output: ceil(n / stride) per axis.
inline GridShape downsampled_shape(const GridShape& in, int stride) {
  return GridShape(detail::ceil_div(in.nx, stride), detail::ceil_div(in.ny, stride),
                   detail::ceil_div(in.nz, stride));
}

// Input coordinate feeding output `out` through offset `d`:
//   submanifold:  out + d
//   generalized:  out * stride + d
// Transposed convolution goes the other way (see transposed_source).
inline VoxelCoord generalized_source(const VoxelCoord& out, const KernelOffset& d, int stride) {
  return {out.x * stride + d.dx, out.y * stride + d.dy, out.z * stride + d.dz};
}

// Coarse input coordinate feeding fine output `out` through `d`, if any.
inline bool transposed_source(const VoxelCoord& out, const KernelOffset& d, int stride,
                              VoxelCoord& src) {
  return detail::exact_div(out - d, stride, src);
}

// Output coordinate set for a convolution. `targets` is the pre-downsample
// coordinate list a transposed layer upsamples back onto; it is ignored for
// the other variants. An empty result is valid.
inline std::vector<VoxelCoord> derive_output_coords(const SparseTensor& input,
                                                    const KernelSpec& spec,
                                                    std::span<const VoxelCoord> targets = {},
                                                    const GridShape* target_shape = nullptr) {
  switch (spec.variant) {
    case ConvVariant::Submanifold:
      return {input.coords().begin(), input.coords().end()};
    case ConvVariant::Generalized: {
      const GridShape out_shape = downsampled_shape(input.shape(), spec.stride);
      const auto offsets = kernel_offsets(spec);
      std::vector<VoxelCoord> out;
      out.reserve(input.size());
      for (const auto& p : input.coords()) {
        for (const auto& d : offsets) {
          VoxelCoord q;
          if (detail::exact_div(p - d, spec.stride, q) && out_shape.contains(q)) out.push_back(q);
        }
      }
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
      return out;
    }
    case ConvVariant::Transposed: {
      const CoordIndex coarse(input.coords());
      const auto offsets = kernel_offsets(spec);
      std::vector<VoxelCoord> out;
      for (const auto& t : targets) {
        if (target_shape != nullptr && !target_shape->contains(t)) continue;
        for (const auto& d : offsets) {
          VoxelCoord c;
          if (transposed_source(t, d, spec.stride, c) && coarse.contains(c)) {
            out.push_back(t);
            break;
          }
        }
      }
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
      return out;
    }
  }
  return {};
}

}  // namespace voxcim
