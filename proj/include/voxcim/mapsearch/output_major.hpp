#pragma once

// Output-major search over the half kernel. Each output at depth z only has
// half-offset neighbours at depths z and z+1, so the search keeps two depths
// in the sorter buffer. Without a depth table the stream cannot be entered in
// the middle: when two depths do not fit, every group of outputs re-streams
// from its first output through the rest of depth z and into depth z+1 up to
// the last row it needs.

#include <algorithm>
#include <span>
#include <vector>

#include "voxcim/core.hpp"
#include "voxcim/mapsearch/oracle.hpp"
#include "voxcim/mapsearch/types.hpp"

namespace voxcim {

namespace detail {

inline std::size_t find_coord(std::span<const VoxelCoord> coords, std::size_t lo, std::size_t hi,
                              const VoxelCoord& c) {
  auto first = coords.begin() + static_cast<std::ptrdiff_t>(lo);
  auto last = coords.begin() + static_cast<std::ptrdiff_t>(hi);
  auto it = std::lower_bound(first, last, c);
  return (it != last && *it == c) ? static_cast<std::size_t>(it - coords.begin()) : coords.size();
}

}  // namespace detail

inline SearchResult output_major_search(const SparseTensor& input,
                                        std::span<const VoxelCoord> outputs,
                                        const KernelSpec& spec, const BufferConfig& buf) {
  detail::require_k3(spec, "output_major_search");
  buf.validate();
  const auto in = input.coords();
  if (!std::equal(in.begin(), in.end(), outputs.begin(), outputs.end())) {
    throw UnsupportedVariant("output_major_search needs submanifold outputs (= input coords)");
  }
  SearchResult result;
  result.stats.n_voxels = in.size();
  if (in.empty()) return result;

  const auto offsets = kernel_offsets(spec);
  const auto half = half_offset_indices(spec);
  const auto center = detail::narrow_index(center_offset_index(spec));
  const std::int32_t nz = input.shape().nz;
  const auto begin = detail::depth_starts(in, nz);
  const auto depth_count = [&](std::int32_t z) -> std::uint64_t {
    if (z < 0 || z >= nz) return 0;
    return begin[static_cast<std::size_t>(z) + 1] - begin[static_cast<std::size_t>(z)];
  };
  const std::uint64_t capacity = buf.sorter_len;
  const std::uint64_t n_queries = half.size();
  const auto windows = [&](std::uint64_t items) { return (items + buf.sorter_len - 1) / buf.sorter_len; };

  bool depth_resident = false;
  std::int32_t prev_z = -2;
  std::uint64_t peak = 0;
  for (std::int32_t z = 0; z < nz; ++z) {
    const std::uint64_t n_cur = depth_count(z);
    if (n_cur == 0) continue;
    if (prev_z != z - 1) depth_resident = false;
    prev_z = z;
    const std::uint64_t n_next = depth_count(z + 1);
    const std::size_t z_lo = begin[static_cast<std::size_t>(z)];
    const std::size_t z_hi = begin[static_cast<std::size_t>(z) + 1];
    const std::size_t next_hi = z + 1 < nz ? begin[static_cast<std::size_t>(z) + 2] : z_hi;

    if (n_cur + n_next <= capacity) {
      result.stats.offchip_coord_reads += (depth_resident ? 0 : n_cur) + n_next;
      result.stats.sorter_invocations += windows(n_queries * n_cur + n_cur + n_next);
      peak = std::max(peak, n_cur + n_next);
      depth_resident = true;
    } else {
      for (std::size_t g = z_lo; g < z_hi; g += capacity) {
        const std::size_t g_end = std::min<std::size_t>(z_hi, g + capacity);
        const std::int32_t last_row = in[g_end - 1].y;
        // Depth z+1 prefix up to and including row last_row + 1.
        const auto next_end = std::upper_bound(
            in.begin() + static_cast<std::ptrdiff_t>(z_hi),
            in.begin() + static_cast<std::ptrdiff_t>(next_hi), last_row + 1,
            [](std::int32_t y, const VoxelCoord& c) { return y < c.y; });
        const std::uint64_t streamed =
            (z_hi - g) + static_cast<std::uint64_t>(next_end - (in.begin() + static_cast<std::ptrdiff_t>(z_hi)));
        result.stats.offchip_coord_reads += streamed;
        result.stats.sorter_invocations += windows(n_queries * (g_end - g) + streamed);
      }
      peak = capacity;
      depth_resident = false;
    }

    for (std::size_t o = z_lo; o < z_hi; ++o) {
      result.half_map.entries.push_back({detail::narrow_index(o), detail::narrow_index(o), center});
      for (std::size_t k : half) {
        const std::size_t i = detail::find_coord(in, z_lo, next_hi, in[o] + offsets[k]);
        if (i != in.size()) {
          result.half_map.entries.push_back(
              {detail::narrow_index(i), detail::narrow_index(o), detail::narrow_index(k)});
        }
      }
    }
  }
  result.stats.peak_fifo_occupancy = peak;
  result.map = expand_symmetric(result.half_map, spec);
  return result;
}

}  // namespace voxcim
