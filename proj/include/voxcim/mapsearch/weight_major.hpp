#pragma once

// Weight-major search: for every kernel offset, stream the whole input set
// past the output set and merge. When the sorter buffer cannot hold the
// stream, each offset pays a fresh pass over the coordinates.

#include <algorithm>
#include <cstdlib>
#include <span>

#include "voxcim/core.hpp"
#include "voxcim/mapsearch/types.hpp"

namespace voxcim {

inline SearchResult weight_major_search(const SparseTensor& input,
                                        std::span<const VoxelCoord> outputs,
                                        const KernelSpec& spec, const BufferConfig& buf) {
  detail::require_streamable(spec, "weight_major_search");
  buf.validate();
  SearchResult result;
  const auto in = input.coords();
  result.stats.n_voxels = in.size();
  if (in.empty() || outputs.empty()) return result;

  const bool shared = std::equal(in.begin(), in.end(), outputs.begin(), outputs.end());
  const std::uint64_t n_in = in.size();
  const std::uint64_t n_out = outputs.size();
  const std::uint64_t stream = shared ? n_in : n_in + n_out;
  const std::size_t capacity = buf.sorter_len;
  const bool resident = stream <= capacity;
  if (resident) result.stats.offchip_coord_reads = stream;

  const auto offsets = kernel_offsets(spec);
  for (std::size_t k = 0; k < offsets.size(); ++k) {
    // Shifted inputs p - d stay in canonical order, so a linear merge finds
    // every output equal to some shifted input.
    std::size_t j = 0;
    std::size_t max_lag = 0;
    for (std::size_t i = 0; i < in.size(); ++i) {
      const VoxelCoord shifted = in[i] - offsets[k];
      while (j < outputs.size() && outputs[j] < shifted) ++j;
      max_lag = std::max(max_lag, i > j ? i - j : j - i);
      if (j < outputs.size() && outputs[j] == shifted) {
        result.map.entries.push_back(
            {detail::narrow_index(i), detail::narrow_index(j), detail::narrow_index(k)});
      }
    }
    if (!resident) {
      // A shared stream serves both cursors in one pass only while the
      // distance between them fits in the buffer.
      const bool one_pass = shared && max_lag + 1 <= capacity;
      result.stats.offchip_coord_reads += one_pass ? n_in : n_in + n_out;
    }
    result.stats.sorter_invocations += (n_in + n_out + buf.sorter_len - 1) / buf.sorter_len;
  }
  result.stats.peak_fifo_occupancy = std::min<std::uint64_t>(stream, capacity);
  return result;
}

}  // namespace voxcim
