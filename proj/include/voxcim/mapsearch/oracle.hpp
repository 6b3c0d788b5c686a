#pragma once

#include <span>

#include "voxcim/core.hpp"
#include "voxcim/mapsearch/types.hpp"

namespace voxcim {

// Ground-truth map via a hash index over input coordinates. For every output
// and every kernel offset, the entry exists iff the variant's source
// coordinate is an input voxel.
inline InOutMap oracle_search(const SparseTensor& input, std::span<const VoxelCoord> outputs,
                              const KernelSpec& spec) {
  InOutMap map;
  if (input.empty() || outputs.empty()) return map;
  const CoordIndex index(input.coords());
  const auto offsets = kernel_offsets(spec);
  for (std::size_t o = 0; o < outputs.size(); ++o) {
    for (std::size_t k = 0; k < offsets.size(); ++k) {
      VoxelCoord src;
      switch (spec.variant) {
        case ConvVariant::Submanifold:
          src = outputs[o] + offsets[k];
          break;
        case ConvVariant::Generalized:
          src = generalized_source(outputs[o], offsets[k], spec.stride);
          break;
        case ConvVariant::Transposed:
          if (!transposed_source(outputs[o], offsets[k], spec.stride, src)) continue;
          break;
      }
      if (const std::size_t* i = index.find(src)) {
        map.entries.push_back({detail::narrow_index(*i), detail::narrow_index(o),
                               detail::narrow_index(k)});
      }
    }
  }
  return map;
}

// Adds the mirrored pair (j, i, -d) for every non-center entry (i, j, d).
inline InOutMap expand_symmetric(const InOutMap& half_map, const KernelSpec& spec) {
  const std::size_t center = center_offset_index(spec);
  InOutMap out;
  out.entries.reserve(half_map.size() * 2);
  for (const auto& e : half_map.entries) {
    out.entries.push_back(e);
    if (e.offset != center) {
      out.entries.push_back(
          {e.out, e.in, detail::narrow_index(negated_offset_index(spec, e.offset))});
    }
  }
  return out;
}

}  // namespace voxcim
