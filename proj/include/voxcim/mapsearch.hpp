#pragma once

#include <span>

#include "voxcim/core.hpp"
#include "voxcim/mapsearch/doms.hpp"
#include "voxcim/mapsearch/merge_sorter.hpp"
#include "voxcim/mapsearch/oracle.hpp"
#include "voxcim/mapsearch/output_major.hpp"
#include "voxcim/mapsearch/types.hpp"
#include "voxcim/mapsearch/weight_major.hpp"

namespace voxcim {

// Dispatches to one search method. Oracle results carry no access stats
// beyond n_voxels. `block_grid` is used by BlockDoms only.
inline SearchResult run_search(SearchMethod method, const SparseTensor& input,
                               std::span<const VoxelCoord> outputs, const KernelSpec& spec,
                               const BufferConfig& buf = {}, BlockGrid block_grid = {}) {
  switch (method) {
    case SearchMethod::Oracle: {
      SearchResult r;
      r.map = oracle_search(input, outputs, spec);
      r.stats.n_voxels = input.size();
      return r;
    }
    case SearchMethod::WeightMajor:
      return weight_major_search(input, outputs, spec, buf);
    case SearchMethod::OutputMajor:
      return output_major_search(input, outputs, spec, buf);
    case SearchMethod::Doms:
      return doms_search(input, outputs, spec, buf, build_depth_table(input, BlockGrid{1, 1}));
    case SearchMethod::BlockDoms:
      return block_doms_search(input, outputs, spec, buf, block_grid);
  }
  throw ConfigError("unknown search method");
}

}  // namespace voxcim
