#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "voxcim/core.hpp"

namespace voxcim {

struct MapEntry {
  std::uint32_t in = 0;
  std::uint32_t out = 0;
  std::uint32_t offset = 0;

  friend bool operator==(const MapEntry&, const MapEntry&) = default;
  // (out, offset, in): the scatter order used by execute_spconv.
  friend bool operator<(const MapEntry& a, const MapEntry& b) {
    return std::tie(a.out, a.offset, a.in) < std::tie(b.out, b.offset, b.in);
  }
};

// IN-OUT map: (input index, output index, kernel-offset index) triples.
struct InOutMap {
  std::vector<MapEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }

  InOutMap sorted() const {
    InOutMap m = *this;
    std::sort(m.entries.begin(), m.entries.end());
    return m;
  }
  bool has_duplicates() const {
    auto s = sorted();
    return std::adjacent_find(s.entries.begin(), s.entries.end()) != s.entries.end();
  }
  // Set equality, ignoring entry order.
  bool same_set(const InOutMap& other) const {
    return sorted().entries == other.sorted().entries;
  }
};

// On-chip buffer model. `sorter_len` is the fixed window of the bitonic merge
// sorter and also the sorter buffer that weight-major and output-major
// searches stage voxels in. FIFO I/II and the backup FIFO belong to the
// depth-encoded searches.
struct BufferConfig {
  std::size_t sorter_len = 64;
  std::size_t fifo_capacity_I = 64;
  std::size_t fifo_capacity_II = 64;
  std::size_t backup_capacity = 64;

  void validate() const {
    if (sorter_len < 2 || (sorter_len & (sorter_len - 1)) != 0) {
      throw InvalidBufferConfig("sorter_len must be a power of two >= 2, got " +
                                std::to_string(sorter_len));
    }
    if (fifo_capacity_I == 0 || fifo_capacity_II == 0) {
      throw InvalidBufferConfig("FIFO capacities must be positive");
    }
  }

  static BufferConfig uniform(std::size_t sorter, std::size_t fifo) {
    return {sorter, fifo, fifo, sorter};
  }
};

struct AccessStats {
  std::uint64_t n_voxels = 0;
  std::uint64_t offchip_coord_reads = 0;
  std::uint64_t sorter_invocations = 0;
  std::uint64_t table_reads = 0;
  std::uint64_t table_size_entries = 0;
  std::uint64_t replicated_voxels = 0;
  std::uint64_t peak_fifo_occupancy = 0;

  double normalized_access() const {
    return n_voxels == 0 ? 0.0
                         : static_cast<double>(offchip_coord_reads) / static_cast<double>(n_voxels);
  }
  double replicated_fraction() const {
    return n_voxels == 0 ? 0.0
                         : static_cast<double>(replicated_voxels) / static_cast<double>(n_voxels);
  }
};

struct SearchResult {
  InOutMap map;       // full map, set-equal to the oracle
  InOutMap half_map;  // half-offset discoveries plus center self-pairs (empty for weight-major)
  AccessStats stats;
};

enum class SearchMethod { Oracle, WeightMajor, OutputMajor, Doms, BlockDoms };

inline std::string to_string(SearchMethod m) {
  switch (m) {
    case SearchMethod::Oracle: return "oracle";
    case SearchMethod::WeightMajor: return "weight_major";
    case SearchMethod::OutputMajor: return "output_major";
    case SearchMethod::Doms: return "doms";
    case SearchMethod::BlockDoms: return "block_doms";
  }
  return "?";
}

inline SearchMethod parse_search_method(const std::string& s) {
  if (s == "oracle") return SearchMethod::Oracle;
  if (s == "weight_major") return SearchMethod::WeightMajor;
  if (s == "output_major") return SearchMethod::OutputMajor;
  if (s == "doms") return SearchMethod::Doms;
  if (s == "block_doms") return SearchMethod::BlockDoms;
  throw ConfigError("unknown search method '" + s + "'");
}

namespace detail {

inline void require_streamable(const KernelSpec& spec, const char* method) {
  if (spec.variant != ConvVariant::Submanifold) {
    throw UnsupportedVariant(std::string(method) + " handles submanifold kernels only");
  }
  if (spec.size % 2 == 0) {
    throw UnsupportedVariant(std::string(method) + " rejects even kernel sizes");
  }
}

inline void require_k3(const KernelSpec& spec, const char* method) {
  require_streamable(spec, method);
  if (spec.size != 3) {
    throw UnsupportedVariant(std::string(method) + " models the 3x3x3 search window only");
  }
}

// begin[z] .. begin[z+1] is depth z of a canonical stream; begin.size() == nz + 1.
inline std::vector<std::size_t> depth_starts(std::span<const VoxelCoord> coords, std::int32_t nz) {
  std::vector<std::size_t> begin(static_cast<std::size_t>(nz) + 1, coords.size());
  std::size_t i = 0;
  for (std::int32_t z = 0; z <= nz; ++z) {
    while (i < coords.size() && coords[i].z < z) ++i;
    begin[static_cast<std::size_t>(z)] = i;
  }
  return begin;
}

inline std::uint32_t narrow_index(std::size_t i) { return static_cast<std::uint32_t>(i); }

}  // namespace detail

}  // namespace voxcim
