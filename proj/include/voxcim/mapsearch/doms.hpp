#pragma once

// Depth-encoded output-major search (DOMS) and its blocked variant.
//
// For an output at (x0, y0, z0) the half-kernel neighbours live in rows
// y0..y0+1 of depth z0 and rows y0-1..y0+1 of depth z0+1. A per-depth start
// table lets the search tile exactly those rows into two FIFOs:
//   - the current-depth FIFO holds rows y0, y0+1 of z0,
//   - the next-depth FIFO holds rows y0-1..y0+1 of z0+1.
// The FIFOs ping-pong: when the output moves to depth z0+1 the next-depth
// FIFO becomes the current one and the old current FIFO is cleared. Rows of
// z0+1 that already left the window stay in the next-depth FIFO while it has
// room, so they are not fetched again one depth later. A FIFO that holds a
// whole depth therefore reads every voxel once; a small FIFO reads most
// voxels twice.
//
// Block-DOMS splits the (x, y) plane into m x n blocks, each with its own
// table. Rows of the y-1 / y+1 neighbour blocks are located through their
// tables (they sit at the end / start of a depth). The first x column of
// block (i+1, j) is replicated into block (i, j)'s memory region; block
// (i, j) searches those copies for their dx = -1 neighbours, so block
// (i+1, j) never has to look across its x- border.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include "voxcim/core.hpp"
#include "voxcim/mapsearch/merge_sorter.hpp"
#include "voxcim/mapsearch/oracle.hpp"
#include "voxcim/mapsearch/types.hpp"

namespace voxcim {

struct BlockGrid {
  int m = 1;  // splits along x
  int n = 1;  // splits along y

  std::size_t count() const { return static_cast<std::size_t>(m) * static_cast<std::size_t>(n); }
  friend bool operator==(const BlockGrid&, const BlockGrid&) = default;
};

inline std::string to_string(const BlockGrid& g) {
  return std::to_string(g.m) + "x" + std::to_string(g.n);
}

// Block boundaries: block i covers x in [floor(i*nx/m), floor((i+1)*nx/m)).
class BlockPartition {
 public:
  BlockPartition(const GridShape& shape, BlockGrid grid) : shape_(shape), grid_(grid) {
    if (grid.m < 1 || grid.n < 1) throw InvalidPartition("block grid must be at least 1x1");
    if (grid.m > shape.nx || grid.n > shape.ny) {
      throw InvalidPartition("block grid " + to_string(grid) + " exceeds grid " + to_string(shape));
    }
  }

  const BlockGrid& grid() const { return grid_; }
  const GridShape& shape() const { return shape_; }

  std::int32_t x_begin(int i) const { return split(shape_.nx, grid_.m, i); }
  std::int32_t y_begin(int j) const { return split(shape_.ny, grid_.n, j); }
  bool x_in(int i, std::int32_t x) const { return x >= x_begin(i) && x < x_begin(i + 1); }
  bool y_in(int j, std::int32_t y) const { return y >= y_begin(j) && y < y_begin(j + 1); }

  int block_x(std::int32_t x) const { return locate(shape_.nx, grid_.m, x); }
  int block_y(std::int32_t y) const { return locate(shape_.ny, grid_.n, y); }
  std::size_t block_id(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(grid_.m) +
           static_cast<std::size_t>(i);
  }

 private:
  static std::int32_t split(std::int32_t extent, int parts, int i) {
    return static_cast<std::int32_t>(static_cast<std::int64_t>(i) * extent / parts);
  }
  static int locate(std::int32_t extent, int parts, std::int32_t v) {
    int i = static_cast<int>(static_cast<std::int64_t>(v) * parts / extent);
    while (i > 0 && v < split(extent, parts, i)) --i;
    while (i + 1 < parts && v >= split(extent, parts, i + 1)) ++i;
    return i;
  }

  GridShape shape_;
  BlockGrid grid_;
};

struct DepthEntry {
  std::uint64_t offset = 0;  // start of the depth inside the block's stream
  std::uint64_t count = 0;

  friend bool operator==(const DepthEntry&, const DepthEntry&) = default;
};

// One table per block, indexed directly by z.
struct DepthEncodingTable {
  BlockGrid block_grid;
  std::int32_t depths = 0;
  std::vector<std::vector<DepthEntry>> blocks;  // [block_id][z]

  std::uint64_t size_entries() const {
    return static_cast<std::uint64_t>(blocks.size()) * static_cast<std::uint64_t>(depths);
  }
  friend bool operator==(const DepthEncodingTable&, const DepthEncodingTable&) = default;
};

// Memory re-organised by block: per block, the global indices of its voxels in
// canonical order. Concatenating the blocks of one depth in any order gives a
// permutation of that depth.
inline std::vector<std::vector<std::uint32_t>> partition_stream(const SparseTensor& input,
                                                                const BlockPartition& part) {
  std::vector<std::vector<std::uint32_t>> streams(part.grid().count());
  const auto coords = input.coords();
  for (std::size_t g = 0; g < coords.size(); ++g) {
    const auto b = part.block_id(part.block_x(coords[g].x), part.block_y(coords[g].y));
    streams[b].push_back(detail::narrow_index(g));
  }
  return streams;
}

inline DepthEncodingTable build_depth_table(const SparseTensor& input, BlockGrid grid) {
  const BlockPartition part(input.shape(), grid);
  DepthEncodingTable table;
  table.block_grid = grid;
  table.depths = input.shape().nz;
  table.blocks.assign(grid.count(), std::vector<DepthEntry>(static_cast<std::size_t>(table.depths)));
  const auto coords = input.coords();
  const auto streams = partition_stream(input, part);
  for (std::size_t b = 0; b < streams.size(); ++b) {
    auto& entries = table.blocks[b];
    for (const auto g : streams[b]) ++entries[static_cast<std::size_t>(coords[g].z)].count;
    std::uint64_t offset = 0;
    for (auto& e : entries) {
      e.offset = offset;
      offset += e.count;
    }
  }
  return table;
}

namespace detail {

struct StreamRow {
  std::int32_t y = 0;
  std::uint32_t own_begin = 0, own_end = 0;  // into BlockData::own
  std::uint32_t bk_begin = 0, bk_end = 0;    // into BlockData::backup
  std::uint64_t own_count() const { return own_end - own_begin; }
  std::uint64_t count() const { return own_count() + (bk_end - bk_begin); }
};

struct BlockData {
  std::vector<std::uint32_t> own;
  std::vector<std::uint32_t> backup;
  std::vector<std::vector<StreamRow>> rows;  // [z], ascending y
  std::vector<std::uint64_t> own_in_depth;   // [z]

  const StreamRow* find_row(std::int32_t z, std::int32_t y) const {
    if (z < 0 || z >= static_cast<std::int32_t>(rows.size())) return nullptr;
    const auto& r = rows[static_cast<std::size_t>(z)];
    auto it = std::lower_bound(r.begin(), r.end(), y,
                               [](const StreamRow& row, std::int32_t v) { return row.y < v; });
    return (it != r.end() && it->y == y) ? &*it : nullptr;
  }
};

inline void build_rows(BlockData& b, std::span<const VoxelCoord> coords, std::int32_t nz) {
  b.rows.assign(static_cast<std::size_t>(nz), {});
  b.own_in_depth.assign(static_cast<std::size_t>(nz), 0);
  std::size_t p = 0, q = 0;
  while (p < b.own.size() || q < b.backup.size()) {
    const VoxelCoord* a = p < b.own.size() ? &coords[b.own[p]] : nullptr;
    const VoxelCoord* c = q < b.backup.size() ? &coords[b.backup[q]] : nullptr;
    std::int32_t z, y;
    if (a && (!c || std::tie(a->z, a->y) <= std::tie(c->z, c->y))) {
      z = a->z;
      y = a->y;
    } else {
      z = c->z;
      y = c->y;
    }
    StreamRow row;
    row.y = y;
    row.own_begin = narrow_index(p);
    while (p < b.own.size() && coords[b.own[p]].z == z && coords[b.own[p]].y == y) ++p;
    row.own_end = narrow_index(p);
    row.bk_begin = narrow_index(q);
    while (q < b.backup.size() && coords[b.backup[q]].z == z && coords[b.backup[q]].y == y) ++q;
    row.bk_end = narrow_index(q);
    b.rows[static_cast<std::size_t>(z)].push_back(row);
    b.own_in_depth[static_cast<std::size_t>(z)] += row.own_count();
  }
}

// Row-granular FIFO keyed by row y within one depth.
class RowFifo {
 public:
  explicit RowFifo(std::uint64_t capacity) : capacity_(capacity) {}

  bool has(std::int32_t y) const { return rows_.count(y) != 0; }
  void insert(std::int32_t y, std::uint64_t count) {
    if (rows_.emplace(y, count).second) occupancy_ += count;
  }
  void erase(std::int32_t y) {
    auto it = rows_.find(y);
    if (it == rows_.end()) return;
    occupancy_ -= it->second;
    rows_.erase(it);
  }
  void erase_below(std::int32_t y) {
    while (!rows_.empty() && rows_.begin()->first < y) {
      occupancy_ -= rows_.begin()->second;
      rows_.erase(rows_.begin());
    }
  }
  // Drops rows outside [keep_lo, keep_hi], largest y first, until the FIFO fits.
  void evict_to_fit(std::int32_t keep_lo, std::int32_t keep_hi) {
    auto it = rows_.end();
    while (occupancy_ > capacity_ && it != rows_.begin()) {
      --it;
      if (it->first >= keep_lo && it->first <= keep_hi) continue;
      occupancy_ -= it->second;
      it = rows_.erase(it);
    }
  }
  void clear() {
    rows_.clear();
    occupancy_ = 0;
  }
  bool overflowing() const { return occupancy_ > capacity_; }
  std::uint64_t occupancy() const { return occupancy_; }

 private:
  std::uint64_t capacity_;
  std::uint64_t occupancy_ = 0;
  std::map<std::int32_t, std::uint64_t> rows_;
};

inline SearchResult doms_engine(const SparseTensor& input, const KernelSpec& spec,
                                const BufferConfig& buf, const BlockPartition& part) {
  SearchResult result;
  const auto coords = input.coords();
  const std::int32_t nz = input.shape().nz;
  const int m = part.grid().m;
  const int n = part.grid().n;
  result.stats.n_voxels = coords.size();
  result.stats.table_size_entries =
      static_cast<std::uint64_t>(part.grid().count()) * static_cast<std::uint64_t>(nz);
  if (coords.empty()) return result;

  const auto offsets = kernel_offsets(spec);
  const auto half = half_offset_indices(spec);
  const auto center = narrow_index(center_offset_index(spec));

  // Re-organised memory: own voxels per block plus the replicated first
  // column of the x+ neighbour.
  auto own = partition_stream(input, part);
  std::vector<BlockData> blocks(part.grid().count());
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < m; ++i) {
      auto& b = blocks[part.block_id(i, j)];
      b.own = std::move(own[part.block_id(i, j)]);
    }
  }
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i + 1 < m; ++i) {
      const std::int32_t column = part.x_begin(i + 1);
      auto& b = blocks[part.block_id(i, j)];
      for (const auto g : blocks[part.block_id(i + 1, j)].own) {
        if (coords[g].x == column) b.backup.push_back(g);
      }
      result.stats.replicated_voxels += b.backup.size();
    }
  }
  for (auto& b : blocks) build_rows(b, coords, nz);

  MergeSorter sorter(buf.sorter_len);
  std::uint64_t reads = 0;
  std::uint64_t table_reads = 0;
  std::uint64_t peak = 0;

  std::vector<SortItem> candidates;
  std::vector<SortItem> queries;
  const auto push_row = [&](const BlockData& b, const StreamRow& row, bool with_backup) {
    for (auto p = row.own_begin; p < row.own_end; ++p) {
      candidates.push_back({coords[b.own[p]], SortTag::Candidate, b.own[p]});
    }
    if (!with_backup) return;
    for (auto p = row.bk_begin; p < row.bk_end; ++p) {
      candidates.push_back({coords[b.backup[p]], SortTag::Candidate, b.backup[p]});
    }
  };

  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < m; ++i) {
      const BlockData& block = blocks[part.block_id(i, j)];
      RowFifo fifo[2] = {RowFifo(buf.fifo_capacity_I), RowFifo(buf.fifo_capacity_II)};
      int cur = 0;
      std::int32_t prev_z = -2;

      for (std::int32_t z = 0; z < nz; ++z) {
        const auto& depth_rows = block.rows[static_cast<std::size_t>(z)];
        if (depth_rows.empty()) continue;
        if (prev_z == z - 1) {
          cur ^= 1;
          fifo[cur ^ 1].clear();
        } else {
          fifo[0].clear();
          fifo[1].clear();
        }
        prev_z = z;
        table_reads += z + 1 < nz ? 2 : 1;
        RowFifo& now = fifo[cur];
        RowFifo& next = fifo[cur ^ 1];

        for (const StreamRow& row : depth_rows) {
          const std::int32_t y = row.y;
          // Current depth: rows y, y+1.
          now.erase_below(y);
          std::uint64_t need_now = 0;
          for (std::int32_t yy = y; yy <= y + 1; ++yy) {
            if (const StreamRow* r = block.find_row(z, yy)) {
              need_now += r->count();
              if (!now.has(yy)) {
                now.insert(yy, r->count());
                reads += r->count();
              }
            }
          }
          now.evict_to_fit(y, y + 1);
          // Next depth: rows y-1 .. y+1.
          std::uint64_t need_next = 0;
          for (std::int32_t yy = y - 1; yy <= y + 1; ++yy) {
            if (const StreamRow* r = block.find_row(z + 1, yy)) {
              need_next += r->count();
              if (!next.has(yy)) {
                next.insert(yy, r->count());
                reads += r->count();
              }
            }
          }
          next.evict_to_fit(y - 1, y + 1);
          peak = std::max({peak, now.occupancy(), next.occupancy()});

          // A window larger than its FIFO is re-streamed for every output.
          const bool now_overflow = now.overflowing();
          const bool next_overflow = next.overflowing();
          const std::uint64_t outputs_in_row = row.count();
          if (now_overflow) reads += (outputs_in_row - 1) * need_now;
          if (next_overflow) reads += (outputs_in_row - 1) * need_next;

          candidates.clear();
          for (std::int32_t yy = y; yy <= y + 1; ++yy) {
            if (const StreamRow* r = block.find_row(z, yy)) push_row(block, *r, true);
          }
          for (std::int32_t yy = y - 1; yy <= y + 1; ++yy) {
            if (const StreamRow* r = block.find_row(z + 1, yy)) push_row(block, *r, true);
          }
          const std::size_t base_candidates = candidates.size();

          // Cross-block rows held in the backup FIFO for this row step.
          std::set<std::tuple<std::size_t, std::int32_t, std::int32_t>> cross_loaded;
          std::uint64_t cross_occupancy = 0;

          const auto search_output = [&](std::uint32_t g, bool replicated) {
            const VoxelCoord q = coords[g];
            const int home_i = replicated ? i + 1 : i;
            candidates.resize(base_candidates);
            for (int side : {-1, +1}) {
              const int bj = j + side;
              if (bj < 0 || bj >= n) continue;
              const std::int32_t yy = q.y + side;
              for (int dx = -1; dx <= 1; ++dx) {
                const int bi = home_i + dx;
                if (bi < 0 || bi >= m) continue;
                if (!part.x_in(bi, q.x + dx) || !part.y_in(bj, yy)) continue;
                const std::size_t nb = part.block_id(bi, bj);
                for (std::int32_t zz = z; zz <= z + 1 && zz < nz; ++zz) {
                  const std::uint64_t depth_own = blocks[nb].own_in_depth[static_cast<std::size_t>(zz)];
                  if (depth_own == 0) continue;
                  const StreamRow* r = blocks[nb].find_row(zz, yy);
                  const std::uint64_t row_own = r == nullptr ? 0 : r->own_count();
                  const auto key = std::make_tuple(nb, zz, yy);
                  if (!cross_loaded.count(key)) {
                    // The table only marks depth boundaries: the record just
                    // past the row is read to find where the row ends.
                    const std::uint64_t fetched = row_own + (depth_own > row_own ? 1 : 0);
                    reads += fetched;
                    ++table_reads;
                    if (cross_occupancy + fetched <= buf.backup_capacity) {
                      cross_loaded.insert(key);
                      cross_occupancy += fetched;
                    }
                  }
                  if (row_own == 0) continue;
                  push_row(blocks[nb], *r, false);
                }
              }
            }
            peak = std::max(peak, cross_occupancy);

            queries.clear();
            for (std::size_t k : half) {
              const KernelOffset& d = offsets[k];
              if (replicated ? d.dx != -1 : q.x + d.dx < part.x_begin(i)) continue;
              queries.push_back({q + d, SortTag::Query, narrow_index(k)});
            }
            sorter.match(queries, candidates, [&](std::uint32_t in, std::uint32_t k) {
              result.half_map.entries.push_back({in, g, k});
            });
          };

          for (auto p = row.own_begin; p < row.own_end; ++p) {
            const std::uint32_t g = block.own[p];
            result.half_map.entries.push_back({g, g, center});
            search_output(g, false);
          }
          for (auto p = row.bk_begin; p < row.bk_end; ++p) search_output(block.backup[p], true);

          if (now_overflow) {
            now.erase(y);
            now.erase(y + 1);
          }
          if (next_overflow) {
            for (std::int32_t yy = y - 1; yy <= y + 1; ++yy) next.erase(yy);
          }
        }
      }
    }
  }

  result.stats.offchip_coord_reads = reads;
  result.stats.table_reads = table_reads;
  result.stats.sorter_invocations = sorter.invocations();
  result.stats.peak_fifo_occupancy = peak;
  result.map = expand_symmetric(result.half_map, spec);
  return result;
}

}  // namespace detail

inline SearchResult block_doms_search(const SparseTensor& input, std::span<const VoxelCoord> outputs,
                                      const KernelSpec& spec, const BufferConfig& buf,
                                      BlockGrid block_grid) {
  detail::require_k3(spec, "block_doms_search");
  buf.validate();
  const auto in = input.coords();
  if (!std::equal(in.begin(), in.end(), outputs.begin(), outputs.end())) {
    throw UnsupportedVariant("block_doms_search needs submanifold outputs (= input coords)");
  }
  return detail::doms_engine(input, spec, buf, BlockPartition(input.shape(), block_grid));
}

inline SearchResult doms_search(const SparseTensor& input, std::span<const VoxelCoord> outputs,
                                const KernelSpec& spec, const BufferConfig& buf,
                                const DepthEncodingTable& table) {
  detail::require_k3(spec, "doms_search");
  if (table.block_grid != BlockGrid{1, 1} || table.blocks.size() != 1) {
    throw TableMismatch("doms_search needs a table over the unpartitioned grid");
  }
  if (table.depths != input.shape().nz) {
    throw TableMismatch("table has " + std::to_string(table.depths) + " depths, grid has " +
                        std::to_string(input.shape().nz));
  }
  const auto starts = detail::depth_starts(input.coords(), input.shape().nz);
  for (std::int32_t z = 0; z < table.depths; ++z) {
    const auto zi = static_cast<std::size_t>(z);
    const DepthEntry expected{starts[zi], starts[zi + 1] - starts[zi]};
    if (table.blocks[0][zi] != expected) {
      throw TableMismatch("entry for depth " + std::to_string(z) + " disagrees with the stream");
    }
  }
  return block_doms_search(input, outputs, spec, buf, BlockGrid{1, 1});
}

}  // namespace voxcim
