#pragma once

// Computing-core model: weight layouts on CIM tiles, per-offset workload,
// W2B copy factors and a weight-stationary cycle model.
//
// A tile is tile_rows x tile_cols one-bit cells split into PEs. A weight of
// weight_bits occupies ceil(weight_bits / cell_bits) adjacent cells in a row.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "voxcim/core.hpp"
#include "voxcim/mapsearch/types.hpp"

namespace voxcim {

struct CimGeometry {
  std::size_t tile_rows = 1024;
  std::size_t tile_cols = 1024;
  std::size_t cell_bits = 1;
  std::size_t weight_bits = 8;
  std::size_t pe_rows = 128;
  std::size_t pe_cols = 128;
  std::size_t num_tiles = 16;

  void validate() const {
    if (tile_rows == 0 || tile_cols == 0 || cell_bits == 0 || weight_bits == 0 || pe_rows == 0 ||
        pe_cols == 0 || num_tiles == 0) {
      throw ConfigError("CIM geometry fields must be positive");
    }
    if (tile_rows % pe_rows != 0 || tile_cols % pe_cols != 0) {
      throw ConfigError("PE size must divide the tile size");
    }
  }
  std::size_t cells_per_weight() const { return (weight_bits + cell_bits - 1) / cell_bits; }
  std::size_t pe_grid_rows() const { return tile_rows / pe_rows; }
  std::size_t pe_grid_cols() const { return tile_cols / pe_cols; }
  std::size_t pes_per_tile() const { return pe_grid_rows() * pe_grid_cols(); }
  std::uint64_t total_cells() const {
    return static_cast<std::uint64_t>(num_tiles) * tile_rows * tile_cols;
  }
};

enum class MappingScheme { Traditional, SubMatrix };

inline std::string to_string(MappingScheme s) {
  return s == MappingScheme::Traditional ? "traditional" : "submatrix";
}

inline constexpr std::size_t kAllOffsets = std::numeric_limits<std::size_t>::max();

// One rectangle of cells. Sub-matrix placements cover a whole number of PEs
// (pe_row, pe_col, pe_row_span, pe_col_span); traditional segments are
// column ranges of a tile.
struct Placement {
  std::size_t offset_idx = kAllOffsets;
  std::size_t copy_index = 0;
  std::size_t part = 0;  // piece of a sub-matrix larger than one tile
  std::size_t tile = 0;
  std::size_t pe_row = 0, pe_col = 0;
  std::size_t pe_row_span = 0, pe_col_span = 0;
  std::size_t rows = 0, cols = 0;  // occupied cells
  std::uint64_t cells() const { return static_cast<std::uint64_t>(rows) * cols; }
};

struct CimLayout {
  MappingScheme scheme = MappingScheme::SubMatrix;
  std::size_t kernel_positions = 0;  // K^3 (Spconv3D) or K^2 (Conv2D)
  std::size_t c1 = 0, c2 = 0;
  std::size_t logical_rows = 0, logical_cols = 0;  // one sub-matrix, or the unrolled array
  std::size_t folds = 1;                           // traditional row folding
  std::vector<std::size_t> copy_factors;
  std::vector<Placement> assignments;
  std::uint64_t occupied_cells = 0;
  std::size_t pes_used = 0;
  std::size_t tiles_used = 0;

  std::size_t placed_copies() const {
    std::size_t n = 0;
    for (auto c : copy_factors) n += c;
    return n;
  }
};

namespace detail {

inline CimLayout traditional_layout(std::size_t positions, std::size_t c1, std::size_t c2,
                                    const CimGeometry& geom) {
  geom.validate();
  if (c1 == 0 || c2 == 0) throw ShapeError("channel counts must be positive");
  CimLayout l;
  l.scheme = MappingScheme::Traditional;
  l.kernel_positions = positions;
  l.c1 = c1;
  l.c2 = c2;
  l.logical_rows = c1 * positions;
  l.logical_cols = c2 * geom.cells_per_weight();
  l.copy_factors.assign(positions, 1);
  // Columns taller than a tile wrap into further column groups whose partial
  // sums are added outside the array.
  l.folds = (l.logical_rows + geom.tile_rows - 1) / geom.tile_rows;
  const std::uint64_t physical_cols = static_cast<std::uint64_t>(l.folds) * l.logical_cols;
  const std::uint64_t available_cols = static_cast<std::uint64_t>(geom.num_tiles) * geom.tile_cols;
  if (physical_cols > available_cols) {
    throw CapacityError("unrolled array needs " + std::to_string(physical_cols) +
                        " physical columns, geometry has " + std::to_string(available_cols) +
                        " (deficit " + std::to_string(physical_cols - available_cols) + ")");
  }
  std::uint64_t col = 0;
  for (std::size_t f = 0; f < l.folds; ++f) {
    const std::size_t rows = std::min(geom.tile_rows, l.logical_rows - f * geom.tile_rows);
    std::size_t remaining = l.logical_cols;
    while (remaining > 0) {
      const std::size_t tile = static_cast<std::size_t>(col / geom.tile_cols);
      const std::size_t in_tile = static_cast<std::size_t>(col % geom.tile_cols);
      const std::size_t take = std::min(remaining, geom.tile_cols - in_tile);
      Placement p;
      p.part = f;
      p.tile = tile;
      p.pe_col = in_tile / geom.pe_cols;
      p.pe_col_span = (in_tile + take + geom.pe_cols - 1) / geom.pe_cols - p.pe_col;
      p.pe_row_span = (rows + geom.pe_rows - 1) / geom.pe_rows;
      p.rows = rows;
      p.cols = take;
      l.assignments.push_back(p);
      l.occupied_cells += p.cells();
      col += take;
      remaining -= take;
    }
  }
  l.tiles_used = static_cast<std::size_t>((col + geom.tile_cols - 1) / geom.tile_cols);
  for (const auto& p : l.assignments) l.pes_used += p.pe_row_span * p.pe_col_span;
  return l;
}

// First-fit packing of PE rectangles, tile by tile, scanning PE rows then
// columns.
class PePacker {
 public:
  explicit PePacker(const CimGeometry& g)
      : rows_(g.pe_grid_rows()), cols_(g.pe_grid_cols()),
        used_(g.num_tiles, std::vector<bool>(rows_ * cols_, false)) {}

  bool place(std::size_t h, std::size_t w, std::size_t& tile, std::size_t& r, std::size_t& c) {
    for (tile = 0; tile < used_.size(); ++tile)
      for (r = 0; r + h <= rows_; ++r)
        for (c = 0; c + w <= cols_; ++c) {
          if (!free(tile, r, c, h, w)) continue;
          for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) used_[tile][(r + i) * cols_ + c + j] = true;
          return true;
        }
    return false;
  }
  std::size_t free_pes() const {
    std::size_t n = 0;
    for (const auto& t : used_) n += static_cast<std::size_t>(std::count(t.begin(), t.end(), false));
    return n;
  }
  std::size_t tiles_touched() const {
    std::size_t n = 0;
    for (const auto& t : used_) n += std::find(t.begin(), t.end(), true) != t.end() ? 1 : 0;
    return n;
  }

 private:
  bool free(std::size_t tile, std::size_t r, std::size_t c, std::size_t h, std::size_t w) const {
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j)
        if (used_[tile][(r + i) * cols_ + c + j]) return false;
    return true;
  }

  std::size_t rows_, cols_;
  std::vector<std::vector<bool>> used_;
};

inline CimLayout submatrix_layout(std::size_t positions, std::size_t c1, std::size_t c2,
                                  const CimGeometry& geom, std::vector<std::size_t> copy_factors) {
  geom.validate();
  if (c1 == 0 || c2 == 0) throw ShapeError("channel counts must be positive");
  if (copy_factors.empty()) copy_factors.assign(positions, 1);
  if (copy_factors.size() != positions) {
    throw ShapeError("expected " + std::to_string(positions) + " copy factors, got " +
                     std::to_string(copy_factors.size()));
  }
  CimLayout l;
  l.scheme = MappingScheme::SubMatrix;
  l.kernel_positions = positions;
  l.c1 = c1;
  l.c2 = c2;
  l.logical_rows = c1;
  l.logical_cols = c2 * geom.cells_per_weight();
  l.copy_factors = copy_factors;

  // A sub-matrix larger than a tile is cut into tile-sized pieces.
  struct Piece {
    std::size_t rows, cols;
  };
  std::vector<Piece> pieces;
  for (std::size_t r0 = 0; r0 < l.logical_rows; r0 += geom.tile_rows)
    for (std::size_t c0 = 0; c0 < l.logical_cols; c0 += geom.tile_cols)
      pieces.push_back({std::min(geom.tile_rows, l.logical_rows - r0),
                        std::min(geom.tile_cols, l.logical_cols - c0)});

  PePacker packer(geom);
  std::size_t pes_per_copy = 0;
  for (const auto& pc : pieces) {
    pes_per_copy += ((pc.rows + geom.pe_rows - 1) / geom.pe_rows) *
                    ((pc.cols + geom.pe_cols - 1) / geom.pe_cols);
  }
  for (std::size_t d = 0; d < positions; ++d) {
    for (std::size_t copy = 0; copy < copy_factors[d]; ++copy) {
      for (std::size_t part = 0; part < pieces.size(); ++part) {
        Placement p;
        p.offset_idx = d;
        p.copy_index = copy;
        p.part = part;
        p.rows = pieces[part].rows;
        p.cols = pieces[part].cols;
        p.pe_row_span = (p.rows + geom.pe_rows - 1) / geom.pe_rows;
        p.pe_col_span = (p.cols + geom.pe_cols - 1) / geom.pe_cols;
        if (!packer.place(p.pe_row_span, p.pe_col_span, p.tile, p.pe_row, p.pe_col)) {
          std::size_t needed = 0;
          for (auto c : copy_factors) needed += c;
          needed *= pes_per_copy;
          const std::size_t available = geom.num_tiles * geom.pes_per_tile();
          throw CapacityError("sub-matrix layout needs " + std::to_string(needed) +
                              " PEs, geometry has " + std::to_string(available) + " (deficit " +
                              std::to_string(needed > available ? needed - available : 0) +
                              " PEs, or fragmentation)");
        }
        l.assignments.push_back(p);
        l.occupied_cells += p.cells();
        l.pes_used += p.pe_row_span * p.pe_col_span;
      }
    }
  }
  l.tiles_used = packer.tiles_touched();
  return l;
}

inline std::size_t positions_3d(int k) { return static_cast<std::size_t>(k) * k * k; }
inline std::size_t positions_2d(int k) { return static_cast<std::size_t>(k) * k; }

}  // namespace detail

inline CimLayout layout_traditional(const KernelSpec& spec, std::size_t c1, std::size_t c2,
                                    const CimGeometry& geom = {}) {
  return detail::traditional_layout(detail::positions_3d(spec.size), c1, c2, geom);
}

inline CimLayout layout_traditional_conv2d(int k, std::size_t c1, std::size_t c2,
                                           const CimGeometry& geom = {}) {
  if (k < 1) throw InvalidKernel("kernel size must be >= 1");
  return detail::traditional_layout(detail::positions_2d(k), c1, c2, geom);
}

// Empty `copy_factors` means one copy per offset.
inline CimLayout layout_submatrix(const KernelSpec& spec, std::size_t c1, std::size_t c2,
                                  const CimGeometry& geom = {},
                                  std::vector<std::size_t> copy_factors = {}) {
  return detail::submatrix_layout(detail::positions_3d(spec.size), c1, c2, geom,
                                  std::move(copy_factors));
}

inline CimLayout layout_submatrix_conv2d(int k, std::size_t c1, std::size_t c2,
                                         const CimGeometry& geom = {},
                                         std::vector<std::size_t> copy_factors = {}) {
  if (k < 1) throw InvalidKernel("kernel size must be >= 1");
  return detail::submatrix_layout(detail::positions_2d(k), c1, c2, geom, std::move(copy_factors));
}

// ---------------------------------------------------------------------------
// Workload

struct WorkloadHistogram {
  std::vector<KernelOffset> offsets;
  std::vector<std::uint64_t> pairs;

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto p : pairs) t += p;
    return t;
  }
  std::size_t nonzero() const {
    return static_cast<std::size_t>(std::count_if(pairs.begin(), pairs.end(), [](auto p) { return p > 0; }));
  }
  // Largest over smallest nonzero count; 0 for an empty histogram.
  double max_min_ratio() const { return normalized_ratio(std::vector<std::size_t>(pairs.size(), 1)); }

  std::vector<double> normalized(const std::vector<std::size_t>& copies) const {
    std::vector<double> out(pairs.size(), 0.0);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      if (pairs[k] > 0 && copies[k] > 0) out[k] = static_cast<double>(pairs[k]) / static_cast<double>(copies[k]);
    }
    return out;
  }
  double max_normalized(const std::vector<std::size_t>& copies) const {
    const auto n = normalized(copies);
    return n.empty() ? 0.0 : *std::max_element(n.begin(), n.end());
  }
  // Max over min normalized workload across offsets that have pairs.
  double normalized_ratio(const std::vector<std::size_t>& copies) const {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    const auto n = normalized(copies);
    for (std::size_t k = 0; k < n.size(); ++k) {
      if (pairs[k] == 0) continue;
      lo = std::min(lo, n[k]);
      hi = std::max(hi, n[k]);
    }
    return hi == 0.0 ? 0.0 : hi / lo;
  }
};

inline WorkloadHistogram workload_histogram(const InOutMap& map, const KernelSpec& spec) {
  WorkloadHistogram h;
  h.offsets = kernel_offsets(spec);
  h.pairs.assign(h.offsets.size(), 0);
  for (const auto& e : map.entries) {
    if (e.offset >= h.pairs.size()) {
      throw MapIndexError("offset index " + std::to_string(e.offset) + " outside kernel of " +
                          std::to_string(h.pairs.size()));
    }
    ++h.pairs[e.offset];
  }
  return h;
}

// Greedy W2B: one copy per offset with work, then each remaining slot goes to
// the offset with the largest pairs / copies (lowest index on ties). Offsets
// without pairs get no copy.
inline std::vector<std::size_t> w2b_optimize(const WorkloadHistogram& hist, std::size_t pe_budget) {
  const std::size_t n = hist.pairs.size();
  const std::size_t required = hist.nonzero();
  if (pe_budget < required) {
    throw BudgetError("budget of " + std::to_string(pe_budget) + " slots is below the " +
                      std::to_string(required) + " offsets with work");
  }
  std::vector<std::size_t> copies(n, 0);
  for (std::size_t k = 0; k < n; ++k) copies[k] = hist.pairs[k] > 0 ? 1 : 0;
  if (required == 0) return copies;
  for (std::size_t slot = required; slot < pe_budget; ++slot) {
    std::size_t best = n;
    for (std::size_t k = 0; k < n; ++k) {
      if (hist.pairs[k] == 0) continue;
      // pairs[k] / copies[k] > pairs[best] / copies[best], compared exactly.
      if (best == n || hist.pairs[k] * copies[best] > hist.pairs[best] * copies[k]) best = k;
    }
    ++copies[best];
  }
  return copies;
}

// ---------------------------------------------------------------------------
// Cycle model

// Abstract per-event costs; energy is reported in these units only.
struct EventCosts {
  double mac_wave = 1.0;
  double feature_fetch = 1.0;
  double map_read = 1.0;
};

struct CycleReport {
  std::uint64_t cycles = 0;
  std::uint64_t total_pairs = 0;
  std::size_t active_copies = 0;
  double utilization = 0.0;
  std::uint64_t feature_fetches = 0;  // input vectors gathered, after reuse
  std::uint64_t naive_fetches = 0;    // one gather per pair
  std::uint64_t map_reads = 0;
  double energy = 0.0;
};

// Weight-stationary Spconv3D model. Every placed copy handles one pair per
// cycle. An offset's pairs are dealt to its copies round-robin in (out,
// offset, in) order. Each cycle every busy copy picks, from its queue, a pair
// whose input was gathered in the previous cycle if it has one, otherwise
// its pair with the smallest input index. Inputs shared with the previous
// cycle are not fetched again.
inline CycleReport spconv_cycles(const InOutMap& map, const WorkloadHistogram& hist,
                                 const CimLayout& layout, const EventCosts& costs = {}) {
  if (hist.total() != map.size()) throw MapIndexError("histogram does not describe this map");
  if (layout.copy_factors.size() != hist.pairs.size()) {
    throw ShapeError("layout has " + std::to_string(layout.copy_factors.size()) +
                     " kernel positions, histogram has " + std::to_string(hist.pairs.size()));
  }
  for (std::size_t k = 0; k < hist.pairs.size(); ++k) {
    if (hist.pairs[k] > 0 && layout.copy_factors[k] == 0) {
      throw CapacityError("offset " + std::to_string(k) + " has pairs but no placed copy");
    }
  }
  CycleReport r;
  r.total_pairs = map.size();
  r.naive_fetches = map.size();
  r.map_reads = map.size();
  r.active_copies = layout.placed_copies();
  if (map.empty()) return r;

  // queue[copy] : input index -> count (an input appears once per offset).
  std::vector<std::size_t> first_copy(hist.pairs.size() + 1, 0);
  for (std::size_t k = 0; k < hist.pairs.size(); ++k) first_copy[k + 1] = first_copy[k] + layout.copy_factors[k];
  std::vector<std::set<std::uint32_t>> queue(first_copy.back());
  std::vector<std::size_t> dealt(hist.pairs.size(), 0);
  for (const auto& e : map.sorted().entries) {
    const std::size_t c = first_copy[e.offset] + dealt[e.offset]++ % layout.copy_factors[e.offset];
    queue[c].insert(e.in);
  }

  std::vector<std::uint32_t> prev, batch;
  std::uint64_t remaining = map.size();
  while (remaining > 0) {
    batch.clear();
    for (auto& q : queue) {
      if (q.empty()) continue;
      auto pick = q.end();
      for (std::uint32_t in : prev) {
        auto it = q.find(in);
        if (it != q.end() && (pick == q.end() || *it < *pick)) pick = it;
      }
      if (pick == q.end()) pick = q.begin();
      batch.push_back(*pick);
      q.erase(pick);
      --remaining;
    }
    std::sort(batch.begin(), batch.end());
    batch.erase(std::unique(batch.begin(), batch.end()), batch.end());
    for (std::uint32_t in : batch) {
      if (!std::binary_search(prev.begin(), prev.end(), in)) ++r.feature_fetches;
    }
    prev.swap(batch);
    ++r.cycles;
  }
  r.utilization = static_cast<double>(r.total_pairs) /
                  (static_cast<double>(r.cycles) * static_cast<double>(r.active_copies));
  r.energy = costs.mac_wave * static_cast<double>(r.cycles) +
             costs.feature_fetch * static_cast<double>(r.feature_fetches) +
             costs.map_read * static_cast<double>(r.map_reads);
  return r;
}

struct Conv2dReport {
  std::uint64_t cycles = 0;
  std::uint64_t output_positions = 0;
  std::uint64_t fetches = 0;        // feature elements (vectors x C1)
  std::uint64_t naive_fetches = 0;  // K^2 per output position, x C1
  double reuse_factor = 0.0;        // naive / fetches
};

// Valid (unpadded) Conv2D on an H x W x C1 map with K x K sub-matrices. The
// window slides in raster order; a K-row line buffer keeps every fetched
// input vector until its row leaves the window, so each vector is fetched
// once. All K^2 sub-matrices work on one output position per cycle, with
// the positions split evenly over the smallest copy factor.
inline Conv2dReport conv2d_reuse_cycles(std::size_t h, std::size_t w, std::size_t c1, std::size_t c2,
                                        int k, const CimLayout& layout) {
  if (k < 1) throw InvalidKernel("kernel size must be >= 1");
  const std::size_t kk = static_cast<std::size_t>(k);
  if (layout.kernel_positions != kk * kk) {
    throw ShapeError("layout has " + std::to_string(layout.kernel_positions) + " kernel positions, K^2 = " +
                     std::to_string(kk * kk));
  }
  if (layout.c1 != c1 || layout.c2 != c2) throw ShapeError("layout channels do not match the layer");
  Conv2dReport r;
  if (h < kk || w < kk || c1 == 0) return r;
  const std::size_t oh = h - kk + 1;
  const std::size_t ow = w - kk + 1;
  r.output_positions = static_cast<std::uint64_t>(oh) * ow;
  r.naive_fetches = r.output_positions * kk * kk * c1;

  std::set<std::pair<std::size_t, std::size_t>> resident;
  std::uint64_t vectors = 0;
  for (std::size_t i = 0; i < oh; ++i) {
    while (!resident.empty() && resident.begin()->first < i) resident.erase(resident.begin());
    for (std::size_t j = 0; j < ow; ++j)
      for (std::size_t a = 0; a < kk; ++a)
        for (std::size_t b = 0; b < kk; ++b)
          if (resident.emplace(i + a, j + b).second) ++vectors;
  }
  r.fetches = vectors * c1;
  std::size_t copies = std::numeric_limits<std::size_t>::max();
  for (auto c : layout.copy_factors) copies = std::min(copies, c);
  if (copies == 0) throw CapacityError("a kernel position has no placed copy");
  r.cycles = (r.output_positions + copies - 1) / copies + kk * kk - 1;
  r.reuse_factor = static_cast<double>(r.naive_fetches) / static_cast<double>(r.fetches);
  return r;
}

// offset dx,dy,dz, pairs, copies, normalized workload
inline std::string histogram_csv(const WorkloadHistogram& hist, const std::vector<std::size_t>& copies) {
  std::string out = "dx,dy,dz,pairs,copies,normalized_workload\n";
  const auto norm = hist.normalized(copies);
  char line[160];
  for (std::size_t k = 0; k < hist.pairs.size(); ++k) {
    std::snprintf(line, sizeof line, "%d,%d,%d,%llu,%zu,%.6f\n", hist.offsets[k].dx, hist.offsets[k].dy,
                  hist.offsets[k].dz, static_cast<unsigned long long>(hist.pairs[k]), copies[k], norm[k]);
    out += line;
  }
  return out;
}

}  // namespace voxcim
