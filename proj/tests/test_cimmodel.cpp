#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <limits>
#include <random>

#include "voxcim/cimmodel.hpp"
#include "voxcim/mapsearch.hpp"
#include "voxcim/toolkit/scene.hpp"

using namespace voxcim;

namespace {

WorkloadHistogram histogram_of(std::vector<std::uint64_t> pairs) {
  WorkloadHistogram h;
  h.pairs = std::move(pairs);
  h.offsets.resize(h.pairs.size());
  return h;
}

// Exhaustive search over copy vectors with sum == budget (zero-work offsets
// get 0 copies), minimizing the maximum normalized workload. Branches are cut
// once the partial maximum cannot beat the best found.
double brute_force_best_max(const std::vector<std::uint64_t>& pairs, std::size_t budget) {
  std::vector<std::uint64_t> work;
  for (auto p : pairs)
    if (p > 0) work.push_back(p);
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::size_t, double)> go = [&](std::size_t k, std::size_t left, double cur) {
    if (cur >= best) return;
    if (k == work.size()) {
      if (left == 0) best = cur;
      return;
    }
    const std::size_t rest = work.size() - k - 1;
    for (std::size_t c = 1; c + rest <= left; ++c) {
      go(k + 1, left - c, std::max(cur, static_cast<double>(work[k]) / static_cast<double>(c)));
    }
  };
  go(0, budget, 0.0);
  return best;
}

// Map with `pairs[k]` entries at offset k; inputs are distinct per offset.
InOutMap synthetic_map(const std::vector<std::uint64_t>& pairs) {
  InOutMap m;
  for (std::size_t k = 0; k < pairs.size(); ++k)
    for (std::uint64_t i = 0; i < pairs[k]; ++i)
      m.entries.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(k)});
  return m;
}

}  // namespace

TEST(Layout, TraditionalFitsOneTile) {
  const auto l = layout_traditional(KernelSpec::subm(3), 16, 32);
  EXPECT_EQ(l.logical_rows, 432u);
  EXPECT_EQ(l.logical_cols, 256u);
  EXPECT_EQ(l.folds, 1u);
  EXPECT_EQ(l.tiles_used, 1u);
  EXPECT_EQ(l.occupied_cells, 432u * 256u);
}

TEST(Layout, TraditionalFoldsTallColumns) {
  const auto l = layout_traditional(KernelSpec::subm(3), 64, 16);
  EXPECT_EQ(l.logical_rows, 1728u);
  EXPECT_EQ(l.folds, 2u);
  EXPECT_EQ(l.occupied_cells, 1728u * 128u);
}

TEST(Layout, TraditionalCapacityError) {
  CimGeometry g;
  g.num_tiles = 1;
  try {
    layout_traditional(KernelSpec::subm(3), 128, 128, g);
    FAIL();
  } catch (const CapacityError& e) {
    EXPECT_NE(std::string(e.what()).find("deficit"), std::string::npos);
  }
}

TEST(Layout, K1FootprintEqualsOneSubmatrix) {
  const auto t = layout_traditional(KernelSpec::subm(1), 16, 32);
  const auto s = layout_submatrix(KernelSpec::subm(1), 16, 32);
  EXPECT_EQ(t.occupied_cells, s.occupied_cells);
  EXPECT_EQ(t.logical_rows, s.logical_rows);
  EXPECT_EQ(t.logical_cols, s.logical_cols);
}

TEST(Layout, Submatrix27Pieces) {
  const auto l = layout_submatrix(KernelSpec::subm(3), 16, 16);
  ASSERT_EQ(l.assignments.size(), 27u);
  for (const auto& p : l.assignments) {
    EXPECT_EQ(p.rows, 16u);
    EXPECT_EQ(p.cols, 128u);
  }
  EXPECT_EQ(l.pes_used, 27u);
  EXPECT_EQ(l.tiles_used, 1u);
}

TEST(Layout, Conv2dNineSubmatrices) {
  EXPECT_EQ(layout_submatrix_conv2d(3, 16, 16).assignments.size(), 9u);
}

TEST(Layout, DoubledCenterGives28) {
  std::vector<std::size_t> copies(27, 1);
  copies[13] = 2;
  const auto l = layout_submatrix(KernelSpec::subm(3), 16, 16, {}, copies);
  EXPECT_EQ(l.assignments.size(), 28u);
  EXPECT_EQ(l.placed_copies(), 28u);
}

TEST(Layout, CapacityConservation) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t c1 = 1 + rng() % 300, c2 = 1 + rng() % 200;
    std::vector<std::size_t> copies(27);
    for (auto& c : copies) c = 1 + rng() % 3;
    CimGeometry g;
    g.num_tiles = 64;
    const auto l = layout_submatrix(KernelSpec::subm(3), c1, c2, g, copies);
    std::uint64_t sum = 0;
    for (const auto& p : l.assignments) sum += static_cast<std::uint64_t>(p.rows) * p.cols;
    EXPECT_EQ(l.occupied_cells, sum);
    std::size_t total_copies = 0;
    for (auto c : copies) total_copies += c;
    EXPECT_EQ(sum, static_cast<std::uint64_t>(total_copies) * c1 * c2 * g.cells_per_weight());
    const auto t = layout_traditional(KernelSpec::subm(3), c1, c2, g);
    EXPECT_EQ(t.occupied_cells, 27ull * c1 * c2 * g.cells_per_weight());
  }
}

TEST(Layout, NoPeOverlap) {
  std::vector<std::size_t> copies(27, 2);
  const auto l = layout_submatrix(KernelSpec::subm(3), 200, 40, {}, copies);
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> used;
  for (const auto& p : l.assignments)
    for (std::size_t r = 0; r < p.pe_row_span; ++r)
      for (std::size_t c = 0; c < p.pe_col_span; ++c)
        EXPECT_TRUE(used.insert({p.tile, p.pe_row + r, p.pe_col + c}).second);
  EXPECT_EQ(used.size(), l.pes_used);
}

TEST(Layout, SubmatrixCapacityError) {
  CimGeometry g;
  g.num_tiles = 1;
  EXPECT_THROW(layout_submatrix(KernelSpec::subm(3), 256, 64, g), CapacityError);
}

TEST(Geometry, Validation) {
  CimGeometry g;
  g.pe_rows = 100;
  EXPECT_THROW(g.validate(), ConfigError);
  g = {};
  g.num_tiles = 0;
  EXPECT_THROW(g.validate(), ConfigError);
}

TEST(Histogram, EmptyMapAllZeros) {
  const auto h = workload_histogram({}, KernelSpec::subm(3));
  EXPECT_EQ(h.pairs, std::vector<std::uint64_t>(27, 0));
  EXPECT_EQ(h.max_min_ratio(), 0.0);
}

TEST(Histogram, DenseInteriorNearlyUniform) {
  std::vector<VoxelCoord> all;
  for (int z = 0; z < 12; ++z)
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 12; ++x) all.push_back({x, y, z});
  const auto t = SparseTensor::occupancy(GridShape(12, 12, 12), all);
  const auto h = workload_histogram(oracle_search(t, t.coords(), KernelSpec::subm(3)), KernelSpec::subm(3));
  EXPECT_LE(h.max_min_ratio(), 1728.0 / 1000.0 + 1e-12);
}

TEST(Histogram, SurfaceSceneSkewed) {
  SceneSpec s;
  s.shape = GridShape(96, 96, 32);
  s.sparsity = 0.01;
  s.distribution = SceneDistribution::Surface;
  s.seed = 1;
  const auto t = generate_scene(s);
  const auto h = workload_histogram(oracle_search(t, t.coords(), KernelSpec::subm(3)), KernelSpec::subm(3));
  EXPECT_GT(h.max_min_ratio(), 10.0);
  EXPECT_EQ(h.pairs[13], t.size());
}

TEST(W2B, SpecExample) {
  const auto h = histogram_of({40, 1, 1});
  const auto copies = w2b_optimize(h, 6);
  EXPECT_EQ(copies, (std::vector<std::size_t>{4, 1, 1}));
  EXPECT_DOUBLE_EQ(h.max_normalized(copies), 10.0);
  EXPECT_DOUBLE_EQ(brute_force_best_max(h.pairs, 6), 10.0);
}

TEST(W2B, UniformBudgetEqualsOffsets) {
  const auto h = histogram_of(std::vector<std::uint64_t>(27, 5));
  EXPECT_EQ(w2b_optimize(h, 27), std::vector<std::size_t>(27, 1));
}

TEST(W2B, SkewedDoubleBudgetHalvesMax) {
  std::vector<std::uint64_t> pairs(27, 1);
  pairs[13] = 40;
  const auto h = histogram_of(pairs);
  const auto copies = w2b_optimize(h, 54);
  EXPECT_LE(h.max_normalized(copies) * 2.0, h.max_normalized(std::vector<std::size_t>(27, 1)));
}

TEST(W2B, BudgetError) {
  EXPECT_THROW(w2b_optimize(histogram_of({3, 0, 2}), 1), BudgetError);
  EXPECT_EQ(w2b_optimize(histogram_of({3, 0, 2}), 2), (std::vector<std::size_t>{1, 0, 1}));
}

TEST(W2B, MatchesBruteForce) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng() % 6;
    std::vector<std::uint64_t> pairs(n);
    for (auto& p : pairs) p = rng() % 4 == 0 ? 0 : 1 + rng() % 200;
    const auto h = histogram_of(pairs);
    const std::size_t nz = h.nonzero();
    if (nz == 0) continue;
    const std::size_t budget = nz + rng() % (20 - std::min<std::size_t>(nz, 19));
    const auto copies = w2b_optimize(h, budget);
    std::size_t sum = 0;
    for (std::size_t k = 0; k < n; ++k) {
      sum += copies[k];
      EXPECT_EQ(copies[k] == 0, pairs[k] == 0);
    }
    EXPECT_EQ(sum, budget);
    EXPECT_DOUBLE_EQ(h.max_normalized(copies), brute_force_best_max(pairs, budget));
  }
}

TEST(W2B, NeverWorseAndMoreUniform) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::uint64_t> pairs(27);
    for (auto& p : pairs) p = 1 + rng() % 50;
    pairs[13] = 500 + rng() % 500;
    const auto h = histogram_of(pairs);
    const std::vector<std::size_t> ones(27, 1);
    const auto copies = w2b_optimize(h, 54);
    EXPECT_LE(h.max_normalized(copies), h.max_normalized(ones));
    EXPECT_LT(h.normalized_ratio(copies), h.normalized_ratio(ones));
  }
}

TEST(Cycles, BalancedUtilizationOne) {
  const std::vector<std::uint64_t> pairs(27, 4);
  const auto map = synthetic_map(pairs);
  const auto h = workload_histogram(map, KernelSpec::subm(3));
  const auto r = spconv_cycles(map, h, layout_submatrix(KernelSpec::subm(3), 8, 8));
  EXPECT_EQ(r.cycles, 4u);
  EXPECT_DOUBLE_EQ(r.utilization, 1.0);
}

TEST(Cycles, SinglePairOneCycle) {
  const InOutMap map{{{0, 0, 13}}};
  const auto h = workload_histogram(map, KernelSpec::subm(3));
  std::vector<std::size_t> copies(27, 0);
  copies[13] = 1;
  const auto r = spconv_cycles(map, h, layout_submatrix(KernelSpec::subm(3), 8, 8, {}, copies));
  EXPECT_EQ(r.cycles, 1u);
  EXPECT_EQ(r.feature_fetches, 1u);
}

TEST(Cycles, EqualsMaxCeilLoad) {
  std::mt19937 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::uint64_t> pairs(27);
    for (auto& p : pairs) p = rng() % 30;
    pairs[13] = 30 + rng() % 60;
    const auto map = synthetic_map(pairs);
    const auto h = workload_histogram(map, KernelSpec::subm(3));
    std::vector<std::size_t> copies(27);
    for (std::size_t k = 0; k < 27; ++k) copies[k] = 1 + rng() % 3;
    const auto r = spconv_cycles(map, h, layout_submatrix(KernelSpec::subm(3), 8, 8, {}, copies));
    std::uint64_t expected = 0;
    for (std::size_t k = 0; k < 27; ++k) expected = std::max<std::uint64_t>(expected, (pairs[k] + copies[k] - 1) / copies[k]);
    EXPECT_EQ(r.cycles, expected);
    EXPECT_LE(r.feature_fetches, r.naive_fetches);
  }
}

TEST(Cycles, BalancedNeverSlower) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    SceneSpec s;
    s.shape = GridShape(64, 64, 24);
    s.sparsity = 0.01;
    s.distribution = seed % 2 ? SceneDistribution::Clustered : SceneDistribution::Surface;
    s.seed = seed;
    const auto t = generate_scene(s);
    const auto map = oracle_search(t, t.coords(), KernelSpec::subm(3));
    const auto h = workload_histogram(map, KernelSpec::subm(3));
    const std::vector<std::size_t> ones(27, 1);
    const auto before = spconv_cycles(map, h, layout_submatrix(KernelSpec::subm(3), 16, 16, {}, ones));
    const auto after =
        spconv_cycles(map, h, layout_submatrix(KernelSpec::subm(3), 16, 16, {}, w2b_optimize(h, 54)));
    EXPECT_LE(after.cycles, before.cycles);
  }
}

TEST(Cycles, MissingCopyIsCapacityError) {
  const InOutMap map{{{0, 0, 13}, {0, 0, 12}}};
  const auto h = workload_histogram(map, KernelSpec::subm(3));
  std::vector<std::size_t> copies(27, 0);
  copies[13] = 1;
  EXPECT_THROW(spconv_cycles(map, h, layout_submatrix(KernelSpec::subm(3), 8, 8, {}, copies)), CapacityError);
}

TEST(Conv2d, K1NoReuse) {
  const auto l = layout_submatrix_conv2d(1, 4, 4);
  const auto r = conv2d_reuse_cycles(8, 8, 4, 4, 1, l);
  EXPECT_EQ(r.fetches, 8u * 8u * 4u);
  EXPECT_EQ(r.fetches, r.naive_fetches);
}

TEST(Conv2d, SingleWindow) {
  const auto r = conv2d_reuse_cycles(3, 3, 5, 2, 3, layout_submatrix_conv2d(3, 5, 2));
  EXPECT_EQ(r.fetches, 9u * 5u);
  EXPECT_EQ(r.output_positions, 1u);
}

TEST(Conv2d, ReuseApproachesNine) {
  const auto r8 = conv2d_reuse_cycles(8, 8, 1, 1, 3, layout_submatrix_conv2d(3, 1, 1));
  EXPECT_EQ(r8.naive_fetches, 36u * 9u);
  EXPECT_EQ(r8.fetches, 64u);
  const auto r64 = conv2d_reuse_cycles(64, 64, 1, 1, 3, layout_submatrix_conv2d(3, 1, 1));
  EXPECT_GT(r64.reuse_factor, r8.reuse_factor);
  EXPECT_LT(r64.reuse_factor, 9.0);
  EXPECT_GT(r64.reuse_factor, 8.0);
}

TEST(Conv2d, FetchesBelowNaiveUnlessK1) {
  for (int k = 1; k <= 5; ++k) {
    const auto r = conv2d_reuse_cycles(16, 12, 2, 2, k, layout_submatrix_conv2d(k, 2, 2));
    if (k == 1) {
      EXPECT_EQ(r.fetches, r.naive_fetches);
    } else {
      EXPECT_LT(r.fetches, r.naive_fetches);
    }
  }
}

TEST(Conv2d, CyclesUseMinCopies) {
  std::vector<std::size_t> copies(9, 2);
  const auto r = conv2d_reuse_cycles(10, 10, 2, 2, 3, layout_submatrix_conv2d(3, 2, 2, {}, copies));
  EXPECT_EQ(r.cycles, 64u / 2u + 8u);
}

TEST(Conv2d, LayoutMismatch) {
  EXPECT_THROW(conv2d_reuse_cycles(8, 8, 2, 2, 3, layout_submatrix(KernelSpec::subm(3), 2, 2)), ShapeError);
  EXPECT_THROW(conv2d_reuse_cycles(8, 8, 4, 2, 3, layout_submatrix_conv2d(3, 2, 2)), ShapeError);
}

TEST(HistogramCsv, Header) {
  const auto h = histogram_of({4, 2});
  const auto csv = histogram_csv(h, {2, 1});
  EXPECT_EQ(csv, "dx,dy,dz,pairs,copies,normalized_workload\n0,0,0,4,2,2.000000\n0,0,0,2,1,2.000000\n");
}
