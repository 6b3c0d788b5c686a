#include <gtest/gtest.h>

#include <algorithm>
#include <limits>
#include <random>
#include <set>

#include "voxcim/mapsearch.hpp"
#include "voxcim/toolkit/scene.hpp"

using namespace voxcim;

namespace {

SparseTensor random_tensor(std::uint64_t seed, GridShape g, int n) {
  std::mt19937_64 rng(seed);
  std::set<std::tuple<int, int, int>> seen;
  std::vector<VoxelCoord> coords;
  while (static_cast<int>(coords.size()) < n) {
    VoxelCoord c{static_cast<int>(rng() % static_cast<std::uint64_t>(g.nx)),
                 static_cast<int>(rng() % static_cast<std::uint64_t>(g.ny)),
                 static_cast<int>(rng() % static_cast<std::uint64_t>(g.nz))};
    if (seen.insert({c.x, c.y, c.z}).second) coords.push_back(c);
  }
  std::sort(coords.begin(), coords.end());
  return SparseTensor::occupancy(g, coords);
}

// Pairwise enumeration: input i feeds output j through offset p_i - q_j when
// every component lies in [-r, r]. Offset index is (dz, dy, dx) row-major.
InOutMap pairwise_map(const SparseTensor& t, int k) {
  const int r = k / 2;
  InOutMap m;
  const auto c = t.coords();
  for (std::size_t j = 0; j < c.size(); ++j)
    for (std::size_t i = 0; i < c.size(); ++i) {
      const int dx = c[i].x - c[j].x, dy = c[i].y - c[j].y, dz = c[i].z - c[j].z;
      if (std::abs(dx) > r || std::abs(dy) > r || std::abs(dz) > r) continue;
      const auto idx = static_cast<std::uint32_t>(((dz + r) * k + (dy + r)) * k + (dx + r));
      m.entries.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), idx});
    }
  return m;
}

const std::vector<SearchMethod> kStreaming{SearchMethod::WeightMajor, SearchMethod::OutputMajor,
                                           SearchMethod::Doms, SearchMethod::BlockDoms};

}  // namespace

TEST(Oracle, SingleVoxelMapsToItself) {
  const auto t = SparseTensor::occupancy(GridShape(5, 5, 5), {{2, 2, 2}});
  const auto m = oracle_search(t, t.coords(), KernelSpec::subm(3));
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m.entries[0], (MapEntry{0, 0, 13}));
}

TEST(Oracle, TwoAdjacentVoxels) {
  const auto t = SparseTensor::occupancy(GridShape(4, 4, 4), {{0, 0, 0}, {1, 0, 0}});
  const auto m = oracle_search(t, t.coords(), KernelSpec::subm(3));
  // dx = +1 is index 14, dx = -1 is index 12.
  InOutMap expected{{{0, 0, 13}, {1, 1, 13}, {1, 0, 14}, {0, 1, 12}}};
  EXPECT_TRUE(m.same_set(expected));
}

TEST(Oracle, EmptyTensor) {
  const auto t = SparseTensor::occupancy(GridShape(4, 4, 4), {});
  EXPECT_TRUE(oracle_search(t, t.coords(), KernelSpec::subm(3)).empty());
}

TEST(Oracle, MatchesPairwiseEnumeration) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (int k : {1, 3, 5}) {
      const auto t = random_tensor(seed, GridShape(7, 9, 6), 60);
      EXPECT_TRUE(oracle_search(t, t.coords(), KernelSpec::subm(k)).same_set(pairwise_map(t, k)))
          << "seed " << seed << " k " << k;
    }
  }
}

TEST(ExpandSymmetric, AddsMirror) {
  const KernelSpec spec = KernelSpec::subm(3);
  InOutMap half{{{0, 0, 13}, {1, 1, 13}, {0, 1, 14}}};
  const auto full = expand_symmetric(half, spec);
  InOutMap expected{{{0, 0, 13}, {1, 1, 13}, {0, 1, 14}, {1, 0, 12}}};
  EXPECT_TRUE(full.same_set(expected));
}

TEST(ExpandSymmetric, CentersOnlyUnchanged) {
  InOutMap half{{{0, 0, 13}, {1, 1, 13}}};
  EXPECT_TRUE(expand_symmetric(half, KernelSpec::subm(3)).same_set(half));
}

TEST(WeightMajor, SmallSceneLargeBuffer) {
  const auto t = random_tensor(1, GridShape(6, 6, 6), 10);
  const auto r = weight_major_search(t, t.coords(), KernelSpec::subm(3), BufferConfig::uniform(64, 64));
  EXPECT_TRUE(r.map.same_set(oracle_search(t, t.coords(), KernelSpec::subm(3))));
  EXPECT_LE(r.stats.normalized_access(), 27.0);
}

TEST(WeightMajor, K1UnboundedBufferReadsOnce) {
  const auto t = random_tensor(2, GridShape(8, 8, 8), 100);
  const auto r = weight_major_search(t, t.coords(), KernelSpec::subm(1), BufferConfig::uniform(1 << 20, 64));
  EXPECT_DOUBLE_EQ(r.stats.normalized_access(), 1.0);
  EXPECT_EQ(r.map.size(), 100u);
}

TEST(WeightMajor, RejectsStridedKernels) {
  const auto t = random_tensor(2, GridShape(8, 8, 8), 10);
  EXPECT_THROW(weight_major_search(t, t.coords(), KernelSpec::gconv(2, 2), {}), UnsupportedVariant);
}

TEST(OutputMajor, SingleVoxel) {
  const auto t = SparseTensor::occupancy(GridShape(5, 5, 5), {{1, 2, 3}});
  const auto r = output_major_search(t, t.coords(), KernelSpec::subm(3), {});
  ASSERT_EQ(r.map.size(), 1u);
  EXPECT_EQ(r.map.entries[0], (MapEntry{0, 0, 13}));
  EXPECT_DOUBLE_EQ(r.stats.normalized_access(), 1.0);
}

TEST(OutputMajor, TwoDepthsFitReadsOnce) {
  const auto t = random_tensor(3, GridShape(8, 8, 8), 40);
  const auto r = output_major_search(t, t.coords(), KernelSpec::subm(3), BufferConfig::uniform(64, 64));
  EXPECT_DOUBLE_EQ(r.stats.normalized_access(), 1.0);
}

TEST(OutputMajor, DeterioratesWhenDepthsOverflow) {
  SceneSpec s;
  s.shape = GridShape(200, 200, 8);
  s.sparsity = 0.01;
  s.seed = 3;
  const auto t = generate_scene(s);
  const auto r = output_major_search(t, t.coords(), KernelSpec::subm(3), BufferConfig::uniform(64, 64));
  EXPECT_GT(r.stats.normalized_access(), 2.0);
}

TEST(DepthTable, DirectScanExample) {
  const auto t = SparseTensor::occupancy(GridShape(3, 3, 3), {{0, 0, 0}, {1, 0, 0}, {0, 0, 2}});
  const auto table = build_depth_table(t, {1, 1});
  ASSERT_EQ(table.blocks.size(), 1u);
  EXPECT_EQ(table.blocks[0][0], (DepthEntry{0, 2}));
  EXPECT_EQ(table.blocks[0][1], (DepthEntry{2, 0}));
  EXPECT_EQ(table.blocks[0][2], (DepthEntry{2, 1}));
}

TEST(DepthTable, EmptyTensorAllZero) {
  const auto t = SparseTensor::occupancy(GridShape(4, 4, 5), {});
  const auto table = build_depth_table(t, {2, 2});
  EXPECT_EQ(table.size_entries(), 20u);
  for (const auto& b : table.blocks)
    for (const auto& e : b) EXPECT_EQ(e.count, 0u);
}

TEST(DepthTable, BlockStreamsReconstructCanonicalStream) {
  SceneSpec s;
  s.shape = GridShape(64, 64, 8);
  s.sparsity = 0.02;
  s.seed = 9;
  const auto t = generate_scene(s);
  const BlockPartition part(t.shape(), {2, 8});
  const auto streams = partition_stream(t, part);
  const auto table = build_depth_table(t, {2, 8});
  std::vector<std::uint32_t> all;
  for (std::size_t b = 0; b < streams.size(); ++b) {
    EXPECT_TRUE(std::is_sorted(streams[b].begin(), streams[b].end()));
    std::uint64_t total = 0;
    for (std::int32_t z = 0; z < table.depths; ++z) {
      const auto& e = table.blocks[b][static_cast<std::size_t>(z)];
      EXPECT_EQ(e.offset, total);
      for (std::uint64_t k = 0; k < e.count; ++k) EXPECT_EQ(t.coords()[streams[b][e.offset + k]].z, z);
      total += e.count;
    }
    EXPECT_EQ(total, streams[b].size());
    all.insert(all.end(), streams[b].begin(), streams[b].end());
  }
  std::sort(all.begin(), all.end());
  ASSERT_EQ(all.size(), t.size());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
}

TEST(BlockPartition, RejectsOversizedGrid) {
  EXPECT_THROW(BlockPartition(GridShape(4, 4, 4), {5, 1}), InvalidPartition);
  EXPECT_THROW(BlockPartition(GridShape(4, 4, 4), {1, 5}), InvalidPartition);
  EXPECT_THROW(BlockPartition(GridShape(4, 4, 4), {0, 1}), InvalidPartition);
  EXPECT_NO_THROW(BlockPartition(GridShape(4, 4, 4), {4, 4}));
}

TEST(BlockPartition, LocateMatchesBoundaries) {
  const BlockPartition p(GridShape(37, 53, 1), {5, 7});
  for (std::int32_t x = 0; x < 37; ++x) {
    int expected = 0;
    while (x >= (expected + 1) * 37 / 5) ++expected;
    EXPECT_EQ(p.block_x(x), expected) << "x " << x;
    EXPECT_TRUE(p.x_in(expected, x));
  }
  for (std::int32_t y = 0; y < 53; ++y) {
    int expected = 0;
    while (y >= (expected + 1) * 53 / 7) ++expected;
    EXPECT_EQ(p.block_y(y), expected) << "y " << y;
  }
}

TEST(Doms, TableMismatchDetected) {
  const auto t = random_tensor(4, GridShape(8, 8, 4), 30);
  auto table = build_depth_table(t, {1, 1});
  table.blocks[0][1].count += 1;
  EXPECT_THROW(doms_search(t, t.coords(), KernelSpec::subm(3), {}, table), TableMismatch);
  auto wrong_depths = build_depth_table(t, {1, 1});
  wrong_depths.depths = 3;
  EXPECT_THROW(doms_search(t, t.coords(), KernelSpec::subm(3), {}, wrong_depths), TableMismatch);
  EXPECT_THROW(doms_search(t, t.coords(), KernelSpec::subm(3), {}, build_depth_table(t, {2, 2})), TableMismatch);
}

TEST(Doms, RejectsNonSubmanifold) {
  const auto t = random_tensor(4, GridShape(8, 8, 4), 30);
  EXPECT_THROW(doms_search(t, t.coords(), KernelSpec::gconv(2, 2), {}, build_depth_table(t, {1, 1})),
               UnsupportedVariant);
}

TEST(Doms, EmptyMiddleDepth) {
  std::vector<VoxelCoord> c{{1, 1, 0}, {2, 1, 0}, {1, 2, 0}, {1, 1, 2}, {2, 2, 2}, {3, 3, 3}, {3, 2, 4}};
  std::sort(c.begin(), c.end());
  const auto t = SparseTensor::occupancy(GridShape(5, 5, 5), c);
  const auto r = doms_search(t, t.coords(), KernelSpec::subm(3), {}, build_depth_table(t, {1, 1}));
  EXPECT_TRUE(r.map.same_set(pairwise_map(t, 3)));
}

TEST(Doms, HalfMapExpandsToFullMap) {
  const auto t = random_tensor(5, GridShape(12, 12, 6), 200);
  const auto r = doms_search(t, t.coords(), KernelSpec::subm(3), {}, build_depth_table(t, {1, 1}));
  EXPECT_TRUE(expand_symmetric(r.half_map, KernelSpec::subm(3)).same_set(r.map));
  EXPECT_FALSE(r.map.has_duplicates());
}

TEST(BlockDoms, UnitGridMatchesDoms) {
  SceneSpec s;
  s.shape = GridShape(120, 100, 12);
  s.sparsity = 0.01;
  s.seed = 21;
  const auto t = generate_scene(s);
  const BufferConfig buf = BufferConfig::uniform(64, 64);
  const auto a = doms_search(t, t.coords(), KernelSpec::subm(3), buf, build_depth_table(t, {1, 1}));
  const auto b = block_doms_search(t, t.coords(), KernelSpec::subm(3), buf, {1, 1});
  EXPECT_EQ(a.map.entries, b.map.entries);
  EXPECT_EQ(a.stats.offchip_coord_reads, b.stats.offchip_coord_reads);
  EXPECT_EQ(a.stats.table_reads, b.stats.table_reads);
  EXPECT_EQ(a.stats.sorter_invocations, b.stats.sorter_invocations);
  EXPECT_EQ(a.stats.replicated_voxels, 0u);
}

TEST(BlockDoms, TableAndReplicationGrowth) {
  SceneSpec s;
  s.shape = GridShape(200, 160, 10);
  s.sparsity = 0.01;
  s.seed = 3;
  const auto t = generate_scene(s);
  const auto run = [&](BlockGrid bg) { return block_doms_search(t, t.coords(), KernelSpec::subm(3), {}, bg).stats; };
  std::uint64_t prev_table = 0;
  for (BlockGrid bg : {BlockGrid{1, 1}, {1, 2}, {2, 2}, {2, 4}, {4, 4}, {4, 8}, {8, 8}}) {
    const auto st = run(bg);
    EXPECT_GT(st.table_size_entries, prev_table) << to_string(bg);
    prev_table = st.table_size_entries;
  }
  std::uint64_t prev_rep = 0;
  for (int m : {2, 4, 8}) {
    const auto st = run({m, 2});
    EXPECT_GT(st.replicated_voxels, prev_rep) << m;
    prev_rep = st.replicated_voxels;
  }
  EXPECT_EQ(run({1, 8}).replicated_voxels, 0u);
}

TEST(BlockDoms, InvalidPartition) {
  const auto t = random_tensor(4, GridShape(8, 8, 4), 30);
  EXPECT_THROW(block_doms_search(t, t.coords(), KernelSpec::subm(3), {}, {9, 1}), InvalidPartition);
}

TEST(BufferConfig, Validation) {
  EXPECT_THROW((BufferConfig{63, 64, 64, 64}.validate()), InvalidBufferConfig);
  EXPECT_THROW((BufferConfig{1, 64, 64, 64}.validate()), InvalidBufferConfig);
  EXPECT_THROW((BufferConfig{64, 0, 64, 64}.validate()), InvalidBufferConfig);
  EXPECT_NO_THROW((BufferConfig{2, 1, 1, 0}.validate()));
}

// Every streaming method against the pairwise oracle over many buffer and
// partition settings, including tiny FIFOs that force every fallback path.
TEST(Equivalence, AllMethodsAllBuffers) {
  const std::vector<BufferConfig> buffers{BufferConfig::uniform(64, 64), {2, 1, 1, 0}, {4, 3, 2, 1},
                                          {16, 8, 5, 2}, {64, 4096, 4096, 4096}};
  const std::vector<BlockGrid> grids{{1, 1}, {2, 1}, {1, 3}, {3, 4}};
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const GridShape g(6 + static_cast<int>(seed % 5), 7 + static_cast<int>(seed % 3), 3 + static_cast<int>(seed % 4));
    const auto t = random_tensor(seed, g, static_cast<int>(g.volume() / (3 + seed % 4)));
    const auto truth = pairwise_map(t, 3);
    for (const auto& buf : buffers)
      for (auto method : kStreaming)
        for (const auto& bg : grids) {
          if (method != SearchMethod::BlockDoms && !(bg == BlockGrid{1, 1})) continue;
          const auto r = run_search(method, t, t.coords(), KernelSpec::subm(3), buf, bg);
          ASSERT_TRUE(r.map.same_set(truth)) << to_string(method) << " seed " << seed << " bg " << to_string(bg);
          EXPECT_EQ(r.stats.n_voxels, t.size());
        }
  }
}

TEST(Equivalence, ClusteredScenes) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    SceneSpec s;
    s.shape = GridShape(48, 40, 10);
    s.sparsity = 0.03;
    s.distribution = seed % 2 ? SceneDistribution::Clustered : SceneDistribution::Surface;
    s.seed = seed;
    const auto t = generate_scene(s);
    const auto truth = oracle_search(t, t.coords(), KernelSpec::subm(3));
    for (auto method : kStreaming) {
      for (BlockGrid bg : {BlockGrid{1, 1}, BlockGrid{2, 8}, BlockGrid{4, 4}}) {
        const auto r = run_search(method, t, t.coords(), KernelSpec::subm(3), {}, bg);
        EXPECT_TRUE(r.map.same_set(truth)) << to_string(method) << " " << to_string(bg);
      }
    }
  }
}

TEST(Equivalence, WeightMajorLargerKernels) {
  for (int k : {1, 5}) {
    const auto t = random_tensor(static_cast<std::uint64_t>(k), GridShape(9, 9, 9), 120);
    const auto r = weight_major_search(t, t.coords(), KernelSpec::subm(k), BufferConfig::uniform(8, 8));
    EXPECT_TRUE(r.map.same_set(pairwise_map(t, k)));
  }
}

TEST(AccessModel, DomsReadsEveryVoxelAtLeastOnce) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto t = random_tensor(seed, GridShape(30, 30, 6), 400);
    const auto r = run_search(SearchMethod::Doms, t, t.coords(), KernelSpec::subm(3), BufferConfig::uniform(64, 64));
    EXPECT_GE(r.stats.offchip_coord_reads, t.size());
  }
}

TEST(AccessModel, DomsLargeFifoReadsOnce) {
  SceneSpec s;
  s.shape = GridShape(100, 100, 10);
  s.sparsity = 0.01;
  s.seed = 4;
  const auto t = generate_scene(s);
  const auto r = run_search(SearchMethod::Doms, t, t.coords(), KernelSpec::subm(3), {64, 4096, 4096, 64});
  EXPECT_GE(r.stats.normalized_access(), 1.0);
  EXPECT_LE(r.stats.normalized_access(), 1.1);
}

TEST(AccessModel, DomsNonIncreasingInFifoII) {
  SceneSpec s;
  s.shape = GridShape(200, 200, 10);
  s.sparsity = 0.01;
  s.seed = 5;
  const auto t = generate_scene(s);
  double prev = 1e9;
  for (std::size_t fifo : {32u, 64u, 128u, 256u, 512u, 1024u}) {
    const auto r = run_search(SearchMethod::Doms, t, t.coords(), KernelSpec::subm(3), {64, fifo, fifo, 64});
    EXPECT_LE(r.stats.normalized_access(), prev + 1e-12) << "fifo " << fifo;
    prev = r.stats.normalized_access();
  }
}

TEST(AccessModel, WeightMajorWorseThanDoms) {
  SceneSpec s;
  s.shape = GridShape(200, 200, 10);
  s.sparsity = 0.005;
  s.seed = 6;
  const auto t = generate_scene(s);
  const auto wm = run_search(SearchMethod::WeightMajor, t, t.coords(), KernelSpec::subm(3));
  const auto d = run_search(SearchMethod::Doms, t, t.coords(), KernelSpec::subm(3));
  EXPECT_GT(wm.stats.normalized_access(), 10.0 * d.stats.normalized_access());
}

TEST(AccessModel, WeightMajorNonIncreasingInBuffer) {
  SceneSpec s;
  s.shape = GridShape(64, 64, 8);
  s.sparsity = 0.02;
  s.seed = 9;
  const auto t = generate_scene(s);
  std::uint64_t prev = std::numeric_limits<std::uint64_t>::max();
  for (std::size_t len = 2; len <= 8192; len *= 2) {
    const auto r = run_search(SearchMethod::WeightMajor, t, t.coords(), KernelSpec::subm(3),
                              BufferConfig::uniform(len, 64));
    EXPECT_LE(r.stats.offchip_coord_reads, prev) << len;
    prev = r.stats.offchip_coord_reads;
  }
  EXPECT_EQ(prev, t.size());
}

TEST(SearchMethod, ParseRoundTrip) {
  for (auto m : {SearchMethod::Oracle, SearchMethod::WeightMajor, SearchMethod::OutputMajor, SearchMethod::Doms,
                 SearchMethod::BlockDoms}) {
    EXPECT_EQ(parse_search_method(to_string(m)), m);
  }
  EXPECT_THROW(parse_search_method("mars"), ConfigError);
}
