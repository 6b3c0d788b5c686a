#pragma once

// Map-search sweeps: methods x grids x sparsities x seeds x buffers (x block
// grids for block_doms), one CSV row each. Jobs run on a worker pool; rows
// come out in configuration order whatever the completion order.

#include <atomic>
#include <cstdio>
#include <exception>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "voxcim/mapsearch.hpp"
#include "voxcim/toolkit/config.hpp"
#include "voxcim/toolkit/scene.hpp"

namespace voxcim {

inline constexpr int kSweepCsvVersion = 1;

struct SweepConfig {
  std::vector<SearchMethod> methods{SearchMethod::WeightMajor, SearchMethod::OutputMajor, SearchMethod::Doms};
  std::vector<GridShape> grids{GridShape(352, 400, 10)};
  std::vector<double> sparsities{0.005};
  std::vector<std::uint64_t> seeds{7};
  SceneDistribution distribution = SceneDistribution::Uniform;
  int num_clusters = 8;
  double spread = 4.0;
  double noise = 0.5;
  int kernel_size = 3;
  std::vector<BufferConfig> buffers{BufferConfig{}};
  std::vector<BlockGrid> block_grids{BlockGrid{2, 8}};
  unsigned workers = 1;
  bool verify = false;  // compare every map against the oracle
};

inline const std::set<std::string>& sweep_config_keys() {
  static const std::set<std::string> keys{"methods", "grids",  "sparsities", "seeds",       "distribution",
                                          "clusters", "spread", "noise",      "kernel_size", "buffers",
                                          "block_grids", "workers", "verify"};
  return keys;
}

inline SweepConfig sweep_config_from(const Config& c) {
  c.check_known(sweep_config_keys());
  SweepConfig s;
  if (c.has("methods")) {
    s.methods.clear();
    for (const auto& m : c.get_list("methods")) s.methods.push_back(parse_search_method(m));
  }
  if (c.has("grids")) {
    s.grids.clear();
    for (const auto& g : c.get_list("grids")) s.grids.push_back(parse_grid(g));
  }
  if (c.has("sparsities")) {
    s.sparsities.clear();
    for (const auto& v : c.get_list("sparsities")) s.sparsities.push_back(detail::parse_double(v, "sparsities"));
  }
  if (c.has("seeds")) {
    s.seeds.clear();
    for (const auto& v : c.get_list("seeds")) {
      s.seeds.push_back(static_cast<std::uint64_t>(detail::parse_int(v, "seeds")));
    }
  }
  s.distribution = parse_distribution(c.get_string("distribution", "uniform"));
  s.num_clusters = static_cast<int>(c.get_int("clusters", s.num_clusters));
  s.spread = c.get_double("spread", s.spread);
  s.noise = c.get_double("noise", s.noise);
  s.kernel_size = static_cast<int>(c.get_int("kernel_size", s.kernel_size));
  if (c.has("buffers")) {
    s.buffers.clear();
    for (const auto& b : c.get_list("buffers")) s.buffers.push_back(parse_buffer(b));
  }
  if (c.has("block_grids")) {
    s.block_grids.clear();
    for (const auto& b : c.get_list("block_grids")) s.block_grids.push_back(parse_block_grid(b));
  }
  const auto workers = c.get_int("workers", 1);
  if (workers < 1) throw ConfigError("workers must be >= 1");
  s.workers = static_cast<unsigned>(workers);
  s.verify = c.get_bool("verify", false);
  if (s.methods.empty() || s.grids.empty() || s.sparsities.empty() || s.seeds.empty() || s.buffers.empty()) {
    throw ConfigError("sweep needs at least one method, grid, sparsity, seed and buffer");
  }
  for (double p : s.sparsities) {
    if (!(p > 0.0 && p <= 1.0)) throw ConfigError("sparsity must lie in (0, 1]");
  }
  return s;
}

// Built-in configurations. FIFO sizes: 2048 slots hold a full depth of the
// low-resolution grid; 1024 slots are below one depth of the high-resolution
// grid but above one (2,8) block-depth.
inline std::string preset_config_text(const std::string& name) {
  if (name == "paper-low") {
    return "methods = weight_major, output_major, doms\n"
           "grids = 352x400x10\n"
           "sparsities = 0.001, 0.002, 0.005, 0.01\n"
           "seeds = 7\n"
           "buffers = 64:2048:2048:64\n";
  }
  if (name == "paper-high") {
    return "methods = weight_major, output_major, doms, block_doms\n"
           "grids = 1402x1600x41\n"
           "sparsities = 0.001, 0.002, 0.005, 0.01\n"
           "seeds = 7\n"
           "buffers = 64:1024:1024:1024\n"
           "block_grids = 2x8\n";
  }
  if (name == "tradeoff") {
    return "methods = block_doms\n"
           "grids = 1402x1600x41\n"
           "sparsities = 0.005\n"
           "seeds = 7\n"
           "buffers = 64:1024:1024:1024\n"
           "block_grids = 1x1, 1x2, 2x2, 2x4, 2x8, 4x8, 8x8\n";
  }
  throw ConfigError("unknown preset '" + name + "' (paper-low, paper-high, tradeoff)");
}

struct SweepRow {
  SearchMethod method = SearchMethod::Oracle;
  GridShape grid;
  double sparsity = 0.0;
  std::uint64_t seed = 0;
  SceneDistribution distribution = SceneDistribution::Uniform;
  BufferConfig buffer;
  bool has_block_grid = false;
  BlockGrid block_grid;
  std::size_t map_entries = 0;
  AccessStats stats;
};

namespace detail {

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first failure
// (by index) is rethrown after all threads finish.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace detail

inline std::vector<SweepRow> run_sweep(const SweepConfig& cfg) {
  struct SceneKey {
    GridShape grid;
    double sparsity;
    std::uint64_t seed;
  };
  std::vector<SceneKey> scenes;
  for (const auto& g : cfg.grids)
    for (double p : cfg.sparsities)
      for (auto seed : cfg.seeds) scenes.push_back({g, p, seed});

  struct Job {
    std::size_t scene;
    SweepRow row;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < scenes.size(); ++s)
    for (const auto& buf : cfg.buffers)
      for (auto method : cfg.methods) {
        SweepRow row;
        row.method = method;
        row.grid = scenes[s].grid;
        row.sparsity = scenes[s].sparsity;
        row.seed = scenes[s].seed;
        row.distribution = cfg.distribution;
        row.buffer = buf;
        if (method == SearchMethod::BlockDoms) {
          for (const auto& bg : cfg.block_grids) {
            row.has_block_grid = true;
            row.block_grid = bg;
            jobs.push_back({s, row});
          }
        } else {
          row.has_block_grid = method == SearchMethod::Doms;
          jobs.push_back({s, row});
        }
      }

  std::vector<SparseTensor> tensors(scenes.size());
  detail::parallel_for(scenes.size(), cfg.workers, [&](std::size_t i) {
    SceneSpec spec;
    spec.shape = scenes[i].grid;
    spec.sparsity = scenes[i].sparsity;
    spec.seed = scenes[i].seed;
    spec.distribution = cfg.distribution;
    spec.num_clusters = cfg.num_clusters;
    spec.spread = cfg.spread;
    spec.noise = cfg.noise;
    tensors[i] = generate_scene(spec);
  });

  const KernelSpec kernel = KernelSpec::subm(cfg.kernel_size);
  detail::parallel_for(jobs.size(), cfg.workers, [&](std::size_t i) {
    Job& job = jobs[i];
    const SparseTensor& t = tensors[job.scene];
    auto r = run_search(job.row.method, t, t.coords(), kernel, job.row.buffer, job.row.block_grid);
    if (cfg.verify && job.row.method != SearchMethod::Oracle) {
      const InOutMap truth = oracle_search(t, t.coords(), kernel);
      if (!r.map.same_set(truth) || r.map.has_duplicates()) {
        throw InvariantViolation(to_string(job.row.method) + " map differs from the oracle on grid " +
                                 to_string(job.row.grid) + " seed " + std::to_string(job.row.seed));
      }
    }
    job.row.map_entries = r.map.size();
    job.row.stats = r.stats;
  });

  std::vector<SweepRow> rows;
  rows.reserve(jobs.size());
  for (auto& j : jobs) rows.push_back(std::move(j.row));
  return rows;
}

inline std::string sweep_csv_header() {
  return "csv_version,method,grid,sparsity,seed,distribution,sorter_len,fifo_capacity_I,fifo_capacity_II,"
         "backup_capacity,block_grid,n_voxels,offchip_coord_reads,normalized_access,sorter_invocations,"
         "table_reads,table_size,replicated_voxels,replicated_fraction,peak_fifo_occupancy,map_entries\n";
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = sweep_csv_header();
  char line[512];
  for (const auto& r : rows) {
    const std::string bg = r.has_block_grid ? to_string(r.block_grid) : "-";
    std::snprintf(line, sizeof line,
                  "%d,%s,%s,%.6g,%llu,%s,%zu,%zu,%zu,%zu,%s,%llu,%llu,%.6f,%llu,%llu,%llu,%llu,%.6f,%llu,%zu\n",
                  kSweepCsvVersion, to_string(r.method).c_str(), to_string(r.grid).c_str(), r.sparsity,
                  static_cast<unsigned long long>(r.seed), to_string(r.distribution).c_str(), r.buffer.sorter_len,
                  r.buffer.fifo_capacity_I, r.buffer.fifo_capacity_II, r.buffer.backup_capacity, bg.c_str(),
                  static_cast<unsigned long long>(r.stats.n_voxels),
                  static_cast<unsigned long long>(r.stats.offchip_coord_reads), r.stats.normalized_access(),
                  static_cast<unsigned long long>(r.stats.sorter_invocations),
                  static_cast<unsigned long long>(r.stats.table_reads),
                  static_cast<unsigned long long>(r.stats.table_size_entries),
                  static_cast<unsigned long long>(r.stats.replicated_voxels), r.stats.replicated_fraction(),
                  static_cast<unsigned long long>(r.stats.peak_fifo_occupancy), r.map_entries);
    out += line;
  }
  return out;
}

}  // namespace voxcim
