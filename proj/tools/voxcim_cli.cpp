// voxcim command-line driver.
//
//   voxcim <gen|search|conv|cim|w2b|pipeline|sweep> [--config FILE] [--set key=value]... [--out PATH]
//
// Exit codes: 0 success, 2 configuration or input error, 3 invariant violation.

#include <array>
#include <cstdio>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "voxcim/voxcim.hpp"

namespace {

using namespace voxcim;

constexpr int kExitConfig = 2;
constexpr int kExitInvariant = 3;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
};

Config load_config(const CommonArgs& a) {
  Config c = a.config_path.empty() ? Config{} : Config::load(a.config_path);
  for (const auto& o : a.overrides) c.apply_override(o);
  return c;
}

void emit(const CommonArgs& a, const std::string& text) {
  if (a.out.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
  } else {
    write_file(a.out, text);
  }
}

const std::set<std::string> kSceneKeys{"grid",  "sparsity", "seed",   "distribution", "clusters",
                                       "spread", "noise",   "input",  "points",       "voxel_size",
                                       "origin"};

std::set<std::string> keys_with(std::initializer_list<const char*> extra) {
  std::set<std::string> k = kSceneKeys;
  for (const char* e : extra) k.insert(e);
  return k;
}

// The working tensor: a tensor file, a point file to voxelize, or a
// generated scene.
SparseTensor load_scene(const Config& c, std::vector<std::string>* warnings = nullptr) {
  if (c.has("input")) return load_tensor(c.get_string("input"));
  if (c.has("points")) {
    const auto origin_list = c.get_list("origin", {"0", "0", "0"});
    if (origin_list.size() != 3) throw ConfigError("origin must be x,y,z");
    std::array<double, 3> origin{};
    for (int a = 0; a < 3; ++a) origin[a] = voxcim::detail::parse_double(origin_list[a], "origin");
    return voxelize(parse_points(read_file(c.get_string("points"))), origin, c.get_double("voxel_size", 1.0),
                    parse_grid(c.get_string("grid")));
  }
  SceneSpec s;
  s.shape = parse_grid(c.get_string("grid", "64x64x16"));
  s.sparsity = c.get_double("sparsity", 0.005);
  s.seed = static_cast<std::uint64_t>(c.get_int("seed", 0));
  s.distribution = parse_distribution(c.get_string("distribution", "uniform"));
  s.num_clusters = static_cast<int>(c.get_int("clusters", s.num_clusters));
  s.spread = c.get_double("spread", s.spread);
  s.noise = c.get_double("noise", s.noise);
  return generate_scene(s, warnings);
}

BufferConfig buffer_from(const Config& c) {
  return c.has("buffer") ? parse_buffer(c.get_string("buffer")) : BufferConfig{};
}

CimGeometry geometry_from(const Config& c) {
  CimGeometry g;
  g.tile_rows = static_cast<std::size_t>(c.get_int("tile_rows", static_cast<std::int64_t>(g.tile_rows)));
  g.tile_cols = static_cast<std::size_t>(c.get_int("tile_cols", static_cast<std::int64_t>(g.tile_cols)));
  g.cell_bits = static_cast<std::size_t>(c.get_int("cell_bits", static_cast<std::int64_t>(g.cell_bits)));
  g.weight_bits = static_cast<std::size_t>(c.get_int("weight_bits", static_cast<std::int64_t>(g.weight_bits)));
  g.pe_rows = static_cast<std::size_t>(c.get_int("pe_rows", static_cast<std::int64_t>(g.pe_rows)));
  g.pe_cols = static_cast<std::size_t>(c.get_int("pe_cols", static_cast<std::int64_t>(g.pe_cols)));
  g.num_tiles = static_cast<std::size_t>(c.get_int("num_tiles", static_cast<std::int64_t>(g.num_tiles)));
  g.validate();
  return g;
}

EventCosts costs_from(const Config& c) {
  EventCosts e;
  e.mac_wave = c.get_double("cost_mac_wave", e.mac_wave);
  e.feature_fetch = c.get_double("cost_feature_fetch", e.feature_fetch);
  e.map_read = c.get_double("cost_map_read", e.map_read);
  return e;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

// ---------------------------------------------------------------------------

int cmd_gen(const CommonArgs& a) {
  const Config c = load_config(a);
  c.check_known(kSceneKeys);
  std::vector<std::string> warnings;
  const SparseTensor t = load_scene(c, &warnings);
  print_warnings(warnings);
  if (a.out.empty()) {
    std::cout << to_json(t).dump() << '\n';
  } else {
    save_tensor(a.out, t);
  }
  return 0;
}

int cmd_search(const CommonArgs& a) {
  const Config c = load_config(a);
  c.check_known(keys_with({"method", "kernel_size", "buffer", "block_grid", "verify", "emit_map"}));
  const SparseTensor t = load_scene(c);
  const SearchMethod method = parse_search_method(c.get_string("method", "doms"));
  const KernelSpec spec = KernelSpec::subm(static_cast<int>(c.get_int("kernel_size", 3)));
  const BlockGrid bg = parse_block_grid(c.get_string("block_grid", "2x8"));
  const SearchResult r = run_search(method, t, t.coords(), spec, buffer_from(c), bg);
  if (c.get_bool("verify", false) && !r.map.same_set(oracle_search(t, t.coords(), spec))) {
    throw InvariantViolation(to_string(method) + " map differs from the oracle");
  }
  json out{{"method", to_string(method)},
           {"grid", to_string(t.shape())},
           {"map_entries", r.map.size()},
           {"stats", to_json(r.stats)}};
  if (method == SearchMethod::BlockDoms) out["block_grid"] = to_string(bg);
  if (c.get_bool("emit_map", false)) out["map"] = to_json(r.map);
  emit(a, out.dump(2));
  return 0;
}

int cmd_conv(const CommonArgs& a) {
  const Config c = load_config(a);
  c.check_known(keys_with({"layers", "in_channels", "weight_seed", "feature_seed", "search_method", "buffer",
                           "block_grid", "quantized"}));
  SparseTensor t = load_scene(c);
  const auto in_channels = static_cast<std::size_t>(c.get_int("in_channels", static_cast<std::int64_t>(t.channels())));
  const auto feature_seed = static_cast<std::uint64_t>(c.get_int("feature_seed", 1));
  if (in_channels != t.channels() || c.has("feature_seed")) t = with_random_features(t, in_channels, feature_seed);

  // layers = subm3:16, gconv2:32, tconv2:16   (kernel:out_channels)
  std::vector<ConvLayer> layers;
  std::size_t channels = t.channels();
  auto weight_seed = static_cast<std::uint64_t>(c.get_int("weight_seed", 1));
  for (const auto& item : c.get_list("layers", {"subm3:16", "subm3:16"})) {
    const auto parts = voxcim::detail::split(item, ':');
    if (parts.size() != 2) throw ConfigError("layer '" + item + "' is not kernel:out_channels");
    const KernelSpec spec = parse_kernel_spec(parts[0]);
    const auto out_ch = static_cast<std::size_t>(voxcim::detail::parse_int(parts[1], "out_channels"));
    if (out_ch == 0) throw ConfigError("layer '" + item + "' needs at least one output channel");
    layers.push_back({spec, random_weights(spec.size, channels, out_ch, weight_seed++)});
    channels = out_ch;
  }
  ChainOptions opts;
  opts.subm_method = parse_search_method(c.get_string("search_method", "oracle"));
  opts.buffers = buffer_from(c);
  opts.block_grid = parse_block_grid(c.get_string("block_grid", "2x8"));

  json trace = json::array();
  SparseTensor result;
  if (c.get_bool("quantized", false)) {
    if (layers.size() != 1 || layers[0].spec.variant != ConvVariant::Submanifold) {
      throw ConfigError("quantized mode runs a single submanifold layer");
    }
    const auto r = run_search(opts.subm_method, t, t.coords(), layers[0].spec, opts.buffers, opts.block_grid);
    result = execute_spconv_quantized(t, t.coords(), r.map, layers[0].weights);
    trace.push_back({{"kernel", c.get_list("layers")[0]}, {"map_reused", false}, {"map_entries", r.map.size()}});
  } else {
    const ChainResult r = chain_layers(layers, t, opts);
    for (std::size_t i = 0; i < r.layers.size(); ++i) {
      trace.push_back({{"variant", to_string(layers[i].spec.variant)},
                       {"kernel_size", layers[i].spec.size},
                       {"stride", layers[i].spec.stride},
                       {"map_reused", r.layers[i].map_reused},
                       {"n_outputs", r.layers[i].n_outputs},
                       {"map_entries", r.layers[i].map_entries}});
    }
    result = r.output;
  }
  if (a.out.empty()) {
    std::cout << json{{"layers", trace}, {"output", to_json(result)}}.dump(2) << '\n';
  } else {
    save_tensor(a.out, result);
    std::cerr << json{{"layers", trace}}.dump(2) << '\n';
  }
  return 0;
}

int cmd_cim(const CommonArgs& a) {
  const Config c = load_config(a);
  c.check_known(keys_with({"mode", "scheme", "kernel_size", "c1", "c2", "budget", "tile_rows", "tile_cols",
                           "cell_bits", "weight_bits", "pe_rows", "pe_cols", "num_tiles", "hw", "cost_mac_wave",
                           "cost_feature_fetch", "cost_map_read"}));
  const CimGeometry geom = geometry_from(c);
  const auto c1 = static_cast<std::size_t>(c.get_int("c1", 16));
  const auto c2 = static_cast<std::size_t>(c.get_int("c2", 16));
  const int k = static_cast<int>(c.get_int("kernel_size", 3));
  const std::string scheme = c.get_string("scheme", "submatrix");
  if (scheme != "submatrix" && scheme != "traditional") throw ConfigError("scheme must be submatrix or traditional");
  const std::string mode = c.get_string("mode", "spconv");

  if (mode == "conv2d") {
    const auto hw = voxcim::detail::split(c.get_string("hw", "64x64"), 'x');
    if (hw.size() != 2) throw ConfigError("hw must be HxW");
    const CimLayout layout = scheme == "traditional" ? layout_traditional_conv2d(k, c1, c2, geom)
                                                     : layout_submatrix_conv2d(k, c1, c2, geom);
    const auto r = conv2d_reuse_cycles(static_cast<std::size_t>(voxcim::detail::parse_int(hw[0], "hw")),
                                       static_cast<std::size_t>(voxcim::detail::parse_int(hw[1], "hw")), c1, c2, k,
                                       layout);
    emit(a, json{{"layout", to_json(layout)}, {"conv2d", to_json(r)}}.dump(2));
    return 0;
  }
  if (mode != "spconv") throw ConfigError("mode must be spconv or conv2d");
  if (scheme == "traditional") {
    emit(a, json{{"layout", to_json(layout_traditional(KernelSpec::subm(k), c1, c2, geom))}}.dump(2));
    return 0;
  }
  const SparseTensor t = load_scene(c);
  const KernelSpec spec = KernelSpec::subm(k);
  const InOutMap map = oracle_search(t, t.coords(), spec);
  const WorkloadHistogram hist = workload_histogram(map, spec);
  const auto budget = static_cast<std::size_t>(c.get_int("budget", 0));
  std::vector<std::size_t> copies(hist.pairs.size(), 1);
  if (budget > 0) copies = w2b_optimize(hist, budget);
  const CimLayout layout = layout_submatrix(spec, c1, c2, geom, copies);
  const CycleReport r = spconv_cycles(map, hist, layout, costs_from(c));
  emit(a, json{{"layout", to_json(layout)}, {"cycles", to_json(r)}}.dump(2));
  return 0;
}

int cmd_w2b(const CommonArgs& a) {
  const Config c = load_config(a);
  c.check_known(keys_with({"kernel_size", "budget", "budget_factor", "format", "c1", "c2", "tile_rows", "tile_cols",
                           "cell_bits", "weight_bits", "pe_rows", "pe_cols", "num_tiles"}));
  const SparseTensor t = load_scene(c);
  const KernelSpec spec = KernelSpec::subm(static_cast<int>(c.get_int("kernel_size", 3)));
  const InOutMap map = oracle_search(t, t.coords(), spec);
  const WorkloadHistogram hist = workload_histogram(map, spec);
  const std::size_t budget = c.has("budget")
                                 ? static_cast<std::size_t>(c.get_int("budget", 0))
                                 : static_cast<std::size_t>(c.get_double("budget_factor", 2.0) *
                                                            static_cast<double>(hist.pairs.size()));
  const auto copies = w2b_optimize(hist, budget);
  const std::vector<std::size_t> ones(hist.pairs.size(), 1);
  if (c.get_string("format", "csv") == "csv") {
    emit(a, histogram_csv(hist, copies));
    return 0;
  }
  const CimGeometry geom = geometry_from(c);
  const auto c1 = static_cast<std::size_t>(c.get_int("c1", 16));
  const auto c2 = static_cast<std::size_t>(c.get_int("c2", 16));
  const auto before = spconv_cycles(map, hist, layout_submatrix(spec, c1, c2, geom, ones));
  const auto after = spconv_cycles(map, hist, layout_submatrix(spec, c1, c2, geom, copies));
  emit(a, json{{"budget", budget},
               {"copy_factors", copies},
               {"pairs", hist.pairs},
               {"max_min_ratio_before", hist.normalized_ratio(ones)},
               {"max_min_ratio_after", hist.normalized_ratio(copies)},
               {"cycles_before", before.cycles},
               {"cycles_after", after.cycles},
               {"speedup", after.cycles == 0 ? 1.0
                                             : static_cast<double>(before.cycles) / static_cast<double>(after.cycles)}}
              .dump(2));
  return 0;
}

int cmd_pipeline(const CommonArgs& a) {
  const Config c = load_config(a);
  c.check_known({"layers", "threshold", "format", "auto_share"});
  // layers = subm3:10:20, subm3:10:20, gconv2:4:6   (kernel:ms:compute)
  std::vector<LayerNode> layers;
  for (const auto& item : c.get_list("layers", {"subm3:10:20", "subm3:10:20"})) {
    const auto parts = voxcim::detail::split(item, ':');
    if (parts.size() != 3) throw ConfigError("layer '" + item + "' is not kernel:ms:compute");
    LayerNode n;
    n.id = "L" + std::to_string(layers.size());
    n.spec = parse_kernel_spec(parts[0]);
    n.ms_latency = voxcim::detail::parse_double(parts[1], "ms latency");
    n.compute_latency = voxcim::detail::parse_double(parts[2], "compute latency");
    layers.push_back(n);
  }
  if (c.get_bool("auto_share", true)) layers = mark_shared_maps(std::move(layers));
  const Schedule s = schedule_hybrid(layers, c.get_double("threshold", 0.25));
  if (c.get_string("format", "csv") == "csv") {
    emit(a, gantt_csv(s));
  } else {
    json j = to_json(s);
    j["sequential_baseline"] = schedule_sequential(layers).makespan;
    emit(a, j.dump(2));
  }
  return 0;
}

int cmd_sweep(const CommonArgs& a, const std::string& preset) {
  Config c = preset.empty() ? Config{} : Config::parse(preset_config_text(preset), preset);
  if (!a.config_path.empty()) {
    const Config file = Config::load(a.config_path);
    for (const auto& [k, v] : file.entries()) c.set(k, v);
  }
  for (const auto& o : a.overrides) c.apply_override(o);
  emit(a, sweep_csv(run_sweep(sweep_config_from(c))));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voxcim: map-search, sparse convolution and CIM dataflow simulator"};
  app.require_subcommand(1);
  CommonArgs args;
  std::string preset;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config,-c", args.config_path, "key = value config file");
    sub->add_option("--set,-s", args.overrides, "override, key=value (repeatable)");
    sub->add_option("--out,-o", args.out, "output path (default stdout)");
  };
  auto* gen = app.add_subcommand("gen", "generate or voxelize a scene");
  auto* search = app.add_subcommand("search", "run one map search and report access stats");
  auto* conv = app.add_subcommand("conv", "run a chain of sparse convolution layers");
  auto* cim = app.add_subcommand("cim", "CIM layout and cycle estimate");
  auto* w2b = app.add_subcommand("w2b", "workload histogram and W2B copy factors");
  auto* pipe = app.add_subcommand("pipeline", "hybrid pipeline schedule");
  auto* sweep = app.add_subcommand("sweep", "map-search sweep to CSV");
  for (auto* s : {gen, search, conv, cim, w2b, pipe, sweep}) add_common(s);
  sweep->add_option("--preset,-p", preset, "paper-low | paper-high | tradeoff");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen(args);
    if (search->parsed()) return cmd_search(args);
    if (conv->parsed()) return cmd_conv(args);
    if (cim->parsed()) return cmd_cim(args);
    if (w2b->parsed()) return cmd_w2b(args);
    if (pipe->parsed()) return cmd_pipeline(args);
    if (sweep->parsed()) return cmd_sweep(args, preset);
  } catch (const InvariantViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const voxcim::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInvariant;
  }
  return kExitConfig;
}
