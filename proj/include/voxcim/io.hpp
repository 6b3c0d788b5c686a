#pragma once

// Serialization.
//
// JSON (nlohmann):
//   SparseTensor  {"shape":[nx,ny,nz],"n":N,"channels":C,"coords":[x,y,z,...],"features":[...]}
//   WeightTensor  {"kernel_size":K,"c1":C1,"c2":C2,"dtype":"f64","values":[...]}
//   InOutMap      {"entries":[[in,out,offset],...]}
//   AccessStats, CimLayout, CycleReport, Schedule: flat objects.
//
// Binary, little-endian:
//   SparseTensor  "VXST" u32 version=1, i32 nx ny nz, u64 N, u64 C,
//                 N*3 i32 coords (canonical order), N*C f64 features
//   WeightTensor  "VXWT" u32 version=1, i32 K, u64 C1, u64 C2, u8 dtype (0 = f64),
//                 K^3*C1*C2 f64 values ((offset * C1 + i) * C2 + o)

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "voxcim/cimmodel.hpp"
#include "voxcim/core.hpp"
#include "voxcim/mapsearch/types.hpp"
#include "voxcim/pipeline.hpp"
#include "voxcim/spconv.hpp"

namespace voxcim {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// JSON

inline json to_json(const SparseTensor& t) {
  json coords = json::array();
  for (const auto& c : t.coords()) {
    coords.push_back(c.x);
    coords.push_back(c.y);
    coords.push_back(c.z);
  }
  return {{"shape", {t.shape().nx, t.shape().ny, t.shape().nz}},
          {"n", t.size()},
          {"channels", t.channels()},
          {"coords", std::move(coords)},
          {"features", std::vector<double>(t.features().begin(), t.features().end())}};
}

inline SparseTensor sparse_tensor_from_json(const json& j) {
  try {
    const auto shape = j.at("shape").get<std::vector<std::int64_t>>();
    if (shape.size() != 3) throw FormatError("shape must have three entries");
    const auto flat = j.at("coords").get<std::vector<std::int32_t>>();
    const auto n = j.at("n").get<std::size_t>();
    if (flat.size() != n * 3) throw FormatError("coords length does not match n");
    std::vector<VoxelCoord> coords(n);
    for (std::size_t i = 0; i < n; ++i) coords[i] = {flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]};
    return SparseTensor(GridShape(shape[0], shape[1], shape[2]), std::move(coords),
                        j.at("features").get<std::vector<double>>(), j.at("channels").get<std::size_t>());
  } catch (const json::exception& e) {
    throw FormatError(std::string("sparse tensor JSON: ") + e.what());
  }
}

inline json to_json(const WeightTensor& w) {
  return {{"kernel_size", w.kernel_size()},
          {"c1", w.c1()},
          {"c2", w.c2()},
          {"dtype", "f64"},
          {"values", std::vector<double>(w.values().begin(), w.values().end())}};
}

inline WeightTensor weight_tensor_from_json(const json& j) {
  try {
    if (j.value("dtype", std::string("f64")) != "f64") throw FormatError("unsupported weight dtype");
    return WeightTensor(j.at("kernel_size").get<int>(), j.at("c1").get<std::size_t>(),
                        j.at("c2").get<std::size_t>(), j.at("values").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw FormatError(std::string("weight tensor JSON: ") + e.what());
  }
}

inline json to_json(const InOutMap& m) {
  json entries = json::array();
  for (const auto& e : m.entries) entries.push_back({e.in, e.out, e.offset});
  return {{"entries", std::move(entries)}};
}

inline InOutMap in_out_map_from_json(const json& j) {
  try {
    InOutMap m;
    for (const auto& e : j.at("entries")) {
      m.entries.push_back({e.at(0).get<std::uint32_t>(), e.at(1).get<std::uint32_t>(), e.at(2).get<std::uint32_t>()});
    }
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("map JSON: ") + e.what());
  }
}

inline json to_json(const AccessStats& s) {
  return {{"n_voxels", s.n_voxels},
          {"offchip_coord_reads", s.offchip_coord_reads},
          {"normalized_access", s.normalized_access()},
          {"sorter_invocations", s.sorter_invocations},
          {"table_reads", s.table_reads},
          {"table_size_entries", s.table_size_entries},
          {"replicated_voxels", s.replicated_voxels},
          {"replicated_fraction", s.replicated_fraction()},
          {"peak_fifo_occupancy", s.peak_fifo_occupancy}};
}

inline json to_json(const CimLayout& l) {
  json placements = json::array();
  for (const auto& p : l.assignments) {
    placements.push_back({{"offset", p.offset_idx == kAllOffsets ? json(nullptr) : json(p.offset_idx)},
                          {"copy", p.copy_index},
                          {"part", p.part},
                          {"tile", p.tile},
                          {"pe_row", p.pe_row},
                          {"pe_col", p.pe_col},
                          {"pe_rows", p.pe_row_span},
                          {"pe_cols", p.pe_col_span},
                          {"rows", p.rows},
                          {"cols", p.cols}});
  }
  return {{"scheme", to_string(l.scheme)},
          {"kernel_positions", l.kernel_positions},
          {"c1", l.c1},
          {"c2", l.c2},
          {"logical_rows", l.logical_rows},
          {"logical_cols", l.logical_cols},
          {"folds", l.folds},
          {"copy_factors", l.copy_factors},
          {"occupied_cells", l.occupied_cells},
          {"pes_used", l.pes_used},
          {"tiles_used", l.tiles_used},
          {"assignments", std::move(placements)}};
}

inline json to_json(const CycleReport& r) {
  return {{"cycles", r.cycles},
          {"total_pairs", r.total_pairs},
          {"active_copies", r.active_copies},
          {"utilization", r.utilization},
          {"feature_fetches", r.feature_fetches},
          {"naive_fetches", r.naive_fetches},
          {"map_reads", r.map_reads},
          {"energy", r.energy}};
}

inline json to_json(const Conv2dReport& r) {
  return {{"cycles", r.cycles},
          {"output_positions", r.output_positions},
          {"fetches", r.fetches},
          {"naive_fetches", r.naive_fetches},
          {"reuse_factor", r.reuse_factor}};
}

inline json to_json(const Schedule& s) {
  json layers = json::array();
  for (const auto& t : s.layers) {
    layers.push_back({{"id", t.id},
                      {"ms_start", t.ms_start},
                      {"ms_end", t.ms_end},
                      {"compute_start", t.compute_start},
                      {"compute_end", t.compute_end}});
  }
  return {{"makespan", s.makespan}, {"sequential", s.sequential}, {"layers", std::move(layers)}};
}

// ---------------------------------------------------------------------------
// Binary

namespace detail {

class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_arithmetic_v<T>);
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    bytes_.append(reinterpret_cast<const char*>(b), sizeof(T));
  }
  void magic(const char (&m)[5]) { bytes_.append(m, 4); }
  std::string take() { return std::move(bytes_); }

 private:
  std::string bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw FormatError("binary stream truncated");
    unsigned char b[sizeof(T)];
    std::memcpy(b, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
  void expect_magic(const char (&m)[5]) {
    if (bytes_.compare(pos_, 4, m, 4) != 0) throw FormatError(std::string("missing magic '") + m + "'");
    pos_ += 4;
  }
  void expect_end() const {
    if (pos_ != bytes_.size()) throw FormatError("trailing bytes after payload");
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

inline constexpr std::uint32_t kBinaryVersion = 1;

}  // namespace detail

inline std::string to_binary(const SparseTensor& t) {
  detail::ByteWriter w;
  w.magic("VXST");
  w.put(detail::kBinaryVersion);
  w.put(t.shape().nx);
  w.put(t.shape().ny);
  w.put(t.shape().nz);
  w.put(static_cast<std::uint64_t>(t.size()));
  w.put(static_cast<std::uint64_t>(t.channels()));
  for (const auto& c : t.coords()) {
    w.put(c.x);
    w.put(c.y);
    w.put(c.z);
  }
  for (double f : t.features()) w.put(f);
  return w.take();
}

inline SparseTensor sparse_tensor_from_binary(const std::string& bytes) {
  detail::ByteReader r(bytes);
  r.expect_magic("VXST");
  if (r.get<std::uint32_t>() != detail::kBinaryVersion) throw FormatError("unsupported VXST version");
  const auto nx = r.get<std::int32_t>();
  const auto ny = r.get<std::int32_t>();
  const auto nz = r.get<std::int32_t>();
  const auto n = r.get<std::uint64_t>();
  const auto c = r.get<std::uint64_t>();
  if (c == 0 || r.remaining() != n * (12 + 8 * c)) throw FormatError("VXST payload size mismatch");
  std::vector<VoxelCoord> coords(n);
  for (auto& v : coords) {
    v.x = r.get<std::int32_t>();
    v.y = r.get<std::int32_t>();
    v.z = r.get<std::int32_t>();
  }
  std::vector<double> feats(n * c);
  for (auto& f : feats) f = r.get<double>();
  r.expect_end();
  return SparseTensor(GridShape(nx, ny, nz), std::move(coords), std::move(feats), c);
}

inline std::string to_binary(const WeightTensor& wt) {
  detail::ByteWriter w;
  w.magic("VXWT");
  w.put(detail::kBinaryVersion);
  w.put(static_cast<std::int32_t>(wt.kernel_size()));
  w.put(static_cast<std::uint64_t>(wt.c1()));
  w.put(static_cast<std::uint64_t>(wt.c2()));
  w.put(std::uint8_t{0});
  for (double v : wt.values()) w.put(v);
  return w.take();
}

inline WeightTensor weight_tensor_from_binary(const std::string& bytes) {
  detail::ByteReader r(bytes);
  r.expect_magic("VXWT");
  if (r.get<std::uint32_t>() != detail::kBinaryVersion) throw FormatError("unsupported VXWT version");
  const auto k = r.get<std::int32_t>();
  const auto c1 = r.get<std::uint64_t>();
  const auto c2 = r.get<std::uint64_t>();
  if (r.get<std::uint8_t>() != 0) throw FormatError("unsupported weight dtype");
  if (k < 1) throw FormatError("kernel size must be >= 1");
  const std::uint64_t count = static_cast<std::uint64_t>(k) * k * k * c1 * c2;
  if (r.remaining() != count * 8) throw FormatError("VXWT payload size mismatch");
  std::vector<double> values(count);
  for (auto& v : values) v = r.get<double>();
  r.expect_end();
  return WeightTensor(k, c1, c2, std::move(values));
}

// ---------------------------------------------------------------------------
// Files: ".json" selects JSON, anything else the binary format.

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot write '" + path + "'");
  f << bytes;
}

inline bool is_json_path(const std::string& path) {
  return path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
}

inline void save_tensor(const std::string& path, const SparseTensor& t) {
  write_file(path, is_json_path(path) ? to_json(t).dump() : to_binary(t));
}

inline SparseTensor load_tensor(const std::string& path) {
  const std::string bytes = read_file(path);
  if (!is_json_path(path)) return sparse_tensor_from_binary(bytes);
  try {
    return sparse_tensor_from_json(json::parse(bytes));
  } catch (const json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline void save_weights(const std::string& path, const WeightTensor& w) {
  write_file(path, is_json_path(path) ? to_json(w).dump() : to_binary(w));
}

inline WeightTensor load_weights(const std::string& path) {
  const std::string bytes = read_file(path);
  if (!is_json_path(path)) return weight_tensor_from_binary(bytes);
  try {
    return weight_tensor_from_json(json::parse(bytes));
  } catch (const json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace voxcim
