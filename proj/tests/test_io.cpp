#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "voxcim/io.hpp"
#include "voxcim/toolkit.hpp"

using namespace voxcim;

namespace {

SparseTensor sample_tensor() {
  SceneSpec s;
  s.shape = GridShape(17, 9, 5);
  s.sparsity = 0.2;
  s.seed = 4;
  return with_random_features(generate_scene(s), 3, 11);
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("voxcim_test_" + name)).string();
}

}  // namespace

TEST(Json, TensorRoundTrip) {
  const auto t = sample_tensor();
  EXPECT_EQ(sparse_tensor_from_json(json::parse(to_json(t).dump())), t);
}

TEST(Json, WeightRoundTrip) {
  const auto w = random_weights(3, 2, 4, 1);
  EXPECT_EQ(weight_tensor_from_json(json::parse(to_json(w).dump())), w);
}

TEST(Json, MapRoundTrip) {
  const auto t = sample_tensor();
  const auto m = oracle_search(t, t.coords(), KernelSpec::subm(3));
  EXPECT_EQ(in_out_map_from_json(to_json(m)).entries, m.entries);
}

TEST(Json, MalformedTensor) {
  EXPECT_THROW(sparse_tensor_from_json(json::parse(R"({"shape":[2,2]})")), FormatError);
  EXPECT_THROW(sparse_tensor_from_json(json::parse(R"({"shape":[2,2,2],"n":2,"channels":1,"coords":[0,0,0],"features":[1]})")),
               FormatError);
}

TEST(Json, ReportsHaveFields) {
  const auto l = layout_submatrix(KernelSpec::subm(3), 8, 8);
  const auto j = to_json(l);
  EXPECT_EQ(j["assignments"].size(), 27u);
  EXPECT_EQ(j["scheme"], "submatrix");
  AccessStats s;
  s.n_voxels = 10;
  s.offchip_coord_reads = 15;
  EXPECT_DOUBLE_EQ(to_json(s)["normalized_access"].get<double>(), 1.5);
}

TEST(Binary, TensorRoundTripAndLayout) {
  const auto t = sample_tensor();
  const std::string bytes = to_binary(t);
  EXPECT_EQ(bytes.substr(0, 4), "VXST");
  EXPECT_EQ(bytes.size(), 4 + 4 + 12 + 16 + t.size() * (12 + 24));
  // Little-endian nx at byte 8.
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 17);
  EXPECT_EQ(static_cast<unsigned char>(bytes[9]), 0);
  EXPECT_EQ(sparse_tensor_from_binary(bytes), t);
}

TEST(Binary, WeightRoundTrip) {
  const auto w = random_weights(2, 3, 5, 7);
  const std::string bytes = to_binary(w);
  EXPECT_EQ(bytes.substr(0, 4), "VXWT");
  EXPECT_EQ(bytes.size(), 4 + 4 + 4 + 16 + 1 + 8 * 8 * 3 * 5);
  EXPECT_EQ(weight_tensor_from_binary(bytes), w);
}

TEST(Binary, CorruptInputs) {
  const std::string bytes = to_binary(sample_tensor());
  EXPECT_THROW(sparse_tensor_from_binary(bytes.substr(0, bytes.size() - 1)), FormatError);
  EXPECT_THROW(sparse_tensor_from_binary(bytes + "x"), FormatError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'Q';
  EXPECT_THROW(sparse_tensor_from_binary(bad_magic), FormatError);
  std::string bad_version = bytes;
  bad_version[4] = 2;
  EXPECT_THROW(sparse_tensor_from_binary(bad_version), FormatError);
  EXPECT_THROW(weight_tensor_from_binary(bytes), FormatError);
}

TEST(Files, SaveLoadBothFormats) {
  const auto t = sample_tensor();
  const auto w = random_weights(3, 3, 2, 2);
  for (const char* ext : {".json", ".bin"}) {
    const std::string tp = temp_path(std::string("t") + ext);
    const std::string wp = temp_path(std::string("w") + ext);
    save_tensor(tp, t);
    save_weights(wp, w);
    EXPECT_EQ(load_tensor(tp), t);
    EXPECT_EQ(load_weights(wp), w);
    std::remove(tp.c_str());
    std::remove(wp.c_str());
  }
  EXPECT_THROW(load_tensor(temp_path("does_not_exist.bin")), FormatError);
}
