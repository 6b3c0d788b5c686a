#pragma once

// Gather-multiply-scatter execution of sparse 3D convolutions from IN-OUT
// maps, plus a dense reference used to check it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "voxcim/core.hpp"
#include "voxcim/mapsearch.hpp"

namespace voxcim {

// K^3 matrices W_d of shape C1 x C2, stored as values[((d * C1) + i) * C2 + o].
class WeightTensor {
 public:
  WeightTensor() = default;
  WeightTensor(int kernel_size, std::size_t c1, std::size_t c2, std::vector<double> values)
      : kernel_size_(kernel_size), c1_(c1), c2_(c2), values_(std::move(values)) {
    if (kernel_size < 1) throw InvalidKernel("kernel size must be >= 1");
    if (c1 == 0 || c2 == 0) throw ShapeError("weight channels must be positive");
    if (values_.size() != offsets() * c1 * c2) {
      throw ShapeError("weight tensor has " + std::to_string(values_.size()) + " values, expected " +
                       std::to_string(offsets() * c1 * c2));
    }
  }

  static WeightTensor zeros(int kernel_size, std::size_t c1, std::size_t c2) {
    const std::size_t k3 = static_cast<std::size_t>(kernel_size) * kernel_size * kernel_size;
    return WeightTensor(kernel_size, c1, c2, std::vector<double>(k3 * c1 * c2, 0.0));
  }

  int kernel_size() const { return kernel_size_; }
  std::size_t c1() const { return c1_; }
  std::size_t c2() const { return c2_; }
  std::size_t offsets() const {
    return static_cast<std::size_t>(kernel_size_) * kernel_size_ * kernel_size_;
  }
  std::span<const double> values() const { return values_; }
  double at(std::size_t d, std::size_t i, std::size_t o) const {
    return values_[(d * c1_ + i) * c2_ + o];
  }
  double& at(std::size_t d, std::size_t i, std::size_t o) { return values_[(d * c1_ + i) * c2_ + o]; }

  friend bool operator==(const WeightTensor&, const WeightTensor&) = default;

 private:
  int kernel_size_ = 1;
  std::size_t c1_ = 1;
  std::size_t c2_ = 1;
  std::vector<double> values_;
};

// Symmetric per-tensor int8: q = round(v / scale), scale = max|v| / 127.
struct QuantizedBuffer {
  std::vector<std::int8_t> values;
  double scale = 1.0;
};

inline QuantizedBuffer quantize_symmetric(std::span<const double> values) {
  double max_abs = 0.0;
  for (double v : values) max_abs = std::max(max_abs, std::abs(v));
  QuantizedBuffer q;
  q.scale = max_abs > 0.0 ? max_abs / 127.0 : 1.0;
  q.values.reserve(values.size());
  for (double v : values) {
    const double r = std::clamp(std::nearbyint(v / q.scale), -127.0, 127.0);
    q.values.push_back(static_cast<std::int8_t>(r));
  }
  return q;
}

namespace detail {

inline void check_conv_inputs(const SparseTensor& input, std::size_t n_outputs, const InOutMap& map,
                              const WeightTensor& weights) {
  if (weights.c1() != input.channels()) {
    throw ShapeError("weights expect " + std::to_string(weights.c1()) + " input channels, tensor has " +
                     std::to_string(input.channels()));
  }
  for (const auto& e : map.entries) {
    if (e.in >= input.size() || e.out >= n_outputs || e.offset >= weights.offsets()) {
      throw MapIndexError("entry (" + std::to_string(e.in) + "," + std::to_string(e.out) + "," +
                          std::to_string(e.offset) + ") out of range");
    }
  }
}

}  // namespace detail

// f'_o = sum over entries (i, o, d) of W_d^T f_i, scattered in (out, offset)
// order so the floating-point result does not depend on entry order.
inline SparseTensor execute_spconv(const SparseTensor& input, std::span<const VoxelCoord> outputs,
                                   const InOutMap& map, const WeightTensor& weights,
                                   std::optional<GridShape> out_shape = std::nullopt) {
  detail::check_conv_inputs(input, outputs.size(), map, weights);
  const std::size_t c1 = weights.c1();
  const std::size_t c2 = weights.c2();
  std::vector<double> out(outputs.size() * c2, 0.0);
  for (const auto& e : map.sorted().entries) {
    const auto f = input.feature(e.in);
    double* dst = &out[static_cast<std::size_t>(e.out) * c2];
    for (std::size_t i = 0; i < c1; ++i) {
      if (f[i] == 0.0) continue;
      for (std::size_t o = 0; o < c2; ++o) dst[o] += weights.at(e.offset, i, o) * f[i];
    }
  }
  return SparseTensor(out_shape.value_or(input.shape()),
                      std::vector<VoxelCoord>(outputs.begin(), outputs.end()), std::move(out), c2);
}

// Integer path: int8 weights and features, int64 accumulation, one output
// scale. Returns the dequantized result.
inline SparseTensor execute_spconv_quantized(const SparseTensor& input,
                                             std::span<const VoxelCoord> outputs,
                                             const InOutMap& map, const WeightTensor& weights,
                                             std::optional<GridShape> out_shape = std::nullopt) {
  detail::check_conv_inputs(input, outputs.size(), map, weights);
  const std::size_t c1 = weights.c1();
  const std::size_t c2 = weights.c2();
  const QuantizedBuffer qw = quantize_symmetric(weights.values());
  const QuantizedBuffer qf = quantize_symmetric(input.features());
  std::vector<std::int64_t> acc(outputs.size() * c2, 0);
  for (const auto& e : map.entries) {
    for (std::size_t i = 0; i < c1; ++i) {
      const std::int64_t f = qf.values[static_cast<std::size_t>(e.in) * c1 + i];
      if (f == 0) continue;
      for (std::size_t o = 0; o < c2; ++o) {
        acc[static_cast<std::size_t>(e.out) * c2 + o] +=
            f * qw.values[(static_cast<std::size_t>(e.offset) * c1 + i) * c2 + o];
      }
    }
  }
  const double scale = qw.scale * qf.scale;
  std::vector<double> out(acc.size());
  for (std::size_t k = 0; k < acc.size(); ++k) out[k] = static_cast<double>(acc[k]) * scale;
  return SparseTensor(out_shape.value_or(input.shape()),
                      std::vector<VoxelCoord>(outputs.begin(), outputs.end()), std::move(out), c2);
}

// ---------------------------------------------------------------------------
// Dense reference

inline constexpr std::uint64_t kDenseOracleLimit = std::uint64_t{1} << 24;

struct DenseVolume {
  GridShape shape;
  std::size_t channels = 1;
  std::vector<double> values;  // [linear(coord) * channels + c]
  std::vector<bool> mask;      // output coordinate set

  double at(const VoxelCoord& c, std::size_t ch) const {
    return values[shape.linear(c) * channels + ch];
  }
  // Values at the masked positions, in canonical order.
  SparseTensor to_sparse() const {
    std::vector<VoxelCoord> coords;
    std::vector<double> feats;
    for (std::uint64_t l = 0; l < shape.volume(); ++l) {
      if (!mask[l]) continue;
      coords.push_back(shape.from_linear(l));
      feats.insert(feats.end(), values.begin() + static_cast<std::ptrdiff_t>(l * channels),
                   values.begin() + static_cast<std::ptrdiff_t>((l + 1) * channels));
    }
    return SparseTensor(shape, std::move(coords), std::move(feats), channels);
  }
};

namespace detail {

inline void check_oracle_scale(const GridShape& g) {
  if (g.volume() > kDenseOracleLimit) {
    throw OracleScaleError("grid " + to_string(g) + " exceeds the dense reference limit of 2^24 voxels");
  }
}

// Direct dense convolution over densified inputs. `Acc` is double or int64;
// `in_value(l, i)` and `weight(d, i, o)` return the operands.
template <typename Acc, typename InValue, typename Weight>
std::vector<Acc> dense_convolve(const SparseTensor& input, const KernelSpec& spec, const GridShape& out_shape,
                                std::size_t c1, std::size_t c2, InValue in_value, Weight weight,
                                std::vector<bool>& reached) {
  const GridShape& in_shape = input.shape();
  const auto offsets = kernel_offsets(spec);
  std::vector<bool> occupied(in_shape.volume(), false);
  std::vector<std::uint32_t> slot(in_shape.volume(), 0);
  for (std::size_t n = 0; n < input.size(); ++n) {
    occupied[in_shape.linear(input.coords()[n])] = true;
    slot[in_shape.linear(input.coords()[n])] = static_cast<std::uint32_t>(n);
  }
  std::vector<Acc> out(out_shape.volume() * c2, Acc{});
  reached.assign(out_shape.volume(), false);
  const auto add = [&](std::uint64_t out_l, std::size_t d, std::uint32_t n) {
    reached[out_l] = true;
    for (std::size_t i = 0; i < c1; ++i) {
      const Acc f = in_value(n, i);
      for (std::size_t o = 0; o < c2; ++o) out[out_l * c2 + o] += weight(d, i, o) * f;
    }
  };

  if (spec.variant == ConvVariant::Transposed) {
    // Scatter: coarse input c feeds fine output c * s + d.
    for (std::uint64_t l = 0; l < in_shape.volume(); ++l) {
      if (!occupied[l]) continue;
      const VoxelCoord c = in_shape.from_linear(l);
      for (std::size_t d = 0; d < offsets.size(); ++d) {
        const VoxelCoord t{c.x * spec.stride + offsets[d].dx, c.y * spec.stride + offsets[d].dy,
                           c.z * spec.stride + offsets[d].dz};
        if (out_shape.contains(t)) add(out_shape.linear(t), d, slot[l]);
      }
    }
    return out;
  }
  // Gather: output q reads input q * s + d.
  for (std::int32_t z = 0; z < out_shape.nz; ++z)
    for (std::int32_t y = 0; y < out_shape.ny; ++y)
      for (std::int32_t x = 0; x < out_shape.nx; ++x) {
        const std::uint64_t out_l = out_shape.linear({x, y, z});
        for (std::size_t d = 0; d < offsets.size(); ++d) {
          const VoxelCoord p{x * spec.stride + offsets[d].dx, y * spec.stride + offsets[d].dy,
                             z * spec.stride + offsets[d].dz};
          if (!in_shape.contains(p)) continue;
          const std::uint64_t in_l = in_shape.linear(p);
          if (occupied[in_l]) add(out_l, d, slot[in_l]);
        }
      }
  return out;
}

// Output grid and mask for a variant. Submanifold keeps the input set;
// generalized keeps windows that saw an input; transposed keeps the targets
// that an input reached.
inline GridShape dense_out_shape(const SparseTensor& input, const KernelSpec& spec,
                                 const GridShape* target_shape) {
  switch (spec.variant) {
    case ConvVariant::Submanifold: return input.shape();
    case ConvVariant::Generalized: return downsampled_shape(input.shape(), spec.stride);
    case ConvVariant::Transposed:
      if (target_shape == nullptr) throw ShapeError("transposed reference needs the target grid");
      return *target_shape;
  }
  return input.shape();
}

inline std::vector<bool> dense_mask(const SparseTensor& input, const KernelSpec& spec,
                                    const GridShape& out_shape, std::span<const VoxelCoord> targets,
                                    const std::vector<bool>& reached) {
  std::vector<bool> mask(out_shape.volume(), false);
  switch (spec.variant) {
    case ConvVariant::Submanifold:
      for (const auto& c : input.coords()) mask[out_shape.linear(c)] = true;
      break;
    case ConvVariant::Generalized:
      mask = reached;
      break;
    case ConvVariant::Transposed:
      for (const auto& t : targets) {
        if (out_shape.contains(t) && reached[out_shape.linear(t)]) mask[out_shape.linear(t)] = true;
      }
      break;
  }
  return mask;
}

}  // namespace detail

// Densify, run a direct K^3 convolution with the variant's stride rule, and
// mask to the variant's output set. Transposed needs the fine targets and grid.
inline DenseVolume dense_oracle(const SparseTensor& input, const KernelSpec& spec,
                                const WeightTensor& weights, std::span<const VoxelCoord> targets = {},
                                const GridShape* target_shape = nullptr) {
  detail::check_oracle_scale(input.shape());
  if (weights.c1() != input.channels()) throw ShapeError("weight C1 does not match input channels");
  if (weights.kernel_size() != spec.size) throw ShapeError("weight K does not match kernel spec");
  DenseVolume v;
  v.shape = detail::dense_out_shape(input, spec, target_shape);
  detail::check_oracle_scale(v.shape);
  v.channels = weights.c2();
  std::vector<bool> reached;
  v.values = detail::dense_convolve<double>(
      input, spec, v.shape, weights.c1(), weights.c2(),
      [&](std::uint32_t n, std::size_t i) { return input.feature(n)[i]; },
      [&](std::size_t d, std::size_t i, std::size_t o) { return weights.at(d, i, o); }, reached);
  v.mask = detail::dense_mask(input, spec, v.shape, targets, reached);
  for (std::uint64_t l = 0; l < v.shape.volume(); ++l) {
    if (v.mask[l]) continue;
    std::fill_n(v.values.begin() + static_cast<std::ptrdiff_t>(l * v.channels), v.channels, 0.0);
  }
  return v;
}

// Same reference on the int8 path: exact integer accumulation, then one scale.
inline DenseVolume dense_oracle_quantized(const SparseTensor& input, const KernelSpec& spec,
                                          const WeightTensor& weights,
                                          std::span<const VoxelCoord> targets = {},
                                          const GridShape* target_shape = nullptr) {
  detail::check_oracle_scale(input.shape());
  if (weights.c1() != input.channels()) throw ShapeError("weight C1 does not match input channels");
  if (weights.kernel_size() != spec.size) throw ShapeError("weight K does not match kernel spec");
  const QuantizedBuffer qw = quantize_symmetric(weights.values());
  const QuantizedBuffer qf = quantize_symmetric(input.features());
  const std::size_t c1 = weights.c1();
  const std::size_t c2 = weights.c2();
  DenseVolume v;
  v.shape = detail::dense_out_shape(input, spec, target_shape);
  detail::check_oracle_scale(v.shape);
  v.channels = c2;
  std::vector<bool> reached;
  const auto acc = detail::dense_convolve<std::int64_t>(
      input, spec, v.shape, c1, c2,
      [&](std::uint32_t n, std::size_t i) { return std::int64_t{qf.values[n * c1 + i]}; },
      [&](std::size_t d, std::size_t i, std::size_t o) {
        return std::int64_t{qw.values[(d * c1 + i) * c2 + o]};
      },
      reached);
  v.mask = detail::dense_mask(input, spec, v.shape, targets, reached);
  v.values.resize(acc.size());
  const double scale = qw.scale * qf.scale;
  for (std::uint64_t l = 0; l < v.shape.volume(); ++l) {
    for (std::size_t o = 0; o < c2; ++o) {
      v.values[l * c2 + o] = v.mask[l] ? static_cast<double>(acc[l * c2 + o]) * scale : 0.0;
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// Layer chains

struct ConvLayer {
  KernelSpec spec;
  WeightTensor weights;
};

struct LayerTrace {
  bool map_reused = false;
  std::size_t n_outputs = 0;
  std::size_t map_entries = 0;
  AccessStats stats;
};

struct ChainResult {
  SparseTensor output;
  std::vector<LayerTrace> layers;
};

struct ChainOptions {
  // Search used for submanifold layers; strided layers always use the oracle.
  SearchMethod subm_method = SearchMethod::Oracle;
  BufferConfig buffers;
  BlockGrid block_grid;
};

// Runs the layers in order. Consecutive submanifold layers with the same K
// reuse the previous layer's map. Each generalized layer records its input
// coordinates; the next transposed layer upsamples back onto the most recent
// unmatched record.
inline ChainResult chain_layers(const std::vector<ConvLayer>& layers, const SparseTensor& input,
                                const ChainOptions& options = {}) {
  struct Saved {
    GridShape shape;
    std::vector<VoxelCoord> coords;
  };
  std::vector<Saved> saved;
  ChainResult result;
  result.output = input;
  std::optional<KernelSpec> prev_spec;
  InOutMap cached;

  for (const auto& layer : layers) {
    const SparseTensor& x = result.output;
    LayerTrace trace;
    std::vector<VoxelCoord> outputs;
    GridShape out_shape = x.shape();
    InOutMap map;
    switch (layer.spec.variant) {
      case ConvVariant::Submanifold: {
        outputs.assign(x.coords().begin(), x.coords().end());
        if (prev_spec && prev_spec->variant == ConvVariant::Submanifold &&
            prev_spec->size == layer.spec.size) {
          map = cached;
          trace.map_reused = true;
        } else {
          auto r = run_search(options.subm_method, x, outputs, layer.spec, options.buffers,
                              options.block_grid);
          map = std::move(r.map);
          trace.stats = r.stats;
        }
        break;
      }
      case ConvVariant::Generalized: {
        saved.push_back({x.shape(), {x.coords().begin(), x.coords().end()}});
        outputs = derive_output_coords(x, layer.spec);
        out_shape = downsampled_shape(x.shape(), layer.spec.stride);
        map = oracle_search(x, outputs, layer.spec);
        trace.stats.n_voxels = x.size();
        break;
      }
      case ConvVariant::Transposed: {
        if (saved.empty()) {
          throw ShapeError("transposed layer has no earlier generalized layer to restore");
        }
        Saved target = std::move(saved.back());
        saved.pop_back();
        outputs = derive_output_coords(x, layer.spec, target.coords, &target.shape);
        out_shape = target.shape;
        map = oracle_search(x, outputs, layer.spec);
        trace.stats.n_voxels = x.size();
        break;
      }
    }
    trace.n_outputs = outputs.size();
    trace.map_entries = map.size();
    SparseTensor y = execute_spconv(x, outputs, map, layer.weights, out_shape);
    cached = std::move(map);
    prev_spec = layer.spec;
    result.layers.push_back(trace);
    result.output = std::move(y);
  }
  return result;
}

}  // namespace voxcim
