#pragma once

// Hybrid pipeline: the map-search core runs layer searches back to back, and
// the computing core starts a layer once a fraction of its search is done.

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "voxcim/core.hpp"

namespace voxcim {

struct LayerNode {
  std::string id;
  KernelSpec spec;
  double ms_latency = 0.0;
  double compute_latency = 0.0;
  bool map_shared_with_prev = false;
};

struct LayerTiming {
  std::string id;
  double ms_start = 0.0, ms_end = 0.0;
  double compute_start = 0.0, compute_end = 0.0;
};

struct Schedule {
  std::vector<LayerTiming> layers;
  double makespan = 0.0;
  double sequential = 0.0;  // sum of effective ms + compute
};

// A layer may share its predecessor's map only if both are submanifold with
// the same K and stride.
inline bool can_share_map(const LayerNode& prev, const LayerNode& cur) {
  return prev.spec.variant == ConvVariant::Submanifold && cur.spec.variant == ConvVariant::Submanifold &&
         prev.spec.size == cur.spec.size && prev.spec.stride == cur.spec.stride;
}

// Marks every layer that can reuse the previous layer's map.
inline std::vector<LayerNode> mark_shared_maps(std::vector<LayerNode> layers) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].map_shared_with_prev = i > 0 && can_share_map(layers[i - 1], layers[i]);
  }
  return layers;
}

inline double effective_ms(const LayerNode& l) { return l.map_shared_with_prev ? 0.0 : l.ms_latency; }

inline Schedule schedule_hybrid(const std::vector<LayerNode>& layers, double overlap_threshold = 0.25) {
  if (!(overlap_threshold >= 0.0 && overlap_threshold <= 1.0)) {
    throw ConfigError("overlap threshold must lie in [0, 1]");
  }
  Schedule s;
  double ms_free = 0.0, compute_free = 0.0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerNode& l = layers[i];
    if (l.ms_latency < 0.0 || l.compute_latency < 0.0) throw ConfigError("latencies must be >= 0");
    if (l.map_shared_with_prev && (i == 0 || !can_share_map(layers[i - 1], l))) {
      throw ConfigError("layer '" + l.id + "' cannot share the previous layer's map");
    }
    const double ms = effective_ms(l);
    LayerTiming t;
    t.id = l.id;
    t.ms_start = ms_free;
    t.ms_end = t.ms_start + ms;
    t.compute_start = std::max(compute_free, t.ms_start + overlap_threshold * ms);
    // Compute cannot finish before the last pair is known.
    t.compute_end = std::max(t.compute_start + l.compute_latency, t.ms_end);
    ms_free = t.ms_end;
    compute_free = t.compute_end;
    s.layers.push_back(t);
    s.sequential += ms + l.compute_latency;
  }
  s.makespan = compute_free;
  return s;
}

// Sequential baseline: search then compute, one layer at a time.
inline Schedule schedule_sequential(const std::vector<LayerNode>& layers) {
  Schedule s;
  double t = 0.0;
  for (const auto& l : layers) {
    LayerTiming lt;
    lt.id = l.id;
    lt.ms_start = t;
    lt.ms_end = t + effective_ms(l);
    lt.compute_start = lt.ms_end;
    lt.compute_end = lt.compute_start + l.compute_latency;
    t = lt.compute_end;
    s.layers.push_back(lt);
  }
  s.makespan = t;
  s.sequential = t;
  return s;
}

// layer,stage,start,end
inline std::string gantt_csv(const Schedule& s) {
  std::string out = "layer,stage,start,end\n";
  char line[256];
  for (const auto& t : s.layers) {
    std::snprintf(line, sizeof line, "%s,ms,%.6f,%.6f\n", t.id.c_str(), t.ms_start, t.ms_end);
    out += line;
    std::snprintf(line, sizeof line, "%s,compute,%.6f,%.6f\n", t.id.c_str(), t.compute_start, t.compute_end);
    out += line;
  }
  return out;
}

}  // namespace voxcim
