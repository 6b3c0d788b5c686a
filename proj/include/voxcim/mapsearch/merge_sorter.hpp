#pragma once

// Fixed-length bitonic merge sorter with an adjacent-equal intersection
// detector, the unit that turns "is this neighbour position occupied" into a
// sort. Windows that are not full are padded with max-coordinate sentinels.

#include <cstdint>
#include <limits>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include "voxcim/core.hpp"

namespace voxcim {

enum class SortTag : std::uint8_t { Candidate = 0, Query = 1, Sentinel = 2 };

struct SortItem {
  VoxelCoord coord;
  SortTag tag = SortTag::Sentinel;
  std::uint32_t payload = 0;  // input index for candidates, offset index for queries

  friend bool operator<(const SortItem& a, const SortItem& b) {
    return std::tie(a.coord.z, a.coord.y, a.coord.x, a.tag) <
           std::tie(b.coord.z, b.coord.y, b.coord.x, b.tag);
  }
};

inline SortItem sentinel_item() {
  constexpr auto kMax = std::numeric_limits<std::int32_t>::max();
  return {{kMax, kMax, kMax}, SortTag::Sentinel, 0};
}

// In-place bitonic sort of a power-of-two window.
inline void bitonic_sort(std::span<SortItem> items) {
  const std::size_t n = items.size();
  for (std::size_t k = 2; k <= n; k <<= 1) {
    for (std::size_t j = k >> 1; j > 0; j >>= 1) {
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t partner = i ^ j;
        if (partner <= i) continue;
        const bool ascending = (i & k) == 0;
        if ((items[partner] < items[i]) == ascending) std::swap(items[i], items[partner]);
      }
    }
  }
}

class MergeSorter {
 public:
  explicit MergeSorter(std::size_t length) : length_(length), window_(length) {}

  std::size_t length() const { return length_; }
  std::uint64_t invocations() const { return invocations_; }

  // Matches queries against candidates. Every coordinate appears at most once
  // among candidates and at most once among queries, so a hit is exactly an
  // adjacent (candidate, query) pair after sorting. `emit(input, offset)`.
  template <typename Emit>
  void match(std::span<const SortItem> queries, std::span<const SortItem> candidates, Emit&& emit) {
    if (queries.empty() || candidates.empty()) return;
    // Queries take at most half the window; candidates fill the rest.
    const std::size_t q_chunk = std::min(queries.size(), length_ / 2);
    const std::size_t c_chunk = length_ - q_chunk;
    for (std::size_t q0 = 0; q0 < queries.size(); q0 += q_chunk) {
      const auto qs = queries.subspan(q0, std::min(q_chunk, queries.size() - q0));
      for (std::size_t c0 = 0; c0 < candidates.size(); c0 += c_chunk) {
        run_window(qs, candidates.subspan(c0, std::min(c_chunk, candidates.size() - c0)), emit);
      }
    }
  }

 private:
  template <typename Emit>
  void run_window(std::span<const SortItem> qs, std::span<const SortItem> cs, Emit& emit) {
    std::size_t n = 0;
    for (const auto& q : qs) window_[n++] = q;
    for (const auto& c : cs) window_[n++] = c;
    for (; n < length_; ++n) window_[n] = sentinel_item();
    bitonic_sort(window_);
    ++invocations_;
    for (std::size_t i = 0; i + 1 < length_; ++i) {
      const SortItem& a = window_[i];
      const SortItem& b = window_[i + 1];
      if (a.tag == SortTag::Candidate && b.tag == SortTag::Query && a.coord == b.coord) {
        emit(a.payload, b.payload);
      }
    }
  }

  std::size_t length_;
  std::vector<SortItem> window_;
  std::uint64_t invocations_ = 0;
};

}  // namespace voxcim
