#pragma once

// Point ingestion: text parsing, voxelization and cell-centre
// devoxelization.

#include <array>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "voxcim/core.hpp"

namespace voxcim {

struct PointCloud {
  std::vector<std::array<double, 3>> xyz;
  std::vector<double> features;  // row-major, `channels` per point
  std::size_t channels = 0;

  std::size_t size() const { return xyz.size(); }
};

// One point per line: "x y z [f...]", separated by whitespace and/or commas.
// Blank lines and lines starting with '#' are skipped. Every point must have
// the same number of columns.
inline PointCloud parse_points(const std::string& text) {
  PointCloud pc;
  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(lines, line)) {
    ++line_no;
    for (char& ch : line) {
      if (ch == ',') ch = ' ';
    }
    const auto start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    std::istringstream fields(line);
    std::vector<double> values;
    std::string tok;
    while (fields >> tok) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size()) {
        throw FormatError("line " + std::to_string(line_no) + ": '" + tok + "' is not a number");
      }
      values.push_back(v);
    }
    if (values.size() < 3) {
      throw FormatError("line " + std::to_string(line_no) + ": expected x y z [features...]");
    }
    if (first) {
      pc.channels = values.size() - 3;
      first = false;
    } else if (values.size() - 3 != pc.channels) {
      throw FormatError("line " + std::to_string(line_no) + ": expected " + std::to_string(pc.channels + 3) +
                        " columns, got " + std::to_string(values.size()));
    }
    pc.xyz.push_back({values[0], values[1], values[2]});
    pc.features.insert(pc.features.end(), values.begin() + 3, values.end());
  }
  return pc;
}

// Floor-quantizes points into the grid, drops points outside it and averages
// the features of points sharing a cell. Without point features the result
// is a one-channel occupancy tensor.
inline SparseTensor voxelize(const PointCloud& points, const std::array<double, 3>& origin,
                             double voxel_size, const GridShape& shape) {
  if (!(voxel_size > 0.0)) throw ConfigError("voxel size must be positive");
  if (points.features.size() != points.size() * points.channels) {
    throw ShapeError("point features do not match point count");
  }
  const std::size_t c = points.channels == 0 ? 1 : points.channels;
  struct Cell {
    std::vector<double> sum;
    std::size_t count = 0;
  };
  std::map<VoxelCoord, Cell> cells;
  for (std::size_t i = 0; i < points.size(); ++i) {
    double q[3];
    for (int a = 0; a < 3; ++a) q[a] = std::floor((points.xyz[i][a] - origin[a]) / voxel_size);
    if (q[0] < 0 || q[1] < 0 || q[2] < 0 || q[0] >= shape.nx || q[1] >= shape.ny || q[2] >= shape.nz) continue;
    const VoxelCoord v{static_cast<std::int32_t>(q[0]), static_cast<std::int32_t>(q[1]),
                       static_cast<std::int32_t>(q[2])};
    Cell& cell = cells[v];
    if (cell.sum.empty()) cell.sum.assign(c, 0.0);
    for (std::size_t k = 0; k < c; ++k) {
      cell.sum[k] += points.channels == 0 ? 1.0 : points.features[i * c + k];
    }
    ++cell.count;
  }
  std::vector<VoxelCoord> coords;
  std::vector<double> feats;
  coords.reserve(cells.size());
  feats.reserve(cells.size() * c);
  for (const auto& [v, cell] : cells) {
    coords.push_back(v);
    for (double s : cell.sum) feats.push_back(points.channels == 0 ? 1.0 : s / static_cast<double>(cell.count));
  }
  return SparseTensor(shape, std::move(coords), std::move(feats), c);
}

// Cell centres of every voxel, carrying its features.
inline PointCloud devoxelize(const SparseTensor& t, const std::array<double, 3>& origin, double voxel_size) {
  PointCloud pc;
  pc.channels = t.channels();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const VoxelCoord& v = t.coords()[i];
    pc.xyz.push_back({origin[0] + (v.x + 0.5) * voxel_size, origin[1] + (v.y + 0.5) * voxel_size,
                      origin[2] + (v.z + 0.5) * voxel_size});
  }
  pc.features.assign(t.features().begin(), t.features().end());
  return pc;
}

}  // namespace voxcim
