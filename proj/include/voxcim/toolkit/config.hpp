#pragma once

// Human-readable `key = value` configuration with '#' comments, plus the
// value grammars shared by the CLI:
//   grid         352x400x10
//   block grid   2x8            (m splits x, n splits y)
//   buffer       64:1024:1024:64  (sorter:fifo_I:fifo_II:backup)
//   kernel       subm3, gconv2, tconv2, gconv3/s2  (stride defaults to 1 for
//                subm and to K otherwise)
//   lists        comma separated

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "voxcim/core.hpp"
#include "voxcim/mapsearch/doms.hpp"
#include "voxcim/mapsearch/types.hpp"

namespace voxcim {

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::int64_t parse_int(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ConfigError(what + ": '" + s + "' is not an integer");
  return v;
}

inline double parse_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ConfigError(what + ": '" + s + "' is not a number");
  return v;
}

}  // namespace detail

inline GridShape parse_grid(const std::string& s) {
  const auto parts = detail::split(s, 'x');
  if (parts.size() != 3) throw ConfigError("grid '" + s + "' is not NXxNYxNZ");
  try {
    return GridShape(detail::parse_int(parts[0], "grid"), detail::parse_int(parts[1], "grid"),
                     detail::parse_int(parts[2], "grid"));
  } catch (const InvalidShape& e) {
    throw ConfigError(std::string("grid '") + s + "': " + e.what());
  }
}

inline BlockGrid parse_block_grid(const std::string& s) {
  const auto parts = detail::split(s, 'x');
  if (parts.size() != 2) throw ConfigError("block grid '" + s + "' is not MxN");
  return {static_cast<int>(detail::parse_int(parts[0], "block grid")),
          static_cast<int>(detail::parse_int(parts[1], "block grid"))};
}

inline BufferConfig parse_buffer(const std::string& s) {
  const auto parts = detail::split(s, ':');
  if (parts.size() != 4) throw ConfigError("buffer '" + s + "' is not sorter:fifo_I:fifo_II:backup");
  BufferConfig b;
  b.sorter_len = static_cast<std::size_t>(detail::parse_int(parts[0], "sorter_len"));
  b.fifo_capacity_I = static_cast<std::size_t>(detail::parse_int(parts[1], "fifo_capacity_I"));
  b.fifo_capacity_II = static_cast<std::size_t>(detail::parse_int(parts[2], "fifo_capacity_II"));
  b.backup_capacity = static_cast<std::size_t>(detail::parse_int(parts[3], "backup_capacity"));
  try {
    b.validate();
  } catch (const InvalidBufferConfig& e) {
    throw ConfigError(e.what());
  }
  return b;
}

inline KernelSpec parse_kernel_spec(const std::string& s) {
  std::string body = s;
  std::string stride_part;
  if (const auto slash = s.find("/s"); slash != std::string::npos) {
    body = s.substr(0, slash);
    stride_part = s.substr(slash + 2);
  }
  ConvVariant v;
  std::string k;
  if (body.rfind("subm", 0) == 0) {
    v = ConvVariant::Submanifold;
    k = body.substr(4);
  } else if (body.rfind("gconv", 0) == 0) {
    v = ConvVariant::Generalized;
    k = body.substr(5);
  } else if (body.rfind("tconv", 0) == 0) {
    v = ConvVariant::Transposed;
    k = body.substr(5);
  } else {
    throw ConfigError("kernel '" + s + "' is not subm<K>, gconv<K> or tconv<K>");
  }
  const int size = static_cast<int>(detail::parse_int(k, "kernel size"));
  const int stride = stride_part.empty() ? (v == ConvVariant::Submanifold ? 1 : size)
                                         : static_cast<int>(detail::parse_int(stride_part, "stride"));
  try {
    return KernelSpec(size, stride, v);
  } catch (const InvalidKernel& e) {
    throw ConfigError(std::string("kernel '") + s + "': " + e.what());
  }
}

inline std::string format_buffer(const BufferConfig& b) {
  return std::to_string(b.sorter_len) + ":" + std::to_string(b.fifo_capacity_I) + ":" +
         std::to_string(b.fifo_capacity_II) + ":" + std::to_string(b.backup_capacity);
}

class Config {
 public:
  static Config parse(const std::string& text, const std::string& source = "config") {
    Config c;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(source + ":" + std::to_string(line_no) + ": expected key = value");
      }
      const std::string key = detail::trim(line.substr(0, eq));
      if (key.empty()) throw ConfigError(source + ":" + std::to_string(line_no) + ": empty key");
      c.values_[key] = detail::trim(line.substr(eq + 1));
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), path);
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  // "key=value", as given to --set.
  void apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || detail::trim(assignment.substr(0, eq)).empty()) {
      throw ConfigError("override '" + assignment + "' is not key=value");
    }
    set(detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)));
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing required key '" + key + "'");
    return it->second;
  }
  std::string get_string(const std::string& key, const std::string& def) const {
    return has(key) ? get_string(key) : def;
  }
  std::int64_t get_int(const std::string& key, std::int64_t def) const {
    return has(key) ? detail::parse_int(get_string(key), key) : def;
  }
  double get_double(const std::string& key, double def) const {
    return has(key) ? detail::parse_double(get_string(key), key) : def;
  }
  bool get_bool(const std::string& key, bool def) const {
    if (!has(key)) return def;
    const std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": '" + v + "' is not a boolean");
  }
  std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& def = {}) const {
    return has(key) ? detail::split(get_string(key), ',') : def;
  }

  // Rejects keys outside `known`, which catches typos in config files.
  void check_known(const std::set<std::string>& known) const {
    for (const auto& [k, v] : values_) {
      if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");
    }
  }

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace voxcim
