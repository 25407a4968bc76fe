#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "parknet/tensor.hpp"

namespace parknet {

struct NamedArray {
  std::string name;
  std::vector<int64_t> shape;
  std::vector<double> data;
};

// Flat named-array container, little-endian throughout:
//   magic "PKNT" | u32 version (1) | u32 count
//   per entry: u32 name_len | name bytes | u32 ndim | i64 dims[ndim] | f64 data[prod(dims)]
// The format is documented in docs/file-formats.md and is stable across
// versions; readers must reject unknown versions.
void save_arrays(const std::string& path, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> load_arrays(const std::string& path);

// Parameter-map convenience wrappers (by-name lookup, shape-checked load).
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& params);
void load_checkpoint(const std::string& path,
                     std::vector<std::pair<std::string, Tensor>>& params);

}  // namespace parknet
