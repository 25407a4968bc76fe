#include "parknet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

namespace parknet {

namespace {

constexpr char kMagic[4] = {'P', 'K', 'N', 'T'};
constexpr uint32_t kVersion = 1;

// The container is defined little-endian; this implementation targets
// little-endian hosts (asserted at load/save time via a runtime probe).
bool host_is_little_endian() {
  const uint32_t probe = 1;
  return *reinterpret_cast<const uint8_t*>(&probe) == 1;
}

template <typename T>
void write_pod(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_arrays(const std::string& path, const std::vector<NamedArray>& arrays) {
  if (!host_is_little_endian()) {
    throw std::runtime_error("checkpoint: big-endian hosts are not supported");
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
  os.write(kMagic, 4);
  write_pod(os, kVersion);
  write_pod(os, static_cast<uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    write_pod(os, static_cast<uint32_t>(a.name.size()));
    os.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
    write_pod(os, static_cast<uint32_t>(a.shape.size()));
    for (int64_t d : a.shape) write_pod(os, d);
    int64_t n = 1;
    for (int64_t d : a.shape) n *= d;
    if (n != static_cast<int64_t>(a.data.size())) {
      throw std::runtime_error("checkpoint: array " + a.name + " data/shape mismatch");
    }
    os.write(reinterpret_cast<const char*>(a.data.data()),
             static_cast<std::streamsize>(a.data.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

std::vector<NamedArray> load_arrays(const std::string& path) {
  if (!host_is_little_endian()) {
    throw std::runtime_error("checkpoint: big-endian hosts are not supported");
  }
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  const uint32_t version = read_pod<uint32_t>(is);
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  const uint32_t count = read_pod<uint32_t>(is);
  std::vector<NamedArray> arrays;
  arrays.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    const uint32_t name_len = read_pod<uint32_t>(is);
    a.name.resize(name_len);
    is.read(a.name.data(), name_len);
    const uint32_t ndim = read_pod<uint32_t>(is);
    a.shape.resize(ndim);
    int64_t n = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      a.shape[d] = read_pod<int64_t>(is);
      if (a.shape[d] <= 0) throw std::runtime_error("checkpoint: invalid extent in " + a.name);
      n *= a.shape[d];
    }
    a.data.resize(static_cast<size_t>(n));
    is.read(reinterpret_cast<char*>(a.data.data()),
            static_cast<std::streamsize>(a.data.size() * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint: truncated array " + a.name);
    arrays.push_back(std::move(a));
  }
  return arrays;
}

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& params) {
  std::vector<NamedArray> arrays;
  arrays.reserve(params.size());
  for (const auto& [name, t] : params) {
    arrays.push_back({name, t.shape(), t.data()});
  }
  save_arrays(path, arrays);
}

void load_checkpoint(const std::string& path,
                     std::vector<std::pair<std::string, Tensor>>& params) {
  const auto arrays = load_arrays(path);
  std::unordered_map<std::string, const NamedArray*> by_name;
  for (const auto& a : arrays) by_name[a.name] = &a;
  for (auto& [name, t] : params) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw std::runtime_error("checkpoint: missing parameter " + name + " in " + path);
    }
    const NamedArray& a = *it->second;
    if (a.shape != t.shape()) {
      throw std::runtime_error("checkpoint: shape mismatch for " + name + ": file has " +
                               shape_to_string(a.shape) + ", model expects " +
                               shape_to_string(t.shape()));
    }
    t.data() = a.data;
  }
}

}  // namespace parknet
