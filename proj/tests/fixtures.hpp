#pragma once

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <unistd.h>

#include "cpfos/simbas.hpp"

namespace testutil {

using namespace cpfos;
namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("cpfos_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

template <typename T>
void put(std::string& buf, std::size_t off, T value, bool big_endian = false) {
  unsigned char raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  if (big_endian) std::reverse(raw, raw + sizeof(T));
  std::memcpy(buf.data() + off, raw, sizeof(T));
}

// NIfTI-1 single-file image: 348-byte header, 4 pad bytes, data at offset 352.
struct NiftiFixture {
  std::int16_t dims[3] = {2, 2, 2};
  std::int16_t ndim = 3;
  std::int16_t datatype = 16;
  std::int16_t bitpix = 32;
  float slope = 0, inter = 0;
  std::int32_t sizeof_hdr = 348;
  const char* magic = "n+1";
  bool big_endian = false;

  std::string bytes(const std::vector<double>& values) const {
    std::string b(352, '\0');
    put(b, 0, sizeof_hdr, big_endian);
    put(b, 40, ndim, big_endian);
    for (int k = 0; k < 3; ++k) put(b, 42 + 2 * k, dims[k], big_endian);
    for (int k = 3; k < 7; ++k) put(b, 42 + 2 * k, std::int16_t{1}, big_endian);
    put(b, 70, datatype, big_endian);
    put(b, 72, bitpix, big_endian);
    for (int k = 0; k < 4; ++k) put(b, 76 + 4 * k, k == 0 ? 1.0f : 1.5f + static_cast<float>(k), big_endian);
    put(b, 108, 352.0f, big_endian);
    put(b, 112, slope, big_endian);
    put(b, 116, inter, big_endian);
    std::memcpy(b.data() + 344, magic, std::strlen(magic) + 1);
    for (double v : values) {
      const std::size_t at = b.size();
      if (datatype == 64) {
        b.resize(at + 8);
        put(b, at, v, big_endian);
      } else {
        b.resize(at + 4);
        put(b, at, static_cast<float>(v), big_endian);
      }
    }
    return b;
  }
};

// Direct evaluation of the counting formula, one voxel and one draw at a time.
inline Vector brute_psimbas(const Vector& mean, const Vector& sd, const Matrix& samples, const VoxelMask& mask) {
  double peak = 0;
  for (Index v = 0; v < mean.size(); ++v)
    if (mask[v]) peak = std::max(peak, sd[v]);
  auto s = [&](Index v) { return std::max(sd[v], 1e-12 * peak); };
  std::vector<double> z;
  for (Index m = 0; m < samples.rows(); ++m) {
    double best = 0;
    for (Index v = 0; v < mean.size(); ++v)
      if (mask[v]) best = std::max(best, std::abs(samples(m, v) - mean[v]) / s(v));
    z.push_back(best);
  }
  Vector p(mean.size());
  for (Index v = 0; v < mean.size(); ++v) {
    if (!mask[v]) {
      p[v] = 1;
      continue;
    }
    int count = 0;
    for (double zm : z) count += std::abs(mean[v]) / s(v) <= zm;
    p[v] = count / static_cast<double>(z.size());
  }
  return p;
}

struct UnionFind {
  std::vector<Index> parent;
  explicit UnionFind(Index n) : parent(static_cast<std::size_t>(n)) { std::iota(parent.begin(), parent.end(), Index{0}); }
  Index find(Index x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void join(Index a, Index b) { parent[find(a)] = find(b); }
};

// Components by pairwise union over every flagged voxel pair within the neighborhood.
inline std::vector<std::vector<Index>> oracle_components(const VoxelMask& flags, const SpatialDims& d, int conn,
                                                         Index min_size) {
  const Index n = d[0] * d[1] * d[2];
  UnionFind uf(n);
  auto coord = [&](Index v) { return Voxel{v % d[0], (v / d[0]) % d[1], v / (d[0] * d[1])}; };
  for (Index a = 0; a < n; ++a) {
    if (!flags[a]) continue;
    const Voxel ca = coord(a);
    for (Index b = a + 1; b < n && b <= a + d[0] * d[1] + d[0] + 1; ++b) {
      if (!flags[b]) continue;
      const Voxel cb = coord(b);
      const Index dx = std::abs(ca[0] - cb[0]), dy = std::abs(ca[1] - cb[1]), dz = std::abs(ca[2] - cb[2]);
      if (std::max({dx, dy, dz}) > 1) continue;
      if (conn == 6 && dx + dy + dz != 1) continue;
      uf.join(a, b);
    }
  }
  std::map<Index, std::vector<Index>> groups;
  for (Index v = 0; v < n; ++v)
    if (flags[v]) groups[uf.find(v)].push_back(v);
  std::vector<std::vector<Index>> out;
  for (auto& [root, members] : groups)
    if (static_cast<Index>(members.size()) >= min_size) out.push_back(members);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace testutil
