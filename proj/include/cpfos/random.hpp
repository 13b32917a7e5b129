#pragma once

#include <cstdint>
#include <random>

namespace cpfos {

/// Seeded mt19937_64 stream. Independent child streams (per chain, per fold)
/// are derived from the parent seed, never from the parent's state, so their
/// contents do not depend on scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  static constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream) {
    return parent ^ (0x9E3779B97F4A7C15ULL * stream);
  }

  Rng child(std::uint64_t stream) const { return Rng(derive_seed(seed_, stream)); }

  std::uint64_t seed() const { return seed_; }
  std::mt19937_64& engine() { return engine_; }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double chi_squared(double dof) { return std::chi_squared_distribution<double>(dof)(engine_); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
  std::uniform_real_distribution<double> uniform_;
};

}  // namespace cpfos
