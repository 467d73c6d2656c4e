#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace exitsurv {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Stream splitting rule: sub-stream i of master seed s is seeded with
// splitmix64(s ^ splitmix64(i + 1)). Used wherever one seed fans out
// into independent deterministic streams (per-sector generation, etc).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream + 1));
}

// Thin wrapper around std::mt19937_64. The engine's output sequence is
// fixed by the standard and every variate below is derived from it with
// explicit arithmetic (no std::*_distribution, whose mappings are
// implementation-defined), so draws are identical across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next() { return gen_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Plain modulo; the bias for the n used in
  // this project (far below 2^32) is not observable.
  std::uint64_t uniform_int(std::uint64_t n) { return gen_() % n; }

  // Standard normal via Box-Muller, caching the second variate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  Rng derive(std::uint64_t stream) const {
    return Rng(derive_seed(seed_, stream));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace exitsurv
