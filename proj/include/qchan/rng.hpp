#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qchan {

/// SplitMix64 mixer; used to derive independent engine seeds.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Seedable random stream: std::mt19937_64 engine seeded through SplitMix64,
/// uniform doubles by the 53-bit ladder, normals by Box-Muller. Per-chain
/// streams come from chain_stream(seed, chain) = engine seeded with
/// splitmix64 applied twice to (seed, then chain+1); the derivation is part
/// of the reproducibility contract.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) {
    uint64_t s = seed;
    engine_.seed(splitmix64(s));
  }

  static RngStream chain_stream(uint64_t seed, uint64_t chain) {
    uint64_t s = seed;
    (void)splitmix64(s);
    s ^= 0x9e3779b97f4a7c15ull * (chain + 1);
    RngStream r(0);
    r.engine_.seed(splitmix64(s));
    return r;
  }

  uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 significant bits.
  double uniform() { return (engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller (pinned; avoids libstdc++-specific
  /// distribution internals).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace qchan
