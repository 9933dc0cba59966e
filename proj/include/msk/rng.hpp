#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace msk {

/// Philox 4x32-10 counter-based generator (Salmon et al., SC 2011).
/// Stateless: output depends only on (counter, key), so streams keyed by
/// (seed, site indices) are reproducible and order-independent under
/// parallel generation.
namespace philox {

constexpr uint32_t kW32A = 0x9E3779B9u;
constexpr uint32_t kW32B = 0xBB67AE85u;
constexpr uint32_t kM0 = 0xD2511F53u;
constexpr uint32_t kM1 = 0xCD9E8D57u;

inline void mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
  const uint64_t p = static_cast<uint64_t>(a) * b;
  hi = static_cast<uint32_t>(p >> 32);
  lo = static_cast<uint32_t>(p);
}

inline std::array<uint32_t, 4> block(std::array<uint32_t, 4> c, uint64_t key) {
  uint32_t k0 = static_cast<uint32_t>(key);
  uint32_t k1 = static_cast<uint32_t>(key >> 32);
  for (int round = 0; round < 10; ++round) {
    uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, c[0], hi0, lo0);
    mulhilo(kM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
    k0 += kW32A;
    k1 += kW32B;
  }
  return c;
}

inline double to_unit(uint32_t hi, uint32_t lo) {
  // uniform in (0,1]: 53 mantissa bits, never exactly 0
  const uint64_t bits = (static_cast<uint64_t>(hi) << 32) | lo;
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1p-53;
}

}  // namespace philox

/// One standard Gaussian keyed by (seed, a, b, stream) via Box-Muller.
inline double gaussian_at(uint64_t seed, uint32_t a, uint32_t b, uint32_t stream = 0) {
  const auto r = philox::block({a, b, stream, 0x6d736bu}, seed);
  const double u1 = philox::to_unit(r[0], r[1]);
  const double u2 = philox::to_unit(r[2], r[3]);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

/// Sequential stream view over the counter space, for the MCMC walk.
class PhiloxStream {
 public:
  PhiloxStream(uint64_t seed, uint32_t stream_id) : seed_(seed), stream_(stream_id) {}

  double uniform() {
    if (pos_ == 2) {
      block_ = philox::block({static_cast<uint32_t>(ctr_), static_cast<uint32_t>(ctr_ >> 32),
                              stream_, 0x75726e67u},
                             seed_);
      ++ctr_;
      pos_ = 0;
    }
    const double u = philox::to_unit(block_[2 * pos_], block_[2 * pos_ + 1]);
    ++pos_;
    return u;
  }

  double gaussian() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// integer in [0, n)
  int below(int n) { return std::min(n - 1, static_cast<int>(uniform() * n)); }

 private:
  uint64_t seed_;
  uint32_t stream_;
  uint64_t ctr_ = 0;
  std::array<uint32_t, 4> block_{};
  int pos_ = 2;
};

/// SplitMix64, used to derive per-disorder-sample seeds from a base seed.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace msk
