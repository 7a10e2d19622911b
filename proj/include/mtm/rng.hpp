#pragma once

#include <cstdint>
#include <initializer_list>

namespace mtm {

/// splitmix64 finalizer. Used both as the PRNG step and for seed derivation.
constexpr uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic random stream (splitmix64). We avoid std:: distributions
/// on purpose: their output is implementation-defined, and trace hashes must
/// be stable across platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  bool next_bit() { return (next_u64() >> 63) != 0; }

  /// Uniform in [0, n). Rejection sampling, no modulo bias.
  uint64_t next_below(uint64_t n) {
    if (n == 0) return 0;
    if ((n & (n - 1)) == 0) return next_u64() & (n - 1);
    const uint64_t rem = (0 - n) % n;  // 2^64 mod n
    const uint64_t limit = 0 - rem;    // largest multiple of n
    uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  /// Uniform double in [0, 1).
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

 private:
  uint64_t state_;
};

/// Hash-chains a root seed with a path of labels. Every per-node, per-round,
/// per-purpose stream in the simulator is derived this way, so outcomes do
/// not depend on iteration order.
inline uint64_t derive_seed(uint64_t root, std::initializer_list<uint64_t> path) {
  uint64_t h = mix64(root ^ 0x5851f42d4c957f2dULL);
  for (uint64_t p : path) h = mix64(h ^ mix64(p));
  return h;
}

inline Rng derive_stream(uint64_t root, std::initializer_list<uint64_t> path) {
  return Rng(derive_seed(root, path));
}

/// Stream purpose labels.
namespace stream {
inline constexpr uint64_t kCoin = 0x11;     // sender/receiver coin flips
inline constexpr uint64_t kTarget = 0x12;   // uniform neighbor selection
inline constexpr uint64_t kAccept = 0x13;   // listener's uniform acceptance
inline constexpr uint64_t kPair = 0x14;     // per-connection fingerprint stream
inline constexpr uint64_t kUid = 0x15;      // random UID injection
inline constexpr uint64_t kTrial = 0x16;    // per-trial seeds
inline constexpr uint64_t kGraph = 0x17;    // graph generation
inline constexpr uint64_t kTagDraw = 0x18;  // crowdedbin tag draw
inline constexpr uint64_t kBinDraw = 0x19;  // crowdedbin bin choices
inline constexpr uint64_t kSeedDraw = 0x1a; // simsharedbit private seeds
inline constexpr uint64_t kShared = 0x1b;   // shared string backing seed
inline constexpr uint64_t kEstimate = 0x1c; // expansion estimate sampling
}  // namespace stream

}  // namespace mtm
