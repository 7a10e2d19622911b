#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mtm/rng.hpp"

namespace mtm {

/// Compact label for a shared string; small enough to ride a single
/// connection's bit budget (the consumer checks that against its bit_cap).
struct Seed {
  static constexpr uint32_t kBits = 128;
  std::array<uint64_t, 2> words{0, 0};

  static Seed random(Rng& rng) { return Seed{{rng.next_u64(), rng.next_u64()}}; }
  std::string hex() const;
  static Seed from_hex(const std::string& h);
  bool operator==(const Seed& o) const { return words == o.words; }
  uint64_t fingerprint() const { return mix64(words[0] ^ mix64(words[1])); }
};

/// Deterministic counter-mode expansion of a seed; word i of the stream is a
/// pure function of (seed, i).
uint64_t expand_word(const Seed& seed, uint64_t word_index);

/// Materializes the first `nbits` bits of the expansion (tests, statistics).
std::vector<uint8_t> expand_seed_bits(const Seed& seed, uint64_t nbits);

/// The shared random string: `groups` groups of N bundles of
/// (ceil(log2 N) + 1) bits each. Group r serves round r; bundle t serves
/// token/UID t. The first bit of a bundle is the per-token bit, the
/// remaining ceil(log2 N) bits drive proposal choices. Backing bits are
/// either generated on demand from a seed (the normal path; the full string
/// is ~N^3 bits and never materialized) or supplied directly for tests.
class SharedString {
 public:
  SharedString() = default;  // empty; assign via from_seed/from_bits before use
  static SharedString from_seed(const Seed& seed, uint32_t N);
  static SharedString from_bits(std::vector<uint8_t> bits, uint32_t N);

  uint32_t N() const { return n_upper_; }
  uint64_t groups() const { return groups_; }
  uint32_t bundle_bits() const { return bundle_bits_; }
  uint64_t total_bits() const { return groups_ * n_upper_ * bundle_bits_; }
  const Seed& seed() const { return seed_; }

  /// Raw backing bit; index must be < total_bits().
  int bit_at(uint64_t index) const;

  /// First bit of bundle `token` in group `round`. Throws SimError once the
  /// rounds exceed the group supply (callers decide whether to wrap).
  int token_bit(uint64_t round, uint32_t token) const;

  /// Maps the ceil(log2 N) bundle bits of `uid` in group `round` to an index
  /// in [0, d) through a fixed expander with rejection sampling (64 retries,
  /// then modulo). Pure in (string, round, uid, d).
  uint32_t proposal_choice(uint64_t round, uint32_t uid, uint32_t d) const;

 private:
  uint32_t n_upper_ = 0;
  uint32_t bundle_bits_ = 0;
  uint64_t groups_ = 0;
  Seed seed_{};
  bool materialized_ = false;
  std::vector<uint8_t> bits_;
};

/// Group budget for a string serving SharedBit: 32 * N^2, the round budget
/// that suffices for every k <= N.
uint64_t shared_string_groups(uint32_t N);

}  // namespace mtm
