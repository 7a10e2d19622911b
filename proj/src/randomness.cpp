#include "mtm/randomness.hpp"

#include <bit>
#include <cstdio>

#include "mtm/errors.hpp"

namespace mtm {

namespace {

uint32_t ceil_log2_u32(uint32_t x) {
  uint32_t b = 0;
  while ((1ull << b) < x) ++b;
  return b;
}

constexpr uint64_t kExpandBitCap = 1ULL << 40;

}  // namespace

std::string Seed::hex() const {
  char buf[33];
  std::snprintf(buf, sizeof(buf), "%016llx%016llx",
                static_cast<unsigned long long>(words[0]),
                static_cast<unsigned long long>(words[1]));
  return std::string(buf);
}

Seed Seed::from_hex(const std::string& h) {
  if (h.size() != 32) throw ConfigError("seed hex must be 32 characters");
  Seed s;
  for (int w = 0; w < 2; ++w) {
    uint64_t v = 0;
    for (int i = 0; i < 16; ++i) {
      char c = h[static_cast<size_t>(w) * 16 + i];
      uint64_t d;
      if (c >= '0' && c <= '9') d = static_cast<uint64_t>(c - '0');
      else if (c >= 'a' && c <= 'f') d = static_cast<uint64_t>(c - 'a' + 10);
      else if (c >= 'A' && c <= 'F') d = static_cast<uint64_t>(c - 'A' + 10);
      else throw ConfigError("seed hex has a non-hex character");
      v = (v << 4) | d;
    }
    s.words[w] = v;
  }
  return s;
}

uint64_t expand_word(const Seed& seed, uint64_t word_index) {
  return mix64(seed.words[0] ^ mix64(seed.words[1] ^ mix64(word_index ^ 0x9d2c5680cafebeefULL)));
}

std::vector<uint8_t> expand_seed_bits(const Seed& seed, uint64_t nbits) {
  if (nbits > kExpandBitCap) throw ConfigError("expand_seed: requested length is unreasonable");
  std::vector<uint8_t> out(nbits);
  for (uint64_t i = 0; i < nbits; ++i)
    out[i] = static_cast<uint8_t>((expand_word(seed, i / 64) >> (i % 64)) & 1);
  return out;
}

uint64_t shared_string_groups(uint32_t N) {
  return 32ULL * N * N;
}

SharedString SharedString::from_seed(const Seed& seed, uint32_t N) {
  if (N < 2 || !std::has_single_bit(N)) throw ConfigError("SharedString: N must be a power of 2, >= 2");
  SharedString s;
  s.n_upper_ = N;
  s.bundle_bits_ = ceil_log2_u32(N) + 1;
  s.groups_ = shared_string_groups(N);
  s.seed_ = seed;
  s.materialized_ = false;
  return s;
}

SharedString SharedString::from_bits(std::vector<uint8_t> bits, uint32_t N) {
  if (N < 2 || !std::has_single_bit(N)) throw ConfigError("SharedString: N must be a power of 2, >= 2");
  SharedString s;
  s.n_upper_ = N;
  s.bundle_bits_ = ceil_log2_u32(N) + 1;
  const uint64_t per_group = static_cast<uint64_t>(N) * s.bundle_bits_;
  s.groups_ = bits.size() / per_group;
  if (s.groups_ == 0) throw ConfigError("SharedString: not enough bits for one group");
  s.materialized_ = true;
  s.bits_ = std::move(bits);
  return s;
}

int SharedString::bit_at(uint64_t index) const {
  if (index >= total_bits()) throw SimError("SharedString: bit index out of range");
  if (materialized_) return bits_[index];
  return static_cast<int>((expand_word(seed_, index / 64) >> (index % 64)) & 1);
}

int SharedString::token_bit(uint64_t round, uint32_t token) const {
  if (round < 1 || round > groups_)
    throw SimError("SharedString: round " + std::to_string(round) + " exhausts the " +
                   std::to_string(groups_) + " available groups");
  if (token < 1 || token > n_upper_) throw SimError("SharedString: token outside [1, N]");
  const uint64_t index =
      ((round - 1) * n_upper_ + (token - 1)) * static_cast<uint64_t>(bundle_bits_);
  return bit_at(index);
}

uint32_t SharedString::proposal_choice(uint64_t round, uint32_t uid, uint32_t d) const {
  if (d < 1 || d > n_upper_) throw SimError("proposal_choice: d outside [1, N]");
  if (uid < 1 || uid > n_upper_) throw SimError("proposal_choice: uid outside [1, N]");
  if (d == 1) return 0;
  if (round < 1 || round > groups_) throw SimError("proposal_choice: round exhausts groups");
  // Bits 2 .. bundle_bits of the node's own bundle, MSB first.
  const uint64_t base =
      ((round - 1) * n_upper_ + (uid - 1)) * static_cast<uint64_t>(bundle_bits_);
  uint64_t raw = 0;
  for (uint32_t i = 1; i < bundle_bits_; ++i)
    raw = (raw << 1) | static_cast<uint64_t>(bit_at(base + i));

  const uint64_t m = std::bit_ceil(static_cast<uint64_t>(d));
  uint64_t v = 0;
  for (uint32_t attempt = 0; attempt < 64; ++attempt) {
    v = mix64(raw ^ mix64(0x51ed2701a46aull + attempt));
    const uint64_t cand = v & (m - 1);
    if (cand < d) return static_cast<uint32_t>(cand);
  }
  return static_cast<uint32_t>(v % d);  // bias below 2^-64 at this point
}

}  // namespace mtm
