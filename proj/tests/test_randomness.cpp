#include <doctest.h>

#include <cmath>
#include <set>

#include "mtm/randomness.hpp"
#include "mtm/errors.hpp"

using namespace mtm;

TEST_SUITE_BEGIN("randomness");

TEST_CASE("seed hex round trip") {
  Rng rng(123);
  Seed s = Seed::random(rng);
  CHECK(Seed::from_hex(s.hex()) == s);
  CHECK_THROWS_AS(Seed::from_hex("xyz"), ConfigError);
}

TEST_CASE("expansion is deterministic and matches the lazy string") {
  Seed s{{0xdeadbeefULL, 0x12345678ULL}};
  auto bits1 = expand_seed_bits(s, 1024);
  auto bits2 = expand_seed_bits(s, 1024);
  CHECK(bits1 == bits2);

  SharedString str = SharedString::from_seed(s, 16);
  for (uint64_t i = 0; i < 1024; ++i) CHECK(str.bit_at(i) == bits1[i]);
}

TEST_CASE("distinct seeds give uncorrelated streams") {
  // Hamming distance over the first 1024 bits across 1000 seed pairs.
  uint64_t total = 0;
  uint32_t within = 0;
  const uint32_t pairs = 1000;
  for (uint64_t i = 0; i < pairs; ++i) {
    Seed a{{mix64(2 * i), mix64(1000 + 2 * i)}};
    Seed b{{mix64(2 * i + 1), mix64(1001 + 2 * i)}};
    auto ba = expand_seed_bits(a, 1024);
    auto bb = expand_seed_bits(b, 1024);
    uint32_t diff = 0;
    for (size_t j = 0; j < 1024; ++j) diff += ba[j] != bb[j];
    total += diff;
    if (diff >= 452 && diff <= 572) ++within;  // 512 +- 60
  }
  const double mean = static_cast<double>(total) / pairs;
  CHECK(mean > 452.0);
  CHECK(mean < 572.0);
  CHECK(within >= 990);  // stragglers beyond 3.75 sigma are rare
}

TEST_CASE("expanded stream passes monobit and runs tests at significance 0.001") {
  const uint64_t n = 1000000;
  Seed s{{0x1234abcdULL, 0x777ULL}};
  auto bits = expand_seed_bits(s, n);
  uint64_t ones = 0;
  for (uint8_t b : bits) ones += b;
  const double z_alpha = 3.2905;  // two-sided 0.001

  const double s_obs =
      std::abs(2.0 * ones - static_cast<double>(n)) / std::sqrt(static_cast<double>(n));
  CHECK(s_obs < z_alpha);

  uint64_t runs = 1;
  for (uint64_t i = 1; i < n; ++i) runs += bits[i] != bits[i - 1];
  const double pi = static_cast<double>(ones) / n;
  const double expected = 2.0 * n * pi * (1.0 - pi);
  const double z = std::abs(static_cast<double>(runs) - expected) /
                   (2.0 * std::sqrt(static_cast<double>(n)) * pi * (1.0 - pi));
  CHECK(z < z_alpha);
}

TEST_CASE("shared string layout") {
  // N=4: bundle_bits = 3, groups from the supplied bits.
  std::vector<uint8_t> bits(4 * 3 * 8, 0);  // 8 groups
  bits[18] = 1;  // group 2, bundle 3, offset 0
  SharedString s = SharedString::from_bits(bits, 4);
  CHECK(s.bundle_bits() == 3);
  CHECK(s.groups() == 8);
  CHECK(s.token_bit(2, 3) == 1);
  CHECK(s.token_bit(2, 2) == 0);
  CHECK(s.token_bit(1, 1) == 0);
  CHECK(s.token_bit(2, 3) == s.token_bit(2, 3));
  CHECK_THROWS_AS(s.token_bit(9, 1), SimError);   // groups exhausted
  CHECK_THROWS_AS(s.token_bit(1, 5), SimError);   // token outside [N]
}

TEST_CASE("layout index arithmetic is injective") {
  SharedString s = SharedString::from_seed(Seed{{1, 2}}, 8);
  // (group, bundle, offset) -> index must not collide across a sample.
  std::set<uint64_t> seen;
  for (uint64_t g = 1; g <= 50; ++g)
    for (uint32_t bu = 1; bu <= 8; ++bu)
      for (uint32_t off = 0; off < s.bundle_bits(); ++off) {
        const uint64_t idx = ((g - 1) * 8 + (bu - 1)) * s.bundle_bits() + off;
        CHECK(seen.insert(idx).second);
        CHECK(idx < s.total_bits());
      }
}

TEST_CASE("token_bit frequency is balanced over independent strings") {
  uint32_t ones = 0;
  const uint32_t draws = 10000;
  for (uint64_t i = 0; i < draws; ++i) {
    SharedString s = SharedString::from_seed(Seed{{mix64(i), mix64(i + 31337)}}, 16);
    ones += s.token_bit(3, 7);
  }
  const double freq = static_cast<double>(ones) / draws;
  CHECK(freq > 0.48);
  CHECK(freq < 0.52);
}

TEST_CASE("proposal_choice determinism and range") {
  SharedString s = SharedString::from_seed(Seed{{5, 6}}, 16);
  CHECK(s.proposal_choice(4, 3, 1) == 0);
  for (uint32_t d = 1; d <= 16; ++d) {
    const uint32_t idx = s.proposal_choice(7, 9, d);
    CHECK(idx < d);
    CHECK(s.proposal_choice(7, 9, d) == idx);
  }
}

TEST_CASE("proposal_choice is balanced for d=2 over independent strings") {
  uint32_t ones = 0;
  const uint32_t draws = 10000;
  for (uint64_t i = 0; i < draws; ++i) {
    SharedString s = SharedString::from_seed(Seed{{mix64(900 + i), mix64(i)}}, 16);
    ones += s.proposal_choice(2, 5, 2);
  }
  const double freq = static_cast<double>(ones) / draws;
  CHECK(freq > 0.48);
  CHECK(freq < 0.52);
}

TEST_SUITE_END();
