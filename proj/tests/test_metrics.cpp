#include <doctest.h>

#include "mtm/metrics.hpp"
#include "mtm/rng.hpp"
#include "oracles.hpp"

using namespace mtm;

namespace {

std::vector<uint32_t> identity_uids(uint32_t n) {
  std::vector<uint32_t> u(n);
  for (uint32_t i = 0; i < n; ++i) u[i] = i + 1;
  return u;
}

// Random state where node i always knows its own token plus extras.
std::vector<TokenSet> random_state(uint32_t n, uint64_t seed, double density = 0.4) {
  Rng rng(seed);
  std::vector<TokenSet> tokens(n);
  for (uint32_t i = 0; i < n; ++i) {
    tokens[i].insert(i + 1);
    for (uint32_t j = 1; j <= n; ++j)
      if (rng.next_unit() < density) tokens[i].insert(j);
  }
  return tokens;
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("potential examples") {
  {
    std::vector<TokenSet> t(3, TokenSet({1, 2}));
    CHECK(potential(t, 2) == 0);
  }
  {
    // n=4, k=2: two single-token holders, two empty nodes.
    std::vector<TokenSet> t{TokenSet({1}), TokenSet({2}), TokenSet(), TokenSet()};
    CHECK(potential(t, 2) == 6);
  }
  {
    std::vector<TokenSet> t{TokenSet({1, 2, 3})};
    CHECK_THROWS_AS(potential(t, 2), SimError);
  }
}

TEST_CASE("gossip completion agrees with potential on random states") {
  for (uint64_t seed = 0; seed < 50; ++seed) {
    auto tokens = random_state(8, seed);
    CHECK(is_gossip_complete(tokens, 8) == (potential(tokens, 8) == 0));
  }
}

TEST_CASE("frequency multiset") {
  {
    std::vector<TokenSet> t(5, TokenSet({1, 4}));
    auto f = frequency_multiset(t);
    REQUIRE(f.size() == 1);
    CHECK(f[0].count == 5);
  }
  {
    std::vector<TokenSet> t{TokenSet({1}), TokenSet({1}), TokenSet({1, 2})};
    auto f = frequency_multiset(t);
    REQUIRE(f.size() == 2);
    CHECK(f[0].set == TokenSet({1}));
    CHECK(f[0].count == 2);
    CHECK(f[1].count == 1);
  }
  for (uint64_t seed = 0; seed < 20; ++seed) {
    auto tokens = random_state(9, seed);
    uint32_t total = 0;
    for (const auto& e : frequency_multiset(tokens)) total += e.count;
    CHECK(total == 9);
  }
}

TEST_CASE("coalition three-case rule") {
  auto entry = [](std::vector<uint32_t> set, uint32_t q) {
    FreqEntry e;
    e.set = TokenSet(std::move(set));
    e.count = q;
    return e;
  };
  {
    // n=6: q_max=3 with eps=1/2 -> single-entry coalition (1.5 <= 3 <= 3).
    std::vector<FreqEntry> f{entry({1}, 3), entry({2}, 2), entry({3}, 1)};
    CoalitionResult r = coalition(f, 6, 0.5);
    CHECK_FALSE(r.solved);
    REQUIRE(r.coalition.size() == 1);
    CHECK(r.coalition[0].count == 3);
  }
  {
    // n=4: q_max=3 > 2 -> solved.
    std::vector<FreqEntry> f{entry({1}, 3), entry({2}, 1)};
    CHECK(coalition(f, 4, 0.5).solved);
  }
  {
    // n=8, all q=1 -> greedy stops after 3 entries (2 < 3 <= 4).
    std::vector<FreqEntry> f;
    for (uint32_t i = 1; i <= 8; ++i) f.push_back(entry({i}, 1));
    CoalitionResult r = coalition(f, 8, 0.5);
    CHECK_FALSE(r.solved);
    CHECK(r.coalition.size() == 3);
  }
}

TEST_CASE("coalition range holds on randomized states") {
  for (uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const uint32_t n = 6 + static_cast<uint32_t>(rng.next_below(7));
    auto tokens = random_state(n, seed ^ 0xabcd, 0.2);
    auto f = frequency_multiset(tokens);
    const double eps = 0.5 + 0.4 * rng.next_unit();
    CoalitionResult r = coalition(f, n, eps);
    if (r.solved) continue;
    uint64_t sum = 0;
    for (const auto& e : r.coalition) sum += e.count;
    CHECK(sum >= eps * n / 2.0);
    CHECK(sum <= eps * n);
  }
}

TEST_CASE("coalition normalizes small eps to 1/2") {
  std::vector<FreqEntry> f;
  for (uint32_t i = 1; i <= 8; ++i) {
    FreqEntry e;
    e.set = TokenSet({i});
    e.count = 1;
    f.push_back(e);
  }
  CoalitionResult lo = coalition(f, 8, 0.1);
  CoalitionResult half = coalition(f, 8, 0.5);
  CHECK(lo.coalition.size() == half.coalition.size());
}

TEST_CASE("eps-gossip basic instances") {
  auto uids = identity_uids(4);
  {
    // Fully solved: true for every eps.
    std::vector<TokenSet> t(4, TokenSet({1, 2, 3, 4}));
    for (double eps : {0.1, 0.5, 0.75, 0.99})
      CHECK(is_eps_gossip_complete(t, uids, eps));
  }
  {
    // Two disjoint mutually-knowing pairs: eps=1/2 yes, eps=3/4 no.
    std::vector<TokenSet> t{TokenSet({1, 2}), TokenSet({1, 2}), TokenSet({3, 4}),
                            TokenSet({3, 4})};
    CHECK(is_eps_gossip_complete(t, uids, 0.5));
    CHECK_FALSE(is_eps_gossip_complete(t, uids, 0.75));
  }
}

TEST_CASE("eps-gossip matches exhaustive enumeration on 500 random states") {
  for (uint64_t seed = 0; seed < 500; ++seed) {
    Rng rng(seed ^ 0x515);
    const uint32_t n = 4 + static_cast<uint32_t>(rng.next_below(9));  // 4..12
    auto tokens = random_state(n, seed, 0.15 + 0.5 * rng.next_unit());
    auto uids = identity_uids(n);
    const double eps = 0.2 + 0.75 * rng.next_unit();
    CHECK(is_eps_gossip_complete(tokens, uids, eps) ==
          oracle::eps_gossip_brute_force(tokens, uids, eps));
  }
}

TEST_CASE("full gossip implies eps-gossip for k = n") {
  std::vector<TokenSet> t(6, TokenSet({1, 2, 3, 4, 5, 6}));
  auto uids = identity_uids(6);
  REQUIRE(is_gossip_complete(t, 6));
  for (double eps : {0.25, 0.5, 0.9}) CHECK(is_eps_gossip_complete(t, uids, eps));
}

TEST_SUITE_END();
