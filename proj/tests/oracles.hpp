// Test-only brute-force oracles, kept independent of the library code paths
// they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mtm/graph.hpp"
#include "mtm/token_set.hpp"

namespace oracle {

// Vertex expansion straight from the definition: for every non-empty subset
// with |S| <= n/2, count outside nodes adjacent to S by scanning edges.
inline mtm::Fraction expansion_brute_force(const mtm::StaticTopology& g) {
  const uint32_t n = g.n();
  mtm::Fraction best{1000000, 1};
  for (uint32_t mask = 1; mask < (1u << n); ++mask) {
    std::vector<char> in_s(n, 0);
    uint32_t size = 0;
    for (uint32_t v = 0; v < n; ++v)
      if (mask & (1u << v)) {
        in_s[v] = 1;
        ++size;
      }
    if (size == 0 || size > n / 2) continue;
    uint32_t boundary = 0;
    for (uint32_t v = 0; v < n; ++v) {
      if (in_s[v]) continue;
      bool adjacent = false;
      for (uint32_t w = 0; w < n; ++w)
        if (in_s[w] && g.has_edge(v, w)) adjacent = true;
      if (adjacent) ++boundary;
    }
    mtm::Fraction cand = mtm::Fraction::of(boundary, size);
    if (cand < best) best = cand;
  }
  return best;
}

// eps-gossip by exhaustive subset enumeration: some subset of >= ceil(eps*n)
// nodes where every member knows its own and every other member's token.
inline bool eps_gossip_brute_force(std::span<const mtm::TokenSet> tokens,
                                   std::span<const uint32_t> uids, double eps) {
  const uint32_t n = static_cast<uint32_t>(tokens.size());
  const uint32_t want = static_cast<uint32_t>(std::ceil(eps * n));
  if (want <= 1) {
    for (uint32_t u = 0; u < n; ++u)
      if (tokens[u].contains(uids[u])) return true;
    return false;
  }
  for (uint32_t mask = 1; mask < (1u << n); ++mask) {
    if (static_cast<uint32_t>(__builtin_popcount(mask)) < want) continue;
    bool ok = true;
    for (uint32_t u = 0; u < n && ok; ++u) {
      if (!(mask & (1u << u))) continue;
      for (uint32_t v = 0; v < n && ok; ++v) {
        if (!(mask & (1u << v))) continue;
        if (!tokens[u].contains(uids[v])) ok = false;
      }
    }
    if (ok) return true;
  }
  return false;
}

inline std::optional<uint32_t> min_symmetric_difference(const mtm::TokenSet& a,
                                                        const mtm::TokenSet& b) {
  std::vector<uint32_t> diff;
  std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(),
                                std::back_inserter(diff));
  if (diff.empty()) return std::nullopt;
  return diff.front();
}

}  // namespace oracle
