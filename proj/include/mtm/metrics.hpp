#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mtm/token_set.hpp"

namespace mtm {

/// phi = sum over nodes of (k - |T_u|). Zero iff gossip is solved.
uint64_t potential(std::span<const TokenSet> tokens, uint32_t k);

struct FreqEntry {
  TokenSet set;
  uint32_t count = 0;                // number of nodes holding exactly `set`
  std::vector<uint32_t> members;     // those node ids, ascending
};

/// Groups nodes by their exact token set. Entries sorted by count
/// descending, ties by set order, so downstream consumers are deterministic.
std::vector<FreqEntry> frequency_multiset(std::span<const TokenSet> tokens);

struct CoalitionResult {
  bool solved = false;                 // a set is already shared by > eps*n nodes
  std::vector<FreqEntry> coalition;    // otherwise: (eps/2)*n <= sum q <= eps*n
};

/// Greedy coalition construction. eps below 1/2 is analyzed as 1/2 (the
/// relaxation only gets easier), matching the analysis convention.
CoalitionResult coalition(const std::vector<FreqEntry>& f, uint32_t n, double eps);

/// True iff every node holds all k tokens (equivalently potential == 0).
bool is_gossip_complete(std::span<const TokenSet> tokens, uint32_t k);

/// eps-gossip predicate: some subset S with |S| >= ceil(eps*n) where every
/// node knows its own and every other member's token. Requires k = n (node
/// i's token is uids[i]). Cheap sufficient pre-check through the frequency
/// multiset; exact decision by clique search on the mutual-knowledge graph.
/// Throws when n exceeds the search cutoff (64) and the pre-check failed.
bool is_eps_gossip_complete(std::span<const TokenSet> tokens, std::span<const uint32_t> uids,
                            double eps);

}  // namespace mtm
