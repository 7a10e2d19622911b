#include "mtm/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>

#include "mtm/errors.hpp"

namespace mtm {

uint64_t potential(std::span<const TokenSet> tokens, uint32_t k) {
  uint64_t phi = 0;
  for (const TokenSet& t : tokens) {
    if (t.size() > k) throw SimError("potential: a node holds more than k tokens");
    phi += k - t.size();
  }
  return phi;
}

std::vector<FreqEntry> frequency_multiset(std::span<const TokenSet> tokens) {
  std::map<TokenSet, FreqEntry> groups;
  for (uint32_t u = 0; u < tokens.size(); ++u) {
    FreqEntry& e = groups[tokens[u]];
    if (e.count == 0) e.set = tokens[u];
    ++e.count;
    e.members.push_back(u);
  }
  std::vector<FreqEntry> out;
  out.reserve(groups.size());
  for (auto& [_, e] : groups) out.push_back(std::move(e));
  std::stable_sort(out.begin(), out.end(),
                   [](const FreqEntry& a, const FreqEntry& b) { return a.count > b.count; });
  return out;
}

CoalitionResult coalition(const std::vector<FreqEntry>& f, uint32_t n, double eps) {
  if (!(eps > 0.0) || eps >= 1.0) throw ConfigError("coalition: eps must be in (0, 1)");
  if (eps < 0.5) eps = 0.5;
  CoalitionResult res;
  if (f.empty()) return res;
  const double upper = eps * n;
  const double lower = eps * n / 2.0;
  const uint32_t q_max = f.front().count;  // entries sorted by count desc

  if (static_cast<double>(q_max) > upper) {
    res.solved = true;
    return res;
  }
  if (static_cast<double>(q_max) >= lower) {
    res.coalition.push_back(f.front());
    return res;
  }
  // q_max < (eps/2) n: greedily add in decreasing q until the sum first
  // exceeds (eps/2) n. Every q is below the gap to the upper target, so the
  // final sum lands in [(eps/2) n, eps n].
  uint64_t sum = 0;
  for (const FreqEntry& e : f) {
    res.coalition.push_back(e);
    sum += e.count;
    if (static_cast<double>(sum) > lower) break;
  }
  if (!(static_cast<double>(sum) >= lower && static_cast<double>(sum) <= upper))
    throw SimError("coalition: greedy sum escaped its target range");
  return res;
}

bool is_gossip_complete(std::span<const TokenSet> tokens, uint32_t k) {
  for (const TokenSet& t : tokens)
    if (t.size() != k) return false;
  return true;
}

namespace {

constexpr uint32_t kCliqueCutoff = 64;

// Branch and bound for a clique of size >= want on adjacency bitmasks.
bool has_clique(const std::vector<uint64_t>& adj, uint64_t candidates, uint32_t have,
                uint32_t want) {
  if (have >= want) return true;
  while (candidates) {
    if (have + static_cast<uint32_t>(std::popcount(candidates)) < want) return false;
    const uint32_t v = static_cast<uint32_t>(std::countr_zero(candidates));
    candidates &= candidates - 1;
    if (has_clique(adj, candidates & adj[v], have + 1, want)) return true;
  }
  return false;
}

}  // namespace

bool is_eps_gossip_complete(std::span<const TokenSet> tokens, std::span<const uint32_t> uids,
                            double eps) {
  if (!(eps > 0.0) || eps >= 1.0) throw ConfigError("eps-gossip: eps must be in (0, 1)");
  const uint32_t n = static_cast<uint32_t>(tokens.size());
  if (uids.size() != n) throw ConfigError("eps-gossip: uids size mismatch");
  const uint32_t want = static_cast<uint32_t>(std::ceil(eps * n));
  if (want <= 1) {
    for (uint32_t u = 0; u < n; ++u)
      if (tokens[u].contains(uids[u])) return true;
    return false;
  }

  // Pre-check: q nodes sharing an identical set that contains each of their
  // own tokens are pairwise mutual, so q >= want suffices.
  for (const FreqEntry& e : frequency_multiset(tokens)) {
    if (e.count < want) break;
    bool own_ok = true;
    for (uint32_t u : e.members) {
      if (!e.set.contains(uids[u])) {
        own_ok = false;
        break;
      }
    }
    if (own_ok) return true;
  }

  if (n > kCliqueCutoff)
    throw ConfigError("eps-gossip: n exceeds the exact-check cutoff of 64 and the frequency "
                      "pre-check was inconclusive");

  // Mutual-knowledge graph. A node is eligible only if it knows its own
  // token; an edge means both endpoints know each other's token.
  std::vector<uint64_t> adj(n, 0);
  uint64_t eligible = 0;
  for (uint32_t u = 0; u < n; ++u)
    if (tokens[u].contains(uids[u])) eligible |= 1ULL << u;
  for (uint32_t u = 0; u < n; ++u) {
    if (!(eligible >> u & 1)) continue;
    for (uint32_t v = u + 1; v < n; ++v) {
      if (!(eligible >> v & 1)) continue;
      if (tokens[u].contains(uids[v]) && tokens[v].contains(uids[u])) {
        adj[u] |= 1ULL << v;
        adj[v] |= 1ULL << u;
      }
    }
  }
  // Degree prune: members of a want-clique have mutual degree >= want-1.
  uint64_t cand = eligible;
  for (bool changed = true; changed;) {
    changed = false;
    uint64_t m = cand;
    while (m) {
      const uint32_t v = static_cast<uint32_t>(std::countr_zero(m));
      m &= m - 1;
      if (static_cast<uint32_t>(std::popcount(adj[v] & cand)) + 1 < want) {
        cand &= ~(1ULL << v);
        changed = true;
      }
    }
  }
  if (static_cast<uint32_t>(std::popcount(cand)) < want) return false;
  return has_clique(adj, cand, 0, want);
}

}  // namespace mtm
