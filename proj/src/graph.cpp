#include "mtm/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include "mtm/rng.hpp"
#include <json.hpp>

namespace mtm {

StaticTopology::StaticTopology(uint32_t n, const std::vector<std::pair<uint32_t, uint32_t>>& edges)
    : n_(n), adj_(n) {
  if (n < 2) throw ConfigError("topology needs n >= 2, got n=" + std::to_string(n));
  std::set<std::pair<uint32_t, uint32_t>> seen;
  for (auto [u, v] : edges) {
    if (u >= n || v >= n)
      throw ConfigError("edge endpoint out of range: (" + std::to_string(u) + "," + std::to_string(v) + ")");
    if (u == v) throw ConfigError("self-loop at node " + std::to_string(u));
    auto key = std::minmax(u, v);
    if (!seen.insert(key).second)
      throw ConfigError("duplicate edge (" + std::to_string(u) + "," + std::to_string(v) + ")");
    adj_[u].push_back(v);
    adj_[v].push_back(u);
  }
  edge_count_ = seen.size();
  for (auto& nb : adj_) std::sort(nb.begin(), nb.end());
}

bool StaticTopology::has_edge(uint32_t u, uint32_t v) const {
  if (u >= n_ || v >= n_) return false;
  return std::binary_search(adj_[u].begin(), adj_[u].end(), v);
}

bool StaticTopology::is_connected() const {
  std::vector<char> seen(n_, 0);
  std::deque<uint32_t> q{0};
  seen[0] = 1;
  uint32_t count = 1;
  while (!q.empty()) {
    uint32_t u = q.front();
    q.pop_front();
    for (uint32_t v : adj_[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++count;
        q.push_back(v);
      }
    }
  }
  return count == n_;
}

std::vector<std::pair<uint32_t, uint32_t>> StaticTopology::edges() const {
  std::vector<std::pair<uint32_t, uint32_t>> out;
  out.reserve(edge_count_);
  for (uint32_t u = 0; u < n_; ++u)
    for (uint32_t v : adj_[u])
      if (u < v) out.emplace_back(u, v);
  return out;
}

DynamicTopology::DynamicTopology(std::vector<Snapshot> snapshots, uint64_t tau)
    : snapshots_(std::move(snapshots)), tau_(tau) {
  if (snapshots_.empty()) throw ConfigError("dynamic topology needs at least one snapshot");
  if (tau_ == 0) throw ConfigError("tau must be >= 1");
  if (snapshots_.front().from_round != 1)
    throw ConfigError("first snapshot must start at round 1");
  for (size_t i = 1; i < snapshots_.size(); ++i) {
    if (snapshots_[i].from_round <= snapshots_[i - 1].from_round)
      throw ConfigError("snapshot from_rounds must be strictly increasing");
    if (snapshots_[i].graph.n() != snapshots_.front().graph.n())
      throw ConfigError("all snapshots must share the same n");
  }
}

const StaticTopology& DynamicTopology::at_round(uint64_t r) const {
  // Last snapshot with from_round <= r.
  size_t lo = 0, hi = snapshots_.size();
  while (hi - lo > 1) {
    size_t mid = lo + (hi - lo) / 2;
    if (snapshots_[mid].from_round <= r)
      lo = mid;
    else
      hi = mid;
  }
  return snapshots_[lo].graph;
}

StabilityReport validate_stability(const DynamicTopology& d) {
  StabilityReport rep;
  if (d.tau() == DynamicTopology::kTauInfinity && d.snapshot_count() != 1) {
    rep.ok = false;
    rep.reasons.push_back("tau=inf requires exactly one snapshot");
  }
  for (size_t i = 1; i < d.snapshot_count(); ++i) {
    uint64_t gap = d.snapshot(i).from_round - d.snapshot(i - 1).from_round;
    if (d.tau() != DynamicTopology::kTauInfinity && gap < d.tau()) {
      std::ostringstream os;
      os << "snapshots at rounds " << d.snapshot(i - 1).from_round << " and "
         << d.snapshot(i).from_round << " are only " << gap << " apart (tau=" << d.tau() << ")";
      rep.ok = false;
      rep.reasons.push_back(os.str());
    }
  }
  for (size_t i = 0; i < d.snapshot_count(); ++i) {
    if (!d.snapshot(i).graph.is_connected()) {
      rep.ok = false;
      rep.reasons.push_back("snapshot " + std::to_string(i) + " is disconnected");
    }
  }
  return rep;
}

namespace {

void require_connected(const StaticTopology& g, const char* op) {
  if (!g.is_connected()) throw ConfigError(std::string(op) + ": input graph is disconnected");
}

// Boundary size of subset `mask` given per-node neighbor masks.
uint32_t boundary_size(uint32_t mask, const std::vector<uint32_t>& nbr_mask) {
  uint32_t reach = 0;
  uint32_t m = mask;
  while (m) {
    uint32_t v = static_cast<uint32_t>(__builtin_ctz(m));
    reach |= nbr_mask[v];
    m &= m - 1;
  }
  return static_cast<uint32_t>(__builtin_popcount(reach & ~mask));
}

}  // namespace

Fraction vertex_expansion_exact(const StaticTopology& g) {
  const uint32_t n = g.n();
  if (n > 20)
    throw ConfigError("vertex_expansion_exact limited to n <= 20, got n=" + std::to_string(n));
  require_connected(g, "vertex_expansion_exact");

  std::vector<uint32_t> nbr_mask(n, 0);
  for (uint32_t u = 0; u < n; ++u)
    for (uint32_t v : g.neighbors(u)) nbr_mask[u] |= (1u << v);

  const uint32_t max_size = n / 2;
  Fraction best{std::numeric_limits<int64_t>::max(), 1};
  const uint32_t full = (n == 32) ? ~0u : ((1u << n) - 1);
  for (uint32_t mask = 1; mask <= full; ++mask) {
    uint32_t sz = static_cast<uint32_t>(__builtin_popcount(mask));
    if (sz == 0 || sz > max_size) continue;
    uint32_t b = boundary_size(mask, nbr_mask);
    // compare b/sz < best
    if (static_cast<int64_t>(b) * best.den < best.num * static_cast<int64_t>(sz))
      best = Fraction{b, sz};
  }
  return Fraction::of(best.num, best.den);
}

double vertex_expansion_estimate(const StaticTopology& g, uint32_t trials, uint64_t rng_seed) {
  if (trials < 1) throw ConfigError("vertex_expansion_estimate needs trials >= 1");
  require_connected(g, "vertex_expansion_estimate");
  const uint32_t n = g.n();
  const uint32_t max_size = n / 2;

  auto alpha_of = [&](const std::vector<char>& in_s, uint32_t size) {
    uint32_t b = 0;
    for (uint32_t v = 0; v < n; ++v) {
      if (in_s[v]) continue;
      for (uint32_t w : g.neighbors(v)) {
        if (in_s[w]) {
          ++b;
          break;
        }
      }
    }
    return static_cast<double>(b) / static_cast<double>(size);
  };

  Rng rng = derive_stream(rng_seed, {stream::kEstimate});
  double best = std::numeric_limits<double>::infinity();
  std::vector<char> in_s(n, 0);
  std::vector<uint32_t> pool(n);
  for (uint32_t t = 0; t < trials; ++t) {
    std::fill(in_s.begin(), in_s.end(), 0);
    uint32_t size = static_cast<uint32_t>(rng.next_below(max_size)) + 1;
    if (t % 2 == 0) {
      // Uniform random subset of the chosen size (partial Fisher-Yates).
      for (uint32_t i = 0; i < n; ++i) pool[i] = i;
      for (uint32_t i = 0; i < size; ++i) {
        uint32_t j = i + static_cast<uint32_t>(rng.next_below(n - i));
        std::swap(pool[i], pool[j]);
        in_s[pool[i]] = 1;
      }
    } else {
      // BFS-grown connected subset from a random start.
      std::vector<uint32_t> frontier;
      uint32_t start = static_cast<uint32_t>(rng.next_below(n));
      in_s[start] = 1;
      frontier.push_back(start);
      uint32_t got = 1;
      while (got < size && !frontier.empty()) {
        uint32_t idx = static_cast<uint32_t>(rng.next_below(frontier.size()));
        uint32_t u = frontier[idx];
        uint32_t added = 0;
        for (uint32_t v : g.neighbors(u)) {
          if (!in_s[v]) {
            in_s[v] = 1;
            frontier.push_back(v);
            ++got;
            ++added;
            break;
          }
        }
        if (added == 0) {
          frontier[idx] = frontier.back();
          frontier.pop_back();
        }
      }
      size = got;
    }
    best = std::min(best, alpha_of(in_s, size));
  }
  return best;
}

uint32_t max_degree(const StaticTopology& g) {
  uint32_t best = 0;
  for (uint32_t u = 0; u < g.n(); ++u) best = std::max(best, g.degree(u));
  return best;
}

uint32_t diameter(const StaticTopology& g) {
  require_connected(g, "diameter");
  const uint32_t n = g.n();
  uint32_t best = 0;
  std::vector<uint32_t> dist(n);
  std::deque<uint32_t> q;
  for (uint32_t s = 0; s < n; ++s) {
    std::fill(dist.begin(), dist.end(), ~0u);
    dist[s] = 0;
    q.assign(1, s);
    while (!q.empty()) {
      uint32_t u = q.front();
      q.pop_front();
      for (uint32_t v : g.neighbors(u)) {
        if (dist[v] == ~0u) {
          dist[v] = dist[u] + 1;
          best = std::max(best, dist[v]);
          q.push_back(v);
        }
      }
    }
  }
  return best;
}

GraphKind parse_graph_kind(const std::string& name) {
  if (name == "complete") return GraphKind::kComplete;
  if (name == "ring") return GraphKind::kRing;
  if (name == "star") return GraphKind::kStar;
  if (name == "path") return GraphKind::kPath;
  if (name == "two_stars") return GraphKind::kTwoStars;
  if (name == "random_connected") return GraphKind::kRandomConnected;
  if (name == "random_regular") return GraphKind::kRandomRegular;
  if (name == "fresh_random_each_tau") return GraphKind::kFreshRandomEachTau;
  throw ConfigError("unknown graph kind: " + name);
}

std::string graph_kind_name(GraphKind kind) {
  switch (kind) {
    case GraphKind::kComplete: return "complete";
    case GraphKind::kRing: return "ring";
    case GraphKind::kStar: return "star";
    case GraphKind::kPath: return "path";
    case GraphKind::kTwoStars: return "two_stars";
    case GraphKind::kRandomConnected: return "random_connected";
    case GraphKind::kRandomRegular: return "random_regular";
    case GraphKind::kFreshRandomEachTau: return "fresh_random_each_tau";
  }
  return "?";
}

namespace {

constexpr uint32_t kRetryCap = 1000;

StaticTopology gen_er_connected(uint32_t n, double p, uint64_t seed, uint64_t snapshot_idx) {
  if (n < 2) throw ConfigError("random graph needs n >= 2");
  if (!(p > 0.0) || p > 1.0) throw ConfigError("edge probability p must be in (0, 1]");
  for (uint32_t attempt = 0; attempt < kRetryCap; ++attempt) {
    Rng rng = derive_stream(seed, {stream::kGraph, snapshot_idx, attempt});
    std::vector<std::pair<uint32_t, uint32_t>> edges;
    for (uint32_t u = 0; u < n; ++u)
      for (uint32_t v = u + 1; v < n; ++v)
        if (rng.next_unit() < p) edges.emplace_back(u, v);
    StaticTopology g(n, edges);
    if (g.is_connected()) return g;
  }
  throw ConfigError("random_connected generation failed: no connected graph after " +
                    std::to_string(kRetryCap) + " attempts (p too small?)");
}

StaticTopology gen_regular(uint32_t n, uint32_t d, uint64_t seed) {
  if (n < 2 || d < 1 || d >= n) throw ConfigError("random_regular needs 1 <= d < n");
  if ((static_cast<uint64_t>(n) * d) % 2 != 0)
    throw ConfigError("random_regular needs n*d even");
  // Configuration model: pair up d stubs per node, retry until simple+connected.
  for (uint32_t attempt = 0; attempt < kRetryCap; ++attempt) {
    Rng rng = derive_stream(seed, {stream::kGraph, 0, attempt});
    std::vector<uint32_t> stubs;
    stubs.reserve(static_cast<size_t>(n) * d);
    for (uint32_t u = 0; u < n; ++u)
      for (uint32_t i = 0; i < d; ++i) stubs.push_back(u);
    for (size_t i = stubs.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(rng.next_below(i));
      std::swap(stubs[i - 1], stubs[j]);
    }
    std::set<std::pair<uint32_t, uint32_t>> edge_set;
    bool ok = true;
    for (size_t i = 0; i + 1 < stubs.size(); i += 2) {
      uint32_t u = stubs[i], v = stubs[i + 1];
      if (u == v || !edge_set.insert(std::minmax(u, v)).second) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    std::vector<std::pair<uint32_t, uint32_t>> edges(edge_set.begin(), edge_set.end());
    StaticTopology g(n, edges);
    if (g.is_connected()) return g;
  }
  throw ConfigError("random_regular generation failed after " + std::to_string(kRetryCap) +
                    " attempts");
}

DynamicTopology single(StaticTopology g) {
  std::vector<DynamicTopology::Snapshot> snaps;
  snaps.push_back({1, std::move(g)});
  return DynamicTopology(std::move(snaps), DynamicTopology::kTauInfinity);
}

}  // namespace

DynamicTopology generate(GraphKind kind, const GraphParams& params, uint64_t rng_seed) {
  const uint32_t n = params.n;
  switch (kind) {
    case GraphKind::kComplete: {
      if (n < 2) throw ConfigError("complete graph needs n >= 2");
      std::vector<std::pair<uint32_t, uint32_t>> edges;
      for (uint32_t u = 0; u < n; ++u)
        for (uint32_t v = u + 1; v < n; ++v) edges.emplace_back(u, v);
      return single(StaticTopology(n, edges));
    }
    case GraphKind::kRing: {
      if (n < 3) throw ConfigError("ring needs n >= 3");
      std::vector<std::pair<uint32_t, uint32_t>> edges;
      for (uint32_t u = 0; u < n; ++u) edges.emplace_back(u, (u + 1) % n);
      return single(StaticTopology(n, edges));
    }
    case GraphKind::kStar: {
      if (n < 2) throw ConfigError("star needs n >= 2");
      std::vector<std::pair<uint32_t, uint32_t>> edges;
      for (uint32_t v = 1; v < n; ++v) edges.emplace_back(0, v);
      return single(StaticTopology(n, edges));
    }
    case GraphKind::kPath: {
      if (n < 2) throw ConfigError("path needs n >= 2");
      std::vector<std::pair<uint32_t, uint32_t>> edges;
      for (uint32_t u = 0; u + 1 < n; ++u) edges.emplace_back(u, u + 1);
      return single(StaticTopology(n, edges));
    }
    case GraphKind::kTwoStars: {
      // Centers 0 and 1 joined by an edge, params.delta leaves each.
      const uint32_t d = params.delta;
      if (d < 2) throw ConfigError("two_stars needs delta >= 2");
      const uint32_t total = 2 * d + 2;
      std::vector<std::pair<uint32_t, uint32_t>> edges;
      edges.emplace_back(0, 1);
      for (uint32_t i = 0; i < d; ++i) {
        edges.emplace_back(0, 2 + i);
        edges.emplace_back(1, 2 + d + i);
      }
      return single(StaticTopology(total, edges));
    }
    case GraphKind::kRandomConnected:
      return single(gen_er_connected(n, params.p, rng_seed, 0));
    case GraphKind::kRandomRegular:
      return single(gen_regular(n, params.degree, rng_seed));
    case GraphKind::kFreshRandomEachTau: {
      if (params.tau == DynamicTopology::kTauInfinity || params.tau == 0)
        throw ConfigError("fresh_random_each_tau needs a finite tau >= 1");
      if (params.rounds < 1) throw ConfigError("fresh_random_each_tau needs rounds >= 1");
      std::vector<DynamicTopology::Snapshot> snaps;
      uint64_t idx = 0;
      for (uint64_t r = 1; r <= params.rounds; r += params.tau, ++idx)
        snaps.push_back({r, gen_er_connected(n, params.p, rng_seed, idx)});
      return DynamicTopology(std::move(snaps), params.tau);
    }
  }
  throw ConfigError("unhandled graph kind");
}

DynamicTopology load_graph_json(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("graph file is not valid JSON: ") + e.what());
  }
  if (!j.contains("n") || !j.contains("snapshots"))
    throw ConfigError("graph file needs fields: n, tau, snapshots");
  uint32_t n = j.at("n").get<uint32_t>();
  uint64_t tau = DynamicTopology::kTauInfinity;
  if (j.contains("tau")) {
    if (j["tau"].is_string()) {
      if (j["tau"].get<std::string>() != "inf")
        throw ConfigError("tau must be an integer or \"inf\"");
    } else {
      tau = j["tau"].get<uint64_t>();
    }
  }
  std::vector<DynamicTopology::Snapshot> snaps;
  for (const auto& js : j.at("snapshots")) {
    uint64_t from = js.at("from_round").get<uint64_t>();
    std::vector<std::pair<uint32_t, uint32_t>> edges;
    for (const auto& je : js.at("edges"))
      edges.emplace_back(je.at(0).get<uint32_t>(), je.at(1).get<uint32_t>());
    snaps.push_back({from, StaticTopology(n, edges)});
  }
  DynamicTopology d(std::move(snaps), tau);
  StabilityReport rep = validate_stability(d);
  if (!rep.ok) {
    std::string msg = "graph file violates stability invariants:";
    for (const auto& r : rep.reasons) msg += "\n  " + r;
    throw ConfigError(msg);
  }
  return d;
}

DynamicTopology load_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open graph file: " + path);
  return load_graph_json(in);
}

void save_graph_json(const DynamicTopology& d, std::ostream& out) {
  nlohmann::json j;
  j["n"] = d.n();
  if (d.tau() == DynamicTopology::kTauInfinity)
    j["tau"] = "inf";
  else
    j["tau"] = d.tau();
  j["snapshots"] = nlohmann::json::array();
  for (size_t i = 0; i < d.snapshot_count(); ++i) {
    nlohmann::json js;
    js["from_round"] = d.snapshot(i).from_round;
    js["edges"] = nlohmann::json::array();
    for (auto [u, v] : d.snapshot(i).graph.edges()) js["edges"].push_back({u, v});
    j["snapshots"].push_back(std::move(js));
  }
  out << j.dump(2) << "\n";
}

void save_graph_file(const DynamicTopology& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file: " + path);
  save_graph_json(d, out);
}

}  // namespace mtm
