#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "mtm/errors.hpp"

namespace mtm {

/// Exact rational, used for vertex expansion values like 1/2 or 1/4.
struct Fraction {
  int64_t num = 0;
  int64_t den = 1;

  static Fraction of(int64_t n, int64_t d) {
    int64_t g = std::gcd(n, d);
    if (g == 0) g = 1;
    return Fraction{n / g, d / g};
  }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Fraction& o) const { return num == o.num && den == o.den; }
  bool operator<(const Fraction& o) const { return num * o.den < o.num * den; }
};

/// One static snapshot of the network topology. Construction rejects
/// self-loops, duplicate edges, and out-of-range endpoints; connectivity is
/// checked separately (generators and the file loader require it, analysis
/// ops raise on disconnected input).
class StaticTopology {
 public:
  StaticTopology(uint32_t n, const std::vector<std::pair<uint32_t, uint32_t>>& edges);

  uint32_t n() const { return n_; }
  uint64_t edge_count() const { return edge_count_; }
  const std::vector<uint32_t>& neighbors(uint32_t v) const { return adj_[v]; }
  uint32_t degree(uint32_t v) const { return static_cast<uint32_t>(adj_[v].size()); }
  bool has_edge(uint32_t u, uint32_t v) const;
  bool is_connected() const;
  std::vector<std::pair<uint32_t, uint32_t>> edges() const;

 private:
  uint32_t n_ = 0;
  uint64_t edge_count_ = 0;
  std::vector<std::vector<uint32_t>> adj_;
};

/// A sequence of static snapshots obeying a stability factor tau.
class DynamicTopology {
 public:
  static constexpr uint64_t kTauInfinity = std::numeric_limits<uint64_t>::max();

  struct Snapshot {
    uint64_t from_round;
    StaticTopology graph;
  };

  /// Enforces ordering invariants (first from_round = 1, strictly increasing,
  /// all snapshots share n). Gap-vs-tau and connectivity are reported by
  /// validate_stability so that violating instances remain constructible in
  /// tests.
  DynamicTopology(std::vector<Snapshot> snapshots, uint64_t tau);

  uint64_t tau() const { return tau_; }
  size_t snapshot_count() const { return snapshots_.size(); }
  const Snapshot& snapshot(size_t i) const { return snapshots_[i]; }
  uint32_t n() const { return snapshots_.front().graph.n(); }

  /// Topology in force at round r >= 1.
  const StaticTopology& at_round(uint64_t r) const;

 private:
  std::vector<Snapshot> snapshots_;
  uint64_t tau_;
};

struct StabilityReport {
  bool ok = true;
  std::vector<std::string> reasons;
};

/// True iff consecutive snapshots are at least tau rounds apart and every
/// snapshot is connected. Never throws; failures come back as reasons.
StabilityReport validate_stability(const DynamicTopology& d);

/// Exact vertex expansion: min over non-empty S with |S| <= n/2 of
/// |boundary(S)|/|S|. Exhaustive subset enumeration, limited to n <= 20.
Fraction vertex_expansion_exact(const StaticTopology& g);

/// Sampled upper bound on the vertex expansion for graphs too large for the
/// exact computation. Samples uniform subsets and BFS-grown subsets; the
/// result is the min alpha(S) over samples, so it can only overestimate.
double vertex_expansion_estimate(const StaticTopology& g, uint32_t trials, uint64_t rng_seed);

uint32_t max_degree(const StaticTopology& g);

/// Max over pairs of shortest-path length; BFS from every node.
uint32_t diameter(const StaticTopology& g);

enum class GraphKind {
  kComplete,
  kRing,
  kStar,
  kPath,
  kTwoStars,
  kRandomConnected,
  kRandomRegular,
  kFreshRandomEachTau,
};

GraphKind parse_graph_kind(const std::string& name);
std::string graph_kind_name(GraphKind kind);

struct GraphParams {
  uint32_t n = 0;
  double p = 0.0;       // edge probability for random kinds
  uint32_t degree = 0;  // random_regular
  uint32_t delta = 0;   // two_stars: leaves per center
  uint64_t tau = DynamicTopology::kTauInfinity;
  uint64_t rounds = 1;  // horizon for fresh_random_each_tau
};

/// Builds a DynamicTopology. Static kinds yield one snapshot with
/// tau = infinity. fresh_random_each_tau materializes an independent
/// connected G(n,p) snapshot every tau rounds up to params.rounds, all
/// derived deterministically from the seed.
DynamicTopology generate(GraphKind kind, const GraphParams& params, uint64_t rng_seed);

/// Graph file format:
///   {"n": int, "tau": int|"inf",
///    "snapshots": [{"from_round": int, "edges": [[u,v],...]}]}
DynamicTopology load_graph_json(std::istream& in);
DynamicTopology load_graph_file(const std::string& path);
void save_graph_json(const DynamicTopology& d, std::ostream& out);
void save_graph_file(const DynamicTopology& d, const std::string& path);

}  // namespace mtm
