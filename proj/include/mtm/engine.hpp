#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtm/errors.hpp"
#include "mtm/graph.hpp"
#include "mtm/rng.hpp"
#include "mtm/token_set.hpp"

namespace mtm {

using NodeId = uint32_t;

class World;
class NodeBehavior;
struct RoundOutcome;
RoundOutcome run_round(World& world, NodeBehavior& behavior, const StaticTopology& topo);

/// A b-bit advertising tag. Carrying the length makes the engine's
/// tag-length check meaningful even for all-zero tags.
struct Tag {
  uint64_t bits = 0;
  uint32_t len = 0;
  bool operator==(const Tag& o) const { return bits == o.bits && len == o.len; }
};

struct SimConfig {
  uint32_t n = 0;          // node count
  uint32_t N = 0;          // UID-space bound, power of 2, >= n
  uint32_t b = 1;          // tag length in bits
  uint32_t token_cap = 1;  // tokens per connection per round
  uint64_t bit_cap = 0;    // control bits per connection per round
  uint64_t max_rounds = 0;
  uint64_t rng_seed = 0;
  bool random_uids = false;  // random injection [n] -> [N] instead of uid = i+1

  void validate() const;  // throws ConfigError naming the violated field
};

/// Everything the engine owns about a running trial: UID assignment, token
/// sets, current round. Token sets change only through connections.
class World {
 public:
  World(const SimConfig& cfg, const std::vector<NodeId>& token_holders);

  const SimConfig& config() const { return cfg_; }
  uint32_t n() const { return cfg_.n; }
  uint32_t N() const { return cfg_.N; }
  uint32_t k() const { return k_; }
  uint64_t round() const { return round_; }

  uint32_t uid_of(NodeId v) const { return uid_[v]; }
  std::optional<NodeId> node_of_uid(uint32_t uid) const;
  const TokenSet& tokens_of(NodeId v) const { return tokens_[v]; }
  std::span<const TokenSet> all_tokens() const { return tokens_; }
  std::span<const uint32_t> uids() const { return uid_; }

  uint64_t potential() const;
  bool gossip_complete() const;

  /// Derived deterministic stream rooted at this trial's seed.
  Rng stream(uint64_t purpose, std::initializer_list<uint64_t> path) const;

 private:
  friend class Connection;
  friend RoundOutcome run_round(World&, NodeBehavior&, const StaticTopology&);

  SimConfig cfg_;
  uint32_t k_ = 0;
  uint64_t round_ = 0;
  std::vector<uint32_t> uid_;
  std::vector<TokenSet> tokens_;
};

struct NeighborInfo {
  NodeId node = 0;
  uint32_t uid = 0;
  Tag tag;
};

/// What a node sees after the scan: its own UID plus each current
/// neighbor's UID and advertised tag.
struct NodeView {
  NodeId me = 0;
  uint32_t my_uid = 0;
  std::vector<NeighborInfo> neighbors;  // ascending node id
};

struct Action {
  bool is_propose = false;
  NodeId target = 0;
  static Action listen() { return {}; }
  static Action propose(NodeId target) { return {true, target}; }
};

struct TokenMove {
  uint32_t token = 0;
  NodeId from = 0, to = 0;
};

/// Budget ledger for one connection. All communication inside on_connect
/// goes through here so the per-connection caps are hard-enforced.
class Connection {
 public:
  NodeId proposer() const { return proposer_; }
  NodeId acceptor() const { return acceptor_; }
  Rng& pair_rng() { return rng_; }

  void charge_bits(uint64_t bits);
  /// Moves a token from one endpoint to the other (no-op if already known).
  void move_token(NodeId from, uint32_t token);

  uint64_t bits_used() const { return bits_used_; }
  uint32_t tokens_moved() const { return tokens_moved_; }
  const std::vector<TokenMove>& moves() const { return moves_; }

 private:
  friend RoundOutcome run_round(World&, NodeBehavior&, const StaticTopology&);
  Connection(World& w, NodeId p, NodeId a, Rng rng)
      : world_(w), proposer_(p), acceptor_(a), rng_(rng) {}

  World& world_;
  NodeId proposer_, acceptor_;
  Rng rng_;
  uint64_t bits_used_ = 0;
  uint32_t tokens_moved_ = 0;
  std::vector<TokenMove> moves_;
};

/// Per-node algorithm logic, driven by the engine. One instance serves all
/// nodes of one trial; per-node state lives inside the behavior.
class NodeBehavior {
 public:
  virtual ~NodeBehavior() = default;
  virtual void on_trial_start(World& world) { (void)world; }
  virtual Tag choose_tag(const World& world, NodeId me) = 0;
  virtual Action choose_action(const World& world, NodeId me, const NodeView& view) = 0;
  virtual void on_connect(World& world, Connection& conn) = 0;
  virtual void export_extras(std::map<std::string, std::string>& out) const { (void)out; }
};

struct RoundOutcome {
  uint64_t round = 0;
  std::vector<Tag> tags;                             // per node
  std::vector<std::pair<NodeId, NodeId>> proposals;  // (proposer, target)
  std::vector<std::pair<NodeId, NodeId>> matching;   // (proposer, acceptor)
  std::vector<TokenMove> transfers;
  std::vector<uint64_t> bits_per_connection;         // parallel to matching
  uint64_t phi_after = 0;
};

/// The model's uniform acceptance rule. Each listener with at least one
/// incoming proposal accepts one uniformly at random from its own stream;
/// proposals aimed at nodes that proposed this round fail. Listeners are
/// processed in ascending node id, and every draw comes from the listener's
/// own stream, so the outcome is independent of processing order.
std::vector<std::pair<NodeId, NodeId>> resolve_connections(
    const std::vector<std::pair<NodeId, NodeId>>& proposals, const std::vector<bool>& is_listener,
    const std::function<Rng(NodeId)>& listener_stream);

struct TrialOptions {
  /// Completion predicate; the trial stops once it holds (checked after each
  /// round). Defaults to full gossip completion.
  std::function<bool(const World&)> stop;
  /// Track the first round where eps-gossip holds (requires k = n).
  std::optional<double> eps_track;
  /// Keep full per-round outcomes (replay/trace dumps).
  bool record_trace = false;
};

struct TrialRecord {
  uint32_t trial_index = 0;
  uint64_t rounds_run = 0;
  std::optional<uint64_t> completion_round;
  std::optional<uint64_t> eps_completion_round;
  bool dnf = false;
  uint64_t connections = 0;
  uint64_t bits_total = 0;
  uint64_t trace_hash = 0;
  uint64_t rounds_phi_positive = 0;
  uint64_t rounds_phi_decreased = 0;  // among rounds with phi > 0
  std::vector<std::pair<uint64_t, uint64_t>> phi_samples;  // (round, phi)
  std::map<std::string, std::string> extras;
  std::vector<RoundOutcome> trace;  // only when record_trace
};

/// Runs rounds 1..max_rounds or until the stop predicate holds. Reaching
/// max_rounds without completion is recorded as DNF, not an error.
TrialRecord run_trial(const SimConfig& cfg, NodeBehavior& behavior, const DynamicTopology& topo,
                      const std::vector<NodeId>& token_holders, const TrialOptions& opts);

}  // namespace mtm
