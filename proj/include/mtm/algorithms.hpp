#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "mtm/engine.hpp"
#include "mtm/randomness.hpp"
#include "mtm/transfer.hpp"

namespace mtm {

/// Runs the transfer subroutine between the endpoints of a connection and
/// applies the result, charging the ledger. Shared by the behaviors below.
void run_transfer_on_connection(World& world, Connection& conn, double epsilon);

/// b = 0 baseline: every node flips a fair coin each round; senders propose
/// to a uniformly random neighbor, receivers listen. Connections run the
/// transfer subroutine.
class BlindMatchBehavior : public NodeBehavior {
 public:
  explicit BlindMatchBehavior(double transfer_epsilon) : eps_(transfer_epsilon) {}
  Tag choose_tag(const World&, NodeId) override;
  Action choose_action(const World&, NodeId, const NodeView&) override;
  void on_connect(World&, Connection&) override;

 private:
  double eps_;
};

/// b = 1 with a shared random string: each node advertises the parity of the
/// per-token shared bits of its set (empty set advertises 0). Tag-1 nodes
/// with a tag-0 neighbor propose to one such neighbor selected through the
/// shared string; connections run the transfer subroutine. Past the string's
/// group supply the group index wraps to 1 (wraps are counted).
class SharedBitBehavior : public NodeBehavior {
 public:
  SharedBitBehavior(SharedString shared, double transfer_epsilon)
      : shared_(std::move(shared)), eps_(transfer_epsilon) {}
  Tag choose_tag(const World&, NodeId) override;
  Action choose_action(const World&, NodeId, const NodeView&) override;
  void on_connect(World&, Connection&) override;
  void export_extras(std::map<std::string, std::string>&) const override;

  /// Tag bit a node with token set `s` advertises in `round` under `shared`:
  /// sum of per-token bits mod 2, 0 for the empty set.
  static int tag_bit(const SharedString& shared, uint64_t group, const TokenSet& s);

 private:
  uint64_t group_for_round(uint64_t round);
  SharedString shared_;
  double eps_;
  uint64_t wraps_ = 0;
};

/// b = 1 without shared randomness: odd rounds run SharedBit logic against
/// the string expanded from the node's current leader candidate's seed; even
/// rounds run a randomized min-UID convergence (coin-flip random meetings
/// exchanging candidate and seed payload, both sides keeping the minimum).
/// Once candidates converge every node expands the same string.
class SimSharedBitBehavior : public NodeBehavior {
 public:
  explicit SimSharedBitBehavior(double transfer_epsilon) : eps_(transfer_epsilon) {}
  void on_trial_start(World&) override;
  Tag choose_tag(const World&, NodeId) override;
  Action choose_action(const World&, NodeId, const NodeView&) override;
  void on_connect(World&, Connection&) override;
  void export_extras(std::map<std::string, std::string>&) const override;

  uint32_t candidate_uid(NodeId v) const { return nodes_[v].candidate_uid; }
  const Seed& candidate_seed(NodeId v) const { return nodes_[v].candidate_seed; }

 private:
  struct NodeState {
    uint32_t candidate_uid = 0;
    Seed candidate_seed{};
    SharedString string;  // expansion of candidate_seed
  };
  void adopt(NodeState& st, uint32_t uid, const Seed& seed, uint32_t N, uint64_t round);

  double eps_;
  std::vector<NodeState> nodes_;
  uint64_t last_adoption_round_ = 0;

 public:
  /// Control bits exchanged per even-round connection (uid + seed, both
  /// directions).
  static uint64_t exchange_bits(uint32_t N);
};

/// PPUSH rumor spreading: informed nodes advertise 1 and propose uniformly
/// to a 0-advertising neighbor; a connection delivers the rumor token.
class PpushBehavior : public NodeBehavior {
 public:
  explicit PpushBehavior(NodeId rumor_source) : source_(rumor_source) {}
  void on_trial_start(World&) override;
  Tag choose_tag(const World&, NodeId) override;
  Action choose_action(const World&, NodeId, const NodeView&) override;
  void on_connect(World&, Connection&) override;

 private:
  bool informed(const World& w, NodeId v) const { return w.tokens_of(v).contains(rumor_); }
  NodeId source_;
  uint32_t rumor_ = 0;
};

}  // namespace mtm
