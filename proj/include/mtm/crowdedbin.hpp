#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "mtm/engine.hpp"

namespace mtm {

/// Which instance a global round simulates, and which round of that
/// instance it is. Rounds are grouped into simulation groups of log2(N)
/// rounds; round j of group i simulates round i of instance j.
struct ScheduleCoords {
  uint32_t instance = 0;       // 1 .. log2(N)
  uint64_t instance_round = 0; // 1-based within the instance
};

ScheduleCoords schedule_map(uint64_t global_round, uint32_t N);

/// Fixed schedule constants for one instance: blocks of (ell + log N)
/// rounds, gamma*log N blocks per bin, k_i bins per phase.
struct ScheduleShape {
  uint32_t log_n = 0;
  uint32_t ell = 0;             // beta * log N, bits per spelled tag
  uint64_t block_len = 0;       // ell + log N
  uint64_t blocks_per_bin = 0;  // gamma * log N
  uint64_t bin_len = 0;
  uint64_t phase_len = 0;       // k_i * bin_len
};

ScheduleShape schedule_shape(uint64_t k_i, uint32_t beta, uint32_t gamma, uint32_t N);

/// Rounds per phase of instance i; equals gamma*(beta+1)*k_i*log2(N)^2.
uint64_t phase_length(uint64_t k_i, uint32_t beta, uint32_t gamma, uint32_t N);

/// Position of an instance round inside the phase/bin/block nesting.
/// Offsets 1..ell spell tag bits; offsets ell+1..ell+logN run PPUSH.
struct InstancePosition {
  uint64_t phase = 0;   // 1-based
  uint64_t bin = 0;     // 1-based within the phase
  uint64_t block = 0;   // 1-based within the bin
  uint32_t offset = 0;  // 1-based within the block
  bool is_tag_bit = false;
  uint32_t segment_index = 0;  // TAG_BIT index or PPUSH_ROUND index, 1-based
};

InstancePosition instance_position(uint64_t instance_round, uint64_t k_i, uint32_t beta,
                                   uint32_t gamma, uint32_t N);

struct GoodConfig {
  bool good = false;
  std::optional<uint32_t> target_instance;  // smallest non-crowded instance
};

/// Oracle over a drawn configuration (one tag and one bin choice per
/// instance per token): tags must be unique, the target instance must exist,
/// and its estimate k_target must be at most 2k. A bin is crowded when at
/// least gamma*log2(N) distinct tags land in it.
GoodConfig is_good_configuration(std::span<const uint64_t> tags,
                                 std::span<const std::vector<uint32_t>> bin_choices, uint32_t k,
                                 uint32_t N, uint32_t beta, uint32_t gamma);

/// The b = 1, tau = infinity gossip behavior. Nodes run log2(N) parallel
/// instances with estimates k_i = 2^i, spell the tags they know bin by bin
/// over their advertising bits, run PPUSH for each block's token during the
/// block's trailing rounds, and upgrade their estimate on cross-instance
/// activity or on a crowded bin. A node only participates in whole phases;
/// upgrades triggered mid-phase take effect when the committed phase ends.
class CrowdedBinBehavior : public NodeBehavior {
 public:
  CrowdedBinBehavior(uint32_t beta, uint32_t gamma, uint32_t confidence = 1);

  void on_trial_start(World&) override;
  Tag choose_tag(const World&, NodeId) override;
  Action choose_action(const World&, NodeId, const NodeView&) override;
  void on_connect(World&, Connection&) override;
  void export_extras(std::map<std::string, std::string>&) const override;

  uint32_t estimate_of(NodeId v) const { return nodes_[v].est; }
  const GoodConfig& drawn_config() const { return config_; }

 private:
  struct NodeState {
    uint64_t own_tag = 0;  // 0 when the node starts without a token
    std::vector<uint32_t> bin_choice;               // per instance, 1-based bins
    std::vector<std::vector<std::vector<uint64_t>>> bins;  // [instance][bin] sorted tags
    std::map<uint64_t, uint32_t> owned;             // tag -> token uid in Q_u

    uint32_t est = 1;
    uint32_t pending = 1;  // deferred upgrade target, >= est
    bool committed = false;
    uint32_t committed_instance = 0;
    uint64_t commit_end_round = 0;  // global round of the committed phase's last round

    uint32_t listen_instance = 1;
    uint64_t stage_bin = 0;  // 0 = no staging window open
    uint64_t stage_end_round = 0;
    std::vector<uint64_t> staged;
    std::vector<uint64_t> acc;  // per-neighbor tag-bit shift registers

    uint64_t last_processed = 0;
    uint32_t est_warnings = 0;  // crowded bin seen at the maximum estimate
  };

  void process_round_start(const World& world, NodeId me);
  uint64_t spelled_tag(const NodeState& st, uint32_t instance, uint64_t bin, uint64_t block) const;
  bool informed_for_block(const NodeState& st, uint32_t instance, uint64_t bin,
                          uint64_t block) const;
  void raise_pending(NodeState& st, uint32_t target);

  uint32_t beta_, gamma_;
  uint32_t log_n_ = 0;   // log2 N = number of instances
  uint32_t ell_ = 0;
  uint32_t crowd_threshold_ = 0;  // gamma * log2 N
  std::vector<NodeState> nodes_;
  GoodConfig config_;
};

}  // namespace mtm
