#include "mtm/crowdedbin.hpp"

#include <algorithm>
#include <bit>
#include <set>

namespace mtm {

namespace {

uint32_t log2_exact(uint32_t N) {
  if (N < 2 || !std::has_single_bit(N)) throw ConfigError("crowdedbin: N must be a power of 2");
  return static_cast<uint32_t>(std::countr_zero(N));
}

}  // namespace

ScheduleCoords schedule_map(uint64_t global_round, uint32_t N) {
  if (global_round < 1) throw ConfigError("schedule_map: rounds start at 1");
  const uint32_t L = log2_exact(N);
  ScheduleCoords c;
  c.instance = static_cast<uint32_t>((global_round - 1) % L) + 1;
  c.instance_round = (global_round - 1) / L + 1;
  return c;
}

ScheduleShape schedule_shape(uint64_t k_i, uint32_t beta, uint32_t gamma, uint32_t N) {
  ScheduleShape s;
  s.log_n = log2_exact(N);
  s.ell = beta * s.log_n;
  s.block_len = s.ell + s.log_n;
  s.blocks_per_bin = static_cast<uint64_t>(gamma) * s.log_n;
  s.bin_len = s.blocks_per_bin * s.block_len;
  s.phase_len = k_i * s.bin_len;
  return s;
}

uint64_t phase_length(uint64_t k_i, uint32_t beta, uint32_t gamma, uint32_t N) {
  return schedule_shape(k_i, beta, gamma, N).phase_len;
}

InstancePosition instance_position(uint64_t instance_round, uint64_t k_i, uint32_t beta,
                                   uint32_t gamma, uint32_t N) {
  if (instance_round < 1) throw ConfigError("instance_position: rounds start at 1");
  const ScheduleShape s = schedule_shape(k_i, beta, gamma, N);
  InstancePosition p;
  p.phase = (instance_round - 1) / s.phase_len + 1;
  const uint64_t in_phase = (instance_round - 1) % s.phase_len;
  p.bin = in_phase / s.bin_len + 1;
  const uint64_t in_bin = in_phase % s.bin_len;
  p.block = in_bin / s.block_len + 1;
  p.offset = static_cast<uint32_t>(in_bin % s.block_len) + 1;
  p.is_tag_bit = p.offset <= s.ell;
  p.segment_index = p.is_tag_bit ? p.offset : p.offset - s.ell;
  return p;
}

GoodConfig is_good_configuration(std::span<const uint64_t> tags,
                                 std::span<const std::vector<uint32_t>> bin_choices, uint32_t k,
                                 uint32_t N, uint32_t beta, uint32_t gamma) {
  if (tags.size() != k || bin_choices.size() != k)
    throw ConfigError("is_good_configuration: need one tag and one bin vector per token");
  const uint32_t L = log2_exact(N);
  const uint64_t crowd = static_cast<uint64_t>(gamma) * L;

  bool unique = true;
  {
    std::set<uint64_t> seen;
    for (uint64_t t : tags)
      if (!seen.insert(t).second) unique = false;
  }

  GoodConfig res;
  for (uint32_t i = 1; i <= L && !res.target_instance; ++i) {
    const uint64_t k_i = 1ULL << i;
    std::map<uint32_t, std::set<uint64_t>> bin_tags;
    for (uint32_t t = 0; t < k; ++t) {
      if (bin_choices[t].size() != L)
        throw ConfigError("is_good_configuration: token needs a bin choice per instance");
      const uint32_t b = bin_choices[t][i - 1];
      if (b < 1 || b > k_i) throw ConfigError("is_good_configuration: bin choice out of range");
      bin_tags[b].insert(tags[t]);
    }
    bool crowded = false;
    for (const auto& [_, s] : bin_tags)
      if (s.size() >= crowd) crowded = true;
    if (!crowded) res.target_instance = i;
  }
  res.good = unique && res.target_instance && (1ULL << *res.target_instance) <= 2ULL * k;
  return res;
}

CrowdedBinBehavior::CrowdedBinBehavior(uint32_t beta, uint32_t gamma, uint32_t confidence)
    : beta_(beta), gamma_(gamma) {
  if (beta < confidence + 3)
    throw ConfigError("crowdedbin: beta must be >= confidence + 3 (got beta=" +
                      std::to_string(beta) + ", c=" + std::to_string(confidence) + ")");
  if (gamma < 3 * confidence + 9)
    throw ConfigError("crowdedbin: gamma must be >= 3*confidence + 9 (got gamma=" +
                      std::to_string(gamma) + ", c=" + std::to_string(confidence) + ")");
}

void CrowdedBinBehavior::on_trial_start(World& world) {
  if (world.config().b != 1) throw ConfigError("crowdedbin needs tag length b = 1");
  log2_exact(world.N());
  log_n_ = static_cast<uint32_t>(std::countr_zero(world.N()));
  ell_ = beta_ * log_n_;
  if (ell_ > 63) throw ConfigError("crowdedbin: beta*log2(N) beyond 63 bits is unsupported");
  crowd_threshold_ = gamma_ * log_n_;

  nodes_.assign(world.n(), NodeState{});
  // Tag space {1 .. N^beta - 1}: a tag must fit the ell advertised bits and
  // an all-zero block stays distinguishable from every real tag.
  const uint64_t tag_space = (1ULL << ell_) - 1;

  std::vector<uint64_t> cfg_tags;
  std::vector<std::vector<uint32_t>> cfg_bins;
  for (NodeId v = 0; v < world.n(); ++v) {
    NodeState& st = nodes_[v];
    st.bins.resize(log_n_);
    for (uint32_t i = 1; i <= log_n_; ++i) st.bins[i - 1].resize(1ULL << i);
    st.acc.assign(world.n(), 0);
    if (!world.tokens_of(v).empty()) {
      Rng tag_rng = world.stream(stream::kTagDraw, {v});
      st.own_tag = 1 + tag_rng.next_below(tag_space);
      st.bin_choice.resize(log_n_);
      Rng bin_rng = world.stream(stream::kBinDraw, {v});
      for (uint32_t i = 1; i <= log_n_; ++i) {
        st.bin_choice[i - 1] = 1 + static_cast<uint32_t>(bin_rng.next_below(1ULL << i));
        st.bins[i - 1][st.bin_choice[i - 1] - 1].push_back(st.own_tag);
      }
      st.owned[st.own_tag] = world.uid_of(v);
      cfg_tags.push_back(st.own_tag);
      cfg_bins.push_back(st.bin_choice);
    }
  }
  config_ = is_good_configuration(cfg_tags, cfg_bins, static_cast<uint32_t>(cfg_tags.size()),
                                  world.N(), beta_, gamma_);
}

uint64_t CrowdedBinBehavior::spelled_tag(const NodeState& st, uint32_t instance, uint64_t bin,
                                         uint64_t block) const {
  const auto& tags = st.bins[instance - 1][bin - 1];
  if (block > tags.size()) return 0;  // all-zero block: nothing to spell here
  return tags[block - 1];
}

bool CrowdedBinBehavior::informed_for_block(const NodeState& st, uint32_t instance, uint64_t bin,
                                            uint64_t block) const {
  const uint64_t t = spelled_tag(st, instance, bin, block);
  return t != 0 && st.owned.count(t) > 0;
}

void CrowdedBinBehavior::raise_pending(NodeState& st, uint32_t target) {
  if (target > log_n_) {
    ++st.est_warnings;  // evidence beyond the largest estimate; stays unchanged
    return;
  }
  st.pending = std::max(st.pending, target);
}

void CrowdedBinBehavior::process_round_start(const World& world, NodeId me) {
  NodeState& st = nodes_[me];
  const uint64_t g = world.round();
  if (st.last_processed == g) return;
  st.last_processed = g;

  const ScheduleCoords c = schedule_map(g, world.N());
  const ScheduleShape shape = schedule_shape(1ULL << c.instance, beta_, gamma_, world.N());

  // Finished bins merge their staged tags, then count toward crowding.
  if (st.stage_bin != 0 && g > st.stage_end_round) {
    auto& set = st.bins[st.listen_instance - 1][st.stage_bin - 1];
    for (uint64_t t : st.staged) {
      auto it = std::lower_bound(set.begin(), set.end(), t);
      if (it == set.end() || *it != t) set.insert(it, t);
    }
    st.staged.clear();
    st.stage_bin = 0;
    if (st.listen_instance == st.est && set.size() >= crowd_threshold_) {
      if (st.est == log_n_)
        ++st.est_warnings;
      else
        raise_pending(st, st.est + 1);
    }
  }

  // A committed phase that ended releases the node and applies upgrades.
  if (st.committed && g > st.commit_end_round) {
    st.committed = false;
    st.est = std::max(st.est, st.pending);
    st.pending = st.est;
  }
  if (!st.committed && st.pending > st.est) {
    st.est = st.pending;
  }

  // Attention follows the committed instance, otherwise the estimate.
  const uint32_t target = st.committed ? st.committed_instance : st.est;
  if (st.listen_instance != target) {
    st.listen_instance = target;
    st.stage_bin = 0;
    st.staged.clear();
  }

  if (c.instance == st.listen_instance) {
    const InstancePosition pos =
        instance_position(c.instance_round, 1ULL << c.instance, beta_, gamma_, world.N());
    // Joining an instance waits for its next phase boundary.
    if (!st.committed && st.est == c.instance && pos.bin == 1 && pos.block == 1 &&
        pos.offset == 1) {
      st.committed = true;
      st.committed_instance = c.instance;
      st.commit_end_round = g + (shape.phase_len - 1) * log_n_;
    }
    // A staging window opens only at a bin boundary, so every block in it is
    // heard from its first bit.
    if (pos.block == 1 && pos.offset == 1) {
      st.stage_bin = pos.bin;
      st.stage_end_round = g + (shape.bin_len - 1) * log_n_;
      st.staged.clear();
    }
  }
}

Tag CrowdedBinBehavior::choose_tag(const World& world, NodeId me) {
  process_round_start(world, me);
  const NodeState& st = nodes_[me];
  const ScheduleCoords c = schedule_map(world.round(), world.N());
  if (!st.committed || c.instance != st.committed_instance) return Tag{0, 1};
  const InstancePosition pos =
      instance_position(c.instance_round, 1ULL << c.instance, beta_, gamma_, world.N());
  if (pos.is_tag_bit) {
    const uint64_t t = spelled_tag(st, c.instance, pos.bin, pos.block);
    const uint64_t bit = (t >> (ell_ - pos.offset)) & 1;  // MSB first
    return Tag{bit, 1};
  }
  return Tag{informed_for_block(st, c.instance, pos.bin, pos.block) ? 1ULL : 0ULL, 1};
}

Action CrowdedBinBehavior::choose_action(const World& world, NodeId me, const NodeView& view) {
  process_round_start(world, me);
  NodeState& st = nodes_[me];
  const ScheduleCoords c = schedule_map(world.round(), world.N());
  const InstancePosition pos =
      instance_position(c.instance_round, 1ULL << c.instance, beta_, gamma_, world.N());

  // Cross-instance activity: any advertised 1 on a larger instance is
  // evidence that someone upgraded past us.
  if (c.instance > std::max(st.est, st.pending)) {
    for (const NeighborInfo& nb : view.neighbors) {
      if (nb.tag.bits != 0) {
        raise_pending(st, c.instance);
        break;
      }
    }
  }

  // Tag collection for the bin we are listening to.
  if (c.instance == st.listen_instance && st.stage_bin == pos.bin && pos.is_tag_bit) {
    if (pos.offset == 1)
      for (const NeighborInfo& nb : view.neighbors) st.acc[nb.node] = 0;
    for (const NeighborInfo& nb : view.neighbors)
      st.acc[nb.node] = (st.acc[nb.node] << 1) | nb.tag.bits;
    if (pos.offset == ell_) {
      for (const NeighborInfo& nb : view.neighbors) {
        const uint64_t t = st.acc[nb.node];
        if (t != 0 && !std::count(st.staged.begin(), st.staged.end(), t)) st.staged.push_back(t);
      }
    }
  }

  if (pos.is_tag_bit) return Action::listen();  // no connections while spelling

  // PPUSH rounds: informed participants push the block's token; everyone
  // else (uninformed participants and other instances' nodes) may accept.
  if (st.committed && c.instance == st.committed_instance &&
      informed_for_block(st, c.instance, pos.bin, pos.block)) {
    std::vector<NodeId> cands;
    for (const NeighborInfo& nb : view.neighbors)
      if (nb.tag.bits == 0) cands.push_back(nb.node);
    if (cands.empty()) return Action::listen();
    Rng rng = world.stream(stream::kTarget, {world.round(), me});
    return Action::propose(cands[rng.next_below(cands.size())]);
  }
  return Action::listen();
}

void CrowdedBinBehavior::on_connect(World& world, Connection& conn) {
  const ScheduleCoords c = schedule_map(world.round(), world.N());
  const InstancePosition pos =
      instance_position(c.instance_round, 1ULL << c.instance, beta_, gamma_, world.N());
  if (pos.is_tag_bit) throw SimError("crowdedbin: connection during a tag-spelling round");
  NodeState& sp = nodes_[conn.proposer()];
  const uint64_t t = spelled_tag(sp, c.instance, pos.bin, pos.block);
  auto it = sp.owned.find(t);
  if (t == 0 || it == sp.owned.end())
    throw SimError("crowdedbin: proposer is not informed for its block");
  conn.charge_bits(ell_);  // the tag label rides along with the token
  conn.move_token(conn.proposer(), it->second);
  nodes_[conn.acceptor()].owned[t] = it->second;
}

void CrowdedBinBehavior::export_extras(std::map<std::string, std::string>& out) const {
  uint32_t max_est = 0;
  uint32_t warnings = 0;
  for (const NodeState& st : nodes_) {
    max_est = std::max(max_est, st.est);
    warnings += st.est_warnings;
  }
  out["cb_good"] = config_.good ? "1" : "0";
  out["cb_target_instance"] =
      config_.target_instance ? std::to_string(*config_.target_instance) : "";
  out["cb_max_est"] = std::to_string(max_est);
  out["cb_est_warnings"] = std::to_string(warnings);
}

}  // namespace mtm
