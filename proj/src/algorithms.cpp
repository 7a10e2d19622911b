#include "mtm/algorithms.hpp"

#include <algorithm>

namespace mtm {

namespace {

uint32_t ceil_log2_u32(uint32_t x) {
  uint32_t b = 0;
  while ((1ull << b) < x) ++b;
  return b;
}

// Uniform pick among view neighbors satisfying pred, from the node's own
// stream. Returns listen() when none qualify.
template <typename Pred>
Action propose_uniform(const World& world, NodeId me, const NodeView& view, uint64_t purpose,
                       Pred&& pred) {
  std::vector<NodeId> cands;
  for (const NeighborInfo& nb : view.neighbors)
    if (pred(nb)) cands.push_back(nb.node);
  if (cands.empty()) return Action::listen();
  Rng rng = world.stream(purpose, {world.round(), me});
  return Action::propose(cands[rng.next_below(cands.size())]);
}

}  // namespace

void run_transfer_on_connection(World& world, Connection& conn, double epsilon) {
  const NodeId p = conn.proposer(), a = conn.acceptor();
  TransferResult res =
      transfer(world.tokens_of(p), world.tokens_of(a), epsilon, world.N(), conn.pair_rng());
  conn.charge_bits(res.bits_used);
  if (res.outcome == TransferOutcome::kAToB)
    conn.move_token(p, res.token);
  else if (res.outcome == TransferOutcome::kBToA)
    conn.move_token(a, res.token);
}

// --- BlindMatch ---

Tag BlindMatchBehavior::choose_tag(const World& world, NodeId) {
  return Tag{0, world.config().b};  // tags carry nothing; b is usually 0 here
}

Action BlindMatchBehavior::choose_action(const World& world, NodeId me, const NodeView& view) {
  Rng coin = world.stream(stream::kCoin, {world.round(), me});
  if (!coin.next_bit()) return Action::listen();  // receiver
  return propose_uniform(world, me, view, stream::kTarget, [](const NeighborInfo&) { return true; });
}

void BlindMatchBehavior::on_connect(World& world, Connection& conn) {
  run_transfer_on_connection(world, conn, eps_);
}

// --- SharedBit ---

int SharedBitBehavior::tag_bit(const SharedString& shared, uint64_t group, const TokenSet& s) {
  int parity = 0;
  for (uint32_t t : s) parity ^= shared.token_bit(group, t);
  return parity;
}

uint64_t SharedBitBehavior::group_for_round(uint64_t round) {
  if (round > shared_.groups()) {
    wraps_ = (round - 1) / shared_.groups();
    return ((round - 1) % shared_.groups()) + 1;
  }
  return round;
}

Tag SharedBitBehavior::choose_tag(const World& world, NodeId me) {
  const int bit = tag_bit(shared_, group_for_round(world.round()), world.tokens_of(me));
  return Tag{static_cast<uint64_t>(bit), world.config().b};
}

Action SharedBitBehavior::choose_action(const World& world, NodeId me, const NodeView& view) {
  const uint64_t group = group_for_round(world.round());
  if (tag_bit(shared_, group, world.tokens_of(me)) == 0) return Action::listen();
  // Tag-0 neighbors in ascending UID order; the shared bits pick the index.
  std::vector<std::pair<uint32_t, NodeId>> cands;
  for (const NeighborInfo& nb : view.neighbors)
    if (nb.tag.bits == 0) cands.emplace_back(nb.uid, nb.node);
  if (cands.empty()) return Action::listen();
  std::sort(cands.begin(), cands.end());
  const uint32_t idx = shared_.proposal_choice(group, world.uid_of(me),
                                               static_cast<uint32_t>(cands.size()));
  return Action::propose(cands[idx].second);
}

void SharedBitBehavior::on_connect(World& world, Connection& conn) {
  run_transfer_on_connection(world, conn, eps_);
}

void SharedBitBehavior::export_extras(std::map<std::string, std::string>& out) const {
  out["sb_wraps"] = std::to_string(wraps_);
}

// --- SimSharedBit ---

uint64_t SimSharedBitBehavior::exchange_bits(uint32_t N) {
  return 2ULL * (ceil_log2_u32(N) + Seed::kBits);
}

void SimSharedBitBehavior::on_trial_start(World& world) {
  nodes_.clear();
  nodes_.reserve(world.n());
  for (NodeId v = 0; v < world.n(); ++v) {
    Rng rng = world.stream(stream::kSeedDraw, {v});
    NodeState st;
    st.candidate_uid = world.uid_of(v);
    st.candidate_seed = Seed::random(rng);
    st.string = SharedString::from_seed(st.candidate_seed, world.N());
    nodes_.push_back(std::move(st));
  }
  if (exchange_bits(world.N()) > world.config().bit_cap)
    throw ConfigError("simsharedbit: candidate exchange does not fit the bit_cap");
}

void SimSharedBitBehavior::adopt(NodeState& st, uint32_t uid, const Seed& seed, uint32_t N,
                                 uint64_t round) {
  if (uid > st.candidate_uid) throw SimError("simsharedbit: candidate uid would increase");
  if (uid == st.candidate_uid) return;
  st.candidate_uid = uid;
  st.candidate_seed = seed;
  st.string = SharedString::from_seed(seed, N);
  last_adoption_round_ = std::max(last_adoption_round_, round);
}

Tag SimSharedBitBehavior::choose_tag(const World& world, NodeId me) {
  const uint64_t r = world.round();
  if (r % 2 == 0) return Tag{0, world.config().b};  // convergence rounds carry no tag info
  const NodeState& st = nodes_[me];
  const uint64_t sb_round = (r + 1) / 2;
  const uint64_t group = ((sb_round - 1) % st.string.groups()) + 1;
  const int bit = SharedBitBehavior::tag_bit(st.string, group, world.tokens_of(me));
  return Tag{static_cast<uint64_t>(bit), world.config().b};
}

Action SimSharedBitBehavior::choose_action(const World& world, NodeId me, const NodeView& view) {
  const uint64_t r = world.round();
  if (r % 2 == 0) {
    // Random meetings, as in BlindMatch, to spread the minimum candidate.
    Rng coin = world.stream(stream::kCoin, {r, me});
    if (!coin.next_bit()) return Action::listen();
    return propose_uniform(world, me, view, stream::kTarget,
                           [](const NeighborInfo&) { return true; });
  }
  const NodeState& st = nodes_[me];
  const uint64_t sb_round = (r + 1) / 2;
  const uint64_t group = ((sb_round - 1) % st.string.groups()) + 1;
  if (SharedBitBehavior::tag_bit(st.string, group, world.tokens_of(me)) == 0)
    return Action::listen();
  std::vector<std::pair<uint32_t, NodeId>> cands;
  for (const NeighborInfo& nb : view.neighbors)
    if (nb.tag.bits == 0) cands.emplace_back(nb.uid, nb.node);
  if (cands.empty()) return Action::listen();
  std::sort(cands.begin(), cands.end());
  const uint32_t idx =
      st.string.proposal_choice(group, world.uid_of(me), static_cast<uint32_t>(cands.size()));
  return Action::propose(cands[idx].second);
}

void SimSharedBitBehavior::on_connect(World& world, Connection& conn) {
  if (world.round() % 2 == 0) {
    conn.charge_bits(exchange_bits(world.N()));
    NodeState& sp = nodes_[conn.proposer()];
    NodeState& sa = nodes_[conn.acceptor()];
    const bool p_smaller = sp.candidate_uid < sa.candidate_uid;
    const NodeState& winner = p_smaller ? sp : sa;
    const uint32_t uid = winner.candidate_uid;
    const Seed seed = winner.candidate_seed;
    adopt(p_smaller ? sa : sp, uid, seed, world.N(), world.round());
    return;
  }
  run_transfer_on_connection(world, conn, eps_);
}

void SimSharedBitBehavior::export_extras(std::map<std::string, std::string>& out) const {
  bool converged = true;
  uint32_t min_uid = nodes_.empty() ? 0 : nodes_[0].candidate_uid;
  for (const NodeState& st : nodes_) {
    if (st.candidate_uid != nodes_[0].candidate_uid) converged = false;
    min_uid = std::min(min_uid, st.candidate_uid);
  }
  out["ssb_converged"] = converged ? "1" : "0";
  out["ssb_leader_uid"] = std::to_string(min_uid);
  out["ssb_convergence_round"] = converged ? std::to_string(last_adoption_round_) : "";
}

// --- PPUSH ---

void PpushBehavior::on_trial_start(World& world) {
  if (source_ >= world.n()) throw ConfigError("ppush: rumor source out of range");
  rumor_ = world.uid_of(source_);
  if (!world.tokens_of(source_).contains(rumor_))
    throw ConfigError("ppush: rumor source does not start with its token");
}

Tag PpushBehavior::choose_tag(const World& world, NodeId me) {
  return Tag{informed(world, me) ? 1ULL : 0ULL, world.config().b};
}

Action PpushBehavior::choose_action(const World& world, NodeId me, const NodeView& view) {
  if (!informed(world, me)) return Action::listen();
  return propose_uniform(world, me, view, stream::kTarget,
                         [](const NeighborInfo& nb) { return nb.tag.bits == 0; });
}

void PpushBehavior::on_connect(World& world, Connection& conn) {
  // Only informed nodes propose, and they only target uninformed neighbors.
  if (!informed(world, conn.proposer()))
    throw SimError("ppush: uninformed node ended up proposing");
  conn.move_token(conn.proposer(), rumor_);
}

}  // namespace mtm
