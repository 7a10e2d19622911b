#include "mtm/engine.hpp"

#include <algorithm>
#include <bit>

#include "mtm/metrics.hpp"

namespace mtm {

void SimConfig::validate() const {
  if (n < 2) throw ConfigError("config.n: need n >= 2");
  if (N < n) throw ConfigError("config.N: need N >= n");
  if (!std::has_single_bit(N)) throw ConfigError("config.N: N must be a power of 2");
  if (b > 64) throw ConfigError("config.b: tag length above 64 bits is unsupported");
  if (token_cap < 1) throw ConfigError("config.token_cap: need >= 1");
  if (bit_cap < 1) throw ConfigError("config.bit_cap: need >= 1");
  if (max_rounds < 1) throw ConfigError("config.max_rounds: need >= 1");
}

World::World(const SimConfig& cfg, const std::vector<NodeId>& token_holders) : cfg_(cfg) {
  cfg_.validate();
  uid_.resize(cfg_.n);
  if (cfg_.random_uids) {
    // Random injection [n] -> [N]: partial Fisher-Yates over 1..N.
    std::vector<uint32_t> pool(cfg_.N);
    for (uint32_t i = 0; i < cfg_.N; ++i) pool[i] = i + 1;
    Rng rng = derive_stream(cfg_.rng_seed, {stream::kUid});
    for (uint32_t i = 0; i < cfg_.n; ++i) {
      uint32_t j = i + static_cast<uint32_t>(rng.next_below(cfg_.N - i));
      std::swap(pool[i], pool[j]);
      uid_[i] = pool[i];
    }
  } else {
    for (uint32_t i = 0; i < cfg_.n; ++i) uid_[i] = i + 1;
  }
  tokens_.resize(cfg_.n);
  std::vector<char> seen(cfg_.n, 0);
  for (NodeId v : token_holders) {
    if (v >= cfg_.n) throw ConfigError("token holder out of range");
    if (seen[v]) throw ConfigError("node " + std::to_string(v) + " listed twice as token holder");
    seen[v] = 1;
    tokens_[v].insert(uid_[v]);
  }
  k_ = static_cast<uint32_t>(token_holders.size());
  if (k_ == 0) throw ConfigError("need at least one starting token");
}

std::optional<NodeId> World::node_of_uid(uint32_t uid) const {
  for (NodeId v = 0; v < uid_.size(); ++v)
    if (uid_[v] == uid) return v;
  return std::nullopt;
}

uint64_t World::potential() const { return mtm::potential(tokens_, k_); }

bool World::gossip_complete() const { return mtm::is_gossip_complete(tokens_, k_); }

Rng World::stream(uint64_t purpose, std::initializer_list<uint64_t> path) const {
  uint64_t h = derive_seed(cfg_.rng_seed, {purpose});
  for (uint64_t p : path) h = mix64(h ^ mix64(p));
  return Rng(h);
}

void Connection::charge_bits(uint64_t bits) {
  bits_used_ += bits;
  if (bits_used_ > world_.cfg_.bit_cap)
    throw SimError("bit budget exceeded on connection (" + std::to_string(proposer_) + "," +
                   std::to_string(acceptor_) + "): " + std::to_string(bits_used_) + " > cap " +
                   std::to_string(world_.cfg_.bit_cap));
}

void Connection::move_token(NodeId from, uint32_t token) {
  if (from != proposer_ && from != acceptor_)
    throw SimError("move_token: sender is not an endpoint of this connection");
  const NodeId to = (from == proposer_) ? acceptor_ : proposer_;
  if (!world_.tokens_[from].contains(token))
    throw SimError("move_token: node " + std::to_string(from) + " does not own token " +
                   std::to_string(token));
  if (!world_.tokens_[to].insert(token)) return;  // receiver already knew it
  ++tokens_moved_;
  if (tokens_moved_ > world_.cfg_.token_cap)
    throw SimError("token budget exceeded on connection (" + std::to_string(proposer_) + "," +
                   std::to_string(acceptor_) + ")");
  moves_.push_back({token, from, to});
}

std::vector<std::pair<NodeId, NodeId>> resolve_connections(
    const std::vector<std::pair<NodeId, NodeId>>& proposals, const std::vector<bool>& is_listener,
    const std::function<Rng(NodeId)>& listener_stream) {
  const size_t n = is_listener.size();
  std::vector<std::vector<NodeId>> incoming(n);
  std::vector<char> proposed(n, 0);
  for (auto [p, t] : proposals) {
    if (p >= n || t >= n) throw SimError("resolve_connections: node id out of range");
    if (is_listener[p]) throw SimError("resolve_connections: a listener sent a proposal");
    if (proposed[p]) throw SimError("resolve_connections: node proposed twice");
    proposed[p] = 1;
  }
  for (auto [p, t] : proposals) {
    if (proposed[t]) continue;  // targets that proposed cannot accept
    incoming[t].push_back(p);
  }
  std::vector<std::pair<NodeId, NodeId>> matching;
  std::vector<char> matched(n, 0);
  for (NodeId v = 0; v < n; ++v) {
    if (!is_listener[v] || incoming[v].empty()) continue;
    std::sort(incoming[v].begin(), incoming[v].end());
    Rng rng = listener_stream(v);
    const NodeId p = incoming[v][rng.next_below(incoming[v].size())];
    matching.emplace_back(p, v);
    if (matched[p] || matched[v]) throw SimError("resolve_connections: matching invariant broken");
    matched[p] = matched[v] = 1;
  }
  return matching;
}

RoundOutcome run_round(World& world, NodeBehavior& behavior, const StaticTopology& topo) {
  if (topo.n() != world.n()) throw ConfigError("topology n does not match config n");
  const uint64_t r = world.round_ + 1;
  world.round_ = r;
  const SimConfig& cfg = world.config();

  RoundOutcome out;
  out.round = r;

  // (1) All tags are chosen before anyone sees anything.
  out.tags.resize(world.n());
  for (NodeId v = 0; v < world.n(); ++v) {
    Tag t = behavior.choose_tag(world, v);
    if (t.len != cfg.b || (cfg.b < 64 && (t.bits >> cfg.b) != 0))
      throw SimError("tag-length error: node " + std::to_string(v) + " advertised " +
                     std::to_string(t.len) + " bits, config b=" + std::to_string(cfg.b));
    out.tags[v] = t;
  }

  // (2) Views from one consistent tag snapshot; (3) actions.
  std::vector<bool> is_listener(world.n(), true);
  std::vector<std::pair<NodeId, NodeId>> proposals;
  {
    NodeView view;
    for (NodeId v = 0; v < world.n(); ++v) {
      view.me = v;
      view.my_uid = world.uid_of(v);
      view.neighbors.clear();
      for (NodeId w : topo.neighbors(v))
        view.neighbors.push_back({w, world.uid_of(w), out.tags[w]});
      Action a = behavior.choose_action(world, v, view);
      if (a.is_propose) {
        if (!topo.has_edge(v, a.target))
          throw SimError("malformed proposal: node " + std::to_string(v) +
                         " proposed to non-neighbor " + std::to_string(a.target));
        is_listener[v] = false;
        proposals.emplace_back(v, a.target);
      }
    }
  }
  out.proposals = proposals;

  // (4) Uniform acceptance.
  out.matching = resolve_connections(proposals, is_listener, [&](NodeId v) {
    return world.stream(stream::kAccept, {r, v});
  });

  // (5) Each connected pair communicates under a fresh budget ledger.
  std::sort(out.matching.begin(), out.matching.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });
  for (auto [p, a] : out.matching) {
    const uint32_t lo = std::min(world.uid_of(p), world.uid_of(a));
    const uint32_t hi = std::max(world.uid_of(p), world.uid_of(a));
    Connection conn(world, p, a, world.stream(stream::kPair, {r, lo, hi}));
    behavior.on_connect(world, conn);
    out.bits_per_connection.push_back(conn.bits_used());
    for (const TokenMove& m : conn.moves()) out.transfers.push_back(m);
  }

  out.phi_after = world.potential();
  return out;
}

namespace {

struct TraceHasher {
  uint64_t h = 1469598103934665603ULL;  // FNV-1a
  void mix(uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ULL;
    }
  }
  void mix_outcome(const RoundOutcome& o) {
    mix(o.round);
    for (auto [p, a] : o.matching) mix((static_cast<uint64_t>(p) << 32) | a);
    for (const TokenMove& m : o.transfers)
      mix((static_cast<uint64_t>(m.token) << 40) ^ (static_cast<uint64_t>(m.from) << 20) ^ m.to);
    mix(o.phi_after);
  }
};

}  // namespace

TrialRecord run_trial(const SimConfig& cfg, NodeBehavior& behavior, const DynamicTopology& topo,
                      const std::vector<NodeId>& token_holders, const TrialOptions& opts) {
  StabilityReport stab = validate_stability(topo);
  if (!stab.ok) {
    std::string msg = "run_trial: unstable topology:";
    for (const auto& s : stab.reasons) msg += " " + s;
    throw ConfigError(msg);
  }

  World world(cfg, token_holders);
  if (opts.eps_track && world.k() != world.n())
    throw ConfigError("eps-gossip tracking requires k = n");

  behavior.on_trial_start(world);

  auto stop = opts.stop ? opts.stop : [](const World& w) { return w.gossip_complete(); };

  TrialRecord rec;
  TraceHasher hasher;
  const uint64_t sample_stride = std::max<uint64_t>(1, cfg.max_rounds / 512);
  uint64_t phi_prev = world.potential();
  rec.phi_samples.emplace_back(0, phi_prev);

  if (stop(world)) rec.completion_round = 0;
  if (opts.eps_track &&
      is_eps_gossip_complete(world.all_tokens(), world.uids(), *opts.eps_track))
    rec.eps_completion_round = 0;

  for (uint64_t r = 1; r <= cfg.max_rounds && !rec.completion_round; ++r) {
    RoundOutcome out = run_round(world, behavior, topo.at_round(r));
    rec.rounds_run = r;
    rec.connections += out.matching.size();
    for (uint64_t b : out.bits_per_connection) rec.bits_total += b;
    hasher.mix_outcome(out);
    if (phi_prev > 0) {
      ++rec.rounds_phi_positive;
      if (out.phi_after < phi_prev) ++rec.rounds_phi_decreased;
    }
    if (out.phi_after > phi_prev) throw SimError("phi increased; token sets shrank");
    phi_prev = out.phi_after;
    if (r % sample_stride == 0 || out.phi_after == 0)
      rec.phi_samples.emplace_back(r, out.phi_after);
    if (opts.record_trace) rec.trace.push_back(std::move(out));

    if (!rec.eps_completion_round && opts.eps_track &&
        is_eps_gossip_complete(world.all_tokens(), world.uids(), *opts.eps_track))
      rec.eps_completion_round = r;
    if (stop(world)) rec.completion_round = r;
  }
  rec.dnf = !rec.completion_round.has_value();
  rec.trace_hash = hasher.h;
  behavior.export_extras(rec.extras);
  return rec;
}

}  // namespace mtm
