#include <doctest.h>

#include <set>

#include "mtm/crowdedbin.hpp"
#include "mtm/rng.hpp"

using namespace mtm;

namespace {

SimConfig cb_config(uint32_t n, uint32_t N, uint64_t seed, uint64_t max_rounds) {
  SimConfig c;
  c.n = n;
  c.N = N;
  c.b = 1;
  c.bit_cap = 4ull * 16;  // beta * log2(N) for the defaults used here
  c.max_rounds = max_rounds;
  c.rng_seed = seed;
  return c;
}

DynamicTopology gen(GraphKind kind, uint32_t n, uint64_t seed = 1) {
  GraphParams p;
  p.n = n;
  return generate(kind, p, seed);
}

std::vector<NodeId> first_k(uint32_t k) {
  std::vector<NodeId> v(k);
  for (uint32_t i = 0; i < k; ++i) v[i] = i;
  return v;
}

}  // namespace

TEST_SUITE_BEGIN("crowdedbin");

TEST_CASE("schedule_map interleaves instances round-robin") {
  // N=16: four instances.
  CHECK(schedule_map(1, 16).instance == 1);
  CHECK(schedule_map(1, 16).instance_round == 1);
  CHECK(schedule_map(2, 16).instance == 2);
  CHECK(schedule_map(2, 16).instance_round == 1);
  CHECK(schedule_map(5, 16).instance == 1);
  CHECK(schedule_map(5, 16).instance_round == 2);
  CHECK(schedule_map(8, 16).instance == 4);
  CHECK(schedule_map(8, 16).instance_round == 2);
}

TEST_CASE("instance_position decomposition") {
  // N=16, beta=4, gamma=12, instance 1 (k_1 = 2).
  const uint32_t N = 16, beta = 4, gamma = 12;
  CHECK(phase_length(2, beta, gamma, N) == 1920);  // 2 bins * 48 blocks * 20 rounds
  {
    InstancePosition p = instance_position(1, 2, beta, gamma, N);
    CHECK(p.phase == 1);
    CHECK(p.bin == 1);
    CHECK(p.block == 1);
    CHECK(p.offset == 1);
    CHECK(p.is_tag_bit);
    CHECK(p.segment_index == 1);
  }
  {
    InstancePosition p = instance_position(17, 2, beta, gamma, N);
    CHECK(p.phase == 1);
    CHECK(p.bin == 1);
    CHECK(p.block == 1);
    CHECK(p.offset == 17);
    CHECK_FALSE(p.is_tag_bit);
    CHECK(p.segment_index == 1);  // first PPUSH round (ell = 16)
  }
  {
    // Last round of the first bin, then the first round of the second bin.
    InstancePosition p = instance_position(960, 2, beta, gamma, N);
    CHECK(p.bin == 1);
    CHECK(p.block == 48);
    CHECK(p.offset == 20);
    InstancePosition q = instance_position(961, 2, beta, gamma, N);
    CHECK(q.bin == 2);
    CHECK(q.block == 1);
    CHECK(q.offset == 1);
  }
  {
    InstancePosition p = instance_position(1921, 2, beta, gamma, N);
    CHECK(p.phase == 2);
    CHECK(p.bin == 1);
  }
}

TEST_CASE("phase length identity across instances and sizes") {
  for (uint32_t N : {16u, 32u, 64u}) {
    const uint32_t L = static_cast<uint32_t>(std::countr_zero(N));
    for (uint32_t beta : {4u, 5u}) {
      for (uint32_t gamma : {12u, 15u}) {
        for (uint32_t i = 1; i <= L; ++i) {
          const uint64_t k_i = 1ull << i;
          CHECK(phase_length(k_i, beta, gamma, N) ==
                static_cast<uint64_t>(gamma) * (beta + 1) * k_i * L * L);
        }
      }
    }
  }
}

TEST_CASE("good-configuration oracle") {
  const uint32_t N = 16, beta = 4, gamma = 12;
  {
    // k=1: instance 1 cannot be crowded; good iff the tag is unique.
    std::vector<uint64_t> tags{42};
    std::vector<std::vector<uint32_t>> bins{{1, 1, 1, 1}};
    GoodConfig g = is_good_configuration(tags, bins, 1, N, beta, gamma);
    CHECK(g.good);
    CHECK(g.target_instance.value() == 1);
  }
  {
    // Duplicate tags: bad regardless of bins.
    std::vector<uint64_t> tags{7, 7};
    std::vector<std::vector<uint32_t>> bins{{1, 1, 1, 1}, {2, 2, 2, 2}};
    GoodConfig g = is_good_configuration(tags, bins, 2, N, beta, gamma);
    CHECK_FALSE(g.good);
  }
  {
    // Synthetic crowding: 60 unique tags all in bin 1 of instance 1 crowd it
    // (threshold gamma*log2(16) = 48); spreading them in instance 2 leaves
    // that instance uncrowded, so the target moves to 2.
    std::vector<uint64_t> tags;
    std::vector<std::vector<uint32_t>> bins;
    for (uint32_t t = 0; t < 60; ++t) {
      tags.push_back(t + 1);
      bins.push_back({1, 1 + t % 4, 1 + t % 8, 1 + t % 16});
    }
    GoodConfig g = is_good_configuration(tags, bins, 60, N, beta, gamma);
    CHECK(g.target_instance.value() == 2);
    CHECK(g.good);  // unique tags and k_target = 4 <= 2k
  }
  {
    // Every instance crowded: target undefined, configuration bad.
    std::vector<uint64_t> tags;
    std::vector<std::vector<uint32_t>> bins;
    for (uint32_t t = 0; t < 60; ++t) {
      tags.push_back(t + 1);
      bins.push_back({1, 1, 1, 1});
    }
    GoodConfig g = is_good_configuration(tags, bins, 60, N, beta, gamma);
    CHECK_FALSE(g.target_instance.has_value());
    CHECK_FALSE(g.good);
  }
}

TEST_CASE("good-configuration marks target good when k_target is within 2k") {
  std::vector<uint64_t> tags{5, 9};
  std::vector<std::vector<uint32_t>> bins{{1, 2, 3, 4}, {2, 2, 1, 3}};
  GoodConfig g = is_good_configuration(tags, bins, 2, 16, 4, 12);
  CHECK(g.good);
  CHECK(g.target_instance.value() == 1);
}

TEST_CASE("behavior constructor enforces the constant thresholds") {
  CHECK_THROWS_AS(CrowdedBinBehavior(3, 12, 1), ConfigError);   // beta < c+3
  CHECK_THROWS_AS(CrowdedBinBehavior(4, 11, 1), ConfigError);   // gamma < 3c+9
  CHECK_NOTHROW(CrowdedBinBehavior(4, 12, 1));
  CHECK_THROWS_AS(CrowdedBinBehavior(4, 12, 2), ConfigError);   // c=2 needs beta>=5, gamma>=15
  CHECK_NOTHROW(CrowdedBinBehavior(5, 15, 2));
}

TEST_CASE("single token on a 2-path completes") {
  DynamicTopology topo = gen(GraphKind::kPath, 2);
  SimConfig cfg = cb_config(2, 16, 3, 200000);
  CrowdedBinBehavior b(4, 12);
  TrialRecord rec = run_trial(cfg, b, topo, {0}, {});
  CHECK_FALSE(rec.dnf);
  CHECK(rec.extras.at("cb_good") == "1");
  CHECK(rec.extras.at("cb_target_instance") == "1");
  CHECK(rec.extras.at("cb_max_est") == "1");
}

TEST_CASE("ring gossip completes with estimates pinned to the target") {
  DynamicTopology topo = gen(GraphKind::kRing, 8);
  SimConfig cfg = cb_config(8, 16, 7, 1000000);
  CrowdedBinBehavior b(4, 12);
  TrialRecord rec = run_trial(cfg, b, topo, first_k(8), {});
  CHECK_FALSE(rec.dnf);
  CHECK(rec.extras.at("cb_good") == "1");
  CHECK(std::stoul(rec.extras.at("cb_max_est")) <=
        std::stoul(rec.extras.at("cb_target_instance")));
}

TEST_CASE("estimates are non-decreasing round by round") {
  DynamicTopology topo = gen(GraphKind::kRing, 6);
  SimConfig cfg = cb_config(6, 16, 9, 300000);
  World w(cfg, first_k(6));
  CrowdedBinBehavior b(4, 12);
  b.on_trial_start(w);
  std::vector<uint32_t> prev(6, 1);
  for (uint32_t r = 1; r <= 60000 && !w.gossip_complete(); ++r) {
    run_round(w, b, topo.at_round(r));
    for (NodeId v = 0; v < 6; ++v) {
      CHECK(b.estimate_of(v) >= prev[v]);
      prev[v] = b.estimate_of(v);
    }
  }
  CHECK(w.gossip_complete());
}

namespace {

// Delegating wrapper that injects a rogue 1-bit from one node during the
// PPUSH offsets of a chosen instance, to light up the activity-upgrade path
// which desk-scale token counts cannot reach through crowding.
class RogueActivity : public NodeBehavior {
 public:
  RogueActivity(CrowdedBinBehavior& inner, NodeId rogue, uint32_t instance, uint32_t beta,
                uint32_t gamma)
      : inner_(inner), rogue_(rogue), instance_(instance), beta_(beta), gamma_(gamma) {}

  void on_trial_start(World& w) override { inner_.on_trial_start(w); }
  Tag choose_tag(const World& w, NodeId me) override {
    Tag t = inner_.choose_tag(w, me);
    if (me != rogue_) return t;
    const ScheduleCoords c = schedule_map(w.round(), w.N());
    if (c.instance != instance_) return t;
    const InstancePosition pos =
        instance_position(c.instance_round, 1ull << c.instance, beta_, gamma_, w.N());
    if (!pos.is_tag_bit) return Tag{1, 1};  // phantom "informed" advertisement
    return t;
  }
  Action choose_action(const World& w, NodeId me, const NodeView& v) override {
    return inner_.choose_action(w, me, v);
  }
  void on_connect(World& w, Connection& c) override { inner_.on_connect(w, c); }

 private:
  CrowdedBinBehavior& inner_;
  NodeId rogue_;
  uint32_t instance_;
  uint32_t beta_, gamma_;
};

}  // namespace

TEST_CASE("activity on a larger instance upgrades estimates after the committed phase") {
  // K4 with a rogue node advertising activity on instance 3.
  const uint32_t n = 4, N = 16;
  DynamicTopology topo = gen(GraphKind::kComplete, n);
  SimConfig cfg = cb_config(n, N, 13, 2000000);
  CrowdedBinBehavior inner(4, 12);
  RogueActivity rogue(inner, 0, 3, 4, 12);
  World w(cfg, first_k(n));
  rogue.on_trial_start(w);

  // Instance-1 rounds land every log2(N) global rounds; its first phase ends
  // at global round 1 + (phase_len - 1) * log2(N).
  const uint64_t phase1_end = 1 + (phase_length(2, 4, 12, N) - 1) * 4;
  std::vector<uint32_t> prev(n, 1);
  bool upgraded = false;
  for (uint64_t r = 1; r <= 3 * phase1_end && !upgraded; ++r) {
    run_round(w, rogue, topo.at_round(r));
    for (NodeId v = 1; v < n; ++v) {
      CHECK(inner.estimate_of(v) >= prev[v]);      // still monotone
      CHECK(inner.estimate_of(v) <= 3);            // never beyond the evidence
      if (r <= phase1_end) CHECK(inner.estimate_of(v) == 1);  // deferred to phase end
      prev[v] = inner.estimate_of(v);
    }
    upgraded = inner.estimate_of(1) == 3 && inner.estimate_of(2) == 3 &&
               inner.estimate_of(3) == 3;
  }
  CHECK(upgraded);
}

TEST_SUITE_END();
