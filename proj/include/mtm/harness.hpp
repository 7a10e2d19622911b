#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mtm/engine.hpp"
#include "mtm/graph.hpp"
#include "mtm/randomness.hpp"

namespace mtm {

enum class Algorithm { kBlindMatch, kSharedBit, kSimSharedBit, kPpush, kCrowdedBin };

Algorithm parse_algorithm(const std::string& name);
std::string algorithm_name(Algorithm a);

enum class StopMode { kGossip, kEps };

struct ExperimentConfig {
  Algorithm algorithm = Algorithm::kBlindMatch;

  // Topology: either a generator kind with params, or a graph file.
  GraphKind graph_kind = GraphKind::kComplete;
  GraphParams gparams;
  std::string graph_file;  // non-empty overrides the generator

  uint32_t n = 0;
  uint32_t N = 0;  // 0: smallest power of 2 >= n
  uint32_t k = 0;  // 0: defaults to n
  std::optional<uint32_t> b;  // defaults per algorithm (blindmatch 0, others 1)

  std::optional<double> epsilon;  // enables eps-gossip tracking (requires k = n)
  StopMode stop = StopMode::kGossip;

  uint32_t trials = 1;
  uint64_t seed = 0;
  uint64_t max_rounds = 0;  // 0: a per-algorithm default
  uint32_t threads = 1;

  // Algorithm constants.
  uint32_t beta = 4;
  uint32_t gamma = 12;
  uint32_t confidence = 1;
  double c_t = 2.0;  // transfer error exponent: eps_t = n^(-c_t)
  std::optional<Seed> shared_seed;  // fixed shared string for sharedbit

  std::vector<NodeId> tokens_at;  // empty: nodes 0..k-1
  bool random_uids = false;

  std::string out_csv;
  std::string out_json;
  bool deterministic = false;

  /// Optional library-level stop predicate (not serializable); overrides
  /// StopMode when set.
  std::function<bool(const World&)> custom_stop;

  /// Fills derived defaults (N, k, b, max_rounds, tokens) and checks every
  /// invariant, throwing ConfigError naming the violated field.
  void resolve_and_validate();

  double transfer_epsilon() const;
  uint64_t resolved_bit_cap() const;
  SimConfig sim_config(uint64_t trial_seed) const;
};

struct Summary {
  uint64_t trials = 0;
  double success_fraction = 0.0;
  double median_completion = 0.0;  // over completed trials
  double mean_completion = 0.0;
  double p95_completion = 0.0;
  std::optional<double> median_eps_completion;
};

struct ExperimentResult {
  std::vector<TrialRecord> trials;
  Summary summary;
};

/// Runs `trials` independent trials (seeded as hash(root, index); optionally
/// across threads) and summarizes.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Re-runs a single trial of an experiment, optionally with a full trace.
TrialRecord replay_trial(const ExperimentConfig& cfg, uint32_t trial_index, bool record_trace);

/// Fixed, versioned CSV: trial, completion_round, eps_completion_round, dnf,
/// connections, bits_total, trace_hash, then algorithm-specific extras
/// columns. A generated_at comment is included unless cfg.deterministic.
void write_trials_csv(const ExperimentResult& res, const ExperimentConfig& cfg,
                      std::ostream& out);
void write_result_json(const ExperimentResult& res, const ExperimentConfig& cfg,
                       std::ostream& out);

ExperimentConfig config_from_json(std::istream& in);
ExperimentConfig config_from_json_file(const std::string& path);
std::string config_to_json(const ExperimentConfig& cfg);

/// CLI entry: subcommands run, graph stats, graph gen, replay.
/// Returns 0 on success, 1 on configuration errors, 2 on runtime errors.
int cli_main(int argc, const char* const* argv);

}  // namespace mtm
