#include "mtm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "mtm/algorithms.hpp"
#include "mtm/crowdedbin.hpp"
#include "mtm/metrics.hpp"
#include "mtm/transfer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

namespace mtm {

Algorithm parse_algorithm(const std::string& name) {
  if (name == "blindmatch") return Algorithm::kBlindMatch;
  if (name == "sharedbit") return Algorithm::kSharedBit;
  if (name == "simsharedbit") return Algorithm::kSimSharedBit;
  if (name == "ppush") return Algorithm::kPpush;
  if (name == "crowdedbin") return Algorithm::kCrowdedBin;
  throw ConfigError("unknown algorithm: " + name);
}

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::kBlindMatch: return "blindmatch";
    case Algorithm::kSharedBit: return "sharedbit";
    case Algorithm::kSimSharedBit: return "simsharedbit";
    case Algorithm::kPpush: return "ppush";
    case Algorithm::kCrowdedBin: return "crowdedbin";
  }
  return "?";
}

namespace {

uint32_t ceil_log2_u32(uint32_t x) {
  uint32_t b = 0;
  while ((1ull << b) < x) ++b;
  return b;
}

}  // namespace

void ExperimentConfig::resolve_and_validate() {
  if (n < 2) throw ConfigError("n: need at least 2 nodes");
  if (N == 0) N = std::bit_ceil(n);
  if (N < n) throw ConfigError("N: need N >= n");
  if (!std::has_single_bit(N)) throw ConfigError("N: must be a power of 2");

  if (k == 0) k = (algorithm == Algorithm::kPpush) ? 1 : n;
  if (k > n) throw ConfigError("k: need k <= n (tokens start at distinct nodes)");
  if (algorithm == Algorithm::kPpush && k != 1)
    throw ConfigError("k: ppush spreads a single rumor, need k = 1");

  if (!b) b = (algorithm == Algorithm::kBlindMatch) ? 0u : 1u;
  if (algorithm != Algorithm::kBlindMatch && *b < 1)
    throw ConfigError("b: " + algorithm_name(algorithm) + " needs b >= 1");

  if (epsilon) {
    if (!(*epsilon > 0.0) || *epsilon >= 1.0) throw ConfigError("epsilon: must be in (0, 1)");
    if (k != n) throw ConfigError("epsilon: eps-gossip requires k = n");
  }
  if (stop == StopMode::kEps && !epsilon) throw ConfigError("stop=eps requires epsilon");

  if (trials < 1) throw ConfigError("trials: need at least 1");
  if (threads < 1) throw ConfigError("threads: need at least 1");
  if (max_rounds == 0)
    max_rounds = (algorithm == Algorithm::kSharedBit) ? 32ull * k * n : 1000000ull;

  gparams.n = n;
  gparams.rounds = max_rounds;

  if (tokens_at.empty()) {
    for (uint32_t i = 0; i < k; ++i) tokens_at.push_back(i);
  }
  if (tokens_at.size() != k) throw ConfigError("tokens_at: need exactly k holders");
  for (NodeId v : tokens_at)
    if (v >= n) throw ConfigError("tokens_at: node out of range");

  if (algorithm == Algorithm::kCrowdedBin) {
    // Validates the Lemma thresholds for (beta, gamma, confidence).
    CrowdedBinBehavior probe(beta, gamma, confidence);
    (void)probe;
  }
  if (!(c_t >= 1.0)) throw ConfigError("c_t: transfer error exponent must be >= 1");

  // Topology tau checks need the actual graph only for files; generator
  // kinds are known statically.
  const bool tau_inf = !graph_file.empty()
                           ? true  // checked again after load
                           : (graph_kind != GraphKind::kFreshRandomEachTau);
  if (algorithm == Algorithm::kCrowdedBin && !tau_inf)
    throw ConfigError("tau: crowdedbin requires a static topology (tau = inf)");
}

double ExperimentConfig::transfer_epsilon() const {
  return std::pow(static_cast<double>(n), -c_t);
}

uint64_t ExperimentConfig::resolved_bit_cap() const {
  switch (algorithm) {
    case Algorithm::kBlindMatch:
    case Algorithm::kSharedBit:
      return transfer_bit_bound(N, transfer_epsilon());
    case Algorithm::kSimSharedBit:
      return std::max(transfer_bit_bound(N, transfer_epsilon()),
                      SimSharedBitBehavior::exchange_bits(N));
    case Algorithm::kPpush:
      return 1;
    case Algorithm::kCrowdedBin:
      return std::max<uint64_t>(1, static_cast<uint64_t>(beta) * ceil_log2_u32(N));
  }
  return 1;
}

SimConfig ExperimentConfig::sim_config(uint64_t trial_seed) const {
  SimConfig sc;
  sc.n = n;
  sc.N = N;
  sc.b = *b;
  sc.token_cap = 1;
  sc.bit_cap = resolved_bit_cap();
  sc.max_rounds = max_rounds;
  sc.rng_seed = trial_seed;
  sc.random_uids = random_uids;
  return sc;
}

namespace {

std::unique_ptr<NodeBehavior> make_behavior(const ExperimentConfig& cfg, uint64_t trial_seed) {
  switch (cfg.algorithm) {
    case Algorithm::kBlindMatch:
      return std::make_unique<BlindMatchBehavior>(cfg.transfer_epsilon());
    case Algorithm::kSharedBit: {
      Seed seed;
      if (cfg.shared_seed) {
        seed = *cfg.shared_seed;
      } else {
        Rng rng = derive_stream(trial_seed, {stream::kShared});
        seed = Seed::random(rng);
      }
      return std::make_unique<SharedBitBehavior>(SharedString::from_seed(seed, cfg.N),
                                                 cfg.transfer_epsilon());
    }
    case Algorithm::kSimSharedBit:
      return std::make_unique<SimSharedBitBehavior>(cfg.transfer_epsilon());
    case Algorithm::kPpush:
      return std::make_unique<PpushBehavior>(cfg.tokens_at.front());
    case Algorithm::kCrowdedBin:
      return std::make_unique<CrowdedBinBehavior>(cfg.beta, cfg.gamma, cfg.confidence);
  }
  throw ConfigError("unhandled algorithm");
}

DynamicTopology build_topology(const ExperimentConfig& cfg, uint64_t trial_seed) {
  return generate(cfg.graph_kind, cfg.gparams, derive_seed(trial_seed, {stream::kGraph}));
}

TrialRecord run_one_trial(const ExperimentConfig& cfg, const DynamicTopology* shared_topo,
                          uint32_t index, bool record_trace) {
  const uint64_t trial_seed = derive_seed(cfg.seed, {stream::kTrial, index});
  std::optional<DynamicTopology> local;
  const DynamicTopology& topo =
      shared_topo ? *shared_topo : local.emplace(build_topology(cfg, trial_seed));

  if (cfg.algorithm == Algorithm::kCrowdedBin && topo.tau() != DynamicTopology::kTauInfinity)
    throw ConfigError("tau: crowdedbin requires a static topology (tau = inf)");

  std::unique_ptr<NodeBehavior> behavior = make_behavior(cfg, trial_seed);

  TrialOptions opts;
  opts.eps_track = cfg.epsilon;
  opts.record_trace = record_trace;
  if (cfg.custom_stop) {
    opts.stop = cfg.custom_stop;
  } else if (cfg.stop == StopMode::kEps) {
    const double eps = *cfg.epsilon;
    opts.stop = [eps](const World& w) {
      return is_eps_gossip_complete(w.all_tokens(), w.uids(), eps);
    };
  }

  TrialRecord rec =
      run_trial(cfg.sim_config(trial_seed), *behavior, topo, cfg.tokens_at, opts);
  rec.trial_index = index;
  return rec;
}

Summary summarize(const std::vector<TrialRecord>& trials) {
  Summary s;
  s.trials = trials.size();
  std::vector<double> done, eps_done;
  for (const TrialRecord& t : trials) {
    if (t.completion_round) done.push_back(static_cast<double>(*t.completion_round));
    if (t.eps_completion_round) eps_done.push_back(static_cast<double>(*t.eps_completion_round));
  }
  s.success_fraction = trials.empty() ? 0.0 : static_cast<double>(done.size()) / trials.size();
  auto percentile = [](std::vector<double>& v, double p) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double idx = p * (v.size() - 1);
    const size_t lo = static_cast<size_t>(idx);
    const size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (v[hi] - v[lo]) * (idx - lo);
  };
  if (!done.empty()) {
    s.mean_completion = 0.0;
    for (double d : done) s.mean_completion += d;
    s.mean_completion /= static_cast<double>(done.size());
    s.median_completion = percentile(done, 0.5);
    s.p95_completion = percentile(done, 0.95);
  }
  if (!eps_done.empty()) s.median_eps_completion = percentile(eps_done, 0.5);
  return s;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& raw) {
  ExperimentConfig cfg = raw;
  cfg.resolve_and_validate();

  std::optional<DynamicTopology> shared;
  if (!cfg.graph_file.empty()) {
    shared = load_graph_file(cfg.graph_file);
    if (shared->n() != cfg.n) throw ConfigError("graph file n does not match config n");
    if (cfg.algorithm == Algorithm::kCrowdedBin &&
        shared->tau() != DynamicTopology::kTauInfinity)
      throw ConfigError("tau: crowdedbin requires a static topology (tau = inf)");
  }
  const DynamicTopology* shared_ptr = shared ? &*shared : nullptr;

  ExperimentResult res;
  res.trials.resize(cfg.trials);
  const uint32_t workers = std::min<uint32_t>(cfg.threads, cfg.trials);
  if (workers <= 1) {
    for (uint32_t i = 0; i < cfg.trials; ++i)
      res.trials[i] = run_one_trial(cfg, shared_ptr, i, false);
  } else {
    std::atomic<uint32_t> next{0};
    std::vector<std::thread> pool;
    std::atomic<bool> failed{false};
    std::string error;
    std::mutex error_mu;
    for (uint32_t w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        for (;;) {
          const uint32_t i = next.fetch_add(1);
          if (i >= cfg.trials || failed.load()) return;
          try {
            res.trials[i] = run_one_trial(cfg, shared_ptr, i, false);
          } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lk(error_mu);
            error = e.what();
            failed.store(true);
            return;
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failed.load()) throw SimError("trial failed: " + error);
  }
  res.summary = summarize(res.trials);
  return res;
}

TrialRecord replay_trial(const ExperimentConfig& raw, uint32_t trial_index, bool record_trace) {
  ExperimentConfig cfg = raw;
  cfg.resolve_and_validate();
  if (trial_index >= cfg.trials) throw ConfigError("trial index out of range");
  std::optional<DynamicTopology> shared;
  if (!cfg.graph_file.empty()) shared = load_graph_file(cfg.graph_file);
  return run_one_trial(cfg, shared ? &*shared : nullptr, trial_index, record_trace);
}

namespace {

std::vector<std::string> extras_columns(const std::vector<TrialRecord>& trials) {
  std::set<std::string> keys;
  for (const TrialRecord& t : trials)
    for (const auto& [k, _] : t.extras) keys.insert(k);
  return {keys.begin(), keys.end()};
}

std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

void write_trials_csv(const ExperimentResult& res, const ExperimentConfig& cfg,
                      std::ostream& out) {
  out << "# schema=mtmsim.trials.v1\n";
  out << "# algorithm=" << algorithm_name(cfg.algorithm) << "\n";
  if (!cfg.deterministic) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[64];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    out << "# generated_at=" << buf << "\n";
  }
  const std::vector<std::string> extras = extras_columns(res.trials);
  out << "trial,completion_round,eps_completion_round,dnf,connections,bits_total,trace_hash";
  for (const std::string& k : extras) out << "," << k;
  out << "\n";
  for (const TrialRecord& t : res.trials) {
    out << t.trial_index << ",";
    if (t.completion_round) out << *t.completion_round;
    out << ",";
    if (t.eps_completion_round) out << *t.eps_completion_round;
    out << "," << (t.dnf ? 1 : 0) << "," << t.connections << "," << t.bits_total << ","
        << hash_hex(t.trace_hash);
    for (const std::string& k : extras) {
      out << ",";
      auto it = t.extras.find(k);
      if (it != t.extras.end()) out << it->second;
    }
    out << "\n";
  }
}

namespace {

nlohmann::json trial_to_json(const TrialRecord& t) {
  nlohmann::json j;
  j["trial"] = t.trial_index;
  j["rounds_run"] = t.rounds_run;
  if (t.completion_round) j["completion_round"] = *t.completion_round;
  if (t.eps_completion_round) j["eps_completion_round"] = *t.eps_completion_round;
  j["dnf"] = t.dnf;
  j["connections"] = t.connections;
  j["bits_total"] = t.bits_total;
  j["trace_hash"] = hash_hex(t.trace_hash);
  j["rounds_phi_positive"] = t.rounds_phi_positive;
  j["rounds_phi_decreased"] = t.rounds_phi_decreased;
  j["phi"] = nlohmann::json::array();
  for (auto [r, phi] : t.phi_samples) j["phi"].push_back({r, phi});
  for (const auto& [k, v] : t.extras) j["extras"][k] = v;
  return j;
}

}  // namespace

void write_result_json(const ExperimentResult& res, const ExperimentConfig& cfg,
                       std::ostream& out) {
  nlohmann::json j;
  j["config"] = nlohmann::json::parse(config_to_json(cfg));
  j["summary"] = {{"trials", res.summary.trials},
                  {"success_fraction", res.summary.success_fraction},
                  {"median_completion", res.summary.median_completion},
                  {"mean_completion", res.summary.mean_completion},
                  {"p95_completion", res.summary.p95_completion}};
  if (res.summary.median_eps_completion)
    j["summary"]["median_eps_completion"] = *res.summary.median_eps_completion;
  j["trials"] = nlohmann::json::array();
  for (const TrialRecord& t : res.trials) j["trials"].push_back(trial_to_json(t));
  out << j.dump(2) << "\n";
}

std::string config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["algorithm"] = algorithm_name(cfg.algorithm);
  j["graph"] = graph_kind_name(cfg.graph_kind);
  if (!cfg.graph_file.empty()) j["graph_file"] = cfg.graph_file;
  j["n"] = cfg.n;
  j["N"] = cfg.N;
  j["k"] = cfg.k;
  if (cfg.b) j["b"] = *cfg.b;
  j["p"] = cfg.gparams.p;
  j["degree"] = cfg.gparams.degree;
  j["delta"] = cfg.gparams.delta;
  if (cfg.gparams.tau == DynamicTopology::kTauInfinity)
    j["tau"] = "inf";
  else
    j["tau"] = cfg.gparams.tau;
  if (cfg.epsilon) j["epsilon"] = *cfg.epsilon;
  j["stop"] = cfg.stop == StopMode::kEps ? "eps" : "gossip";
  j["trials"] = cfg.trials;
  j["seed"] = cfg.seed;
  j["max_rounds"] = cfg.max_rounds;
  j["threads"] = cfg.threads;
  j["beta"] = cfg.beta;
  j["gamma"] = cfg.gamma;
  j["confidence"] = cfg.confidence;
  j["c_t"] = cfg.c_t;
  if (cfg.shared_seed) j["shared_seed"] = cfg.shared_seed->hex();
  if (!cfg.tokens_at.empty()) j["tokens_at"] = cfg.tokens_at;
  j["random_uids"] = cfg.random_uids;
  if (!cfg.out_csv.empty()) j["out_csv"] = cfg.out_csv;
  if (!cfg.out_json.empty()) j["out_json"] = cfg.out_json;
  j["deterministic"] = cfg.deterministic;
  return j.dump(2);
}

ExperimentConfig config_from_json(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    if (j.contains("algorithm")) cfg.algorithm = parse_algorithm(j["algorithm"]);
    if (j.contains("graph")) cfg.graph_kind = parse_graph_kind(j["graph"]);
    if (j.contains("graph_file")) cfg.graph_file = j["graph_file"];
    if (j.contains("n")) cfg.n = j["n"];
    if (j.contains("N")) cfg.N = j["N"];
    if (j.contains("k")) cfg.k = j["k"];
    if (j.contains("b")) cfg.b = j["b"].get<uint32_t>();
    if (j.contains("p")) cfg.gparams.p = j["p"];
    if (j.contains("degree")) cfg.gparams.degree = j["degree"];
    if (j.contains("delta")) cfg.gparams.delta = j["delta"];
    if (j.contains("tau")) {
      if (j["tau"].is_string()) {
        if (j["tau"].get<std::string>() != "inf")
          throw ConfigError("tau must be an integer or \"inf\"");
        cfg.gparams.tau = DynamicTopology::kTauInfinity;
      } else {
        cfg.gparams.tau = j["tau"].get<uint64_t>();
      }
    }
    if (j.contains("epsilon") && !j["epsilon"].is_null()) cfg.epsilon = j["epsilon"].get<double>();
    if (j.contains("stop")) cfg.stop = j["stop"] == "eps" ? StopMode::kEps : StopMode::kGossip;
    if (j.contains("trials")) cfg.trials = j["trials"];
    if (j.contains("seed")) cfg.seed = j["seed"];
    if (j.contains("max_rounds")) cfg.max_rounds = j["max_rounds"];
    if (j.contains("threads")) cfg.threads = j["threads"];
    if (j.contains("beta")) cfg.beta = j["beta"];
    if (j.contains("gamma")) cfg.gamma = j["gamma"];
    if (j.contains("confidence")) cfg.confidence = j["confidence"];
    if (j.contains("c_t")) cfg.c_t = j["c_t"];
    if (j.contains("shared_seed") && !j["shared_seed"].is_null())
      cfg.shared_seed = Seed::from_hex(j["shared_seed"]);
    if (j.contains("tokens_at")) cfg.tokens_at = j["tokens_at"].get<std::vector<NodeId>>();
    if (j.contains("random_uids")) cfg.random_uids = j["random_uids"];
    if (j.contains("out_csv")) cfg.out_csv = j["out_csv"];
    if (j.contains("out_json")) cfg.out_json = j["out_json"];
    if (j.contains("deterministic")) cfg.deterministic = j["deterministic"];
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field has the wrong type: ") + e.what());
  }
  return cfg;
}

ExperimentConfig config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return config_from_json(in);
}

namespace {

nlohmann::json round_to_json(const RoundOutcome& o) {
  nlohmann::json j;
  j["round"] = o.round;
  j["tags"] = nlohmann::json::array();
  for (const Tag& t : o.tags) j["tags"].push_back(t.bits);
  j["proposals"] = nlohmann::json::array();
  for (auto [p, t] : o.proposals) j["proposals"].push_back({p, t});
  j["matching"] = nlohmann::json::array();
  for (auto [p, a] : o.matching) j["matching"].push_back({p, a});
  j["transfers"] = nlohmann::json::array();
  for (const TokenMove& m : o.transfers) j["transfers"].push_back({m.token, m.from, m.to});
  j["bits"] = o.bits_per_connection;
  j["phi_after"] = o.phi_after;
  return j;
}

int cmd_run(const ExperimentConfig& cfg) {
  ExperimentResult res = run_experiment(cfg);
  ExperimentConfig resolved = cfg;
  resolved.resolve_and_validate();
  if (!resolved.out_csv.empty()) {
    std::ofstream out(resolved.out_csv);
    if (!out) throw ConfigError("cannot open output file: " + resolved.out_csv);
    write_trials_csv(res, resolved, out);
  }
  if (!resolved.out_json.empty()) {
    std::ofstream out(resolved.out_json);
    if (!out) throw ConfigError("cannot open output file: " + resolved.out_json);
    write_result_json(res, resolved, out);
  }
  std::cout << "trials=" << res.summary.trials
            << " success_fraction=" << res.summary.success_fraction
            << " median=" << res.summary.median_completion
            << " mean=" << res.summary.mean_completion << " p95=" << res.summary.p95_completion;
  if (res.summary.median_eps_completion)
    std::cout << " median_eps=" << *res.summary.median_eps_completion;
  std::cout << "\n";
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"mobile telephone model gossip simulator"};
  app.require_subcommand(1);

  // --- run ---
  auto* run = app.add_subcommand("run", "run an experiment");
  std::string cfg_file, alg = "blindmatch", graph = "complete", graph_file, tau_str = "inf";
  std::string stop_str = "gossip", shared_seed_hex, out_csv, out_json, tokens_at_csv;
  ExperimentConfig cfg;
  uint32_t b_flag = 0;
  double eps_flag = 0.0;
  auto* o_cfg = run->add_option("--config", cfg_file, "JSON config; flags override it");
  auto* o_alg = run->add_option("--alg", alg, "blindmatch|sharedbit|simsharedbit|ppush|crowdedbin");
  auto* o_graph = run->add_option("--graph", graph, "graph kind");
  auto* o_gfile = run->add_option("--graph-file", graph_file, "graph JSON file");
  auto* o_n = run->add_option("--n", cfg.n, "node count");
  auto* o_N = run->add_option("--N", cfg.N, "UID bound (power of 2, default bit_ceil(n))");
  auto* o_k = run->add_option("--k", cfg.k, "token count (default n; ppush 1)");
  auto* o_b = run->add_option("--b", b_flag, "tag length");
  auto* o_tau = run->add_option("--tau", tau_str, "stability factor (int or inf)");
  auto* o_p = run->add_option("--p", cfg.gparams.p, "edge probability for random kinds");
  auto* o_deg = run->add_option("--deg", cfg.gparams.degree, "degree for random_regular");
  auto* o_delta = run->add_option("--delta", cfg.gparams.delta, "leaves per center for two_stars");
  auto* o_eps = run->add_option("--eps", eps_flag, "epsilon for eps-gossip tracking");
  auto* o_stop = run->add_option("--stop", stop_str, "gossip|eps");
  auto* o_trials = run->add_option("--trials", cfg.trials, "trial count");
  auto* o_seed = run->add_option("--seed", cfg.seed, "root seed");
  auto* o_rounds = run->add_option("--max-rounds", cfg.max_rounds, "hard stop");
  auto* o_threads = run->add_option("--threads", cfg.threads, "parallel trials");
  auto* o_beta = run->add_option("--beta", cfg.beta, "crowdedbin tag space constant");
  auto* o_gamma = run->add_option("--gamma", cfg.gamma, "crowdedbin bin size constant");
  auto* o_conf = run->add_option("--confidence", cfg.confidence, "crowdedbin confidence c");
  auto* o_ct = run->add_option("--ct", cfg.c_t, "transfer error exponent");
  auto* o_sseed = run->add_option("--shared-seed", shared_seed_hex, "hex seed for the shared string");
  auto* o_tokens = run->add_option("--tokens-at", tokens_at_csv, "comma-separated holder nodes");
  auto* o_ruid = run->add_flag("--random-uids", "random UID injection [n]->[N]");
  auto* o_out = run->add_option("--out", out_csv, "trials CSV path");
  auto* o_jout = run->add_option("--json-out", out_json, "result JSON path");
  auto* o_det = run->add_flag("--deterministic", "suppress timestamps in outputs");

  // --- graph ---
  auto* graph_cmd = app.add_subcommand("graph", "graph utilities");
  graph_cmd->require_subcommand(1);
  auto* gen = graph_cmd->add_subcommand("gen", "generate a graph file");
  std::string gen_kind = "ring", gen_out, gen_tau = "inf";
  GraphParams gen_params;
  uint64_t gen_seed = 0;
  gen->add_option("--kind", gen_kind, "graph kind")->required();
  gen->add_option("--n", gen_params.n, "node count");
  gen->add_option("--p", gen_params.p, "edge probability");
  gen->add_option("--deg", gen_params.degree, "degree for random_regular");
  gen->add_option("--delta", gen_params.delta, "leaves per center for two_stars");
  gen->add_option("--tau", gen_tau, "stability factor (int or inf)");
  gen->add_option("--rounds", gen_params.rounds, "horizon for fresh_random_each_tau");
  gen->add_option("--seed", gen_seed, "seed");
  gen->add_option("--out", gen_out, "output file")->required();

  auto* stats = graph_cmd->add_subcommand("stats", "alpha, delta, diameter of a graph file");
  std::string stats_file;
  uint32_t stats_trials = 10000;
  uint64_t stats_seed = 0;
  stats->add_option("--file", stats_file, "graph JSON file")->required();
  stats->add_option("--trials", stats_trials, "samples for the estimate path");
  stats->add_option("--seed", stats_seed, "seed for the estimate path");

  // --- replay ---
  auto* replay = app.add_subcommand("replay", "re-run one trial of an experiment");
  std::string replay_cfg, replay_trace;
  uint32_t replay_idx = 0;
  replay->add_option("--config", replay_cfg, "JSON config")->required();
  replay->add_option("--trial", replay_idx, "trial index")->required();
  replay->add_option("--trace", replay_trace, "write the full round trace as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) {
      ExperimentConfig base;
      if (o_cfg->count()) base = config_from_json_file(cfg_file);
      // Flags override the file.
      if (o_alg->count() || !o_cfg->count()) base.algorithm = parse_algorithm(alg);
      if (o_graph->count() || !o_cfg->count()) base.graph_kind = parse_graph_kind(graph);
      if (o_gfile->count()) base.graph_file = graph_file;
      if (o_n->count()) base.n = cfg.n;
      if (o_N->count()) base.N = cfg.N;
      if (o_k->count()) base.k = cfg.k;
      if (o_b->count()) base.b = b_flag;
      if (o_tau->count()) {
        base.gparams.tau = (tau_str == "inf") ? DynamicTopology::kTauInfinity
                                              : static_cast<uint64_t>(std::stoull(tau_str));
      }
      if (o_p->count()) base.gparams.p = cfg.gparams.p;
      if (o_deg->count()) base.gparams.degree = cfg.gparams.degree;
      if (o_delta->count()) base.gparams.delta = cfg.gparams.delta;
      if (o_eps->count()) base.epsilon = eps_flag;
      if (o_stop->count()) base.stop = (stop_str == "eps") ? StopMode::kEps : StopMode::kGossip;
      if (o_trials->count()) base.trials = cfg.trials;
      if (o_seed->count()) base.seed = cfg.seed;
      if (o_rounds->count()) base.max_rounds = cfg.max_rounds;
      if (o_threads->count()) base.threads = cfg.threads;
      if (o_beta->count()) base.beta = cfg.beta;
      if (o_gamma->count()) base.gamma = cfg.gamma;
      if (o_conf->count()) base.confidence = cfg.confidence;
      if (o_ct->count()) base.c_t = cfg.c_t;
      if (o_sseed->count()) base.shared_seed = Seed::from_hex(shared_seed_hex);
      if (o_tokens->count()) {
        base.tokens_at.clear();
        std::stringstream ss(tokens_at_csv);
        std::string item;
        while (std::getline(ss, item, ',')) base.tokens_at.push_back(std::stoul(item));
      }
      if (o_ruid->count()) base.random_uids = true;
      if (o_out->count()) base.out_csv = out_csv;
      if (o_jout->count()) base.out_json = out_json;
      if (o_det->count()) base.deterministic = true;
      return cmd_run(base);
    }
    if (gen->parsed()) {
      gen_params.tau = (gen_tau == "inf") ? DynamicTopology::kTauInfinity
                                          : static_cast<uint64_t>(std::stoull(gen_tau));
      DynamicTopology d = generate(parse_graph_kind(gen_kind), gen_params, gen_seed);
      save_graph_file(d, gen_out);
      std::cout << "wrote " << gen_out << " (n=" << d.n() << ", snapshots=" << d.snapshot_count()
                << ")\n";
      return 0;
    }
    if (stats->parsed()) {
      DynamicTopology d = load_graph_file(stats_file);
      double alpha = std::numeric_limits<double>::infinity();
      bool exact = true;
      uint32_t delta = 0;
      for (size_t i = 0; i < d.snapshot_count(); ++i) {
        const StaticTopology& g = d.snapshot(i).graph;
        if (g.n() <= 20) {
          alpha = std::min(alpha, vertex_expansion_exact(g).value());
        } else {
          alpha = std::min(alpha, vertex_expansion_estimate(g, stats_trials, stats_seed));
          exact = false;
        }
        delta = std::max(delta, max_degree(g));
      }
      std::cout << "alpha=" << alpha << " delta=" << delta << " diameter=";
      if (d.snapshot_count() == 1)
        std::cout << diameter(d.snapshot(0).graph);
      else
        std::cout << "undefined";
      if (!exact) std::cout << " (alpha is a sampled upper bound)";
      std::cout << "\n";
      return 0;
    }
    if (replay->parsed()) {
      ExperimentConfig base = config_from_json_file(replay_cfg);
      TrialRecord rec = replay_trial(base, replay_idx, !replay_trace.empty());
      std::cout << "trial=" << rec.trial_index << " trace_hash=" << hash_hex(rec.trace_hash)
                << " rounds=" << rec.rounds_run << " completion=";
      if (rec.completion_round)
        std::cout << *rec.completion_round;
      else
        std::cout << "DNF";
      std::cout << "\n";
      if (!replay_trace.empty()) {
        nlohmann::json j;
        j["trial"] = rec.trial_index;
        j["trace_hash"] = hash_hex(rec.trace_hash);
        j["rounds"] = nlohmann::json::array();
        for (const RoundOutcome& o : rec.trace) j["rounds"].push_back(round_to_json(o));
        std::ofstream out(replay_trace);
        if (!out) throw ConfigError("cannot open trace output: " + replay_trace);
        out << j.dump(2) << "\n";
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace mtm
