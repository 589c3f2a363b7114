#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ttrk/env.hpp"
#include "ttrk/learner.hpp"
#include "ttrk/metrics.hpp"
#include "ttrk/planner.hpp"

namespace ttrk {

struct Decision {
  int action = 0;
  nlohmann::json info;  // null unless the policy has something to log
};

/// Closed-loop controller driven by the environment.
class EpisodePolicy {
 public:
  virtual ~EpisodePolicy() = default;
  /// Called after reset with the episode's noise seed.
  virtual void begin(std::uint64_t /*noise_seed*/) {}
  virtual Decision decide(const Environment& env) = 0;
};

/// Receding horizon: plans, executes `execute_steps` actions, replans.
class PlannerPolicy : public EpisodePolicy {
 public:
  explicit PlannerPolicy(PlannerConfig cfg) : cfg_(std::move(cfg)) {}
  void begin(std::uint64_t) override { queue_.clear(); }
  Decision decide(const Environment& env) override;

 private:
  PlannerConfig cfg_;
  std::vector<int> queue_;
};

class GreedyPolicy : public EpisodePolicy {
 public:
  Decision decide(const Environment& env) override;
};

class RandomPolicy : public EpisodePolicy {
 public:
  void begin(std::uint64_t noise_seed) override;
  Decision decide(const Environment& env) override;

 private:
  Rng rng_;
};

/// Acts greedily on a trained network.
class NetworkPolicy : public EpisodePolicy {
 public:
  explicit NetworkPolicy(std::shared_ptr<const TrainedPolicy> model);
  Decision decide(const Environment& env) override;

 private:
  std::shared_ptr<const TrainedPolicy> model_;
  QNetwork net_;  // private copy, forward passes cache activations
};

using PolicyFactory = std::function<std::unique_ptr<EpisodePolicy>(std::uint64_t run_seed)>;

/// Parses "arvi", "greedy", "random" or "checkpoint:<path>". A "{seed}" in
/// the path is replaced by the run seed. Throws std::invalid_argument.
PolicyFactory make_policy_factory(const std::string& spec, const PlannerConfig& planner = {});
/// Validates a spec without loading anything.
bool valid_policy_spec(const std::string& spec);

EpisodeLog run_episode(const EnvConfig& cfg, EpisodePolicy& policy, std::uint64_t scenario_seed,
                       std::uint64_t noise_seed);

struct Suite {
  std::string name;
  EnvConfig base;
  int n_episodes = 10;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::string sweep_param = "none";  // "q", "nu_max" or "none"
  std::vector<double> sweep_values{0.0};
  std::vector<std::string> policies{"arvi", "greedy"};
  std::uint64_t base_seed = 2020;

  EnvConfig config_for(double sweep_value) const;
  std::uint64_t scenario_seed(int episode) const;
  std::uint64_t noise_seed(int episode, std::uint64_t run_seed) const;
  void validate() const;
};

std::vector<std::string> suite_names();
/// Built-in suite; a "-unseen" suffix swaps in the unseen obstacle set.
Suite suite_by_name(const std::string& name);

/// 64-bit FNV-1a of the text, as 16 hex digits.
std::string fnv1a_hex(const std::string& text);
std::string config_hash(const EnvConfig& cfg);

struct EvalRow {
  std::string suite;
  std::string sweep_param;
  double sweep_value = 0.0;
  int episode = 0;
  std::uint64_t seed = 0;
  std::string policy;
  std::uint64_t scenario_seed = 0;
  std::uint64_t noise_seed = 0;
  std::string config_hash;
  EpisodeMetrics metrics;
};

struct EvalOptions {
  PlannerConfig planner;
  int threads = 0;  // 0: TTRK_THREADS or hardware concurrency
  std::optional<int> n_episodes;  // overrides the suite value
  std::optional<std::vector<std::uint64_t>> seeds;
  bool keep_logs = false;
};

struct EvalResult {
  std::vector<EvalRow> rows;  // ordered by (sweep value, episode, seed, policy)
  std::vector<EpisodeLog> logs;  // same order, filled when keep_logs
};

EvalResult evaluate_suite(const Suite& suite, const std::vector<std::string>& policies,
                          const EvalOptions& options = {});

/// Worker count from TTRK_THREADS, else hardware concurrency, at least 1.
int default_thread_count();

/// Runs jobs [0, n) on a pool; job i writes only its own slot. Rethrows the
/// first failure after all workers finish.
void parallel_for(int n, int threads, const std::function<void(int)>& job);

void write_metrics_csv(std::ostream& out, const std::vector<EvalRow>& rows, int n_targets);
/// Mean and population SD per (sweep value, policy).
void write_summary(std::ostream& out, const std::vector<EvalRow>& rows);

}  // namespace ttrk
