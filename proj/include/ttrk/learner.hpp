#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ttrk/env.hpp"
#include "ttrk/nn.hpp"
#include "ttrk/rng.hpp"

namespace ttrk {

/// Largest t with gamma^t > threshold.
int effective_horizon(double gamma, double threshold = 0.001);

/// Normalizes phi at the learner boundary: positions by r_sensor, velocities
/// by nu_max, log det against its prediction-only range over one episode,
/// obstacle range by r_sensor and bearing by pi.
class FeatureScaler {
 public:
  FeatureScaler() = default;
  explicit FeatureScaler(const EnvConfig& cfg);

  std::vector<double> apply(const std::vector<double>& phi) const;

  double logdet_offset() const { return ld0_; }
  double logdet_span() const { return ld_span_; }

 private:
  int n_targets_ = 1;
  double r_sensor_ = 10.0;
  double nu_max_ = 1.0;
  double ld0_ = 0.0;
  double ld_span_ = 1.0;
};

/// Network-ready state: maps quantized to bytes (255 marks an obstacle,
/// otherwise round(lambda * 254)) and the scaled phi.
struct EncodedState {
  std::vector<std::uint8_t> maps;
  std::vector<double> phi;
  bool operator==(const EncodedState&) const = default;
};

EncodedState encode_state(const RLState& s, const FeatureScaler& scaler);
double decode_map_value(std::uint8_t v);

struct Transition {
  EncodedState s;
  int action = 0;
  double reward = 0.0;
  EncodedState next;
  bool done = false;
  bool operator==(const Transition&) const = default;
};

/// FIFO ring of transitions with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t pushed() const { return pushed_; }
  /// Transition by age rank: 0 is the oldest still stored.
  const Transition& at(std::size_t i) const;
  std::vector<const Transition*> sample(std::size_t n, Rng& rng) const;

  void save(std::ostream& out) const;
  static ReplayBuffer load(std::istream& in);

 private:
  std::size_t capacity_;
  std::vector<Transition> data_;
  std::size_t head_ = 0;  // next slot to overwrite once full
  std::uint64_t pushed_ = 0;
};

struct TrainConfig {
  EnvConfig env;
  std::string profile = "desk";  // network size: desk or paper
  double gamma = 0.99;
  std::int64_t steps = 30000;
  int batch = 64;
  double lr = 5e-4;
  int target_sync = 500;
  double eps_start = 1.0;
  double eps_end = 0.05;
  std::int64_t eps_decay_steps = 10000;
  int warmup = 1000;
  std::int64_t checkpoint_every = 5000;
  std::size_t buffer_capacity = 50000;
  std::uint64_t seed = 0;
  double reward_scale = 1.0;  // multiplies rewards inside the TD target
  int train_every = 1;
  double grad_clip = 0.0;  // global gradient norm cap, 0 disables
  bool double_q = false;
  double huber = 0.0;  // TD error beyond which the loss turns linear, 0 disables
  bool bootstrap_horizon = false;  // store the last step of an episode as non-terminal
  int n_step = 1;  // rewards summed per stored transition; bootstrap with gamma^n_step

  void validate() const;
  double epsilon(std::int64_t step) const;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Network input matrices for a set of encoded states.
void batch_inputs(const std::vector<const EncodedState*>& states, Matrix& maps, Matrix& phi);

/// Mean squared TD error against r + gamma (1 - done) max_a' Q_target(s', a').
/// With double_q the next action is picked by `net` and valued by `target`.
/// huber > 0 switches to the Huber form past |error| = huber (same slope at the
/// joint, so it equals the squared error inside). Accumulates its gradient into
/// `net` without stepping. Throws NumericalError on NaN.
double td_loss(QNetwork& net, QNetwork& target, const std::vector<const Transition*>& batch,
               double gamma, double reward_scale, bool double_q = false, double huber = 0.0);
/// td_loss plus one optimizer step, with optional global gradient clipping.
double td_update(QNetwork& net, QNetwork& target, const std::vector<const Transition*>& batch,
                 double gamma, double reward_scale, Adam& opt, double grad_clip = 0.0,
                 bool double_q = false, double huber = 0.0);

/// Index of the largest Q-value, lowest index on ties.
int argmax_action(const Matrix& q, Eigen::Index col = 0);

/// Epsilon-greedy. Always draws one uniform, plus an action index when exploring.
int act(QNetwork& net, const EncodedState& s, double epsilon, Rng& rng);

struct LossRecord {
  std::int64_t step = 0;
  double loss = 0.0;
};

struct EpisodeRecord {
  std::int64_t episode = 0;
  std::int64_t end_step = 0;
  double episode_return = 0.0;
};

/// Algorithm-1 style loop: epsilon-greedy acting, replay, TD updates,
/// periodic target sync and checkpoints.
class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);

  const TrainConfig& config() const { return cfg_; }
  std::int64_t step() const { return step_; }
  std::int64_t episode() const { return episode_; }
  QNetwork& net() { return net_; }
  const QNetwork& target_net() const { return target_; }
  const ReplayBuffer& replay() const { return buffer_; }
  const std::vector<LossRecord>& losses() const { return losses_; }
  const std::vector<EpisodeRecord>& episodes() const { return episodes_; }

  using CheckpointHook = std::function<void(const Trainer&)>;
  /// Runs until `until_step` total steps (capped at cfg.steps).
  void run(std::int64_t until_step, const CheckpointHook& on_checkpoint = {});
  void run(const CheckpointHook& on_checkpoint = {}) { run(cfg_.steps, on_checkpoint); }

  /// True when the current episode has ended, so a resume is exact.
  bool at_episode_boundary() const { return !episode_active_; }

  void save_checkpoint(const std::string& path) const;
  void save_replay(const std::string& path) const;
  /// Restores from a checkpoint, with the replay buffer if a sidecar path is given.
  static Trainer resume(const std::string& checkpoint,
                        const std::optional<std::string>& replay = std::nullopt);

 private:
  void begin_episode();
  void store(Transition t);
  void flush_pending();

  TrainConfig cfg_;
  FeatureScaler scaler_;
  QNetwork net_;
  QNetwork target_;
  Adam opt_;
  ReplayBuffer buffer_;
  Rng rng_;
  Environment env_;
  EncodedState state_;
  bool episode_active_ = false;
  double episode_return_ = 0.0;
  std::int64_t step_ = 0;
  std::int64_t episode_ = 0;
  std::vector<LossRecord> losses_;
  std::vector<EpisodeRecord> episodes_;
  std::deque<Transition> pending_;  // last n_step - 1 single-step transitions
};

/// Seed used for the environment in training episode k.
std::uint64_t training_episode_seed(std::uint64_t seed, std::int64_t episode);

/// Trained network plus what is needed to feed it.
struct TrainedPolicy {
  QNetwork net;
  FeatureScaler scaler;
  nlohmann::json meta;
};

/// Reads the network part of a checkpoint.
TrainedPolicy load_policy(const std::string& checkpoint);

}  // namespace ttrk
