#include "ttrk/learner.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ttrk {

namespace {

constexpr char kMagic[8] = {'T', 'T', 'R', 'K', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr char kReplayMagic[8] = {'T', 'T', 'R', 'K', 'R', 'P', 'L', 'Y'};

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("unexpected end of file");
  return v;
}

void put_matrix(std::ostream& out, const Matrix& m) {
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
}

void get_matrix(std::istream& in, Matrix& m) {
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint truncated");
}

void put_encoded(std::ostream& out, const EncodedState& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.maps.size()));
  out.write(reinterpret_cast<const char*>(s.maps.data()), static_cast<std::streamsize>(s.maps.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.phi.size()));
  out.write(reinterpret_cast<const char*>(s.phi.data()),
            static_cast<std::streamsize>(s.phi.size() * sizeof(double)));
}

EncodedState get_encoded(std::istream& in) {
  EncodedState s;
  s.maps.resize(get<std::uint32_t>(in));
  in.read(reinterpret_cast<char*>(s.maps.data()), static_cast<std::streamsize>(s.maps.size()));
  s.phi.resize(get<std::uint32_t>(in));
  in.read(reinterpret_cast<char*>(s.phi.data()),
          static_cast<std::streamsize>(s.phi.size() * sizeof(double)));
  if (!in) throw std::runtime_error("replay file truncated");
  return s;
}

struct CheckpointFile {
  nlohmann::json header;
  std::ifstream in;
};

CheckpointFile open_checkpoint(const std::string& path) {
  CheckpointFile f{{}, std::ifstream(path, std::ios::binary)};
  if (!f.in) throw std::runtime_error("cannot read checkpoint " + path);
  char magic[8];
  f.in.read(magic, 8);
  if (!f.in || std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error(path + " is not a checkpoint");
  }
  const auto version = get<std::uint32_t>(f.in);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  std::string text(get<std::uint64_t>(f.in), '\0');
  f.in.read(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f.in) throw std::runtime_error("checkpoint header truncated");
  f.header = nlohmann::json::parse(text);
  return f;
}

}  // namespace

int effective_horizon(double gamma, double threshold) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must be in (0, 1)");
  int t = 0;
  double g = 1.0;
  while (g * gamma > threshold) {
    g *= gamma;
    ++t;
  }
  return t;
}

FeatureScaler::FeatureScaler(const EnvConfig& cfg)
    : n_targets_(cfg.n_targets), r_sensor_(cfg.sensor.r_sensor), nu_max_(cfg.target.nu_max) {
  const auto sys = system_matrices(cfg.belief.q_b, cfg.tau());
  Mat4 cov = predict_covariance(initial_covariance(cfg.belief), sys.A, sys.W);
  ld0_ = logdet(cov);
  for (int t = 1; t < cfg.horizon; ++t) cov = predict_covariance(cov, sys.A, sys.W);
  ld_span_ = std::max(logdet(cov) - ld0_, 1.0);
}

std::vector<double> FeatureScaler::apply(const std::vector<double>& phi) const {
  if (phi.size() != static_cast<std::size_t>(phi_size(n_targets_))) {
    throw std::invalid_argument("FeatureScaler: phi length mismatch");
  }
  std::vector<double> out(phi.size());
  for (int i = 0; i < n_targets_; ++i) {
    const double* p = phi.data() + 6 * i;
    double* o = out.data() + 6 * i;
    o[0] = p[0] / r_sensor_;
    o[1] = p[1] / r_sensor_;
    o[2] = p[2] / nu_max_;
    o[3] = p[3] / nu_max_;
    o[4] = (p[4] - ld0_) / ld_span_;
    o[5] = p[5];
  }
  const std::size_t k = 6 * n_targets_;
  out[k] = phi[k] / r_sensor_;
  out[k + 1] = phi[k + 1] / kPi;
  return out;
}

EncodedState encode_state(const RLState& s, const FeatureScaler& scaler) {
  EncodedState e;
  e.maps.resize(s.maps.values.size());
  for (std::size_t i = 0; i < e.maps.size(); ++i) {
    const float v = s.maps.values[i];
    e.maps[i] = v < 0.0f ? std::uint8_t{255}
                         : static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 254.0f));
  }
  e.phi = scaler.apply(s.phi);
  return e;
}

double decode_map_value(std::uint8_t v) { return v == 255 ? -1.0 : v / 254.0; }

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be > 0");
}

void ReplayBuffer::push(Transition t) {
  ++pushed_;
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
    return;
  }
  data_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= data_.size()) throw std::out_of_range("ReplayBuffer::at");
  return data_[(head_ + i) % data_.size()];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  if (data_.empty()) throw std::logic_error("ReplayBuffer::sample on an empty buffer");
  std::vector<const Transition*> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(&data_[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(data_.size())))]);
  }
  return out;
}

void ReplayBuffer::save(std::ostream& out) const {
  out.write(kReplayMagic, 8);
  put<std::uint64_t>(out, capacity_);
  put<std::uint64_t>(out, data_.size());
  put<std::uint64_t>(out, head_);
  put<std::uint64_t>(out, pushed_);
  for (const auto& t : data_) {
    put_encoded(out, t.s);
    put<std::int32_t>(out, t.action);
    put<double>(out, t.reward);
    put_encoded(out, t.next);
    put<std::uint8_t>(out, t.done ? 1 : 0);
  }
}

ReplayBuffer ReplayBuffer::load(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kReplayMagic, 8) != 0) throw std::runtime_error("not a replay file");
  ReplayBuffer b(get<std::uint64_t>(in));
  const auto n = get<std::uint64_t>(in);
  b.head_ = get<std::uint64_t>(in);
  b.pushed_ = get<std::uint64_t>(in);
  b.data_.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    Transition t;
    t.s = get_encoded(in);
    t.action = get<std::int32_t>(in);
    t.reward = get<double>(in);
    t.next = get_encoded(in);
    t.done = get<std::uint8_t>(in) != 0;
    b.data_.push_back(std::move(t));
  }
  return b;
}

void TrainConfig::validate() const {
  env.validate();
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("TrainConfig: ") + what);
  };
  require(gamma >= 0.0 && gamma < 1.0, "gamma must be in [0, 1)");
  require(steps >= 0, "steps must be >= 0");
  require(batch >= 1, "batch must be >= 1");
  require(lr > 0.0, "lr must be > 0");
  require(target_sync >= 1, "target_sync must be >= 1");
  require(eps_start >= 0.0 && eps_start <= 1.0 && eps_end >= 0.0 && eps_end <= 1.0,
          "epsilon must be in [0, 1]");
  require(eps_decay_steps >= 0, "eps_decay_steps must be >= 0");
  require(warmup >= 0, "warmup must be >= 0");
  require(checkpoint_every >= 0, "checkpoint_every must be >= 0");
  require(buffer_capacity >= 1, "buffer_capacity must be >= 1");
  require(train_every >= 1, "train_every must be >= 1");
  require(grad_clip >= 0.0, "grad_clip must be >= 0");
  require(huber >= 0.0, "huber must be >= 0");
  require(n_step >= 1, "n_step must be >= 1");
  NetworkShape::by_name(profile, phi_size(env.n_targets));
}

double TrainConfig::epsilon(std::int64_t step) const {
  if (eps_decay_steps == 0) return eps_end;
  const double f = std::min(1.0, static_cast<double>(step) / static_cast<double>(eps_decay_steps));
  return eps_start + (eps_end - eps_start) * f;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"schema", "ttrk.train/1"},
          {"env", to_json(c.env)},
          {"profile", c.profile},
          {"gamma", c.gamma},
          {"steps", c.steps},
          {"batch", c.batch},
          {"lr", c.lr},
          {"target_sync", c.target_sync},
          {"eps_start", c.eps_start},
          {"eps_end", c.eps_end},
          {"eps_decay_steps", c.eps_decay_steps},
          {"warmup", c.warmup},
          {"checkpoint_every", c.checkpoint_every},
          {"buffer_capacity", c.buffer_capacity},
          {"seed", c.seed},
          {"reward_scale", c.reward_scale},
          {"train_every", c.train_every},
          {"grad_clip", c.grad_clip},
          {"double_q", c.double_q},
          {"huber", c.huber},
          {"bootstrap_horizon", c.bootstrap_horizon},
          {"n_step", c.n_step}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (j.contains("schema") && j.at("schema") != "ttrk.train/1") {
    throw std::invalid_argument("unsupported train config schema");
  }
  TrainConfig c;
  if (j.contains("env")) c.env = env_config_from_json(j.at("env"));
  auto get_field = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get_field("profile", c.profile);
  get_field("gamma", c.gamma);
  get_field("steps", c.steps);
  get_field("batch", c.batch);
  get_field("lr", c.lr);
  get_field("target_sync", c.target_sync);
  get_field("eps_start", c.eps_start);
  get_field("eps_end", c.eps_end);
  get_field("eps_decay_steps", c.eps_decay_steps);
  get_field("warmup", c.warmup);
  get_field("checkpoint_every", c.checkpoint_every);
  get_field("buffer_capacity", c.buffer_capacity);
  get_field("seed", c.seed);
  get_field("reward_scale", c.reward_scale);
  get_field("train_every", c.train_every);
  get_field("grad_clip", c.grad_clip);
  get_field("double_q", c.double_q);
  get_field("huber", c.huber);
  get_field("bootstrap_horizon", c.bootstrap_horizon);
  get_field("n_step", c.n_step);
  c.validate();
  return c;
}

void batch_inputs(const std::vector<const EncodedState*>& states, Matrix& maps, Matrix& phi) {
  if (states.empty()) throw std::invalid_argument("batch_inputs: empty batch");
  const auto B = static_cast<Eigen::Index>(states.size());
  maps.resize(static_cast<Eigen::Index>(states.front()->maps.size()), B);
  phi.resize(static_cast<Eigen::Index>(states.front()->phi.size()), B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& s = *states[b];
    if (static_cast<Eigen::Index>(s.maps.size()) != maps.rows() ||
        static_cast<Eigen::Index>(s.phi.size()) != phi.rows()) {
      throw std::invalid_argument("batch_inputs: inconsistent state sizes");
    }
    for (Eigen::Index i = 0; i < maps.rows(); ++i) maps(i, b) = decode_map_value(s.maps[i]);
    for (Eigen::Index i = 0; i < phi.rows(); ++i) phi(i, b) = s.phi[i];
  }
}

double td_loss(QNetwork& net, QNetwork& target, const std::vector<const Transition*>& batch,
               double gamma, double reward_scale, bool double_q, double huber) {
  std::vector<const EncodedState*> s, s_next;
  for (const auto* t : batch) {
    s.push_back(&t->s);
    s_next.push_back(&t->next);
  }
  Matrix maps, phi;
  batch_inputs(s_next, maps, phi);
  const Matrix q_next = target.forward(maps, phi);
  Matrix q_pick;
  if (double_q) q_pick = net.forward(maps, phi);  // before the s pass, which backward needs cached
  batch_inputs(s, maps, phi);
  const Matrix q = net.forward(maps, phi);

  const auto B = static_cast<Eigen::Index>(batch.size());
  Matrix dq = Matrix::Zero(q.rows(), B);
  double loss = 0.0;
  for (Eigen::Index b = 0; b < B; ++b) {
    const Transition& t = *batch[b];
    double next = 0.0;
    if (!t.done) next = double_q ? q_next(argmax_action(q_pick, b), b) : q_next.col(b).maxCoeff();
    const double diff = q(t.action, b) - (reward_scale * t.reward + gamma * next);
    if (huber > 0.0 && std::abs(diff) > huber) {
      loss += 2.0 * huber * std::abs(diff) - huber * huber;
      dq(t.action, b) = 2.0 * huber * (diff > 0.0 ? 1.0 : -1.0) / static_cast<double>(B);
    } else {
      loss += diff * diff;
      dq(t.action, b) = 2.0 * diff / static_cast<double>(B);
    }
  }
  loss /= static_cast<double>(B);
  if (!std::isfinite(loss)) throw NumericalError("td_loss: non-finite loss");
  net.backward(dq);
  return loss;
}

double td_update(QNetwork& net, QNetwork& target, const std::vector<const Transition*>& batch,
                 double gamma, double reward_scale, Adam& opt, double grad_clip, bool double_q,
                 double huber) {
  net.zero_grad();
  const double loss = td_loss(net, target, batch, gamma, reward_scale, double_q, huber);
  if (grad_clip > 0.0) {
    double sq = 0.0;
    for (const auto* p : net.parameters()) sq += p->grad.squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > grad_clip) {
      for (auto* p : net.parameters()) p->grad *= grad_clip / norm;
    }
  }
  opt.step(net);
  if (!net.all_finite()) throw NumericalError("td_update: non-finite parameters");
  return loss;
}

int argmax_action(const Matrix& q, Eigen::Index col) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < q.rows(); ++i) {
    if (q(i, col) > q(best, col)) best = i;
  }
  return static_cast<int>(best);
}

int act(QNetwork& net, const EncodedState& s, double epsilon, Rng& rng) {
  const double u = rng.uniform(0.0, 1.0);
  if (u < epsilon) return rng.uniform_int(net.shape().n_actions);
  Matrix maps, phi;
  batch_inputs({&s}, maps, phi);
  return argmax_action(net.forward(maps, phi));
}

std::uint64_t training_episode_seed(std::uint64_t seed, std::int64_t episode) {
  return Rng::stream(seed, 1000 + static_cast<std::uint64_t>(episode)).next_u64();
}

Trainer::Trainer(TrainConfig cfg)
    : cfg_((cfg.validate(), std::move(cfg))),
      scaler_(cfg_.env),
      net_(NetworkShape::by_name(cfg_.profile, phi_size(cfg_.env.n_targets))),
      target_(net_.shape()),
      opt_(net_, AdamConfig{cfg_.lr}),
      buffer_(cfg_.buffer_capacity),
      rng_(Rng::stream(cfg_.seed, 12)),
      env_(cfg_.env) {
  Rng init = Rng::stream(cfg_.seed, 11);
  net_.init(init);
  target_.copy_from(net_);
}

void Trainer::begin_episode() {
  state_ = encode_state(env_.reset(training_episode_seed(cfg_.seed, episode_)), scaler_);
  episode_active_ = true;
  episode_return_ = 0.0;
}

namespace {

// One transition spanning everything pending: discounted reward sum, last next state.
Transition merge_pending(const std::deque<Transition>& pending, double gamma) {
  Transition out = pending.front();
  out.reward = 0.0;
  double discount = 1.0;
  for (const auto& p : pending) {
    out.reward += discount * p.reward;
    discount *= gamma;
  }
  out.next = pending.back().next;
  out.done = pending.back().done;
  return out;
}

}  // namespace

void Trainer::store(Transition t) {
  pending_.push_back(std::move(t));
  if (static_cast<int>(pending_.size()) < cfg_.n_step) return;
  buffer_.push(merge_pending(pending_, cfg_.gamma));
  pending_.pop_front();
}

void Trainer::flush_pending() {
  // Tails shorter than n_step are exact when the episode really terminates,
  // and dropped when they would bootstrap with the wrong discount.
  if (!pending_.empty() && !pending_.back().done) pending_.clear();
  while (!pending_.empty()) {
    buffer_.push(merge_pending(pending_, cfg_.gamma));
    pending_.pop_front();
  }
}

void Trainer::run(std::int64_t until_step, const CheckpointHook& on_checkpoint) {
  const std::int64_t end = std::min(until_step, cfg_.steps);
  while (step_ < end) {
    if (!episode_active_) begin_episode();
    const int a = act(net_, state_, cfg_.epsilon(step_), rng_);
    const StepResult res = env_.step(a);
    EncodedState next = encode_state(res.state, scaler_);
    episode_return_ += res.reward;
    // The horizon is the only episode end; it is a time limit, not a terminal state.
    store({state_, a, res.reward, next, res.done && !cfg_.bootstrap_horizon});
    if (res.done) flush_pending();
    state_ = std::move(next);
    ++step_;

    if (buffer_.size() >= static_cast<std::size_t>(std::max(cfg_.warmup, cfg_.batch)) &&
        step_ % cfg_.train_every == 0) {
      const auto batch = buffer_.sample(static_cast<std::size_t>(cfg_.batch), rng_);
      losses_.push_back({step_, td_update(net_, target_, batch, std::pow(cfg_.gamma, cfg_.n_step),
                                          cfg_.reward_scale, opt_,
                                          cfg_.grad_clip, cfg_.double_q, cfg_.huber)});
    }
    if (step_ % cfg_.target_sync == 0) target_.copy_from(net_);
    if (res.done) {
      episodes_.push_back({episode_, step_, episode_return_});
      episode_active_ = false;
      ++episode_;
    }
    if (cfg_.checkpoint_every > 0 && step_ % cfg_.checkpoint_every == 0 && on_checkpoint) {
      on_checkpoint(*this);
    }
  }
}

void Trainer::save_checkpoint(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  const nlohmann::json header = {{"train_config", to_json(cfg_)},
                                 {"shape", to_json(net_.shape())},
                                 {"step", step_},
                                 {"episode", episode_},
                                 {"episode_boundary", at_episode_boundary()},
                                 {"rng", rng_.state()},
                                 {"adam_t", opt_.t()},
                                 {"layout", "column-major doubles: net, target, adam m, adam v"}};
  const std::string text = header.dump();
  out.write(kMagic, 8);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto* p : net_.parameters()) put_matrix(out, p->value);
  for (const auto* p : target_.parameters()) put_matrix(out, p->value);
  for (const auto& m : opt_.m()) put_matrix(out, m);
  for (const auto& v : opt_.v()) put_matrix(out, v);
  if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

void Trainer::save_replay(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write replay file " + path);
  buffer_.save(out);
}

Trainer Trainer::resume(const std::string& checkpoint, const std::optional<std::string>& replay) {
  auto f = open_checkpoint(checkpoint);
  Trainer t(train_config_from_json(f.header.at("train_config")));
  for (auto* p : t.net_.parameters()) get_matrix(f.in, p->value);
  for (auto* p : t.target_.parameters()) get_matrix(f.in, p->value);
  for (auto& m : t.opt_.m()) get_matrix(f.in, m);
  for (auto& v : t.opt_.v()) get_matrix(f.in, v);
  t.opt_.set_t(f.header.at("adam_t").get<std::int64_t>());
  t.rng_.set_state(f.header.at("rng").get<std::string>());
  t.step_ = f.header.at("step").get<std::int64_t>();
  t.episode_ = f.header.at("episode").get<std::int64_t>();
  if (replay) {
    std::ifstream in(*replay, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read replay file " + *replay);
    t.buffer_ = ReplayBuffer::load(in);
  }
  return t;
}

TrainedPolicy load_policy(const std::string& checkpoint) {
  auto f = open_checkpoint(checkpoint);
  const auto cfg = train_config_from_json(f.header.at("train_config"));
  TrainedPolicy p{QNetwork(network_shape_from_json(f.header.at("shape"))), FeatureScaler(cfg.env),
                  f.header};
  for (auto* param : p.net.parameters()) get_matrix(f.in, param->value);
  return p;
}

}  // namespace ttrk
