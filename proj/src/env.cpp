#include "ttrk/env.hpp"

#include <cmath>
#include <stdexcept>

namespace ttrk {

namespace {

constexpr int kMaxPlacementAttempts = 10000;

// Stream ids for Rng::stream.
constexpr std::uint64_t kMapStream = 1;
constexpr std::uint64_t kPlacementStream = 2;
constexpr std::uint64_t kTargetStream = 3;
constexpr std::uint64_t kSensorStream = 4;

Vec2 sample_ring(const Vec2& center, double r_lo, double r_hi, Rng& rng) {
  const double d = rng.uniform(r_lo, r_hi);
  const double a = rng.uniform(-kPi, kPi);
  return center + d * Vec2{std::cos(a), std::sin(a)};
}

struct Ranges {
  double lo, hi;
};

}  // namespace

std::string to_string(Task task) {
  switch (task) {
    case Task::insight: return "insight";
    case Task::navigation: return "navigation";
    case Task::discovery: return "discovery";
    case Task::random: return "random";
  }
  return "random";
}

Task task_from_string(const std::string& name) {
  if (name == "insight") return Task::insight;
  if (name == "navigation") return Task::navigation;
  if (name == "discovery") return Task::discovery;
  if (name == "random") return Task::random;
  throw std::invalid_argument("unknown task '" + name + "'");
}

void EnvConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("EnvConfig: ") + what);
  };
  require(n_targets >= 1, "n_targets must be >= 1");
  require(horizon > 0, "horizon must be > 0");
  require(target.tau > 0.0, "tau must be > 0");
  require(target.q >= 0.0, "q must be >= 0");
  require(target.nu_max > 0.0, "nu_max must be > 0");
  require(target.r_margin >= 0.0 && target.r_min > 0.0, "r_margin >= 0 and r_min > 0 required");
  require(belief.q_b > 0.0, "q_b must be > 0");
  require(belief.sigma0_pos > 0.0 && belief.sigma0_vel > 0.0, "initial covariance must be positive");
  require(sensor.r_sensor > 0.0, "r_sensor must be > 0");
  require(sensor.fov > 0.0 && sensor.fov <= 2.0 * kPi, "fov must be in (0, 2pi]");
  require(sensor.V(0, 1) == 0.0 && sensor.V(1, 0) == 0.0 && sensor.V(0, 0) > 0.0 &&
              sensor.V(1, 1) > 0.0,
          "V must be diagonal positive");
  require(n_obstacles >= 0 && n_obstacles <= 4, "n_obstacles must be in [0, 4]");
  require(visit_decay > 0.0 && visit_decay <= 1.0, "visit_decay must be in (0, 1]");
  if (task == Task::insight || task == Task::discovery) {
    require(sensor.r_sensor > 3.0, "task initial ranges exceed the sensing range");
  }
  obstacle_set_by_tag(obstacle_set);
}

nlohmann::json to_json(const EnvConfig& cfg) {
  nlohmann::json j = {{"schema", "ttrk.env/1"},
                      {"n_targets", cfg.n_targets},
                      {"horizon", cfg.horizon},
                      {"tau", cfg.target.tau},
                      {"q", cfg.target.q},
                      {"nu_max", cfg.target.nu_max},
                      {"r_margin", cfg.target.r_margin},
                      {"r_min", cfg.target.r_min},
                      {"search_radius", cfg.target.search_radius},
                      {"q_b", cfg.belief.q_b},
                      {"sigma0_pos", cfg.belief.sigma0_pos},
                      {"sigma0_vel", cfg.belief.sigma0_vel},
                      {"r_sensor", cfg.sensor.r_sensor},
                      {"fov", cfg.sensor.fov},
                      {"V", {cfg.sensor.V(0, 0), cfg.sensor.V(1, 1)}},
                      {"task", to_string(cfg.task)},
                      {"penalty", cfg.penalty},
                      {"move_after_first_obs", cfg.move_after_first_obs},
                      {"obstacle_set", cfg.obstacle_set},
                      {"n_obstacles", cfg.n_obstacles},
                      {"visit_decay", cfg.visit_decay}};
  j["map_seed"] = cfg.map_seed ? nlohmann::json(*cfg.map_seed) : nlohmann::json(nullptr);
  return j;
}

EnvConfig env_config_from_json(const nlohmann::json& j) {
  if (j.contains("schema") && j.at("schema") != "ttrk.env/1") {
    throw std::invalid_argument("unsupported env config schema");
  }
  EnvConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("n_targets", c.n_targets);
  get("horizon", c.horizon);
  get("tau", c.target.tau);
  get("q", c.target.q);
  get("nu_max", c.target.nu_max);
  get("r_margin", c.target.r_margin);
  get("r_min", c.target.r_min);
  get("search_radius", c.target.search_radius);
  get("q_b", c.belief.q_b);
  get("sigma0_pos", c.belief.sigma0_pos);
  get("sigma0_vel", c.belief.sigma0_vel);
  get("r_sensor", c.sensor.r_sensor);
  get("fov", c.sensor.fov);
  if (j.contains("V")) {
    c.sensor.V << j.at("V").at(0).get<double>(), 0.0, 0.0, j.at("V").at(1).get<double>();
  }
  if (j.contains("task")) c.task = task_from_string(j.at("task").get<std::string>());
  get("penalty", c.penalty);
  get("move_after_first_obs", c.move_after_first_obs);
  get("obstacle_set", c.obstacle_set);
  get("n_obstacles", c.n_obstacles);
  get("visit_decay", c.visit_decay);
  if (j.contains("map_seed") && !j.at("map_seed").is_null()) {
    c.map_seed = j.at("map_seed").get<std::uint64_t>();
  }
  c.validate();
  return c;
}

double compute_reward(const std::vector<Belief>& posteriors, bool collision_attempt, double penalty) {
  double r = 0.0;
  for (const auto& b : posteriors) r -= logdet(b.cov);
  if (collision_attempt) r -= penalty;
  return r;
}

std::vector<double> build_phi(const std::vector<Belief>& predicted, const Pose2& pose,
                              const std::vector<bool>& observed, const GridMap& map,
                              double r_sensor) {
  std::vector<double> phi;
  phi.reserve(phi_size(static_cast<int>(predicted.size())));
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const Vec2 rel = to_frame(predicted[i].mean.head<2>(), pose);
    const Vec2 vel = rotate_into(predicted[i].mean.tail<2>(), pose.theta);
    phi.insert(phi.end(), {rel.x(), rel.y(), vel.x(), vel.y(), logdet(predicted[i].cov),
                           observed.at(i) ? 1.0 : 0.0});
  }
  const auto obstacle = closest_obstacle(map, pose, 2.0 * r_sensor);
  if (obstacle) {
    phi.push_back(obstacle->r);
    phi.push_back(obstacle->angle);
  } else {
    phi.push_back(2.0 * r_sensor);
    phi.push_back(0.0);
  }
  return phi;
}

Environment::Environment(EnvConfig cfg)
    : cfg_(std::move(cfg)),
      true_sys_(system_matrices(cfg_.target.q, cfg_.target.tau)),
      belief_sys_(system_matrices(cfg_.belief.q_b, cfg_.target.tau)) {
  cfg_.validate();
}

RLState Environment::reset(std::uint64_t seed) { return reset(seed, seed); }

RLState Environment::reset(std::uint64_t scenario_seed, std::uint64_t noise_seed) {
  map_seed_ = cfg_.map_seed ? *cfg_.map_seed : Rng::stream(scenario_seed, kMapStream).next_u64();
  MapGenOptions gen;
  gen.n_obstacles = cfg_.n_obstacles;
  map_ = std::make_shared<const GridMap>(
      generate_map(map_seed_, obstacle_set_by_tag(cfg_.obstacle_set), gen));

  Rng placement = Rng::stream(scenario_seed, kPlacementStream);
  place_entities(placement);
  target_rng_ = Rng::stream(noise_seed, kTargetStream);
  sensor_rng_ = Rng::stream(noise_seed, kSensorStream);

  const auto n = static_cast<std::size_t>(cfg_.n_targets);
  observed_.assign(n, false);
  ever_observed_.assign(n, false);
  predicted_.clear();
  for (const auto& b : posterior_) predicted_.push_back(predict(b, belief_sys_.A, belief_sys_.W));

  visit_ = std::make_unique<VisitGrid>(*map_);
  const auto scanned = scanned_cells(pose_, *map_, cfg_.sensor);
  visit_->apply(scanned, 1.0);

  t_ = 0;
  active_ = true;

  log_ = EpisodeLog{};
  log_.header.config = to_json(cfg_);
  log_.header.scenario_seed = scenario_seed;
  log_.header.noise_seed = noise_seed;
  log_.header.map_seed = map_seed_;
  log_.header.initial_pose = pose_;
  for (const auto& y : targets_) log_.header.initial_targets.push_back(y.y);
  log_.header.initial_beliefs = posterior_;
  log_.header.initial_scanned_count = static_cast<int>(scanned.size());

  state_ = assemble_state();
  return state_;
}

void Environment::place_entities(Rng& rng) {
  const GridMap& map = *map_;
  const double margin = cfg_.target.r_margin;
  const auto n = static_cast<std::size_t>(cfg_.n_targets);
  auto free_point = [&](const Vec2& p) { return map.is_clear(p, 0.0); };

  for (int attempt = 0; attempt < kMaxPlacementAttempts; ++attempt) {
    const Vec2 agent{map.origin().x() + rng.uniform(0.0, map.extent_x()),
                     map.origin().y() + rng.uniform(0.0, map.extent_y())};
    const double heading = rng.uniform(-kPi, kPi);
    if (!map.is_clear(agent, margin)) continue;

    std::vector<TargetState> targets;
    std::vector<Belief> beliefs;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      Vec2 target, belief;
      switch (cfg_.task) {
        case Task::insight:
          target = sample_ring(agent, 3.0, 10.0, rng);
          belief = sample_ring(target, 0.0, 3.0, rng);
          break;
        case Task::navigation:
          target = sample_ring(agent, 15.0, 20.0, rng);
          belief = sample_ring(target, 0.0, 3.0, rng);
          break;
        case Task::discovery:
          belief = sample_ring(agent, 3.0, 10.0, rng);
          target = sample_ring(belief, 15.0, 20.0, rng);
          break;
        case Task::random: {
          const Ranges to_belief = n == 1 ? Ranges{5.0, 20.0} : Ranges{5.0, 10.0};
          const Ranges to_target = n == 1 ? Ranges{0.0, 20.0} : Ranges{0.0, 10.0};
          belief = sample_ring(agent, to_belief.lo, to_belief.hi, rng);
          target = sample_ring(belief, to_target.lo, to_target.hi, rng);
          break;
        }
      }
      const double target_heading = rng.uniform(-kPi, kPi);
      ok = free_point(target) && free_point(belief);
      if (ok && cfg_.task == Task::navigation) ok = !line_of_sight(map, agent, target);
      if (!ok) break;
      TargetState y;
      y.y << target.x(), target.y(), 0.0, 0.0;
      y.heading = target_heading;
      targets.push_back(y);
      Belief b;
      b.mean << belief.x(), belief.y(), 0.0, 0.0;
      b.cov = initial_covariance(cfg_.belief);
      beliefs.push_back(b);
    }
    if (!ok) continue;
    pose_ = Pose2{agent.x(), agent.y(), heading};
    targets_ = std::move(targets);
    posterior_ = std::move(beliefs);
    return;
  }
  throw std::runtime_error("Environment::reset: placement exceeded attempt limit");
}

double Environment::mean_belief_speed() const {
  double s = 0.0;
  for (const auto& b : posterior_) s += b.mean.tail<2>().norm();
  return posterior_.empty() ? 0.0 : s / static_cast<double>(posterior_.size());
}

RLState Environment::assemble_state() const {
  RLState s;
  s.maps = extract_egocentric(*map_, *visit_, pose_);
  s.phi = build_phi(predicted_, pose_, observed_, *map_, cfg_.sensor.r_sensor);
  return s;
}

StepResult Environment::step(const Action& a) {
  if (!active_ || done()) throw std::logic_error("Environment::step: episode is not active");
  const int a_index = action_index(a);
  const double tau = cfg_.tau();

  Pose2 next = step_agent(pose_, a, tau);
  const bool collision = !map_->is_clear(next.position(), cfg_.target.r_margin);
  if (collision) {
    next.x1 = pose_.x1;
    next.x2 = pose_.x2;
  }

  const auto n = targets_.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (cfg_.move_after_first_obs && !ever_observed_[i]) continue;
    targets_[i] = step_target(targets_[i], *map_, cfg_.target, target_rng_).state;
  }

  StepRecord rec;
  rec.t = t_ + 1;
  rec.pose = next;
  rec.action = a_index;
  rec.collision_attempt = collision;

  StepResult result;
  result.info.collision_attempt = collision;
  for (std::size_t i = 0; i < n; ++i) {
    const auto z = measure(next, targets_[i], static_cast<int>(i), *map_, cfg_.sensor, sensor_rng_);
    posterior_[i] = z ? update(predicted_[i], *z, next, cfg_.sensor.V) : predicted_[i];
    observed_[i] = z.has_value();
    if (z) ever_observed_[i] = true;
    TargetRecord tr;
    tr.true_state = targets_[i].y;
    tr.posterior = posterior_[i];
    tr.measurement = z;
    rec.targets.push_back(tr);
    result.info.logdet.push_back(logdet(posterior_[i].cov));
  }
  result.reward = compute_reward(posterior_, collision, cfg_.penalty);

  pose_ = next;
  const auto scanned = scanned_cells(pose_, *map_, cfg_.sensor);
  visit_->apply(scanned, visit_decay_factor(mean_belief_speed(), tau, cfg_.sensor.r_sensor,
                                            cfg_.visit_decay));
  for (std::size_t i = 0; i < n; ++i) {
    predicted_[i] = predict(posterior_[i], belief_sys_.A, belief_sys_.W);
    rec.targets[i].predicted = predicted_[i];
  }
  ++t_;
  state_ = assemble_state();

  rec.reward = result.reward;
  rec.scanned_count = static_cast<int>(scanned.size());
  log_.steps.push_back(std::move(rec));

  result.state = state_;
  result.done = done();
  result.info.observed = observed_;
  return result;
}

Snapshot Environment::snapshot() const {
  return {pose_, map_, predicted_, cfg_.sensor, belief_sys_.A, belief_sys_.W, cfg_.tau(),
          cfg_.target.r_margin};
}

void Environment::annotate_last_step(const nlohmann::json& info) {
  if (log_.steps.empty()) throw std::logic_error("annotate_last_step: no steps yet");
  log_.steps.back().info = info;
}

}  // namespace ttrk
