#include "ttrk/evaluation.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace ttrk {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

constexpr const char* kCheckpointPrefix = "checkpoint:";

std::string replace_seed(std::string path, std::uint64_t seed) {
  const std::string key = "{seed}";
  for (auto pos = path.find(key); pos != std::string::npos; pos = path.find(key)) {
    path.replace(pos, key.size(), std::to_string(seed));
  }
  return path;
}

}  // namespace

Decision PlannerPolicy::decide(const Environment& env) {
  Decision d;
  if (queue_.empty()) {
    const PlanResult r = plan(env.snapshot(), cfg_);
    queue_.assign(r.actions.rbegin(), r.actions.rend());
    d.info = {{"plan_objective", r.objective},
              {"nodes_expanded", r.nodes_expanded},
              {"path", r.path}};
  }
  d.action = queue_.back();
  queue_.pop_back();
  return d;
}

Decision GreedyPolicy::decide(const Environment& env) { return {greedy_policy(env.snapshot()), {}}; }

void RandomPolicy::begin(std::uint64_t noise_seed) { rng_ = Rng::stream(noise_seed, 99); }

Decision RandomPolicy::decide(const Environment&) { return {random_policy(rng_), {}}; }

NetworkPolicy::NetworkPolicy(std::shared_ptr<const TrainedPolicy> model)
    : model_(std::move(model)), net_(model_->net.shape()) {
  net_.copy_from(model_->net);
}

Decision NetworkPolicy::decide(const Environment& env) {
  const EncodedState s = encode_state(env.state(), model_->scaler);
  Matrix maps, phi;
  batch_inputs({&s}, maps, phi);
  return {argmax_action(net_.forward(maps, phi)), {}};
}

bool valid_policy_spec(const std::string& spec) {
  if (spec == "arvi" || spec == "greedy" || spec == "random") return true;
  return spec.rfind(kCheckpointPrefix, 0) == 0 && spec.size() > std::string(kCheckpointPrefix).size();
}

PolicyFactory make_policy_factory(const std::string& spec, const PlannerConfig& planner) {
  if (!valid_policy_spec(spec)) {
    throw std::invalid_argument("invalid policy spec '" + spec +
                                "' (expected arvi, greedy, random or checkpoint:<path>)");
  }
  if (spec == "arvi") {
    planner.validate();
    return [planner](std::uint64_t) { return std::make_unique<PlannerPolicy>(planner); };
  }
  if (spec == "greedy") return [](std::uint64_t) { return std::make_unique<GreedyPolicy>(); };
  if (spec == "random") return [](std::uint64_t) { return std::make_unique<RandomPolicy>(); };

  // Models are loaded once per distinct path and shared read-only.
  const std::string pattern = spec.substr(std::string(kCheckpointPrefix).size());
  auto cache = std::make_shared<std::map<std::string, std::shared_ptr<const TrainedPolicy>>>();
  auto mutex = std::make_shared<std::mutex>();
  return [pattern, cache, mutex](std::uint64_t run_seed) -> std::unique_ptr<EpisodePolicy> {
    const std::string path = replace_seed(pattern, run_seed);
    std::shared_ptr<const TrainedPolicy> model;
    {
      std::lock_guard lock(*mutex);
      auto it = cache->find(path);
      if (it == cache->end()) {
        it = cache->emplace(path, std::make_shared<const TrainedPolicy>(load_policy(path))).first;
      }
      model = it->second;
    }
    return std::make_unique<NetworkPolicy>(model);
  };
}

EpisodeLog run_episode(const EnvConfig& cfg, EpisodePolicy& policy, std::uint64_t scenario_seed,
                       std::uint64_t noise_seed) {
  Environment env(cfg);
  env.reset(scenario_seed, noise_seed);
  policy.begin(noise_seed);
  while (!env.done()) {
    Decision d = policy.decide(env);
    env.step(d.action);
    if (!d.info.is_null()) env.annotate_last_step(d.info);
  }
  return env.log();
}

EnvConfig Suite::config_for(double sweep_value) const {
  EnvConfig c = base;
  if (sweep_param == "q") {
    c.target.q = sweep_value;
  } else if (sweep_param == "nu_max") {
    c.target.nu_max = sweep_value;
  } else if (sweep_param != "none") {
    throw std::invalid_argument("unknown sweep parameter '" + sweep_param + "'");
  }
  return c;
}

std::uint64_t Suite::scenario_seed(int episode) const {
  return Rng::stream(base_seed, static_cast<std::uint64_t>(episode)).next_u64();
}

std::uint64_t Suite::noise_seed(int episode, std::uint64_t run_seed) const {
  return Rng::stream(scenario_seed(episode), 500 + run_seed).next_u64();
}

void Suite::validate() const {
  if (n_episodes < 1) throw std::invalid_argument("Suite: n_episodes must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("Suite: no seeds");
  if (sweep_values.empty()) throw std::invalid_argument("Suite: no sweep values");
  for (double v : sweep_values) config_for(v).validate();
  for (const auto& p : policies) {
    if (!valid_policy_spec(p)) throw std::invalid_argument("Suite: bad policy spec '" + p + "'");
  }
}

std::vector<std::string> suite_names() {
  std::vector<std::string> base{"insight-q", "insight-vmax", "navigation", "discovery", "two-target"};
  std::vector<std::string> all = base;
  for (const auto& n : base) all.push_back(n + "-unseen");
  return all;
}

Suite suite_by_name(const std::string& name) {
  const std::string suffix = "-unseen";
  const bool unseen =
      name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
  const std::string stem = unseen ? name.substr(0, name.size() - suffix.size()) : name;

  Suite s;
  s.name = name;
  EnvConfig& c = s.base;
  c.belief.q_b = 0.5;
  c.move_after_first_obs = true;
  if (stem == "insight-q") {
    c.task = Task::insight;
    c.target.nu_max = 3.0;
    s.sweep_param = "q";
    s.sweep_values = {0.02, 0.1, 0.2, 1.0, 2.0};
  } else if (stem == "insight-vmax") {
    c.task = Task::insight;
    c.target.q = 0.2;
    s.sweep_param = "nu_max";
    s.sweep_values = {2.5, 2.75, 3.0, 3.25, 3.5};
  } else if (stem == "navigation" || stem == "discovery") {
    c.task = stem == "navigation" ? Task::navigation : Task::discovery;
    c.target.q = 0.5;
    c.target.nu_max = 3.5;
  } else if (stem == "two-target") {
    c.task = Task::insight;
    c.n_targets = 2;
    c.target.nu_max = 1.0;
    c.belief.q_b = 0.2;
    s.sweep_param = "q";
    s.sweep_values = {0.002, 0.02, 0.2};
  } else {
    throw std::invalid_argument("unknown suite '" + name + "'");
  }
  if (unseen) c.obstacle_set = "unseen";
  s.validate();
  return s;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const EnvConfig& cfg) { return fnv1a_hex(to_json(cfg).dump()); }

int default_thread_count() {
  if (const char* env = std::getenv("TTRK_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int n, int threads, const std::function<void(int)>& job) {
  threads = std::max(1, std::min(threads, n));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

EvalResult evaluate_suite(const Suite& suite, const std::vector<std::string>& policies,
                          const EvalOptions& options) {
  const int n_episodes = options.n_episodes.value_or(suite.n_episodes);
  const auto seeds = options.seeds.value_or(suite.seeds);
  std::vector<PolicyFactory> factories;
  for (const auto& p : policies) factories.push_back(make_policy_factory(p, options.planner));

  struct Job {
    std::size_t sweep, policy;
    int episode;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t v = 0; v < suite.sweep_values.size(); ++v) {
    for (int e = 0; e < n_episodes; ++e) {
      for (auto seed : seeds) {
        for (std::size_t p = 0; p < policies.size(); ++p) jobs.push_back({v, p, e, seed});
      }
    }
  }

  EvalResult result;
  result.rows.resize(jobs.size());
  if (options.keep_logs) result.logs.resize(jobs.size());
  const int threads = options.threads > 0 ? options.threads : default_thread_count();
  parallel_for(static_cast<int>(jobs.size()), threads, [&](int i) {
    const Job& job = jobs[i];
    const double value = suite.sweep_values[job.sweep];
    const EnvConfig cfg = suite.config_for(value);
    const auto scenario = suite.scenario_seed(job.episode);
    const auto noise = suite.noise_seed(job.episode, job.seed);
    auto policy = factories[job.policy](job.seed);
    EpisodeLog log = run_episode(cfg, *policy, scenario, noise);

    EvalRow& row = result.rows[i];
    row.suite = suite.name;
    row.sweep_param = suite.sweep_param;
    row.sweep_value = value;
    row.episode = job.episode;
    row.seed = job.seed;
    row.policy = policies[job.policy];
    row.scenario_seed = scenario;
    row.noise_seed = noise;
    row.config_hash = config_hash(cfg);
    row.metrics = compute_metrics(log);
    if (options.keep_logs) result.logs[i] = std::move(log);
  });
  return result;
}

void write_metrics_csv(std::ostream& out, const std::vector<EvalRow>& rows, int n_targets) {
  out << "suite,sweep_param,sweep_value,episode,seed,policy,scenario_seed,noise_seed,config_hash,"
         "jbar_mean";
  for (int i = 0; i < n_targets; ++i) out << ",jbar_" << i;
  out << ",sd_jbar,eta,discovered,collision_attempts\n";
  for (const auto& r : rows) {
    out << r.suite << ',' << r.sweep_param << ',' << fmt(r.sweep_value) << ',' << r.episode << ','
        << r.seed << ',' << r.policy << ',' << r.scenario_seed << ',' << r.noise_seed << ','
        << r.config_hash << ',' << fmt(r.metrics.jbar_mean);
    for (int i = 0; i < n_targets; ++i) out << ',' << fmt(r.metrics.jbar.at(i));
    out << ',' << fmt(r.metrics.sd_jbar) << ',' << fmt(r.metrics.eta) << ','
        << (r.metrics.discovered ? 1 : 0) << ',' << r.metrics.collision_attempts << '\n';
  }
}

void write_summary(std::ostream& out, const std::vector<EvalRow>& rows) {
  struct Acc {
    std::vector<double> jbar, eta, sd, collisions;
    int discovered = 0;
  };
  // Keyed by first appearance so the table follows the CSV order.
  std::vector<std::pair<std::pair<double, std::string>, Acc>> groups;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.sweep_value, r.policy);
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == key; });
    if (it == groups.end()) {
      groups.push_back({key, {}});
      it = groups.end() - 1;
    }
    it->second.jbar.push_back(r.metrics.jbar_mean);
    it->second.eta.push_back(r.metrics.eta);
    it->second.sd.push_back(r.metrics.sd_jbar);
    it->second.collisions.push_back(r.metrics.collision_attempts);
    it->second.discovered += r.metrics.discovered ? 1 : 0;
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  out << "sweep_value\tpolicy\tn\tjbar\teta\tsd_jbar\tdiscovery_rate\tcollisions\n";
  for (const auto& [key, a] : groups) {
    const double n = static_cast<double>(a.jbar.size());
    out << fmt_short(key.first) << '\t' << key.second << '\t' << a.jbar.size() << '\t'
        << fmt_short(mean(a.jbar)) << " +- " << fmt_short(population_sd(a.jbar)) << '\t'
        << fmt_short(mean(a.eta)) << " +- " << fmt_short(population_sd(a.eta)) << '\t'
        << fmt_short(mean(a.sd)) << '\t' << fmt_short(a.discovered / n) << '\t'
        << fmt_short(mean(a.collisions)) << '\n';
  }
}

}  // namespace ttrk
