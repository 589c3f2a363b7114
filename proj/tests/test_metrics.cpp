#include <cmath>

#include "doctest.h"
#include "ttrk/dynamics.hpp"
#include "ttrk/evaluation.hpp"
#include "ttrk/metrics.hpp"
#include "ttrk/sensing.hpp"

using namespace ttrk;

namespace {

EpisodeLog synthetic_log(const EnvConfig& cfg, const std::vector<Mat4>& predicted) {
  EpisodeLog log;
  log.header.config = to_json(cfg);
  Belief b0;
  b0.cov = initial_covariance(cfg.belief);
  log.header.initial_beliefs = {b0};
  int t = 1;
  for (const auto& c : predicted) {
    StepRecord s;
    s.t = t++;
    TargetRecord r;
    r.predicted.cov = c;
    r.posterior.cov = c;
    s.targets.push_back(r);
    log.steps.push_back(s);
  }
  return log;
}

// Flag-scan reference for losses and rediscoveries.
std::pair<int, int> count_edges(const std::vector<bool>& f) {
  int lost = 0, found = 0;
  bool seen_loss = false;
  for (std::size_t i = 1; i < f.size(); ++i) {
    if (f[i - 1] && !f[i]) {
      ++lost;
      seen_loss = true;
    }
    if (!f[i - 1] && f[i] && seen_loss) ++found;
  }
  return {lost, found};
}

}  // namespace

TEST_CASE("normalized objective on a hand-built three-step log") {
  EnvConfig cfg;
  const auto sys = system_matrices(cfg.belief.q_b, cfg.tau());
  const Mat4 s0 = initial_covariance(cfg.belief);
  // Logged predictions: somewhere between the bounds.
  std::vector<Mat4> logged{0.5 * s0, 0.7 * s0, 0.9 * s0};
  const EpisodeLog log = synthetic_log(cfg, logged);

  // Lower bound: the prediction-only chain, starting one step after reset.
  Mat4 c = sys.A * s0 * sys.A.transpose() + sys.W;
  double j_min = 0;
  for (int t = 0; t < 3; ++t) {
    c = sys.A * c * sys.A.transpose() + sys.W;
    j_min -= std::log(c.determinant());
  }
  const double j_max = -3.0 * std::log(sys.W.determinant());
  double j = 0;
  for (const auto& m : logged) j -= std::log(m.determinant());
  const double expected = (j - j_min) / (j_max - j_min);

  CHECK(std::abs(jbar(log, 0) - expected) < 1e-12);
  CHECK(std::abs(jbar(log, 0, cfg.belief.q_b, cfg.tau(), 3) - expected) < 1e-12);
  const auto b = jbar_bounds(s0, cfg.belief.q_b, cfg.tau(), 3);
  CHECK(std::abs(b.j_min - j_min) < 1e-9);
  CHECK(std::abs(b.j_max - j_max) < 1e-9);
  CHECK_THROWS_AS(jbar(log, 0, cfg.belief.q_b, cfg.tau(), 4), std::invalid_argument);
}

TEST_CASE("never observing scores zero") {
  EnvConfig cfg;
  cfg.sensor.r_sensor = 1e-3;
  cfg.horizon = 50;
  RandomPolicy policy;
  const EpisodeLog log = run_episode(cfg, policy, 7, 7);
  REQUIRE_FALSE(discovery(log));
  CHECK(std::abs(jbar(log, 0)) < 1e-12);
  CHECK(resilience(log) == 1.0);
}

TEST_CASE("normalized objective stays below one on real episodes") {
  EnvConfig cfg;
  cfg.horizon = 60;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    GreedyPolicy greedy;
    const EpisodeLog log = run_episode(cfg, greedy, seed, seed);
    const double j = jbar(log, 0);
    CHECK(j >= -1e-12);
    CHECK(j < 1.0);
  }
}

TEST_CASE("resilience examples") {
  CHECK(resilience(std::vector<bool>(10, false)) == 1.0);
  CHECK(resilience(std::vector<bool>(10, true)) == 1.0);
  const auto a = resilience_counts({true, true, false, false, true});
  CHECK(a.losses == 1);
  CHECK(a.rediscoveries == 1);
  CHECK(a.eta() == 1.0);
  const auto b = resilience_counts({true, false, true, false, false});
  CHECK(b.losses == 2);
  CHECK(b.rediscoveries == 1);
  CHECK(b.eta() == 0.5);
  // First sighting is not a rediscovery.
  const auto c = resilience_counts({false, true, false});
  CHECK(c.losses == 1);
  CHECK(c.rediscoveries == 0);
  CHECK(c.eta() == 0.0);
}

TEST_CASE("episode metrics agree with a flag scan") {
  EnvConfig cfg;
  cfg.horizon = 80;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    RandomPolicy policy;
    const EpisodeLog log = run_episode(cfg, policy, seed, seed + 100);
    const auto flags = log.observed_flags(0);
    REQUIRE(flags.size() == log.steps.size());
    bool any = false;
    for (bool f : flags) any = any || f;
    CHECK(discovery(log) == any);
    const auto [lost, found] = count_edges(flags);
    const auto rc = resilience_counts(flags);
    CHECK(rc.losses == lost);
    CHECK(rc.rediscoveries == found);
    const auto m = compute_metrics(log);
    CHECK(m.eta == (lost == 0 ? 1.0 : static_cast<double>(found) / lost));
    CHECK(m.discovered == any);
    int collisions = 0;
    for (const auto& s : log.steps) collisions += s.collision_attempt ? 1 : 0;
    CHECK(m.collision_attempts == collisions);
  }
}

TEST_CASE("population standard deviation") {
  CHECK(population_sd({}) == 0.0);
  CHECK(population_sd({3.0}) == 0.0);
  CHECK(population_sd({1.0, 3.0}) == doctest::Approx(1.0));
  CHECK(population_sd({2, 4, 4, 4, 5, 5, 7, 9}) == doctest::Approx(2.0));
}

TEST_CASE("scan density is normalized and counts every scanned cell") {
  EnvConfig cfg;
  cfg.horizon = 30;
  std::vector<EpisodeLog> logs;
  for (std::uint64_t seed = 0; seed < 2; ++seed) {
    RandomPolicy policy;
    logs.push_back(run_episode(cfg, policy, seed, seed));
  }
  const auto d = scan_density(logs);
  REQUIRE(d.values.size() == static_cast<std::size_t>(d.width) * d.height);
  double peak = 0, total = 0;
  for (double v : d.values) {
    CHECK(v >= 0.0);
    peak = std::max(peak, v);
    total += v;
  }
  CHECK(peak == 1.0);
  // Undo the normalization: total raw counts equal the per-step scan sizes.
  long raw = 0;
  for (const auto& log : logs) {
    const GridMap map = map_for_log(log);
    for (const auto& s : log.steps) raw += static_cast<long>(scanned_cells(s.pose, map, cfg.sensor).size());
  }
  double max_raw = 0;
  {
    std::vector<double> counts(d.values.size(), 0.0);
    for (const auto& log : logs) {
      const GridMap map = map_for_log(log);
      for (const auto& s : log.steps) {
        for (int idx : scanned_cells(s.pose, map, cfg.sensor)) counts[idx] += 1.0;
      }
    }
    for (double v : counts) max_raw = std::max(max_raw, v);
  }
  CHECK(total * max_raw == doctest::Approx(static_cast<double>(raw)));
}

TEST_CASE("belief histogram bins") {
  BeliefHistogram h;
  h.add(Vec2(0.1, 0.1));
  h.add(Vec2(-2.0, -5.0));
  h.add(Vec2(7.99, 4.99));
  h.add(Vec2(8.0, 0.0));
  h.add(Vec2(0.0, -5.01));
  CHECK(h.total == 5);
  CHECK(h.in_range == 3);
  double sum = 0;
  for (double v : h.counts) sum += v;
  CHECK(sum == 3.0);
  CHECK(h.counts[0] == 1.0);
  CHECK(h.counts[39 * 40 + 39] == 1.0);
  // (0.1, 0.1): x bin 8, y bin 20.
  CHECK(h.counts[20 * 40 + 8] == 1.0);
}
