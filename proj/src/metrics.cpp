#include "ttrk/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ttrk/env.hpp"
#include "ttrk/sensing.hpp"
#include "ttrk/worldmap.hpp"

namespace ttrk {

JbarBounds jbar_bounds(const Mat4& sigma0, double q_b, double tau, int T) {
  const auto sys = system_matrices(q_b, tau);
  JbarBounds b;
  // Same recursion the environment runs when nothing is observed.
  Mat4 cov = predict_covariance(sigma0, sys.A, sys.W);
  for (int t = 1; t <= T; ++t) {
    cov = predict_covariance(cov, sys.A, sys.W);
    b.j_min -= logdet(cov);
  }
  b.j_max = -static_cast<double>(T) * logdet(sys.W);
  return b;
}

double jbar(const EpisodeLog& log, int target, double q_b, double tau, int T) {
  if (T < 1 || static_cast<std::size_t>(T) > log.steps.size()) {
    throw std::invalid_argument("jbar: log has fewer than T steps");
  }
  const auto bounds = jbar_bounds(log.header.initial_beliefs.at(target).cov, q_b, tau, T);
  if (bounds.j_max <= bounds.j_min) {
    throw std::invalid_argument("jbar: degenerate bounds, J_max <= J_min");
  }
  double j = 0.0;
  for (int t = 0; t < T; ++t) j -= logdet(log.steps[t].targets.at(target).predicted.cov);
  return (j - bounds.j_min) / (bounds.j_max - bounds.j_min);
}

double jbar(const EpisodeLog& log, int target) {
  const auto cfg = env_config_from_json(log.header.config);
  return jbar(log, target, cfg.belief.q_b, cfg.tau(), static_cast<int>(log.steps.size()));
}

ResilienceCounts resilience_counts(const std::vector<bool>& observed) {
  ResilienceCounts c;
  for (std::size_t t = 0; t + 1 < observed.size(); ++t) {
    if (observed[t] && !observed[t + 1]) ++c.losses;
    if (!observed[t] && observed[t + 1] && c.losses > 0) ++c.rediscoveries;
  }
  return c;
}

double resilience(const std::vector<bool>& observed) { return resilience_counts(observed).eta(); }

double resilience(const EpisodeLog& log) {
  const int n = log.n_targets();
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += resilience(log.observed_flags(i));
  return n == 0 ? 1.0 : s / n;
}

bool discovery(const EpisodeLog& log) {
  for (const auto& step : log.steps) {
    for (const auto& t : step.targets) {
      if (t.measurement) return true;
    }
  }
  return false;
}

int collision_attempts(const EpisodeLog& log) {
  return static_cast<int>(std::count_if(log.steps.begin(), log.steps.end(),
                                        [](const StepRecord& s) { return s.collision_attempt; }));
}

double population_sd(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(values.size()));
}

EpisodeMetrics compute_metrics(const EpisodeLog& log) {
  EpisodeMetrics m;
  const int n = log.n_targets();
  for (int i = 0; i < n; ++i) m.jbar.push_back(jbar(log, i));
  for (double j : m.jbar) m.jbar_mean += j;
  if (n > 0) m.jbar_mean /= n;
  m.sd_jbar = population_sd(m.jbar);
  m.eta = resilience(log);
  m.discovered = discovery(log);
  m.collision_attempts = collision_attempts(log);
  return m;
}

GridMap map_for_log(const EpisodeLog& log) {
  const auto cfg = env_config_from_json(log.header.config);
  MapGenOptions gen;
  gen.n_obstacles = cfg.n_obstacles;
  return generate_map(log.header.map_seed, obstacle_set_by_tag(cfg.obstacle_set), gen);
}

ScanDensity scan_density(const std::vector<EpisodeLog>& logs) {
  ScanDensity d;
  for (const auto& log : logs) {
    const GridMap map = map_for_log(log);
    const auto cfg = env_config_from_json(log.header.config);
    if (d.values.empty()) {
      d.width = map.width();
      d.height = map.height();
      d.values.assign(map.size(), 0.0);
    } else if (d.width != map.width() || d.height != map.height()) {
      throw std::invalid_argument("scan_density: logs use different map sizes");
    }
    for (const auto& step : log.steps) {
      for (int idx : scanned_cells(step.pose, map, cfg.sensor)) d.values[idx] += 1.0;
    }
  }
  const double peak = d.values.empty() ? 0.0 : *std::max_element(d.values.begin(), d.values.end());
  if (peak > 0.0) {
    for (double& v : d.values) v /= peak;
  }
  return d;
}

void BeliefHistogram::add(const Vec2& local) {
  ++total;
  if (local.x() < x_min || local.x() >= x_max || local.y() < y_min || local.y() >= y_max) return;
  const int ix = std::min(nx - 1, static_cast<int>((local.x() - x_min) / bin));
  const int iy = std::min(ny - 1, static_cast<int>((local.y() - y_min) / bin));
  counts[static_cast<std::size_t>(iy) * nx + ix] += 1.0;
  ++in_range;
}

BeliefHistogram belief_histogram(const std::vector<EpisodeLog>& logs) {
  BeliefHistogram h;
  for (const auto& log : logs) {
    for (const auto& step : log.steps) {
      for (const auto& t : step.targets) h.add(to_frame(t.posterior.mean.head<2>(), step.pose));
    }
  }
  return h;
}

}  // namespace ttrk
