#pragma once

#include <string>
#include <vector>

#include "ttrk/episode_log.hpp"
#include "ttrk/grid_map.hpp"

namespace ttrk {

struct JbarBounds {
  double j_min = 0.0;  // prediction-only objective from the episode's initial covariance
  double j_max = 0.0;  // -T log det W(q_b)
};

JbarBounds jbar_bounds(const Mat4& sigma0, double q_b, double tau, int T);

/// Normalized objective of one target from the logged predicted covariances.
/// Throws std::invalid_argument if J_max <= J_min.
double jbar(const EpisodeLog& log, int target, double q_b, double tau, int T);
/// Same, reading q_b and tau from the log header and T from the step count.
double jbar(const EpisodeLog& log, int target);

struct ResilienceCounts {
  int losses = 0;
  int rediscoveries = 0;
  double eta() const { return losses == 0 ? 1.0 : static_cast<double>(rediscoveries) / losses; }
};

/// Edge scan over observed flags. A loss is 1 -> 0; a rediscovery is 0 -> 1
/// after at least one loss.
ResilienceCounts resilience_counts(const std::vector<bool>& observed);
double resilience(const std::vector<bool>& observed);
/// Mean over targets.
double resilience(const EpisodeLog& log);

/// True iff any target was observed at any step.
bool discovery(const EpisodeLog& log);
int collision_attempts(const EpisodeLog& log);
double population_sd(const std::vector<double>& values);

struct EpisodeMetrics {
  std::vector<double> jbar;  // per target
  double jbar_mean = 0.0;
  double sd_jbar = 0.0;
  double eta = 1.0;
  bool discovered = false;
  int collision_attempts = 0;
};

EpisodeMetrics compute_metrics(const EpisodeLog& log);

/// Per-cell count of steps in which the cell was scanned, divided by the max.
struct ScanDensity {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // row-major, x fastest
};

/// Regenerates each episode's map from its header and rescans from the logged poses.
ScanDensity scan_density(const std::vector<EpisodeLog>& logs);

/// 2-D histogram of belief means in the agent frame.
struct BeliefHistogram {
  double x_min = -2.0, x_max = 8.0;
  double y_min = -5.0, y_max = 5.0;
  double bin = 0.25;
  int nx = 40, ny = 40;
  std::vector<double> counts = std::vector<double>(40 * 40, 0.0);  // row-major, x fastest
  long in_range = 0;
  long total = 0;
  void add(const Vec2& local);
};

BeliefHistogram belief_histogram(const std::vector<EpisodeLog>& logs);

/// Map an episode log was recorded on.
GridMap map_for_log(const EpisodeLog& log);

}  // namespace ttrk
