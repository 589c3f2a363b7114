#include "ttrk/planner.hpp"

#include <chrono>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <unordered_map>

#include "ttrk/sensing.hpp"

namespace ttrk {

void PlannerConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("PlannerConfig: horizon must be >= 1");
  if (execute_steps < 1 || execute_steps > horizon) {
    throw std::invalid_argument("PlannerConfig: execute_steps must be in [1, horizon]");
  }
  if (node_budget < 1) throw std::invalid_argument("PlannerConfig: node_budget must be >= 1");
  if (wall_seconds && *wall_seconds <= 0.0) {
    throw std::invalid_argument("PlannerConfig: wall_seconds must be > 0");
  }
}

Mat4 covariance_step(const Mat4& predicted_cov, const Vec4& predicted_mean, const Pose2& pose,
                     const GridMap& map, const SensorParams& sensor, const Mat4& A, const Mat4& W) {
  const Vec2 mean_pos = predicted_mean.head<2>();
  if (observable(pose, mean_pos, map, sensor)) {
    return predict_covariance(update_covariance(predicted_cov, pose, mean_pos, sensor.V), A, W);
  }
  return predict_covariance(predicted_cov, A, W);
}

std::vector<Mat4> simulate_covariance(const Belief& predicted, const std::vector<Pose2>& poses,
                                      const GridMap& map, const SensorParams& sensor, const Mat4& A,
                                      const Mat4& W) {
  std::vector<Mat4> out;
  out.reserve(poses.size());
  Vec4 mean = predicted.mean;
  Mat4 cov = predicted.cov;
  for (const auto& pose : poses) {
    cov = covariance_step(cov, mean, pose, map, sensor, A, W);
    mean = A * mean;
    out.push_back(cov);
  }
  return out;
}

std::optional<Pose2> try_move(const Pose2& pose, int action, const GridMap& map, double r_margin,
                              double tau) {
  const Pose2 next = step_agent(pose, action_at(action), tau);
  if (!map.is_clear(next.position(), r_margin)) return std::nullopt;
  return next;
}

std::optional<double> sequence_objective(const Snapshot& snap, const std::vector<int>& actions) {
  Pose2 pose = snap.pose;
  std::vector<Mat4> covs;
  std::vector<Vec4> means;
  for (const auto& b : snap.predicted) {
    covs.push_back(b.cov);
    means.push_back(b.mean);
  }
  double total = 0.0;
  for (int a : actions) {
    const auto next = try_move(pose, a, *snap.map, snap.r_margin, snap.tau);
    if (!next) return std::nullopt;
    pose = *next;
    double step = 0.0;
    for (std::size_t i = 0; i < covs.size(); ++i) {
      covs[i] = covariance_step(covs[i], means[i], pose, *snap.map, snap.sensor, snap.A, snap.W);
      means[i] = snap.A * means[i];
      step -= logdet(covs[i]);
    }
    total += step;
  }
  return total;
}

namespace {

struct Node {
  Pose2 pose;
  std::vector<Mat4> covs;
  int depth = 0;
  double g = 0.0;      // accumulated objective
  double value = 0.0;  // g plus the prediction-only completion to the horizon
  int parent = -1;
  int action = -1;
  bool pruned = false;
};

struct BucketKey {
  int depth, bx, by, sector;
  bool operator==(const BucketKey&) const = default;
};

struct BucketHash {
  std::size_t operator()(const BucketKey& k) const {
    std::size_t h = static_cast<std::size_t>(k.depth);
    for (int v : {k.bx, k.by, k.sector}) h = h * 1000003u ^ static_cast<std::size_t>(v + (1 << 20));
    return h;
  }
};

struct QueueEntry {
  double value;
  int depth;
  int id;
};

// Higher value first, then deeper, then earlier-generated.
struct QueueOrder {
  bool operator()(const QueueEntry& a, const QueueEntry& b) const {
    if (a.value != b.value) return a.value < b.value;
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.id > b.id;
  }
};

class Search {
 public:
  Search(const Snapshot& snap, const PlannerConfig& cfg) : snap_(snap), cfg_(cfg) {
    // Belief means do not depend on the path, so precompute them per depth.
    means_.resize(cfg.horizon + 1);
    for (const auto& b : snap.predicted) {
      Vec4 m = b.mean;
      for (int d = 0; d <= cfg.horizon; ++d) {
        means_[d].push_back(m);
        m = snap.A * m;
      }
    }
  }

  PlanResult run() {
    const auto start = std::chrono::steady_clock::now();
    Node root;
    root.pose = snap_.pose;
    for (const auto& b : snap_.predicted) root.covs.push_back(b.cov);
    root.value = lower_bound(0.0, root.covs, 0);
    nodes_.push_back(std::move(root));
    best_ = 0;

    std::priority_queue<QueueEntry, std::vector<QueueEntry>, QueueOrder> open;
    if (cfg_.horizon > 0) open.push({nodes_[0].value, 0, 0});

    std::int64_t expanded = 0;
    while (!open.empty() && expanded < cfg_.node_budget) {
      if (cfg_.wall_seconds && (expanded & 63) == 0) {
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
        if (dt.count() > *cfg_.wall_seconds) break;
      }
      const int id = open.top().id;
      open.pop();
      if (nodes_[id].pruned) continue;
      expand(id, open);
      ++expanded;
    }

    PlanResult result;
    result.path = path_of(best_);
    result.objective = nodes_[best_].value;
    result.nodes_expanded = expanded;
    result.nodes_generated = static_cast<std::int64_t>(nodes_.size());
    result.actions.assign(result.path.begin(),
                          result.path.begin() + std::min<std::size_t>(result.path.size(),
                                                                      cfg_.execute_steps));
    result.actions.resize(cfg_.execute_steps, 0);
    return result;
  }

 private:
  // g plus the prediction-only rollout from `depth` to the horizon. Updates
  // never increase a covariance, so any continuation achieves at least this.
  // Summed step by step like g itself, so a continuation without updates
  // lands on exactly the same number.
  double lower_bound(double g, std::vector<Mat4> covs, int depth) const {
    double total = g;
    for (int d = depth; d < cfg_.horizon; ++d) {
      double step = 0.0;
      for (auto& c : covs) {
        c = predict_covariance(c, snap_.A, snap_.W);
        step -= logdet(c);
      }
      total += step;
    }
    return total;
  }

  void expand(int id, std::priority_queue<QueueEntry, std::vector<QueueEntry>, QueueOrder>& open) {
    const int depth = nodes_[id].depth + 1;
    for (int a = 0; a < kNumActions; ++a) {
      const Node& parent = nodes_[id];
      const auto next = try_move(parent.pose, a, *snap_.map, snap_.r_margin, snap_.tau);
      if (!next) continue;
      Node child;
      child.pose = *next;
      child.depth = depth;
      child.parent = id;
      child.action = a;
      double step = 0.0;
      child.covs.reserve(parent.covs.size());
      for (std::size_t i = 0; i < parent.covs.size(); ++i) {
        child.covs.push_back(covariance_step(parent.covs[i], means_[depth - 1][i], child.pose,
                                             *snap_.map, snap_.sensor, snap_.A, snap_.W));
        step -= logdet(child.covs.back());
      }
      child.g = parent.g + step;
      child.value = lower_bound(child.g, child.covs, depth);

      const int child_id = static_cast<int>(nodes_.size());
      if (cfg_.prune_cell > 0.0) {
        const BucketKey key{depth, static_cast<int>(std::floor(child.pose.x1 / cfg_.prune_cell)),
                            static_cast<int>(std::floor(child.pose.x2 / cfg_.prune_cell)),
                            static_cast<int>(std::floor((child.pose.theta + kPi) / (kPi / 4))) & 7};
        auto [it, inserted] = buckets_.try_emplace(key, child_id);
        if (!inserted) {
          Node& incumbent = nodes_[it->second];
          if (child.g <= incumbent.g) continue;
          incumbent.pruned = true;
          it->second = child_id;
        }
      }
      nodes_.push_back(std::move(child));
      consider(child_id);
      if (depth < cfg_.horizon) open.push({nodes_[child_id].value, depth, child_id});
    }
    // Expanded nodes never need their covariances again.
    nodes_[id].covs = {};
  }

  void consider(int id) {
    const Node& c = nodes_[id];
    const Node& b = nodes_[best_];
    if (c.value != b.value) {
      if (c.value > b.value) best_ = id;
      return;
    }
    if (c.depth != b.depth) {
      if (c.depth > b.depth) best_ = id;
      return;
    }
    if (path_of(id) < path_of(best_)) best_ = id;
  }

  std::vector<int> path_of(int id) const {
    std::vector<int> p;
    for (int n = id; nodes_[n].parent >= 0; n = nodes_[n].parent) p.push_back(nodes_[n].action);
    return {p.rbegin(), p.rend()};
  }

  const Snapshot& snap_;
  const PlannerConfig& cfg_;
  std::vector<std::vector<Vec4>> means_;  // [depth][target]
  std::vector<Node> nodes_;
  std::unordered_map<BucketKey, int, BucketHash> buckets_;
  int best_ = 0;
};

}  // namespace

PlanResult plan(const Snapshot& snap, const PlannerConfig& cfg) {
  cfg.validate();
  if (!snap.map) throw std::invalid_argument("plan: snapshot has no map");
  return Search(snap, cfg).run();
}

int greedy_policy(const Snapshot& snap) {
  PlannerConfig cfg;
  cfg.horizon = 1;
  cfg.execute_steps = 1;
  cfg.node_budget = PlannerConfig::kUnlimited;
  cfg.prune_cell = 0.0;
  return plan(snap, cfg).actions.front();
}

int random_policy(Rng& rng) { return rng.uniform_int(kNumActions); }

}  // namespace ttrk
