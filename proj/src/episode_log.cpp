#include "ttrk/episode_log.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ttrk {

namespace {

nlohmann::json vec_json(const Vec4& v) { return {v(0), v(1), v(2), v(3)}; }

Vec4 vec_from(const nlohmann::json& j) {
  Vec4 v;
  for (int i = 0; i < 4; ++i) v(i) = j.at(i).get<double>();
  return v;
}

nlohmann::json mat_json(const Mat4& m) {
  nlohmann::json out = nlohmann::json::array();
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) out.push_back(m(r, c));
  }
  return out;
}

Mat4 mat_from(const nlohmann::json& j) {
  if (j.size() != 16) throw std::invalid_argument("episode log: covariance needs 16 entries");
  Mat4 m;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) m(r, c) = j.at(r * 4 + c).get<double>();
  }
  return m;
}

nlohmann::json belief_json(const Belief& b) { return {{"mean", vec_json(b.mean)}, {"cov", mat_json(b.cov)}}; }

Belief belief_from(const nlohmann::json& j) { return {vec_from(j.at("mean")), mat_from(j.at("cov"))}; }

nlohmann::json pose_json(const Pose2& p) { return {p.x1, p.x2, p.theta}; }

Pose2 pose_from(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

}  // namespace

std::vector<bool> EpisodeLog::observed_flags(int target) const {
  std::vector<bool> flags;
  flags.reserve(steps.size());
  for (const auto& s : steps) flags.push_back(s.targets.at(target).measurement.has_value());
  return flags;
}

std::string to_jsonl(const EpisodeLog& log) {
  std::ostringstream os;
  const auto& h = log.header;
  nlohmann::json header = {{"type", "header"},
                           {"schema", "ttrk.episode/1"},
                           {"config", h.config},
                           {"scenario_seed", h.scenario_seed},
                           {"noise_seed", h.noise_seed},
                           {"map_seed", h.map_seed},
                           {"initial_pose", pose_json(h.initial_pose)},
                           {"initial_scanned_count", h.initial_scanned_count}};
  nlohmann::json targets = nlohmann::json::array();
  for (const auto& y : h.initial_targets) targets.push_back(vec_json(y));
  header["initial_targets"] = targets;
  nlohmann::json beliefs = nlohmann::json::array();
  for (const auto& b : h.initial_beliefs) beliefs.push_back(belief_json(b));
  header["initial_beliefs"] = beliefs;
  os << header.dump() << '\n';

  for (const auto& s : log.steps) {
    const Action& a = action_at(s.action);
    nlohmann::json rec = {{"type", "step"},
                          {"t", s.t},
                          {"pose", pose_json(s.pose)},
                          {"action", {{"index", s.action}, {"v", a.v}, {"w", a.w}}},
                          {"reward", s.reward},
                          {"collision_attempt", s.collision_attempt},
                          {"scanned_count", s.scanned_count}};
    nlohmann::json tj = nlohmann::json::array();
    for (const auto& tr : s.targets) {
      nlohmann::json z = nullptr;
      if (tr.measurement) z = {{"r", tr.measurement->r}, {"alpha", tr.measurement->alpha}};
      tj.push_back({{"state", vec_json(tr.true_state)},
                    {"belief", belief_json(tr.posterior)},
                    {"predicted", belief_json(tr.predicted)},
                    {"measurement", z}});
    }
    rec["targets"] = tj;
    if (!s.info.is_null()) rec["info"] = s.info;
    os << rec.dump() << '\n';
  }
  return os.str();
}

EpisodeLog episode_log_from_jsonl(std::istream& in) {
  EpisodeLog log;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const auto type = j.at("type").get<std::string>();
    if (type == "header") {
      auto& h = log.header;
      h.config = j.at("config");
      h.scenario_seed = j.at("scenario_seed").get<std::uint64_t>();
      h.noise_seed = j.at("noise_seed").get<std::uint64_t>();
      h.map_seed = j.at("map_seed").get<std::uint64_t>();
      h.initial_pose = pose_from(j.at("initial_pose"));
      h.initial_scanned_count = j.at("initial_scanned_count").get<int>();
      for (const auto& y : j.at("initial_targets")) h.initial_targets.push_back(vec_from(y));
      for (const auto& b : j.at("initial_beliefs")) h.initial_beliefs.push_back(belief_from(b));
      have_header = true;
      continue;
    }
    if (type != "step") throw std::invalid_argument("episode log: unknown record type " + type);
    StepRecord s;
    s.t = j.at("t").get<int>();
    s.pose = pose_from(j.at("pose"));
    s.action = j.at("action").at("index").get<int>();
    s.reward = j.at("reward").get<double>();
    s.collision_attempt = j.at("collision_attempt").get<bool>();
    s.scanned_count = j.at("scanned_count").get<int>();
    if (j.contains("info")) s.info = j.at("info");
    int id = 0;
    for (const auto& tj : j.at("targets")) {
      TargetRecord tr;
      tr.true_state = vec_from(tj.at("state"));
      tr.posterior = belief_from(tj.at("belief"));
      tr.predicted = belief_from(tj.at("predicted"));
      const auto& z = tj.at("measurement");
      if (!z.is_null()) {
        tr.measurement = Measurement{id, z.at("r").get<double>(), z.at("alpha").get<double>()};
      }
      s.targets.push_back(std::move(tr));
      ++id;
    }
    log.steps.push_back(std::move(s));
  }
  if (!have_header) throw std::invalid_argument("episode log: missing header record");
  return log;
}

void write_episode_log(const EpisodeLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_jsonl(log);
}

EpisodeLog read_episode_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  return episode_log_from_jsonl(in);
}

}  // namespace ttrk
