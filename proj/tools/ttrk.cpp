// ttrk command-line entry point.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "ttrk/env.hpp"
#include "ttrk/evaluation.hpp"
#include "ttrk/learner.hpp"
#include "ttrk/metrics.hpp"
#include "ttrk/render.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path);
  return json::parse(in);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string slug(const std::string& policy) {
  std::string s = policy.substr(0, policy.find(':'));
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
  }
  return s;
}

ttrk::PlannerConfig planner_from_json(const json& j) {
  ttrk::PlannerConfig p;
  if (j.contains("horizon")) p.horizon = j.at("horizon").get<int>();
  if (j.contains("execute_steps")) p.execute_steps = j.at("execute_steps").get<int>();
  if (j.contains("node_budget")) p.node_budget = j.at("node_budget").get<std::int64_t>();
  if (j.contains("wall_seconds")) p.wall_seconds = j.at("wall_seconds").get<double>();
  if (j.contains("prune_cell")) p.prune_cell = j.at("prune_cell").get<double>();
  p.validate();
  return p;
}

json planner_to_json(const ttrk::PlannerConfig& p) {
  json j = {{"horizon", p.horizon},
            {"execute_steps", p.execute_steps},
            {"node_budget", p.node_budget},
            {"prune_cell", p.prune_cell}};
  if (p.wall_seconds) j["wall_seconds"] = *p.wall_seconds;
  return j;
}

void write_manifest(const fs::path& dir, json manifest, const std::vector<std::string>& files) {
  manifest["files"] = files;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

struct RunEpisodeArgs {
  std::string config;
  std::string policy = "arvi";
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> noise_seed;
  std::string out;
  std::string render = "on";
};

int run_episode_cmd(const RunEpisodeArgs& a) {
  if (!ttrk::valid_policy_spec(a.policy)) {
    std::cerr << "error: invalid policy spec '" << a.policy
              << "' (expected arvi, greedy, random or checkpoint:<path>)\n";
    return 2;
  }
  ttrk::EnvConfig cfg;
  ttrk::PlannerConfig planner;
  if (!a.config.empty()) {
    const json j = read_json(a.config);
    if (j.contains("env")) {
      cfg = ttrk::env_config_from_json(j.at("env"));
      if (j.contains("planner")) planner = planner_from_json(j.at("planner"));
    } else {
      cfg = ttrk::env_config_from_json(j);
    }
  }
  const std::uint64_t noise = a.noise_seed.value_or(a.seed);
  auto policy = ttrk::make_policy_factory(a.policy, planner)(a.seed);
  const ttrk::EpisodeLog log = ttrk::run_episode(cfg, *policy, a.seed, noise);

  const fs::path dir(a.out);
  fs::create_directories(dir);
  std::vector<std::string> files{"episode.jsonl", "metrics.json"};
  ttrk::write_episode_log(log, (dir / "episode.jsonl").string());
  const auto m = ttrk::compute_metrics(log);
  const json metrics = {{"jbar", m.jbar},
                        {"jbar_mean", m.jbar_mean},
                        {"sd_jbar", m.sd_jbar},
                        {"eta", m.eta},
                        {"discovered", m.discovered},
                        {"collision_attempts", m.collision_attempts}};
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");
  if (a.render == "on") {
    write_text(dir / "trajectory.svg", ttrk::trajectory_svg(log, ttrk::map_for_log(log)));
    files.push_back("trajectory.svg");
  }
  write_manifest(dir,
                 {{"command", "run-episode"},
                  {"policy", a.policy},
                  {"seed", a.seed},
                  {"noise_seed", noise},
                  {"config", ttrk::to_json(cfg)},
                  {"config_hash", ttrk::config_hash(cfg)},
                  {"planner", planner_to_json(planner)}},
                 files);
  std::cout << "jbar " << m.jbar_mean << " eta " << m.eta << " discovered " << m.discovered
            << " collisions " << m.collision_attempts << "\n";
  return 0;
}

struct TrainArgs {
  std::string config;
  std::string out;
  std::optional<std::int64_t> steps;
  std::optional<std::uint64_t> seed;
  std::string resume;
  std::string replay;
  bool save_replay = false;
};

std::string step_name(std::int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%08lld.ckpt", static_cast<long long>(step));
  return buf;
}

int train_cmd(const TrainArgs& a) {
  const fs::path dir(a.out);
  fs::create_directories(dir / "checkpoints");
  std::optional<ttrk::Trainer> trainer;
  if (!a.resume.empty()) {
    trainer.emplace(ttrk::Trainer::resume(
        a.resume, a.replay.empty() ? std::nullopt : std::optional<std::string>(a.replay)));
  } else {
    ttrk::TrainConfig cfg;
    if (!a.config.empty()) cfg = ttrk::train_config_from_json(read_json(a.config));
    if (a.steps) cfg.steps = *a.steps;
    if (a.seed) cfg.seed = *a.seed;
    cfg.validate();
    trainer.emplace(cfg);
  }
  const auto& cfg = trainer->config();
  std::vector<std::string> files;
  const std::int64_t first_step = trainer->step();
  trainer->run([&](const ttrk::Trainer& t) {
    const std::string name = "checkpoints/" + step_name(t.step());
    t.save_checkpoint((dir / name).string());
    files.push_back(name);
    if (a.save_replay) {
      t.save_replay((dir / (name + ".replay")).string());
      files.push_back(name + ".replay");
    }
  });
  trainer->save_checkpoint((dir / "final.ckpt").string());
  files.push_back("final.ckpt");
  if (a.save_replay) {
    trainer->save_replay((dir / "final.ckpt.replay").string());
    files.push_back("final.ckpt.replay");
  }

  std::ostringstream loss;
  loss << "step,loss\n";
  char buf[64];
  for (const auto& r : trainer->losses()) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g\n", static_cast<long long>(r.step), r.loss);
    loss << buf;
  }
  write_text(dir / "loss.csv", loss.str());
  std::ostringstream eps;
  eps << "episode,end_step,return\n";
  for (const auto& e : trainer->episodes()) {
    std::snprintf(buf, sizeof buf, "%lld,%lld,%.17g\n", static_cast<long long>(e.episode),
                  static_cast<long long>(e.end_step), e.episode_return);
    eps << buf;
  }
  write_text(dir / "episodes.csv", eps.str());
  files.push_back("loss.csv");
  files.push_back("episodes.csv");
  write_manifest(dir,
                 {{"command", "train"},
                  {"seed", cfg.seed},
                  {"train_config", ttrk::to_json(cfg)},
                  {"config_hash", ttrk::config_hash(cfg.env)},
                  {"resumed_from_step", first_step},
                  {"final_step", trainer->step()}},
                 files);
  std::cout << "trained to step " << trainer->step() << " (seed " << cfg.seed << ")\n";
  return 0;
}

struct EvaluateArgs {
  std::string suite;
  std::string out;
  std::vector<std::string> policies;
  std::optional<int> episodes;
  std::vector<std::uint64_t> seeds;
  std::optional<std::int64_t> budget;
  std::string planner_config;
};

int evaluate_cmd(const EvaluateArgs& a) {
  const ttrk::Suite suite = ttrk::suite_by_name(a.suite);
  std::vector<std::string> policies = a.policies.empty() ? suite.policies : a.policies;
  for (const auto& p : policies) {
    if (!ttrk::valid_policy_spec(p)) {
      std::cerr << "error: invalid policy spec '" << p << "'\n";
      return 2;
    }
  }
  ttrk::EvalOptions opt;
  if (!a.planner_config.empty()) opt.planner = planner_from_json(read_json(a.planner_config));
  if (a.budget) opt.planner.node_budget = *a.budget;
  opt.n_episodes = a.episodes;
  if (!a.seeds.empty()) opt.seeds = a.seeds;
  opt.keep_logs = true;
  const auto result = ttrk::evaluate_suite(suite, policies, opt);

  const fs::path dir(a.out);
  fs::create_directories(dir);
  std::vector<std::string> files{"metrics.csv", "summary.tsv"};
  std::ostringstream csv;
  ttrk::write_metrics_csv(csv, result.rows, suite.base.n_targets);
  write_text(dir / "metrics.csv", csv.str());
  std::ostringstream summary;
  ttrk::write_summary(summary, result.rows);
  write_text(dir / "summary.tsv", summary.str());
  std::cout << summary.str();

  for (const auto& p : policies) {
    std::vector<ttrk::EpisodeLog> logs;
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
      if (result.rows[i].policy == p) logs.push_back(result.logs[i]);
    }
    const auto scan = ttrk::scan_density(logs);
    const auto hist = ttrk::belief_histogram(logs);
    std::vector<double> belief = hist.counts;
    double peak = 0.0;
    for (double v : belief) peak = std::max(peak, v);
    if (peak > 0.0) {
      for (double& v : belief) v /= peak;
    }
    const std::string s = slug(p);
    write_text(dir / ("scan_density_" + s + ".svg"),
               ttrk::heat_svg(scan.values, scan.width, scan.height, "scan density, " + p));
    write_text(dir / ("belief_density_" + s + ".svg"),
               ttrk::heat_svg(belief, hist.nx, hist.ny, "belief positions in agent frame, " + p));
    files.push_back("scan_density_" + s + ".svg");
    files.push_back("belief_density_" + s + ".svg");
  }
  json configs = json::array();
  for (double v : suite.sweep_values) configs.push_back(ttrk::to_json(suite.config_for(v)));
  write_manifest(dir,
                 {{"command", "evaluate"},
                  {"suite", suite.name},
                  {"policies", policies},
                  {"seeds", opt.seeds.value_or(suite.seeds)},
                  {"episodes", opt.n_episodes.value_or(suite.n_episodes)},
                  {"base_seed", suite.base_seed},
                  {"planner", planner_to_json(opt.planner)},
                  {"configs", configs},
                  {"rows", result.rows.size()}},
                 files);
  return 0;
}

int zeta_field_cmd(const std::string& out) {
  const auto field = ttrk::compute_zeta_field();
  write_text(out, ttrk::zeta_field_svg(field));
  const bool dirs = field.directions_ok();
  const bool mags = field.magnitudes_ok();
  std::cout << "arrows " << field.arrows.size() << ", away-from-obstacle " << (dirs ? "ok" : "FAILED")
            << ", speed ordering " << (mags ? "ok" : "FAILED") << "\n";
  return dirs && mags ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ttrk: active target tracking toolkit"};
  app.require_subcommand(1);

  RunEpisodeArgs run;
  auto* run_cmd = app.add_subcommand("run-episode", "Simulate one episode and write its log");
  run_cmd->add_option("--config", run.config, "Environment config JSON");
  run_cmd->add_option("--policy", run.policy, "arvi | greedy | random | checkpoint:<path>");
  run_cmd->add_option("--seed", run.seed, "Scenario seed (also the noise seed by default)");
  run_cmd->add_option("--noise-seed", run.noise_seed, "Separate noise seed");
  run_cmd->add_option("--out", run.out, "Output directory")->required();
  run_cmd->add_option("--render", run.render, "on | off")->check(CLI::IsMember({"on", "off"}));

  TrainArgs train;
  auto* train_sub = app.add_subcommand("train", "Train a Q-network");
  train_sub->add_option("--config", train.config, "Training config JSON");
  train_sub->add_option("--out", train.out, "Output directory")->required();
  train_sub->add_option("--steps", train.steps, "Override the step count");
  train_sub->add_option("--seed", train.seed, "Override the seed");
  train_sub->add_option("--resume", train.resume, "Checkpoint to resume from");
  train_sub->add_option("--replay", train.replay, "Replay sidecar for an exact resume");
  train_sub->add_flag("--save-replay", train.save_replay, "Write replay sidecars with checkpoints");

  EvaluateArgs eval;
  auto* eval_sub = app.add_subcommand("evaluate", "Run an evaluation suite");
  eval_sub->add_option("--suite", eval.suite, "Suite name")->required();
  eval_sub->add_option("--out", eval.out, "Output directory")->required();
  eval_sub->add_option("--policy", eval.policies, "Policy spec, repeatable");
  eval_sub->add_option("--episodes", eval.episodes, "Override the episode count");
  eval_sub->add_option("--seeds", eval.seeds, "Override the run seeds");
  eval_sub->add_option("--budget", eval.budget, "Planner node budget");
  eval_sub->add_option("--planner-config", eval.planner_config, "Planner config JSON");

  std::string zeta_out;
  auto* zeta_sub = app.add_subcommand("zeta-field", "Render the obstacle repulsion field");
  zeta_sub->add_option("--out", zeta_out, "Output SVG")->required();

  auto* list_sub = app.add_subcommand("list-suites", "Print the built-in suite names");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return run_episode_cmd(run);
    if (*train_sub) return train_cmd(train);
    if (*eval_sub) return evaluate_cmd(eval);
    if (*zeta_sub) return zeta_field_cmd(zeta_out);
    if (*list_sub) {
      for (const auto& n : ttrk::suite_names()) std::cout << n << "\n";
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
