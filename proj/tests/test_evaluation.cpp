#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "ttrk/evaluation.hpp"

using namespace ttrk;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ttrk_eval_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int cli(const std::string& args) {
  const std::string cmd = std::string("\"") + TTRK_CLI + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

EvalOptions small_options() {
  EvalOptions opt;
  opt.n_episodes = 2;
  opt.seeds = std::vector<std::uint64_t>{0, 1};
  opt.threads = 1;
  return opt;
}

}  // namespace

TEST_CASE("every built-in suite validates") {
  const auto names = suite_names();
  CHECK(names.size() == 10u);
  for (const auto& n : names) {
    const Suite s = suite_by_name(n);
    CHECK_NOTHROW(s.validate());
    CHECK(s.name == n);
    const bool unseen = n.size() > 7 && n.substr(n.size() - 7) == "-unseen";
    CHECK(s.base.obstacle_set == (unseen ? "unseen" : "train"));
    for (double v : s.sweep_values) CHECK_NOTHROW(s.config_for(v).validate());
  }
  CHECK_THROWS_AS(suite_by_name("nope"), std::invalid_argument);
}

TEST_CASE("sweeps set the swept parameter") {
  const Suite q = suite_by_name("insight-q");
  CHECK(q.sweep_param == "q");
  for (double v : q.sweep_values) CHECK(q.config_for(v).target.q == v);
  const Suite vmax = suite_by_name("insight-vmax");
  CHECK(vmax.sweep_param == "nu_max");
  for (double v : vmax.sweep_values) CHECK(vmax.config_for(v).target.nu_max == v);
}

TEST_CASE("seeds are paired across policies") {
  const Suite s = suite_by_name("discovery");
  std::set<std::uint64_t> scenarios;
  for (int ep = 0; ep < 10; ++ep) {
    CHECK(s.scenario_seed(ep) == Rng::stream(s.base_seed, static_cast<std::uint64_t>(ep)).next_u64());
    scenarios.insert(s.scenario_seed(ep));
    CHECK(s.noise_seed(ep, 0) != s.noise_seed(ep, 1));
    CHECK(s.noise_seed(ep, 2) == s.noise_seed(ep, 2));
  }
  CHECK(scenarios.size() == 10u);
}

TEST_CASE("evaluation rows and csv") {
  const Suite s = suite_by_name("discovery");
  const auto result = evaluate_suite(s, {"greedy", "random"}, small_options());
  const std::size_t expect = s.sweep_values.size() * 2 * 2 * 2;
  REQUIRE(result.rows.size() == expect);
  // Same episode and seed: identical scenario and noise for both policies.
  for (std::size_t i = 0; i + 1 < result.rows.size(); i += 2) {
    const auto& a = result.rows[i];
    const auto& b = result.rows[i + 1];
    CHECK(a.policy == "greedy");
    CHECK(b.policy == "random");
    CHECK(a.episode == b.episode);
    CHECK(a.seed == b.seed);
    CHECK(a.scenario_seed == b.scenario_seed);
    CHECK(a.noise_seed == b.noise_seed);
    CHECK(a.scenario_seed == s.scenario_seed(a.episode));
    CHECK(a.noise_seed == s.noise_seed(a.episode, a.seed));
    CHECK(a.config_hash == config_hash(s.config_for(a.sweep_value)));
  }

  std::ostringstream csv;
  write_metrics_csv(csv, result.rows, 1);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  CHECK(line ==
        "suite,sweep_param,sweep_value,episode,seed,policy,scenario_seed,noise_seed,config_hash,"
        "jbar_mean,jbar_0,sd_jbar,eta,discovered,collision_attempts");
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    CHECK(std::count(line.begin(), line.end(), ',') == 14);
  }
  CHECK(n == static_cast<int>(expect));

  // Thread count does not change results.
  EvalOptions two = small_options();
  two.threads = 2;
  const auto again = evaluate_suite(s, {"greedy", "random"}, two);
  std::ostringstream csv2;
  write_metrics_csv(csv2, again.rows, 1);
  CHECK(csv.str() == csv2.str());
}

TEST_CASE("fnv1a reference vectors") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
  EnvConfig a, b;
  CHECK(config_hash(a) == config_hash(b));
  b.target.q = 0.3;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("policy specs") {
  CHECK(valid_policy_spec("arvi"));
  CHECK(valid_policy_spec("greedy"));
  CHECK(valid_policy_spec("random"));
  CHECK(valid_policy_spec("checkpoint:/x/y.ckpt"));
  CHECK_FALSE(valid_policy_spec("checkpoint:"));
  CHECK_FALSE(valid_policy_spec("oracle"));
  CHECK_THROWS_AS(make_policy_factory("oracle"), std::invalid_argument);
}

TEST_CASE("cli run-episode is deterministic") {
  const fs::path d = scratch("run");
  REQUIRE(cli("run-episode --policy greedy --seed 5 --out " + (d / "a").string()) == 0);
  REQUIRE(cli("run-episode --policy greedy --seed 5 --out " + (d / "b").string()) == 0);
  CHECK(slurp(d / "a" / "episode.jsonl") == slurp(d / "b" / "episode.jsonl"));
  CHECK(slurp(d / "a" / "metrics.json") == slurp(d / "b" / "metrics.json"));
  CHECK(fs::exists(d / "a" / "trajectory.svg"));
  CHECK(fs::exists(d / "a" / "manifest.json"));

  REQUIRE(cli("run-episode --policy greedy --seed 5 --render off --out " + (d / "c").string()) == 0);
  CHECK_FALSE(fs::exists(d / "c" / "trajectory.svg"));
  CHECK(slurp(d / "a" / "episode.jsonl") == slurp(d / "c" / "episode.jsonl"));

  CHECK(cli("run-episode --policy bogus --out " + (d / "x").string()) == 2);
  CHECK_FALSE(fs::exists(d / "x" / "episode.jsonl"));
}

TEST_CASE("cli zeta-field") {
  const fs::path d = scratch("zeta");
  REQUIRE(cli("zeta-field --out " + (d / "a.svg").string()) == 0);
  REQUIRE(cli("zeta-field --out " + (d / "b.svg").string()) == 0);
  CHECK(slurp(d / "a.svg") == slurp(d / "b.svg"));
  CHECK(slurp(d / "a.svg").find("<svg") != std::string::npos);
}

TEST_CASE("cli train and evaluate are deterministic") {
  const fs::path d = scratch("train");
  {
    std::ofstream cfg(d / "cfg.json");
    cfg << R"({"env": {"task": "random", "horizon": 40}, "profile": "desk", "steps": 120,
               "batch": 8, "warmup": 40, "checkpoint_every": 60, "seed": 4})";
  }
  const std::string cfg = (d / "cfg.json").string();
  REQUIRE(cli("train --config " + cfg + " --out " + (d / "a").string()) == 0);
  REQUIRE(cli("train --config " + cfg + " --out " + (d / "b").string()) == 0);
  REQUIRE(fs::exists(d / "a" / "final.ckpt"));
  CHECK(slurp(d / "a" / "final.ckpt") == slurp(d / "b" / "final.ckpt"));
  CHECK(slurp(d / "a" / "loss.csv") == slurp(d / "b" / "loss.csv"));

  const std::string policy = "checkpoint:" + (d / "a" / "final.ckpt").string();
  const std::string args = "evaluate --suite discovery --episodes 2 --seeds 0 --policy greedy --policy " + policy;
  REQUIRE(cli(args + " --out " + (d / "e1").string()) == 0);
  REQUIRE(cli(args + " --out " + (d / "e2").string()) == 0);
  CHECK(slurp(d / "e1" / "metrics.csv") == slurp(d / "e2" / "metrics.csv"));
  CHECK(slurp(d / "e1" / "summary.tsv") == slurp(d / "e2" / "summary.tsv"));
  CHECK(cli("evaluate --suite discovery --policy nonsense --out " + (d / "e3").string()) == 2);
}
