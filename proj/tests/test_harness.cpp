#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bisimlab/harness.hpp"

using namespace bisimlab;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("metric presets") {
  BisimConfig def1 = metric_preset("def1", 0.9, 0.3);
  CHECK(def1.c_r == doctest::Approx(0.7));
  CHECK(def1.c_t == doctest::Approx(0.3));
  BisimConfig def2 = metric_preset("def2", 0.9);
  CHECK(def2.c_r == doctest::Approx(1.0));
  CHECK(def2.c_t == doctest::Approx(0.9));
  CHECK_THROWS(metric_preset("nope", 0.9));
}

TEST_CASE("variant presets") {
  VariantPreset plain = variant_preset("dbc-plain", 0.99);
  CHECK(plain.repr.q2 == doctest::Approx(1.0));
  CHECK(plain.repr.gaussian_dynamics);
  CHECK_FALSE(plain.repr.projection_enabled);
  CHECK(plain.repr.c_t == doctest::Approx(0.99));

  VariantPreset alt = variant_preset("dbc-alt", 0.99);
  CHECK(alt.repr.c_r == doctest::Approx(0.5));
  CHECK(alt.repr.c_t == doctest::Approx(0.5));

  VariantPreset normed = variant_preset("normed", 0.99);
  CHECK(normed.repr.projection_enabled);
  CHECK_FALSE(normed.repr.gaussian_dynamics);
  CHECK_FALSE(normed.use_ir);

  VariantPreset full = variant_preset("normed-ir-id", 0.99);
  CHECK(full.use_ir);
  CHECK(full.use_id);

  TaskEtas cp = default_etas(Task::sparse_cartpole);
  CHECK(cp.eta_r == doctest::Approx(2.0));
  CHECK(cp.eta_d == doctest::Approx(1.0));
  TaskEtas mc = default_etas(Task::mountain_car);
  CHECK(mc.eta_r == doctest::Approx(20.0));
}

TEST_CASE("bound suite passes on a small batch of MDPs") {
  BoundSuiteOptions opt;
  opt.n_mdps = 3;
  opt.seed = 5;
  auto checks = run_bound_suite(opt);
  CHECK(checks.size() >= 10);
  for (const auto& c : checks) {
    CAPTURE(c.name);
    CHECK(c.status != "fail");
  }
}

TEST_CASE("bound suite self-test: a corrupted metric fails Thm 1") {
  BoundSuiteOptions opt;
  opt.n_mdps = 3;
  opt.seed = 5;
  opt.perturb_metric = 0.9;
  auto checks = run_bound_suite(opt);
  bool thm1_failed = false;
  for (const auto& c : checks)
    if (c.name == "thm1_value_bound" && c.status == "fail") thm1_failed = true;
  CHECK(thm1_failed);
}

TEST_CASE("cmd_gen_mdp writes a loadable MDP") {
  TempDir dir("bisimlab_genmdp");
  int rc = cmd_gen_mdp(R"({"seed": 3, "n_states": 4, "n_actions": 2, "sparsity": 0.5})",
                       dir.path.string());
  CHECK(rc == 0);
  FiniteMdp mdp = mdp_from_json(read_file((dir.path / "mdp.json").string()));
  CHECK(mdp.n_states == 4);
  CHECK(std::filesystem::exists(dir.path / "manifest.json"));
  CHECK(std::filesystem::exists(dir.path / "config.json"));
}

TEST_CASE("cmd_exact_metric on the two-self-loop example") {
  TempDir dir("bisimlab_exact");
  const char* cfg = R"({
    "mdp": {"n_states": 2, "n_actions": 1, "gamma": 0.9,
            "transition": [[[1.0, 0.0]], [[0.0, 1.0]]],
            "reward": [[1.0], [0.0]], "rho0": [0.5, 0.5], "reward_bounds": [0, 1]},
    "bisim": {"c_r": 1.0, "c_t": 0.5, "p": 1.0, "tol": 1e-10}
  })";
  int rc = cmd_exact_metric(cfg, dir.path.string());
  CHECK(rc == 0);
  std::string csv = read_file((dir.path / "metric.csv").string());
  // find the "0,1,<d>" row and parse the distance
  auto pos = csv.find("\n0,1,");
  REQUIRE(pos != std::string::npos);
  double d01 = std::stod(csv.substr(pos + 5));
  CHECK(d01 == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("cmd_exact_metric rejects a bad config with exit code 2") {
  CHECK(cmd_exact_metric(R"({"no_mdp_here": true})", "") == 2);
}

TEST_CASE("exact-metric presets set the paper weightings") {
  TempDir dir("bisimlab_preset");
  const char* base = R"({
    "mdp": {"n_states": 2, "n_actions": 1, "gamma": 0.9,
            "transition": [[[1.0, 0.0]], [[0.0, 1.0]]],
            "reward": [[1.0], [0.0]], "rho0": [0.5, 0.5], "reward_bounds": [0, 1]},
    "preset": "def2"
  })";
  CHECK(cmd_exact_metric(base, dir.path.string()) == 0);
  std::string summary = read_file((dir.path / "summary.json").string());
  CHECK(summary.find("\"c_t\": 0.9") != std::string::npos);
}

TEST_CASE("ratio task: exact pipeline hits the Lemma-5 target on the grid") {
  RatioTask task = make_ratio_task(0.99);
  BisimConfig cfg;
  cfg.c_r = 1.0;
  cfg.c_t = 0.5;
  cfg.tol = 1e-12;
  MetricResult mr = metric_on_policy(task.denv.mdp, task.policy, cfg);
  auto rho = stationary_distribution(task.denv.mdp, task.policy, 1e-12);
  DispersionStats st = dispersion_stats(task.denv.mdp, task.policy, mr.metric, rho);
  REQUIRE(st.mu_rd > 1e-3);
  CHECK(st.mu_bd / st.mu_rd == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("train runs deterministically and writes byte-identical CSV artifacts") {
  TempDir dir_a("bisimlab_train_a");
  TempDir dir_b("bisimlab_train_b");
  TrainOptions opt;
  opt.env = default_env_config(Task::sparse_cartpole);
  VariantPreset preset = variant_preset("normed", 0.99);
  opt.repr = preset.repr;
  opt.variant = preset.name;
  opt.agent.use_ir = preset.use_ir;
  opt.agent.use_id = preset.use_id;
  opt.agent.warmup_steps = 64;
  opt.agent.train_every = 4;
  opt.agent.eval_every = 400;
  opt.agent.eval_episodes = 2;
  opt.total_steps = 800;
  opt.latent_dim = 8;
  opt.enc_hidden = {16};
  opt.dyn_hidden = {16};
  opt.batch_size = 16;
  opt.seed = 11;
  opt.write_models = false;

  TrainOptions a = opt;
  a.out_dir = dir_a.path.string();
  TrainOptions b = opt;
  b.out_dir = dir_b.path.string();
  TrainResult ra = run_train(a);
  TrainResult rb = run_train(b);
  CHECK(ra.max_mean_norm == rb.max_mean_norm);
  CHECK(read_file((dir_a.path / "diagnostics.csv").string()) ==
        read_file((dir_b.path / "diagnostics.csv").string()));
  CHECK(read_file((dir_a.path / "episodes.csv").string()) ==
        read_file((dir_b.path / "episodes.csv").string()));
  CHECK(ra.radius == doctest::Approx(1.0 / (2.0 * (1.0 - 0.99))));
  CHECK(ra.max_max_norm <= ra.radius + 1e-9);  // projection contract
}

TEST_CASE("collapse study smoke run") {
  CollapseOptions opt;
  opt.steps = 600;
  opt.buffer_size = 512;
  opt.batch_size = 16;
  opt.latent_dim = 8;
  opt.enc_hidden = {16};
  opt.dyn_hidden = {16};
  opt.repr = variant_preset("normed", 0.99).repr;
  opt.repr.c_t = 0.5;
  opt.seed = 21;
  CollapseResult res = run_collapse_study(opt);
  CHECK(res.initial_mu_bd > 0.0);
  CHECK(res.min_window_mu_bd < res.initial_mu_bd);  // shrinking under zero rewards
}
