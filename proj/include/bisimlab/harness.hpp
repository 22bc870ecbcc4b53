#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bisimlab/agent.hpp"
#include "bisimlab/aggregate.hpp"
#include "bisimlab/bisim.hpp"
#include "bisimlab/env.hpp"
#include "bisimlab/repr.hpp"

namespace bisimlab {

// Metric-weight presets: def1 = (1-c, c), def2 = (1, gamma).
BisimConfig metric_preset(const std::string& name, double gamma, double c = 0.5);

// Training variants wired from the paper's recipes. dbc-plain (alias
// dbc-orig) is the unconstrained original (q1=2, q2=1, gaussian dynamics);
// dbc-matched matches the norms; dbc-alt reweights to (0.5, 0.5); normed adds
// the projection with a deterministic predictor; -ir / -ir-id stack intrinsic
// rewards and inverse dynamics on top.
struct VariantPreset {
  std::string name;
  ReprConfig repr;
  bool use_ir = false;
  bool use_id = false;
};
VariantPreset variant_preset(const std::string& name, double gamma);

// Table of per-task intrinsic/inverse weights.
struct TaskEtas {
  double eta_r = 0.0;
  double eta_d = 0.0;
};
TaskEtas default_etas(Task task);

// ---------------------------------------------------------------------------
// Bound-verification suites (exit gate for the theorem checks).

struct CheckResult {
  std::string name;
  std::string status;  // "pass" | "fail" | "out-of-hypothesis"
  std::size_t cases = 0;
  double max_violation = 0.0;
  double tolerance = 0.0;
};

struct BoundSuiteOptions {
  std::size_t n_mdps = 100;
  std::size_t n_states = 8;
  std::size_t n_actions = 3;
  double gamma = 0.9;
  std::uint64_t seed = 0;
  std::vector<std::pair<double, double>> presets = {{1.0, 0.5}, {0.5, 0.5}, {1.0, 0.9}};
  std::vector<double> epsilons = {0.01, 0.05, 0.1, 0.2};
  std::vector<double> mix_weights = {0.05, 0.1, 0.2};
  double slack_tol = 1e-9;
  double perturb_metric = 0.0;  // self-test hook: corrupts d before Thm. 1
};

std::vector<CheckResult> run_bound_suite(const BoundSuiteOptions& opt);

// ---------------------------------------------------------------------------
// Training runs.

struct TrainOptions {
  EnvConfig env;
  AgentConfig agent;
  ReprConfig repr;
  std::string variant = "normed";
  std::size_t total_steps = 100000;
  std::size_t latent_dim = 50;
  std::vector<std::size_t> enc_hidden = {48, 48};
  std::vector<std::size_t> dyn_hidden = {48};
  std::size_t batch_size = 64;
  std::size_t buffer_capacity = 50000;
  double gamma = 0.99;
  std::uint64_t seed = 0;
  std::string out_dir;  // empty: no artifacts
  bool write_models = true;
};

struct TrainResult {
  bool diverged = false;
  double radius = 0.0;
  double max_mean_norm = 0.0;   // max over steps of the batch-mean norm
  double max_max_norm = 0.0;    // max over steps of the batch-max norm
  double final_ratio = 0.0;     // mean mini-batch ratio over the final 10%
  double final_eval_return = 0.0;
  std::size_t episodes = 0;
  std::vector<std::pair<std::size_t, double>> evals;  // (step, mean return)
};

TrainResult run_train(const TrainOptions& opt);

// Collapse study: metric learning on a static buffer whose extrinsic rewards
// are all zero; with IR the batch rewards become the (clamped) forward-model
// error at training time.
struct CollapseOptions {
  bool use_ir = false;
  double eta_r = 2.0;
  double r_max_i = 0.1;
  std::size_t steps = 10000;
  std::size_t buffer_size = 4096;
  std::size_t batch_size = 64;
  std::size_t latent_dim = 50;
  std::vector<std::size_t> enc_hidden = {48, 48};
  std::vector<std::size_t> dyn_hidden = {48};
  ReprConfig repr;
  std::uint64_t seed = 0;
  std::string out_dir;
};

struct CollapseResult {
  double initial_mu_bd = 0.0;
  double min_window_mu_bd = 0.0;  // min over trailing-200 means
  bool collapsed = false;         // some window fell below 1e-3 of initial
  bool stayed_above_tenth = false;
};

CollapseResult run_collapse_study(const CollapseOptions& opt);

// Ratio study on a deterministic discretized task: the analytic target
// c_R/(1-c_T), the exact-pipeline ratio, and the learned mini-batch ratio.
struct RatioStudyOptions {
  ReprConfig repr;
  std::size_t steps = 20000;
  std::size_t batch_size = 128;
  std::size_t latent_dim = 50;
  std::vector<std::size_t> enc_hidden = {48, 48};
  std::vector<std::size_t> dyn_hidden = {48};
  std::size_t buffer_transitions = 20000;
  std::uint64_t seed = 0;
  std::string out_dir;
};

struct RatioStudyResult {
  double analytic_target = 0.0;
  double exact_ratio = 0.0;       // dispersion ratio from the exact pipeline
  double learned_ratio = 0.0;     // mean over the final 10% of steps
  double relative_gap = 0.0;      // |learned - target| / target
};

RatioStudyResult run_ratio_study(const RatioStudyOptions& opt);

// The deterministic discretized cartpole instance the ratio study runs on,
// with its balancing policy (exposed for tests).
struct RatioTask {
  DiscretizedEnv denv;
  PolicyTable policy;
  std::vector<std::size_t> policy_actions;
};
RatioTask make_ratio_task(double gamma);

// ---------------------------------------------------------------------------
// CLI entry points; each returns a process exit code (0 ok, 1 verification
// failure, 2 config error).

int cmd_verify_bounds(const std::string& config_json, const std::string& out_dir);
int cmd_exact_metric(const std::string& config_json, const std::string& out_dir);
int cmd_train(const std::string& config_json, const std::string& out_dir);
int cmd_ratio_study(const std::string& config_json, const std::string& out_dir);
int cmd_gen_mdp(const std::string& config_json, const std::string& out_dir);

}  // namespace bisimlab
