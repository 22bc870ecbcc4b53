#pragma once

#include <cstdint>
#include <vector>

#include "bisimlab/mdp.hpp"
#include "bisimlab/rng.hpp"

namespace bisimlab {

enum class Task { sparse_cartpole, mountain_car, sparse_pendulum };

struct EnvConfig {
  Task task = Task::sparse_cartpole;
  double theta_term_deg = 12.0;
  double theta_rew_deg = 0.12;  // 0.01 * theta_term
  std::size_t noise_dims_multiplier = 0;  // N_m
  double noise_std = 1.0;
  std::size_t episode_cap = 200;
  std::uint64_t seed = 0;
};

// Task defaults: cartpole theta_term = 12 deg with theta_rew = 0.01 theta_term,
// pendulum theta_rew = 1 deg, mountain car cap 999.
EnvConfig default_env_config(Task task);

struct EnvState {
  std::vector<double> phys;
  std::size_t steps = 0;
  bool done = false;
};

std::size_t state_dim(const EnvConfig& cfg);  // physical observation dim
std::size_t obs_dim(const EnvConfig& cfg);    // state_dim * (1 + N_m)
std::size_t n_env_actions(const EnvConfig& cfg);

// Continuous representation of the discrete action set, each in [-1, 1].
std::vector<double> action_values(const EnvConfig& cfg);

EnvState env_reset(const EnvConfig& cfg, Rng& rng);

struct StepResult {
  EnvState next;
  double reward = 0.0;
  bool done = false;
};

// Advances physics one tick. Rewards are evaluated on the current state
// (sparse band rules); termination on the successor state. `eval_reward`
// switches to the standard termination-based reward used at evaluation
// time (cartpole: 1 per surviving step; pendulum: 1-degree band).
StepResult env_step(const EnvState& state, std::size_t action, const EnvConfig& cfg,
                    bool eval_reward = false);

// Physical observation of a state (pendulum exposes (cos, sin, thetadot)).
std::vector<double> observe(const EnvState& state, const EnvConfig& cfg);

// Appends N_m * dim(S) iid Normal(0, noise_std^2) entries, freshly sampled.
std::vector<double> noisy_wrap(const std::vector<double>& obs, const EnvConfig& cfg, Rng& rng);

struct GridSpec {
  std::vector<double> lo, hi;
  std::vector<std::size_t> cells;
};

struct DiscretizedEnv {
  FiniteMdp mdp;
  std::vector<std::vector<double>> centers;  // physical center per grid state
  std::size_t boundary_state = 0;            // absorbing out-of-grid cell
  bool boundary_reached = false;             // any transition leaves the grid
};

// Deterministic point-mass MDP over grid cells: transitions simulated from
// cell centers and snapped to the containing cell; transitions leaving the
// grid land in a flagged absorbing boundary cell with zero reward.
DiscretizedEnv discretize_env(const EnvConfig& cfg, const GridSpec& grid, double gamma);

}  // namespace bisimlab
