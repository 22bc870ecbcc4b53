#include "bisimlab/env.hpp"

#include <algorithm>
#include <cmath>

namespace bisimlab {

namespace {

constexpr double kPi = 3.14159265358979323846;

double deg2rad(double d) { return d * kPi / 180.0; }

double wrap_angle(double th) {
  while (th > kPi) th -= 2.0 * kPi;
  while (th < -kPi) th += 2.0 * kPi;
  return th;
}

// Cartpole constants (canonical open-source values).
constexpr double kGravity = 9.8;
constexpr double kMassCart = 1.0;
constexpr double kMassPole = 0.1;
constexpr double kTotalMass = kMassCart + kMassPole;
constexpr double kPoleHalfLength = 0.5;
constexpr double kPoleMassLength = kMassPole * kPoleHalfLength;
constexpr double kForceMag = 10.0;
constexpr double kTau = 0.02;
constexpr double kXLimit = 2.4;

// Mountain car (continuous) constants.
constexpr double kMcMinPos = -1.2;
constexpr double kMcMaxPos = 0.6;
constexpr double kMcMaxSpeed = 0.07;
constexpr double kMcGoal = 0.45;
constexpr double kMcPower = 0.0015;

// Pendulum constants.
constexpr double kPendG = 10.0;
constexpr double kPendM = 1.0;
constexpr double kPendL = 1.0;
constexpr double kPendDt = 0.05;
constexpr double kPendMaxTorque = 2.0;
constexpr double kPendMaxSpeed = 8.0;

std::vector<double> cartpole_step(const std::vector<double>& s, double force) {
  double x = s[0], xd = s[1], th = s[2], thd = s[3];
  double costh = std::cos(th), sinth = std::sin(th);
  double temp = (force + kPoleMassLength * thd * thd * sinth) / kTotalMass;
  double thacc = (kGravity * sinth - costh * temp) /
                 (kPoleHalfLength * (4.0 / 3.0 - kMassPole * costh * costh / kTotalMass));
  double xacc = temp - kPoleMassLength * thacc * costh / kTotalMass;
  return {x + kTau * xd, xd + kTau * xacc, th + kTau * thd, thd + kTau * thacc};
}

std::vector<double> mountain_car_step(const std::vector<double>& s, double force) {
  double pos = s[0], vel = s[1];
  vel += force * kMcPower - 0.0025 * std::cos(3.0 * pos);
  vel = std::clamp(vel, -kMcMaxSpeed, kMcMaxSpeed);
  pos += vel;
  pos = std::clamp(pos, kMcMinPos, kMcMaxPos);
  if (pos <= kMcMinPos && vel < 0.0) vel = 0.0;
  return {pos, vel};
}

std::vector<double> pendulum_step(const std::vector<double>& s, double torque) {
  double th = s[0], thd = s[1];
  double u = std::clamp(torque, -kPendMaxTorque, kPendMaxTorque);
  double newthd =
      thd + (-3.0 * kPendG / (2.0 * kPendL) * std::sin(th + kPi) +
             3.0 / (kPendM * kPendL * kPendL) * u) *
                kPendDt;
  newthd = std::clamp(newthd, -kPendMaxSpeed, kPendMaxSpeed);
  double newth = th + newthd * kPendDt;
  return {newth, newthd};
}

double sparse_reward(const std::vector<double>& phys, const EnvConfig& cfg, bool eval_reward) {
  switch (cfg.task) {
    case Task::sparse_cartpole: {
      if (eval_reward) return 1.0;  // termination-based variant
      return std::fabs(phys[2]) <= deg2rad(cfg.theta_rew_deg) ? 1.0 : 0.0;
    }
    case Task::mountain_car:
      return phys[0] >= kMcGoal ? 1.0 : -0.01;
    case Task::sparse_pendulum: {
      double band = eval_reward ? deg2rad(1.0) : deg2rad(cfg.theta_rew_deg);
      return std::fabs(wrap_angle(phys[0])) <= band ? 1.0 : 0.0;
    }
  }
  return 0.0;
}

bool terminal_state(const std::vector<double>& phys, const EnvConfig& cfg) {
  switch (cfg.task) {
    case Task::sparse_cartpole:
      return std::fabs(phys[0]) > kXLimit || std::fabs(phys[2]) > deg2rad(cfg.theta_term_deg);
    case Task::mountain_car:
      return phys[0] >= kMcGoal;
    case Task::sparse_pendulum:
      return false;
  }
  return false;
}

}  // namespace

EnvConfig default_env_config(Task task) {
  EnvConfig cfg;
  cfg.task = task;
  switch (task) {
    case Task::sparse_cartpole:
      cfg.theta_term_deg = 12.0;
      cfg.theta_rew_deg = 0.12;
      cfg.episode_cap = 200;
      break;
    case Task::mountain_car:
      cfg.episode_cap = 999;
      break;
    case Task::sparse_pendulum:
      cfg.theta_rew_deg = 1.0;
      cfg.episode_cap = 200;
      break;
  }
  return cfg;
}

std::size_t state_dim(const EnvConfig& cfg) {
  switch (cfg.task) {
    case Task::sparse_cartpole:
      return 4;
    case Task::mountain_car:
      return 2;
    case Task::sparse_pendulum:
      return 3;
  }
  return 0;
}

std::size_t obs_dim(const EnvConfig& cfg) {
  return state_dim(cfg) * (1 + cfg.noise_dims_multiplier);
}

std::size_t n_env_actions(const EnvConfig& cfg) {
  return cfg.task == Task::sparse_cartpole ? 2 : 5;
}

std::vector<double> action_values(const EnvConfig& cfg) {
  if (cfg.task == Task::sparse_cartpole) return {-1.0, 1.0};
  std::vector<double> vals(5);
  for (int i = 0; i < 5; ++i) vals[i] = -1.0 + 0.5 * i;
  return vals;
}

EnvState env_reset(const EnvConfig& cfg, Rng& rng) {
  EnvState st;
  switch (cfg.task) {
    case Task::sparse_cartpole:
      st.phys = {rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                 rng.uniform(-0.05, 0.05)};
      break;
    case Task::mountain_car:
      st.phys = {rng.uniform(-0.6, -0.4), 0.0};
      break;
    case Task::sparse_pendulum:
      st.phys = {rng.uniform(-kPi, kPi), rng.uniform(-1.0, 1.0)};
      break;
  }
  return st;
}

StepResult env_step(const EnvState& state, std::size_t action, const EnvConfig& cfg,
                    bool eval_reward) {
  if (state.done) throw Error("SteppedAfterDone", "reset the environment first");
  auto values = action_values(cfg);
  if (action >= values.size()) throw Error("ShapeMismatch", "action id out of range");
  double a = values[action];

  StepResult out;
  out.reward = sparse_reward(state.phys, cfg, eval_reward);
  switch (cfg.task) {
    case Task::sparse_cartpole:
      out.next.phys = cartpole_step(state.phys, a * kForceMag);
      break;
    case Task::mountain_car:
      out.next.phys = mountain_car_step(state.phys, a);
      if (out.next.phys[0] >= kMcGoal) out.reward = 1.0;  // solved
      break;
    case Task::sparse_pendulum:
      out.next.phys = pendulum_step(state.phys, a * kPendMaxTorque);
      break;
  }
  out.next.steps = state.steps + 1;
  out.done = terminal_state(out.next.phys, cfg) || out.next.steps >= cfg.episode_cap;
  out.next.done = out.done;
  return out;
}

std::vector<double> observe(const EnvState& state, const EnvConfig& cfg) {
  if (cfg.task == Task::sparse_pendulum)
    return {std::cos(state.phys[0]), std::sin(state.phys[0]), state.phys[1]};
  return state.phys;
}

std::vector<double> noisy_wrap(const std::vector<double>& obs, const EnvConfig& cfg, Rng& rng) {
  std::vector<double> out = obs;
  std::size_t extra = obs.size() * cfg.noise_dims_multiplier;
  out.reserve(obs.size() + extra);
  for (std::size_t i = 0; i < extra; ++i) out.push_back(cfg.noise_std * rng.normal());
  return out;
}

DiscretizedEnv discretize_env(const EnvConfig& cfg, const GridSpec& grid, double gamma) {
  std::size_t dims = grid.lo.size();
  if (grid.hi.size() != dims || grid.cells.size() != dims || dims == 0)
    throw Error("ShapeMismatch", "grid spec dims");
  // Pendulum is discretized over its internal (theta, thetadot) coordinates.
  std::size_t phys_dims = cfg.task == Task::sparse_pendulum ? 2 : state_dim(cfg);
  if (dims != phys_dims) throw Error("ShapeMismatch", "grid dims do not match task state");

  std::size_t n_cells = 1;
  for (std::size_t c : grid.cells) {
    if (c == 0) throw Error("ShapeMismatch", "grid with zero cells");
    n_cells *= c;
  }
  std::size_t n_states = n_cells + 1;  // + absorbing boundary cell
  std::size_t boundary = n_cells;
  auto values = action_values(cfg);
  std::size_t n_actions = values.size();

  DiscretizedEnv out;
  out.boundary_state = boundary;
  out.centers.resize(n_cells);

  auto cell_center = [&](std::size_t idx) {
    std::vector<double> center(dims);
    for (std::size_t d = dims; d-- > 0;) {
      std::size_t k = idx % grid.cells[d];
      idx /= grid.cells[d];
      double width = (grid.hi[d] - grid.lo[d]) / static_cast<double>(grid.cells[d]);
      center[d] = grid.lo[d] + (static_cast<double>(k) + 0.5) * width;
    }
    return center;
  };
  auto snap = [&](const std::vector<double>& p) -> std::ptrdiff_t {
    std::size_t idx = 0;
    for (std::size_t d = 0; d < dims; ++d) {
      double v = p[d];
      if (cfg.task == Task::sparse_pendulum && d == 0) v = wrap_angle(v);
      if (v < grid.lo[d] || v > grid.hi[d]) return -1;
      double width = (grid.hi[d] - grid.lo[d]) / static_cast<double>(grid.cells[d]);
      auto k = static_cast<std::size_t>(std::min(
          static_cast<double>(grid.cells[d] - 1), std::floor((v - grid.lo[d]) / width)));
      idx = idx * grid.cells[d] + k;
    }
    return static_cast<std::ptrdiff_t>(idx);
  };

  std::vector<double> transition(n_states * n_actions * n_states, 0.0);
  std::vector<double> reward(n_states * n_actions, 0.0);
  double reward_min = 0.0, reward_max = 1.0;
  if (cfg.task == Task::mountain_car) reward_min = -0.01;

  for (std::size_t s = 0; s < n_cells; ++s) {
    out.centers[s] = cell_center(s);
    EnvState st;
    st.phys = out.centers[s];
    if (cfg.task == Task::sparse_pendulum) st.phys = {out.centers[s][0], out.centers[s][1]};
    for (std::size_t a = 0; a < n_actions; ++a) {
      StepResult res = env_step(st, a, cfg);
      reward[s * n_actions + a] = sparse_reward(st.phys, cfg, false);
      std::ptrdiff_t tgt = snap(res.next.phys);
      if (tgt < 0 || terminal_state(res.next.phys, cfg)) {
        transition[(s * n_actions + a) * n_states + boundary] = 1.0;
        out.boundary_reached = true;
      } else {
        transition[(s * n_actions + a) * n_states + static_cast<std::size_t>(tgt)] = 1.0;
      }
    }
  }
  for (std::size_t a = 0; a < n_actions; ++a)
    transition[(boundary * n_actions + a) * n_states + boundary] = 1.0;  // absorbing, reward 0

  std::vector<double> rho0(n_states, 0.0);
  // Initial mass on the cell containing a nominal reset state (all zeros,
  // clamped into the grid).
  std::vector<double> origin(dims, 0.0);
  for (std::size_t d = 0; d < dims; ++d)
    origin[d] = std::clamp(0.0, grid.lo[d] + 1e-9, grid.hi[d] - 1e-9);
  std::ptrdiff_t start = snap(origin);
  rho0[start >= 0 ? static_cast<std::size_t>(start) : boundary] = 1.0;

  out.mdp = build_mdp(n_states, n_actions, std::move(transition), std::move(reward),
                      std::move(rho0), gamma, reward_min, reward_max);
  return out;
}

}  // namespace bisimlab
