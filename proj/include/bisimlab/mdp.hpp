#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bisimlab/common.hpp"

namespace bisimlab {

// Tabular MDP <S, A, P, R, rho0, gamma> with declared reward bounds.
// Rows of P and rho0 are validated/renormalized by build_mdp.
struct FiniteMdp {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> transition;  // [s][a][s'], row-major
  std::vector<double> reward;      // [s][a]
  std::vector<double> rho0;
  double gamma = 0.9;
  double reward_min = 0.0;
  double reward_max = 1.0;

  const double* row(std::size_t s, std::size_t a) const {
    return transition.data() + (s * n_actions + a) * n_states;
  }
  double* row(std::size_t s, std::size_t a) {
    return transition.data() + (s * n_actions + a) * n_states;
  }
  double r(std::size_t s, std::size_t a) const { return reward[s * n_actions + a]; }
  double& r(std::size_t s, std::size_t a) { return reward[s * n_actions + a]; }
};

struct PolicyTable {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> probs;  // [s][a]

  double p(std::size_t s, std::size_t a) const { return probs[s * n_actions + a]; }
};

struct ValueFunction {
  std::vector<double> values;
  double gamma = 0.0;
};

// r^pi and P^pi for a fixed policy.
struct PolicyKernel {
  std::size_t n_states = 0;
  std::vector<double> reward;  // r^pi[s]
  std::vector<double> kernel;  // P^pi[s][s']

  const double* row(std::size_t s) const { return kernel.data() + s * n_states; }
};

// Validates raw tables and returns an MDP. Rows within 1e-9 of stochastic are
// renormalized; rows farther off raise NonStochasticRow. Rewards outside the
// declared bounds raise RewardOutOfBounds.
FiniteMdp build_mdp(std::size_t n_states, std::size_t n_actions, std::vector<double> transition,
                    std::vector<double> reward, std::vector<double> rho0, double gamma,
                    double reward_min = 0.0, double reward_max = 1.0);

PolicyTable uniform_policy(std::size_t n_states, std::size_t n_actions);
PolicyTable deterministic_policy(const std::vector<std::size_t>& actions, std::size_t n_actions);
bool is_deterministic_policy(const PolicyTable& pi, double tol = 1e-12);
bool is_deterministic_mdp(const FiniteMdp& mdp, double tol = 1e-12);

PolicyKernel policy_kernel(const FiniteMdp& mdp, const PolicyTable& pi);

// V = (I - gamma P^pi)^{-1} r^pi by dense solve; Bellman residual <= tol is
// verified on the result.
ValueFunction policy_evaluation(const FiniteMdp& mdp, const PolicyTable& pi, double gamma,
                                double tol = 1e-10);

// Fixed-point iteration variant; used to cross-check the direct solve.
ValueFunction policy_evaluation_iterative(const FiniteMdp& mdp, const PolicyTable& pi,
                                          double gamma, double tol = 1e-10);

// Power iteration from rho0 on the lazy kernel (I + P^pi)/2 (same stationary
// set, aperiodic). The result satisfies ||rho P^pi - rho||_1 <= tol or
// NoConvergence is raised.
std::vector<double> stationary_distribution(const FiniteMdp& mdp, const PolicyTable& pi,
                                            double tol = 1e-10, std::size_t max_iter = 100000);

// Random test-instance factory. Dirichlet(1) rows (stochastic) or uniform
// random point masses (deterministic); rewards uniform in [0,1] with exactly
// floor(sparsity*|S||A|) zeroed entries.
FiniteMdp generate_mdp(std::uint64_t seed, std::size_t n_states, std::size_t n_actions,
                       bool deterministic, double reward_sparsity, double gamma = 0.9);

std::string mdp_to_json(const FiniteMdp& mdp);
FiniteMdp mdp_from_json(const std::string& text);

}  // namespace bisimlab
