#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bisimlab/mdp.hpp"

namespace bisimlab {

// Symmetric nonnegative pseudo-metric over a finite state set.
struct DistanceMatrix {
  std::size_t n = 0;
  std::vector<double> d;  // n x n row-major

  double at(std::size_t i, std::size_t j) const { return d[i * n + j]; }
  double& at(std::size_t i, std::size_t j) { return d[i * n + j]; }
  double diameter() const;
};

// Weights and stopping rule for the fixed-point solvers. Covers Def. 1's
// (1-c, c) and Def. 2's (1, gamma) as presets via c_r/c_t choices.
struct BisimConfig {
  double c_r = 1.0;
  double c_t = 0.5;
  double p = 1.0;
  double tol = 1e-9;
  std::size_t max_iter = 0;  // 0: derive from the geometric bound
};

struct FixedPointTrace {
  std::vector<double> residuals;  // ||d_{k+1} - d_k||_inf per iteration
  std::size_t iterations = 0;
  bool converged = false;
};

struct MetricResult {
  DistanceMatrix metric;
  FixedPointTrace trace;
};

// max_a [ c_R |R(s_i,a) - R(s_j,a)| + c_T W1(d)(P(.|s_i,a), P(.|s_j,a)) ].
// Requires p = 1.
MetricResult metric_policy_independent(const FiniteMdp& mdp, const BisimConfig& cfg);

// c_R |r_i - r_j| + c_T W_p(d)(P^pi(.|s_i), P^pi(.|s_j)). p > 1 is accepted
// only when both the MDP and policy are deterministic (UnsupportedOrder
// otherwise); point-mass rows bypass the LP.
MetricResult metric_on_policy(const FiniteMdp& mdp, const PolicyTable& pi, const BisimConfig& cfg);

// Same recursion with an alternate kernel/reward (approximate dynamics
// model); p_hat is |S| x |S| row-stochastic, r_hat has |S| entries.
MetricResult metric_approx_dynamics(const FiniteMdp& mdp, const PolicyTable& pi,
                                    const std::vector<double>& p_hat,
                                    const std::vector<double>& r_hat, const BisimConfig& cfg);

// One application of the on-policy operator F to an arbitrary cost matrix;
// exposed for the contraction checker and tests.
DistanceMatrix apply_on_policy_operator(const PolicyKernel& pk, const DistanceMatrix& d,
                                        const BisimConfig& cfg);

struct ContractionReport {
  double max_ratio = 0.0;    // max ||F(d)-F(d')||_inf / ||d-d'||_inf
  std::size_t pairs_used = 0;
  std::size_t pairs_skipped = 0;  // degenerate d = d'
};

ContractionReport verify_contraction(const FiniteMdp& mdp, const PolicyTable& pi,
                                     const BisimConfig& cfg, std::size_t samples,
                                     std::uint64_t seed);

struct ValueBoundReport {
  double max_violation = 0.0;  // max over pairs of LHS - RHS (<= 0 when the bound holds)
  double min_slack = 0.0;      // tightest pair
  double mean_slack = 0.0;
  double myopia_term = 0.0;    // 2 c_R (gamma - min(c_t,gamma)) / ((1-gamma)(1-c_t))
};

// Checks c_R |V(s_i) - V(s_j)| <= d(s_i,s_j) + myopia_term over all pairs.
// Requires R in [0,1] (RewardRangeViolation otherwise).
ValueBoundReport value_bound_report(const FiniteMdp& mdp, const PolicyTable& pi,
                                    const DistanceMatrix& metric, const BisimConfig& cfg,
                                    double gamma);

struct DispersionStats {
  double mu_bd = 0.0;
  double mu_rd = 0.0;
  double sigma2_bd = 0.0;
  double sigma2_rd = 0.0;
};

// Exact expectations under the product pair distribution rho x rho.
DispersionStats dispersion_stats(const FiniteMdp& mdp, const PolicyTable& pi,
                                 const DistanceMatrix& metric, const std::vector<double>& rho);

// Max triangle-inequality violation; exhaustive for n <= 64, else on 1000
// seeded random triples.
double triangle_violation(const DistanceMatrix& d, std::uint64_t seed = 7);

void metric_to_csv(const DistanceMatrix& d, const std::string& path);

}  // namespace bisimlab
