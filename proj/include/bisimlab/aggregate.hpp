#pragma once

#include <vector>

#include "bisimlab/bisim.hpp"
#include "bisimlab/mdp.hpp"

namespace bisimlab {

// Greedy ball covering under a metric: states join the first cluster whose
// anchor is within epsilon, so intra-cluster distance <= 2 epsilon by the
// triangle inequality.
struct Partition {
  std::vector<std::size_t> assignment;  // state -> cluster id
  std::size_t n_clusters = 0;
  double epsilon = 0.0;
  DistanceMatrix metric_used;
};

Partition epsilon_partition(const DistanceMatrix& metric, double epsilon);

// xi-average aggregated MDP: cluster rewards/kernels are xi-weighted means of
// member quantities under the policy kernel. Represented as a 1-action MDP
// over clusters (the policy is already folded in).
struct AggregatedMdp {
  FiniteMdp chain;
  std::vector<double> xi;
};

AggregatedMdp aggregate_mdp(const FiniteMdp& mdp, const PolicyTable& pi, const Partition& part,
                            const std::vector<double>& xi);

std::vector<double> uniform_weights(std::size_t n_states);

struct VfaBoundReport {
  double bound = 0.0;           // RHS evaluated from (epsilon, c_r, c_t, gamma)
  double max_abs_error = 0.0;   // max_s |V(s) - V~(Phi(s))|
  double max_violation = 0.0;   // max_abs_error - bound
  std::size_t n_clusters = 0;
};

// |V^pi(s) - V~^pi(Phi(s))| <= 2 eps / (c_R (1 - gamma_bar)) +
// 2 (gamma - gamma_bar) / ((1 - gamma)(1 - c_T)). Requires R in [0,1] and the
// partition to have been built from the exact metric for (mdp, pi, cfg).
VfaBoundReport vfa_bound_report(const FiniteMdp& mdp, const PolicyTable& pi,
                                const Partition& part, const BisimConfig& cfg, double gamma,
                                const std::vector<double>& xi);

struct ModelErrorReport {
  double e_phi = 0.0;  // ||learned - d_hat||_inf
  double e_r = 0.0;    // ||r_hat - r^pi||_inf
  double e_p = 0.0;    // sup_s W1(d_pi)(P^pi(.|s), P_hat(.|s))
  double a_p = 1.0;    // 2^{(p-1)/p}
};

struct ModelErrorVfaReport {
  ModelErrorReport errors;
  double bound = 0.0;
  double max_abs_error = 0.0;
  double max_violation = 0.0;
  double myopia_term = 0.0;      // nonzero only when c_t < gamma (corollary form)
  double dist_error = 0.0;       // ||d_pi - d_hat||_inf
  double dist_error_bound = 0.0; // (2c_R E_r + 2c_T E_P) / (1 - c_T)
  double enc_error = 0.0;        // ||d_pi - learned||_inf
  double enc_error_bound = 0.0;  // dist_error_bound + E_phi
};

// Full model-error chain: computes E_r, E_P, E_phi exactly, the bisimulation
// distance error bounds, and the VFA bound through a partition of the learned
// distances with radius epsilon_hat. cfg.p must be 1.
ModelErrorVfaReport model_error_vfa_report(const FiniteMdp& mdp, const PolicyTable& pi,
                                           const BisimConfig& cfg,
                                           const std::vector<double>& p_hat,
                                           const std::vector<double>& r_hat,
                                           const DistanceMatrix& learned_dist,
                                           const Partition& part, double gamma,
                                           const std::vector<double>& xi);

}  // namespace bisimlab
