#include "bisimlab/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bisimlab/kernels.hpp"
#include "bisimlab/transport.hpp"

namespace bisimlab {

Partition epsilon_partition(const DistanceMatrix& metric, double epsilon) {
  if (epsilon < 0.0) throw Error("InvalidArgument", "epsilon must be >= 0");
  std::size_t n = metric.n;
  Partition part;
  part.epsilon = epsilon;
  part.metric_used = metric;
  part.assignment.assign(n, 0);
  std::vector<std::size_t> anchors;
  for (std::size_t s = 0; s < n; ++s) {
    std::size_t cluster = anchors.size();
    for (std::size_t c = 0; c < anchors.size(); ++c)
      if (metric.at(anchors[c], s) <= epsilon) {
        cluster = c;
        break;
      }
    if (cluster == anchors.size()) anchors.push_back(s);
    part.assignment[s] = cluster;
  }
  part.n_clusters = anchors.size();
  return part;
}

std::vector<double> uniform_weights(std::size_t n_states) {
  return std::vector<double>(n_states, 1.0);
}

AggregatedMdp aggregate_mdp(const FiniteMdp& mdp, const PolicyTable& pi, const Partition& part,
                            const std::vector<double>& xi) {
  std::size_t n = mdp.n_states, k = part.n_clusters;
  if (part.assignment.size() != n || xi.size() != n)
    throw Error("ShapeMismatch", "partition/weight sizes disagree with MDP");
  for (double w : xi)
    if (!(w >= 0.0)) throw Error("InvalidArgument", "xi weights must be >= 0");
  std::vector<double> cluster_mass(k, 0.0);
  for (std::size_t s = 0; s < n; ++s) cluster_mass[part.assignment[s]] += xi[s];
  for (std::size_t c = 0; c < k; ++c)
    if (cluster_mass[c] <= 0.0)
      throw Error("ZeroMeasureCluster", "xi sums to 0 on cluster " + std::to_string(c));

  PolicyKernel pk = policy_kernel(mdp, pi);
  std::vector<double> reward(k, 0.0);
  std::vector<double> kernel(k * k, 0.0);
  std::vector<double> rho0(k, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    std::size_t c = part.assignment[s];
    double w = xi[s] / cluster_mass[c];
    reward[c] += w * pk.reward[s];
    const double* row = pk.row(s);
    for (std::size_t t = 0; t < n; ++t) kernel[c * k + part.assignment[t]] += w * row[t];
    rho0[c] += mdp.rho0[s];
  }

  AggregatedMdp out;
  out.xi = xi;
  out.chain = build_mdp(k, 1, std::move(kernel), std::move(reward), std::move(rho0), mdp.gamma,
                        mdp.reward_min, mdp.reward_max);
  return out;
}

VfaBoundReport vfa_bound_report(const FiniteMdp& mdp, const PolicyTable& pi, const Partition& part,
                                const BisimConfig& cfg, double gamma,
                                const std::vector<double>& xi) {
  for (double r : mdp.reward)
    if (r < -1e-12 || r > 1.0 + 1e-12)
      throw Error("RewardRangeViolation", "VFA bound requires R in [0,1]");
  ValueFunction v = policy_evaluation(mdp, pi, gamma, 1e-10);
  AggregatedMdp agg = aggregate_mdp(mdp, pi, part, xi);
  PolicyTable trivial = uniform_policy(agg.chain.n_states, 1);
  ValueFunction v_agg = policy_evaluation(agg.chain, trivial, gamma, 1e-10);

  double gamma_bar = std::min(cfg.c_t, gamma);
  VfaBoundReport rep;
  rep.n_clusters = part.n_clusters;
  if (cfg.c_r <= 0.0) {
    rep.bound = std::numeric_limits<double>::infinity();
  } else {
    rep.bound = 2.0 * part.epsilon / (cfg.c_r * (1.0 - gamma_bar)) +
                2.0 * (gamma - gamma_bar) / ((1.0 - gamma) * (1.0 - cfg.c_t));
  }
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    double err = std::fabs(v.values[s] - v_agg.values[part.assignment[s]]);
    rep.max_abs_error = std::max(rep.max_abs_error, err);
  }
  rep.max_violation = rep.max_abs_error - rep.bound;
  return rep;
}

ModelErrorVfaReport model_error_vfa_report(const FiniteMdp& mdp, const PolicyTable& pi,
                                           const BisimConfig& cfg,
                                           const std::vector<double>& p_hat,
                                           const std::vector<double>& r_hat,
                                           const DistanceMatrix& learned_dist,
                                           const Partition& part, double gamma,
                                           const std::vector<double>& xi) {
  if (cfg.p != 1.0) throw Error("UnsupportedOrder", "model-error VFA chain is stated for p = 1");
  for (double r : mdp.reward)
    if (r < -1e-12 || r > 1.0 + 1e-12)
      throw Error("RewardRangeViolation", "VFA bound requires R in [0,1]");
  std::size_t n = mdp.n_states;
  if (learned_dist.n != n || part.assignment.size() != n)
    throw Error("ShapeMismatch", "learned metric/partition sizes disagree");

  PolicyKernel pk = policy_kernel(mdp, pi);
  MetricResult exact = metric_on_policy(mdp, pi, cfg);
  BisimConfig tight = cfg;
  tight.tol = std::min(cfg.tol, 1e-11);
  MetricResult approx = metric_approx_dynamics(mdp, pi, p_hat, r_hat, tight);

  ModelErrorVfaReport rep;
  rep.errors.a_p = std::pow(2.0, (cfg.p - 1.0) / cfg.p);
  rep.errors.e_r = kernels::max_abs_diff(r_hat.data(), pk.reward.data(), n);
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<double> mu(pk.row(s), pk.row(s) + n);
    std::vector<double> lam(p_hat.begin() + s * n, p_hat.begin() + (s + 1) * n);
    rep.errors.e_p =
        std::max(rep.errors.e_p, w1_discrete(exact.metric.d, n, n, mu, lam).distance);
  }
  rep.errors.e_phi =
      kernels::max_abs_diff(learned_dist.d.data(), approx.metric.d.data(), n * n);

  double k = (1.0 - cfg.c_t);
  rep.dist_error = kernels::max_abs_diff(exact.metric.d.data(), approx.metric.d.data(), n * n);
  rep.dist_error_bound = (2.0 * cfg.c_r * rep.errors.e_r + 2.0 * cfg.c_t * rep.errors.e_p) / k;
  rep.enc_error = kernels::max_abs_diff(exact.metric.d.data(), learned_dist.d.data(), n * n);
  rep.enc_error_bound = rep.dist_error_bound + rep.errors.e_phi;

  ValueFunction v = policy_evaluation(mdp, pi, gamma, 1e-10);
  AggregatedMdp agg = aggregate_mdp(mdp, pi, part, xi);
  PolicyTable trivial = uniform_policy(agg.chain.n_states, 1);
  ValueFunction v_agg = policy_evaluation(agg.chain, trivial, gamma, 1e-10);

  double gamma_bar = std::min(cfg.c_t, gamma);
  double packed = 2.0 * part.epsilon + rep.errors.e_phi +
                  (2.0 * cfg.c_r / k) * rep.errors.e_r + (2.0 * cfg.c_t / k) * rep.errors.e_p;
  rep.myopia_term = 2.0 * (gamma - gamma_bar) / ((1.0 - gamma) * (1.0 - cfg.c_t));
  if (cfg.c_r <= 0.0) {
    rep.bound = std::numeric_limits<double>::infinity();
  } else {
    rep.bound = packed / (cfg.c_r * (1.0 - gamma_bar)) + rep.myopia_term;
  }
  for (std::size_t s = 0; s < n; ++s) {
    double err = std::fabs(v.values[s] - v_agg.values[part.assignment[s]]);
    rep.max_abs_error = std::max(rep.max_abs_error, err);
  }
  rep.max_violation = rep.max_abs_error - rep.bound;
  return rep;
}

}  // namespace bisimlab
