#include "bisimlab/bisim.hpp"

#include <algorithm>
#include <cmath>

#include "bisimlab/csv.hpp"
#include "bisimlab/kernels.hpp"
#include "bisimlab/rng.hpp"
#include "bisimlab/transport.hpp"

namespace bisimlab {

double DistanceMatrix::diameter() const {
  double m = 0.0;
  for (double v : d) m = std::max(m, v);
  return m;
}

namespace {

// -1 when the row is not a point mass, else the target state.
std::ptrdiff_t point_mass_target(const double* row, std::size_t n) {
  for (std::size_t t = 0; t < n; ++t)
    if (row[t] > 1.0 - 1e-12) return static_cast<std::ptrdiff_t>(t);
  return -1;
}

double w_term(const DistanceMatrix& d, const double* row_i, const double* row_j,
              std::ptrdiff_t tgt_i, std::ptrdiff_t tgt_j, double p) {
  std::size_t n = d.n;
  if (tgt_i >= 0 && tgt_j >= 0) return d.at(static_cast<std::size_t>(tgt_i), static_cast<std::size_t>(tgt_j));
  if (p != 1.0) throw Error("UnsupportedOrder", "p > 1 requires deterministic rows");
  std::vector<double> mu(row_i, row_i + n), lam(row_j, row_j + n);
  return w1_discrete(d.d, n, n, mu, lam).distance;
}

std::size_t derive_max_iter(const BisimConfig& cfg, double reward_range) {
  if (cfg.max_iter > 0) return cfg.max_iter;
  if (cfg.c_t <= 0.0) return 3;
  double first = std::max(cfg.c_r * reward_range, cfg.tol);
  double steps = std::log(cfg.tol / first) / std::log(cfg.c_t);
  if (!(steps > 0.0)) steps = 1.0;
  return static_cast<std::size_t>(steps) + 16;
}

void check_config(const BisimConfig& cfg) {
  if (!(cfg.c_t >= 0.0 && cfg.c_t < 1.0)) throw Error("InvalidArgument", "c_t outside [0,1)");
  if (!(cfg.c_r >= 0.0)) throw Error("InvalidArgument", "c_r must be >= 0");
  if (!(cfg.p >= 1.0)) throw Error("InvalidArgument", "p must be >= 1");
  if (!(cfg.tol > 0.0)) throw Error("InvalidArgument", "tol must be > 0");
}

// Shared fixed-point loop over a per-pair update rule.
template <typename Update>
MetricResult iterate_fixed_point(std::size_t n, const BisimConfig& cfg, double reward_range,
                                 Update&& update) {
  MetricResult out;
  out.metric.n = n;
  out.metric.d.assign(n * n, 0.0);
  DistanceMatrix next = out.metric;
  std::size_t max_iter = derive_max_iter(cfg, reward_range);
  for (std::size_t it = 0; it < max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      next.at(i, i) = 0.0;
      for (std::size_t j = i + 1; j < n; ++j) {
        double v = update(out.metric, i, j);
        next.at(i, j) = v;
        next.at(j, i) = v;
      }
    }
    double res = kernels::max_abs_diff(next.d.data(), out.metric.d.data(), n * n);
    out.metric.d.swap(next.d);
    out.trace.residuals.push_back(res);
    out.trace.iterations = it + 1;
    if (res <= cfg.tol) {
      out.trace.converged = true;
      return out;
    }
  }
  throw Error("NoConvergence", "fixed-point iteration exceeded max_iter (tol too tight?)");
}

}  // namespace

MetricResult metric_policy_independent(const FiniteMdp& mdp, const BisimConfig& cfg) {
  check_config(cfg);
  if (cfg.p != 1.0)
    throw Error("UnsupportedOrder", "policy-independent metric is defined with W1 (p = 1)");
  std::size_t n = mdp.n_states, A = mdp.n_actions;
  std::vector<std::ptrdiff_t> targets(n * A);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t a = 0; a < A; ++a) targets[s * A + a] = point_mass_target(mdp.row(s, a), n);
  return iterate_fixed_point(
      n, cfg, mdp.reward_max - mdp.reward_min, [&](const DistanceMatrix& d, std::size_t i, std::size_t j) {
        double best = 0.0;
        for (std::size_t a = 0; a < A; ++a) {
          double v = cfg.c_r * std::fabs(mdp.r(i, a) - mdp.r(j, a)) +
                     cfg.c_t * w_term(d, mdp.row(i, a), mdp.row(j, a), targets[i * A + a],
                                      targets[j * A + a], 1.0);
          best = std::max(best, v);
        }
        return best;
      });
}

MetricResult metric_on_policy(const FiniteMdp& mdp, const PolicyTable& pi, const BisimConfig& cfg) {
  check_config(cfg);
  if (cfg.p > 1.0 && !(is_deterministic_mdp(mdp) && is_deterministic_policy(pi)))
    throw Error("UnsupportedOrder",
                "p > 1 requires a deterministic environment and a deterministic policy");
  PolicyKernel pk = policy_kernel(mdp, pi);
  std::size_t n = mdp.n_states;
  std::vector<std::ptrdiff_t> targets(n);
  for (std::size_t s = 0; s < n; ++s) targets[s] = point_mass_target(pk.row(s), n);
  return iterate_fixed_point(n, cfg, mdp.reward_max - mdp.reward_min,
                             [&](const DistanceMatrix& d, std::size_t i, std::size_t j) {
                               return cfg.c_r * std::fabs(pk.reward[i] - pk.reward[j]) +
                                      cfg.c_t * w_term(d, pk.row(i), pk.row(j), targets[i],
                                                       targets[j], cfg.p);
                             });
}

MetricResult metric_approx_dynamics(const FiniteMdp& mdp, const PolicyTable& pi,
                                    const std::vector<double>& p_hat,
                                    const std::vector<double>& r_hat, const BisimConfig& cfg) {
  check_config(cfg);
  std::size_t n = mdp.n_states;
  if (pi.n_states != n || pi.n_actions != mdp.n_actions)
    throw Error("ShapeMismatch", "policy shape does not match MDP");
  if (p_hat.size() != n * n || r_hat.size() != n)
    throw Error("ShapeMismatch", "approximate kernel/reward shapes disagree");
  bool all_point_masses = true;
  std::vector<std::ptrdiff_t> targets(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double* row = p_hat.data() + s * n;
    double total = kernels::sum(row, n);
    if (std::fabs(total - 1.0) > 1e-9)
      throw Error("NonStochasticRow", "p_hat row " + std::to_string(s) + " sums to " +
                                          std::to_string(total));
    targets[s] = point_mass_target(row, n);
    all_point_masses = all_point_masses && targets[s] >= 0;
  }
  if (cfg.p > 1.0 && !all_point_masses)
    throw Error("UnsupportedOrder", "p > 1 requires a deterministic approximate kernel");
  double gap = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) gap = std::max(gap, std::fabs(r_hat[i] - r_hat[j]));
  return iterate_fixed_point(n, cfg, std::max(gap, mdp.reward_max - mdp.reward_min),
                             [&](const DistanceMatrix& d, std::size_t i, std::size_t j) {
                               return cfg.c_r * std::fabs(r_hat[i] - r_hat[j]) +
                                      cfg.c_t * w_term(d, p_hat.data() + i * n, p_hat.data() + j * n,
                                                       targets[i], targets[j], cfg.p);
                             });
}

DistanceMatrix apply_on_policy_operator(const PolicyKernel& pk, const DistanceMatrix& d,
                                        const BisimConfig& cfg) {
  std::size_t n = pk.n_states;
  if (d.n != n) throw Error("ShapeMismatch", "metric size does not match kernel");
  DistanceMatrix out;
  out.n = n;
  out.d.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      std::ptrdiff_t ti = point_mass_target(pk.row(i), n);
      std::ptrdiff_t tj = point_mass_target(pk.row(j), n);
      double v = cfg.c_r * std::fabs(pk.reward[i] - pk.reward[j]) +
                 cfg.c_t * w_term(d, pk.row(i), pk.row(j), ti, tj, cfg.p);
      out.at(i, j) = v;
      out.at(j, i) = v;
    }
  return out;
}

ContractionReport verify_contraction(const FiniteMdp& mdp, const PolicyTable& pi,
                                     const BisimConfig& cfg, std::size_t samples,
                                     std::uint64_t seed) {
  check_config(cfg);
  if (cfg.p > 1.0 && !(is_deterministic_mdp(mdp) && is_deterministic_policy(pi)))
    throw Error("UnsupportedOrder", "p > 1 requires a deterministic setting");
  PolicyKernel pk = policy_kernel(mdp, pi);
  std::size_t n = mdp.n_states;
  double scale = cfg.c_r * (mdp.reward_max - mdp.reward_min) / std::max(1e-12, 1.0 - cfg.c_t);
  Rng rng(seed);
  auto random_metric = [&]() {
    DistanceMatrix d;
    d.n = n;
    d.d.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        double v = rng.uniform(0.0, scale);
        d.at(i, j) = v;
        d.at(j, i) = v;
      }
    return d;
  };
  ContractionReport rep;
  for (std::size_t k = 0; k < samples; ++k) {
    DistanceMatrix a = random_metric();
    DistanceMatrix b = (rng.uniform() < 0.02) ? a : random_metric();
    double denom = kernels::max_abs_diff(a.d.data(), b.d.data(), n * n);
    if (denom <= 0.0) {
      ++rep.pairs_skipped;
      continue;
    }
    DistanceMatrix fa = apply_on_policy_operator(pk, a, cfg);
    DistanceMatrix fb = apply_on_policy_operator(pk, b, cfg);
    double num = kernels::max_abs_diff(fa.d.data(), fb.d.data(), n * n);
    rep.max_ratio = std::max(rep.max_ratio, num / denom);
    ++rep.pairs_used;
  }
  return rep;
}

ValueBoundReport value_bound_report(const FiniteMdp& mdp, const PolicyTable& pi,
                                    const DistanceMatrix& metric, const BisimConfig& cfg,
                                    double gamma) {
  for (double r : mdp.reward)
    if (r < -1e-12 || r > 1.0 + 1e-12)
      throw Error("RewardRangeViolation", "value bound requires R in [0,1]");
  ValueFunction vf = policy_evaluation(mdp, pi, gamma, 1e-10);
  std::size_t n = mdp.n_states;
  double gamma_bar = std::min(cfg.c_t, gamma);
  ValueBoundReport rep;
  rep.myopia_term = 2.0 * cfg.c_r * (gamma - gamma_bar) / ((1.0 - gamma) * (1.0 - cfg.c_t));
  rep.min_slack = std::numeric_limits<double>::infinity();
  rep.max_violation = -std::numeric_limits<double>::infinity();
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double lhs = cfg.c_r * std::fabs(vf.values[i] - vf.values[j]);
      double rhs = metric.at(i, j) + rep.myopia_term;
      double slack = rhs - lhs;
      rep.max_violation = std::max(rep.max_violation, -slack);
      rep.min_slack = std::min(rep.min_slack, slack);
      total += slack;
      ++count;
    }
  if (count == 0) {
    rep.max_violation = 0.0;
    rep.min_slack = 0.0;
  } else {
    rep.mean_slack = total / static_cast<double>(count);
  }
  return rep;
}

DispersionStats dispersion_stats(const FiniteMdp& mdp, const PolicyTable& pi,
                                 const DistanceMatrix& metric, const std::vector<double>& rho) {
  std::size_t n = mdp.n_states;
  if (metric.n != n || rho.size() != n) throw Error("ShapeMismatch", "dispersion input sizes");
  PolicyKernel pk = policy_kernel(mdp, pi);
  DispersionStats st;
  double e_bd2 = 0.0, e_rd2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (rho[i] == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      double w = rho[i] * rho[j];
      if (w == 0.0) continue;
      double bd = metric.at(i, j);
      double rd = std::fabs(pk.reward[i] - pk.reward[j]);
      st.mu_bd += w * bd;
      st.mu_rd += w * rd;
      e_bd2 += w * bd * bd;
      e_rd2 += w * rd * rd;
    }
  }
  st.sigma2_bd = std::max(0.0, e_bd2 - st.mu_bd * st.mu_bd);
  st.sigma2_rd = std::max(0.0, e_rd2 - st.mu_rd * st.mu_rd);
  return st;
}

double triangle_violation(const DistanceMatrix& d, std::uint64_t seed) {
  std::size_t n = d.n;
  double worst = 0.0;
  if (n <= 64) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k)
          worst = std::max(worst, d.at(i, j) - d.at(i, k) - d.at(k, j));
    return worst;
  }
  Rng rng(seed);
  for (int t = 0; t < 1000; ++t) {
    std::size_t i = rng.uniform_int(n), j = rng.uniform_int(n), k = rng.uniform_int(n);
    worst = std::max(worst, d.at(i, j) - d.at(i, k) - d.at(k, j));
  }
  return worst;
}

void metric_to_csv(const DistanceMatrix& d, const std::string& path) {
  CsvWriter csv(path, {"i", "j", "d"});
  for (std::size_t i = 0; i < d.n; ++i)
    for (std::size_t j = 0; j < d.n; ++j) {
      csv.field(i);
      csv.field(j);
      csv.field(d.at(i, j));
      csv.end_row();
    }
}

}  // namespace bisimlab
