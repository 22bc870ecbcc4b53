#include "bisimlab/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "bisimlab/kernels.hpp"
#include "bisimlab/linalg.hpp"
#include "bisimlab/rng.hpp"

namespace bisimlab {

namespace {

void normalize_row(double* row, std::size_t n, const char* what, std::size_t index) {
  double s = kernels::sum(row, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(row[i]) || row[i] < -1e-15)
      throw Error("NonStochasticRow",
                  std::string(what) + " " + std::to_string(index) + " has a negative/non-finite entry");
    if (row[i] < 0.0) row[i] = 0.0;
  }
  if (std::fabs(s - 1.0) > 1e-9)
    throw Error("NonStochasticRow", std::string(what) + " " + std::to_string(index) + " sums to " +
                                        std::to_string(s));
  for (std::size_t i = 0; i < n; ++i) row[i] /= s;
}

}  // namespace

FiniteMdp build_mdp(std::size_t n_states, std::size_t n_actions, std::vector<double> transition,
                    std::vector<double> reward, std::vector<double> rho0, double gamma,
                    double reward_min, double reward_max) {
  if (n_states == 0 || n_actions == 0) throw Error("ShapeMismatch", "empty state or action set");
  if (transition.size() != n_states * n_actions * n_states)
    throw Error("ShapeMismatch", "transition table is not |S|x|A|x|S|");
  if (reward.size() != n_states * n_actions)
    throw Error("ShapeMismatch", "reward table is not |S|x|A|");
  if (rho0.size() != n_states) throw Error("ShapeMismatch", "rho0 is not |S|");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw Error("ShapeMismatch", "gamma outside [0,1)");

  FiniteMdp mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.transition = std::move(transition);
  mdp.reward = std::move(reward);
  mdp.rho0 = std::move(rho0);
  mdp.gamma = gamma;
  mdp.reward_min = reward_min;
  mdp.reward_max = reward_max;

  for (std::size_t s = 0; s < n_states; ++s)
    for (std::size_t a = 0; a < n_actions; ++a)
      normalize_row(mdp.row(s, a), n_states, "P row", s * n_actions + a);
  normalize_row(mdp.rho0.data(), n_states, "rho0", 0);

  for (std::size_t i = 0; i < mdp.reward.size(); ++i) {
    double v = mdp.reward[i];
    if (!std::isfinite(v) || v < reward_min - 1e-12 || v > reward_max + 1e-12)
      throw Error("RewardOutOfBounds",
                  "R[" + std::to_string(i) + "] = " + std::to_string(v) + " outside declared bounds");
  }
  return mdp;
}

PolicyTable uniform_policy(std::size_t n_states, std::size_t n_actions) {
  PolicyTable pi;
  pi.n_states = n_states;
  pi.n_actions = n_actions;
  pi.probs.assign(n_states * n_actions, 1.0 / static_cast<double>(n_actions));
  return pi;
}

PolicyTable deterministic_policy(const std::vector<std::size_t>& actions, std::size_t n_actions) {
  PolicyTable pi;
  pi.n_states = actions.size();
  pi.n_actions = n_actions;
  pi.probs.assign(pi.n_states * n_actions, 0.0);
  for (std::size_t s = 0; s < pi.n_states; ++s) {
    if (actions[s] >= n_actions) throw Error("ShapeMismatch", "action id out of range");
    pi.probs[s * n_actions + actions[s]] = 1.0;
  }
  return pi;
}

bool is_deterministic_policy(const PolicyTable& pi, double tol) {
  for (std::size_t s = 0; s < pi.n_states; ++s) {
    double top = 0.0;
    for (std::size_t a = 0; a < pi.n_actions; ++a) top = std::max(top, pi.p(s, a));
    if (top < 1.0 - tol) return false;
  }
  return true;
}

bool is_deterministic_mdp(const FiniteMdp& mdp, double tol) {
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const double* row = mdp.row(s, a);
      double top = 0.0;
      for (std::size_t t = 0; t < mdp.n_states; ++t) top = std::max(top, row[t]);
      if (top < 1.0 - tol) return false;
    }
  return true;
}

PolicyKernel policy_kernel(const FiniteMdp& mdp, const PolicyTable& pi) {
  if (pi.n_states != mdp.n_states || pi.n_actions != mdp.n_actions)
    throw Error("ShapeMismatch", "policy shape does not match MDP");
  PolicyKernel out;
  out.n_states = mdp.n_states;
  out.reward.assign(mdp.n_states, 0.0);
  out.kernel.assign(mdp.n_states * mdp.n_states, 0.0);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    double* krow = out.kernel.data() + s * mdp.n_states;
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      double w = pi.p(s, a);
      if (w == 0.0) continue;
      out.reward[s] += w * mdp.r(s, a);
      kernels::axpy(krow, w, mdp.row(s, a), mdp.n_states);
    }
  }
  return out;
}

namespace {

double bellman_residual(const PolicyKernel& pk, const std::vector<double>& v, double gamma) {
  std::size_t n = pk.n_states;
  double worst = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    double backup = pk.reward[s] + gamma * kernels::dot(pk.row(s), v.data(), n);
    worst = std::max(worst, std::fabs(v[s] - backup));
  }
  return worst;
}

}  // namespace

ValueFunction policy_evaluation(const FiniteMdp& mdp, const PolicyTable& pi, double gamma,
                                double tol) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw Error("ShapeMismatch", "gamma outside [0,1)");
  PolicyKernel pk = policy_kernel(mdp, pi);
  std::size_t n = mdp.n_states;
  std::vector<double> a(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i * n + j] = (i == j ? 1.0 : 0.0) - gamma * pk.kernel[i * n + j];
  ValueFunction vf;
  vf.values = solve_dense(std::move(a), pk.reward, n);
  vf.gamma = gamma;
  double res = bellman_residual(pk, vf.values, gamma);
  if (res > tol)
    throw Error("NoConvergence", "direct policy evaluation residual " + std::to_string(res));
  return vf;
}

ValueFunction policy_evaluation_iterative(const FiniteMdp& mdp, const PolicyTable& pi,
                                          double gamma, double tol) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw Error("ShapeMismatch", "gamma outside [0,1)");
  PolicyKernel pk = policy_kernel(mdp, pi);
  std::size_t n = mdp.n_states;
  std::vector<double> v(n, 0.0), next(n, 0.0);
  // Residual contracts by gamma per sweep, so the a-priori cap is generous.
  std::size_t max_iter = 10000000;
  for (std::size_t it = 0; it < max_iter; ++it) {
    for (std::size_t s = 0; s < n; ++s)
      next[s] = pk.reward[s] + gamma * kernels::dot(pk.row(s), v.data(), n);
    std::swap(v, next);
    if (bellman_residual(pk, v, gamma) <= tol) {
      ValueFunction vf;
      vf.values = std::move(v);
      vf.gamma = gamma;
      return vf;
    }
  }
  throw Error("NoConvergence", "iterative policy evaluation did not reach tol");
}

namespace {

// Deterministic kernels admit an exact stationary distribution: each start
// state's mass settles uniformly on the cycle its orbit enters.
bool deterministic_stationary(const PolicyKernel& pk, const std::vector<double>& rho0,
                              std::vector<double>& out) {
  std::size_t n = pk.n_states;
  std::vector<std::ptrdiff_t> next(n, -1);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t t = 0; t < n; ++t)
      if (pk.kernel[s * n + t] > 1.0 - 1e-12) next[s] = static_cast<std::ptrdiff_t>(t);
    if (next[s] < 0) return false;
  }
  out.assign(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    if (rho0[s] == 0.0) continue;
    // Walk until a state repeats; the tail of the walk is the cycle.
    std::vector<std::ptrdiff_t> seen(n, -1);
    std::vector<std::size_t> path;
    std::size_t cur = s;
    while (seen[cur] < 0) {
      seen[cur] = static_cast<std::ptrdiff_t>(path.size());
      path.push_back(cur);
      cur = static_cast<std::size_t>(next[cur]);
    }
    std::size_t cycle_start = static_cast<std::size_t>(seen[cur]);
    double share = rho0[s] / static_cast<double>(path.size() - cycle_start);
    for (std::size_t k = cycle_start; k < path.size(); ++k) out[path[k]] += share;
  }
  return true;
}

}  // namespace

std::vector<double> stationary_distribution(const FiniteMdp& mdp, const PolicyTable& pi,
                                            double tol, std::size_t max_iter) {
  PolicyKernel pk = policy_kernel(mdp, pi);
  std::size_t n = mdp.n_states;
  {
    std::vector<double> exact;
    if (deterministic_stationary(pk, mdp.rho0, exact)) return exact;
  }
  std::vector<double> rho = mdp.rho0, next(n, 0.0);
  auto residual = [&](const std::vector<double>& r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double rpj = 0.0;
      for (std::size_t i = 0; i < n; ++i) rpj += r[i] * pk.kernel[i * n + j];
      acc += std::fabs(rpj - r[j]);
    }
    return acc;
  };
  for (std::size_t it = 0; it < max_iter; ++it) {
    // Lazy step: rho <- (rho + rho P)/2.
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (rho[i] == 0.0) continue;
      kernels::axpy(next.data(), rho[i], pk.kernel.data() + i * n, n);
    }
    double drift = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double mixed = 0.5 * (rho[j] + next[j]);
      drift += std::fabs(mixed - rho[j]);
      rho[j] = mixed;
    }
    if (drift <= 0.25 * tol && residual(rho) <= tol) {
      double s = kernels::sum(rho.data(), n);
      for (auto& x : rho) x /= s;
      return rho;
    }
  }
  throw Error("NoConvergence", "stationary distribution power iteration did not converge");
}

FiniteMdp generate_mdp(std::uint64_t seed, std::size_t n_states, std::size_t n_actions,
                       bool deterministic, double reward_sparsity, double gamma) {
  if (n_states < 1 || n_actions < 1) throw Error("ShapeMismatch", "need at least one state/action");
  if (reward_sparsity < 0.0 || reward_sparsity > 1.0)
    throw Error("ShapeMismatch", "sparsity outside [0,1]");
  Rng rng(seed);
  std::size_t sa = n_states * n_actions;
  std::vector<double> transition(sa * n_states, 0.0);
  for (std::size_t s = 0; s < n_states; ++s)
    for (std::size_t a = 0; a < n_actions; ++a) {
      double* row = transition.data() + (s * n_actions + a) * n_states;
      if (deterministic) {
        row[rng.uniform_int(n_states)] = 1.0;
      } else {
        auto d = rng.dirichlet(n_states);
        std::copy(d.begin(), d.end(), row);
      }
    }
  std::vector<double> reward(sa);
  for (auto& r : reward) r = rng.uniform();
  std::size_t zeros = static_cast<std::size_t>(reward_sparsity * static_cast<double>(sa));
  std::vector<std::size_t> idx(sa);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  rng.shuffle(idx);
  for (std::size_t k = 0; k < zeros; ++k) reward[idx[k]] = 0.0;
  std::vector<double> rho0(n_states, 1.0 / static_cast<double>(n_states));
  return build_mdp(n_states, n_actions, std::move(transition), std::move(reward), std::move(rho0),
                   gamma, 0.0, 1.0);
}

std::string mdp_to_json(const FiniteMdp& mdp) {
  nlohmann::json j;
  j["n_states"] = mdp.n_states;
  j["n_actions"] = mdp.n_actions;
  j["gamma"] = mdp.gamma;
  auto trans = nlohmann::json::array();
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    auto per_state = nlohmann::json::array();
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const double* row = mdp.row(s, a);
      per_state.push_back(std::vector<double>(row, row + mdp.n_states));
    }
    trans.push_back(per_state);
  }
  j["transition"] = trans;
  auto rew = nlohmann::json::array();
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    std::vector<double> row(mdp.n_actions);
    for (std::size_t a = 0; a < mdp.n_actions; ++a) row[a] = mdp.r(s, a);
    rew.push_back(row);
  }
  j["reward"] = rew;
  j["rho0"] = mdp.rho0;
  j["reward_bounds"] = std::vector<double>{mdp.reward_min, mdp.reward_max};
  return j.dump(2);
}

FiniteMdp mdp_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  std::size_t n_states = j.at("n_states").get<std::size_t>();
  std::size_t n_actions = j.at("n_actions").get<std::size_t>();
  std::vector<double> transition(n_states * n_actions * n_states, 0.0);
  const auto& trans = j.at("transition");
  for (std::size_t s = 0; s < n_states; ++s)
    for (std::size_t a = 0; a < n_actions; ++a) {
      auto row = trans.at(s).at(a).get<std::vector<double>>();
      if (row.size() != n_states) throw Error("ShapeMismatch", "transition row length");
      std::copy(row.begin(), row.end(), transition.begin() + (s * n_actions + a) * n_states);
    }
  std::vector<double> reward(n_states * n_actions, 0.0);
  const auto& rew = j.at("reward");
  for (std::size_t s = 0; s < n_states; ++s) {
    auto row = rew.at(s).get<std::vector<double>>();
    if (row.size() != n_actions) throw Error("ShapeMismatch", "reward row length");
    for (std::size_t a = 0; a < n_actions; ++a) reward[s * n_actions + a] = row[a];
  }
  auto rho0 = j.at("rho0").get<std::vector<double>>();
  auto bounds = j.at("reward_bounds").get<std::vector<double>>();
  if (bounds.size() != 2) throw Error("ShapeMismatch", "reward_bounds must be [lo, hi]");
  return build_mdp(n_states, n_actions, std::move(transition), std::move(reward), std::move(rho0),
                   j.at("gamma").get<double>(), bounds[0], bounds[1]);
}

}  // namespace bisimlab
