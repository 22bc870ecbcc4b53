#include "bisimlab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>

#include "bisimlab/csv.hpp"
#include "bisimlab/kernels.hpp"
#include "bisimlab/linalg.hpp"

namespace bisimlab {

namespace {

struct Basis {
  // Basic cells of the transportation tableau; the induced bipartite graph
  // over m row-nodes and n col-nodes stays a spanning tree.
  std::vector<std::size_t> row, col;
  std::vector<double> flow;

  std::size_t size() const { return row.size(); }
};

// Node ids: rows are [0, m), cols are [m, m+n).
std::vector<std::vector<std::size_t>> adjacency(const Basis& basis, std::size_t m, std::size_t n) {
  std::vector<std::vector<std::size_t>> adj(m + n);
  for (std::size_t k = 0; k < basis.size(); ++k) {
    adj[basis.row[k]].push_back(k);
    adj[m + basis.col[k]].push_back(k);
  }
  return adj;
}

void compute_duals(const Basis& basis, const std::vector<double>& cost, std::size_t m,
                   std::size_t n, std::vector<double>& u, std::vector<double>& v) {
  auto adj = adjacency(basis, m, n);
  std::vector<char> seen(m + n, 0);
  u.assign(m, 0.0);
  v.assign(n, 0.0);
  std::deque<std::size_t> queue;
  queue.push_back(0);
  seen[0] = 1;
  while (!queue.empty()) {
    std::size_t node = queue.front();
    queue.pop_front();
    for (std::size_t k : adj[node]) {
      std::size_t i = basis.row[k], j = basis.col[k];
      std::size_t other = (node < m) ? m + j : i;
      if (seen[other]) continue;
      seen[other] = 1;
      if (node < m)
        v[j] = cost[i * n + j] - u[i];
      else
        u[i] = cost[i * n + j] - v[j];
      queue.push_back(other);
    }
  }
}

// Unique tree path between row-node i and col-node j, as basis-cell indices.
std::vector<std::size_t> tree_path(const Basis& basis, std::size_t m, std::size_t n,
                                   std::size_t row_node, std::size_t col_node) {
  auto adj = adjacency(basis, m, n);
  std::vector<std::ptrdiff_t> parent_cell(m + n, -1);
  std::vector<std::ptrdiff_t> parent_node(m + n, -1);
  std::vector<char> seen(m + n, 0);
  std::deque<std::size_t> queue;
  queue.push_back(row_node);
  seen[row_node] = 1;
  std::size_t target = m + col_node;
  while (!queue.empty()) {
    std::size_t node = queue.front();
    queue.pop_front();
    if (node == target) break;
    for (std::size_t k : adj[node]) {
      std::size_t other = (node < m) ? m + basis.col[k] : basis.row[k];
      if (seen[other]) continue;
      seen[other] = 1;
      parent_cell[other] = static_cast<std::ptrdiff_t>(k);
      parent_node[other] = static_cast<std::ptrdiff_t>(node);
      queue.push_back(other);
    }
  }
  std::vector<std::size_t> path;
  std::size_t node = target;
  while (node != row_node) {
    path.push_back(static_cast<std::size_t>(parent_cell[node]));
    node = static_cast<std::size_t>(parent_node[node]);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

// Exact flows on a basis tree for given marginals, by leaf elimination.
void resolve_flows(Basis& basis, std::size_t m, std::size_t n, const std::vector<double>& mu,
                   const std::vector<double>& lam) {
  std::vector<double> balance(m + n, 0.0);
  for (std::size_t i = 0; i < m; ++i) balance[i] = mu[i];
  for (std::size_t j = 0; j < n; ++j) balance[m + j] = lam[j];
  std::vector<std::size_t> degree(m + n, 0);
  auto adj = adjacency(basis, m, n);
  for (std::size_t node = 0; node < m + n; ++node) degree[node] = adj[node].size();
  std::vector<char> done_cell(basis.size(), 0);
  std::deque<std::size_t> leaves;
  for (std::size_t node = 0; node < m + n; ++node)
    if (degree[node] == 1) leaves.push_back(node);
  while (!leaves.empty()) {
    std::size_t node = leaves.front();
    leaves.pop_front();
    std::size_t pick = basis.size();
    for (std::size_t k : adj[node])
      if (!done_cell[k]) {
        pick = k;
        break;
      }
    if (pick == basis.size()) continue;  // root of the tree
    basis.flow[pick] = balance[node];
    done_cell[pick] = 1;
    std::size_t other = (node < m) ? m + basis.col[pick] : basis.row[pick];
    balance[other] -= balance[node];
    balance[node] = 0.0;
    if (--degree[other] == 1) leaves.push_back(other);
    degree[node] = 0;
  }
}

}  // namespace

W1Result w1_discrete(const std::vector<double>& cost, std::size_t n_rows, std::size_t n_cols,
                     const std::vector<double>& mu, const std::vector<double>& lam) {
  std::size_t m = n_rows, n = n_cols;
  if (m == 0 || n == 0 || cost.size() != m * n || mu.size() != m || lam.size() != n)
    throw Error("ShapeMismatch", "cost/marginal shapes disagree");
  double cmax = 0.0;
  for (double c : cost) {
    if (!std::isfinite(c) || c < 0.0) throw Error("InvalidArgument", "cost must be finite and >= 0");
    cmax = std::max(cmax, c);
  }
  for (double x : mu)
    if (!std::isfinite(x) || x < -1e-15) throw Error("InvalidArgument", "mu must be >= 0");
  for (double x : lam)
    if (!std::isfinite(x) || x < -1e-15) throw Error("InvalidArgument", "lam must be >= 0");
  double mu_total = kernels::sum(mu.data(), m);
  double lam_total = kernels::sum(lam.data(), n);
  if (std::fabs(mu_total - lam_total) > 1e-9)
    throw Error("InfeasibleMarginals", "marginal sums differ by " +
                                           std::to_string(std::fabs(mu_total - lam_total)));

  W1Result out;
  out.plan.n_rows = m;
  out.plan.n_cols = n;
  out.plan.marginal_row = mu;
  out.plan.marginal_col = lam;
  out.plan.coupling.assign(m * n, 0.0);
  out.plan.dual_row.assign(m, 0.0);
  out.plan.dual_col.assign(n, 0.0);
  if (mu_total <= 0.0) return out;  // nothing to move

  // Rescale lam so totals match exactly, then perturb supplies against
  // degeneracy; the perturbation is removed again before reporting.
  std::vector<double> lam_exact = lam;
  double rescale = mu_total / lam_total;
  for (auto& x : lam_exact) x *= rescale;
  double eps = 1e-13 * std::max(1.0, mu_total);
  std::vector<double> mu_p = mu, lam_p = lam_exact;
  double added = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double bump = eps * static_cast<double>(i + 1);
    mu_p[i] += bump;
    added += bump;
  }
  lam_p[n - 1] += added;

  // North-west-corner start: exactly m + n - 1 basic cells.
  Basis basis;
  basis.row.reserve(m + n);
  basis.col.reserve(m + n);
  basis.flow.reserve(m + n);
  {
    std::size_t i = 0, j = 0;
    double a = mu_p[0], b = lam_p[0];
    while (true) {
      double t = std::min(a, b);
      basis.row.push_back(i);
      basis.col.push_back(j);
      basis.flow.push_back(t);
      if (i == m - 1 && j == n - 1) break;
      if (a <= b && i < m - 1) {
        b -= a;
        ++i;
        a = mu_p[i];
      } else if (j < n - 1) {
        a -= b;
        ++j;
        b = lam_p[j];
      } else {
        b -= a;
        ++i;
        a = mu_p[i];
      }
    }
  }

  std::vector<std::ptrdiff_t> basic_at(m * n, -1);
  for (std::size_t k = 0; k < basis.size(); ++k)
    basic_at[basis.row[k] * n + basis.col[k]] = static_cast<std::ptrdiff_t>(k);

  std::vector<double> u, v;
  const double enter_tol = 1e-12 * (1.0 + cmax);
  const std::size_t max_pivots = 20000 * (m + n);
  std::size_t pivots = 0;
  while (true) {
    if (++pivots > max_pivots) throw Error("NoConvergence", "transportation simplex pivot limit");
    compute_duals(basis, cost, m, n, u, v);
    // Bland's rule: first cell (lowest (row, col)) with negative reduced cost.
    std::size_t ei = m, ej = n;
    bool found = false;
    for (std::size_t i = 0; i < m && !found; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (basic_at[i * n + j] >= 0) continue;
        if (cost[i * n + j] - u[i] - v[j] < -enter_tol) {
          ei = i;
          ej = j;
          found = true;
          break;
        }
      }
    if (!found) break;

    auto path = tree_path(basis, m, n, ei, ej);
    // Entering cell gets +theta; path cells alternate starting with -theta.
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leave = basis.size();
    for (std::size_t t = 0; t < path.size(); t += 2) {
      std::size_t k = path[t];
      double f = basis.flow[k];
      bool better = f < theta - 1e-18;
      bool tie = std::fabs(f - theta) <= 1e-18;
      if (better ||
          (tie && leave < basis.size() &&
           std::make_pair(basis.row[k], basis.col[k]) <
               std::make_pair(basis.row[leave], basis.col[leave]))) {
        theta = f;
        leave = k;
      }
    }
    for (std::size_t t = 0; t < path.size(); ++t) {
      std::size_t k = path[t];
      basis.flow[k] += (t % 2 == 0) ? -theta : theta;
    }
    basic_at[basis.row[leave] * n + basis.col[leave]] = -1;
    basis.row[leave] = ei;
    basis.col[leave] = ej;
    basis.flow[leave] = theta;
    basic_at[ei * n + ej] = static_cast<std::ptrdiff_t>(leave);
  }

  // Remove the perturbation: re-solve flows on the optimal basis with the
  // exact marginals.
  resolve_flows(basis, m, n, mu, lam_exact);
  compute_duals(basis, cost, m, n, u, v);

  double total = 0.0;
  for (std::size_t k = 0; k < basis.size(); ++k) {
    double f = basis.flow[k];
    if (f < 0.0) f = 0.0;  // degenerate slack within the perturbation scale
    out.plan.coupling[basis.row[k] * n + basis.col[k]] += f;
    total += f * cost[basis.row[k] * n + basis.col[k]];
  }
  out.plan.cost = total;
  out.plan.dual_row = std::move(u);
  out.plan.dual_col = std::move(v);
  out.distance = total;
  return out;
}

double wp_discrete(const std::vector<double>& metric, std::size_t n, double p,
                   const std::vector<double>& mu, const std::vector<double>& lam) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw Error("InvalidArgument", "order p must be >= 1");
  std::vector<double> powered(metric.size());
  for (std::size_t i = 0; i < metric.size(); ++i)
    powered[i] = (p == 1.0) ? metric[i] : std::pow(metric[i], p);
  double c = w1_discrete(powered, n, n, mu, lam).distance;
  return (p == 1.0) ? c : std::pow(c, 1.0 / p);
}

GaussianDist diagonal_gaussian(std::vector<double> mean, const std::vector<double>& stddev) {
  GaussianDist g;
  std::size_t d = mean.size();
  if (stddev.size() != d) throw Error("DimensionMismatch", "mean/stddev length");
  g.mean = std::move(mean);
  g.cov.assign(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) g.cov[i * d + i] = stddev[i] * stddev[i];
  return g;
}

double w2_gaussian(const GaussianDist& a, const GaussianDist& b) {
  std::size_t d = a.dim();
  if (b.dim() != d || a.cov.size() != d * d || b.cov.size() != d * d)
    throw Error("DimensionMismatch", "Gaussian dimensions disagree");
  for (const auto* g : {&a, &b}) {
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i + 1; j < d; ++j)
        if (std::fabs(g->cov[i * d + j] - g->cov[j * d + i]) > 1e-12)
          throw Error("InvalidArgument", "covariance not symmetric");
    auto eig = symmetric_eigen(g->cov, d, nullptr);
    for (double e : eig)
      if (e < -1e-10) throw Error("InvalidArgument", "covariance not PSD");
  }
  auto ra = symmetric_sqrt(a.cov, d);
  auto rb = symmetric_sqrt(b.cov, d);
  double mean_term = kernels::sq_l2_diff(a.mean.data(), b.mean.data(), d);
  double cov_term = kernels::sq_l2_diff(ra.data(), rb.data(), d * d);
  return std::sqrt(std::max(0.0, mean_term + cov_term));
}

CertifyReport certify_optimality(const TransportPlan& plan, const std::vector<double>& cost) {
  std::size_t m = plan.n_rows, n = plan.n_cols;
  CertifyReport rep;
  if (cost.size() != m * n || m != n) {
    rep.pass = false;
    rep.max_lipschitz_violation = std::numeric_limits<double>::quiet_NaN();
    return rep;
  }
  rep.primal_value = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    rep.primal_value += kernels::dot(plan.coupling.data() + i * n, cost.data() + i * n, n);

  // c-transform of the row duals gives a potential that is 1-Lipschitz
  // whenever the cost obeys the triangle inequality.
  std::vector<double> f(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) best = std::max(best, plan.dual_row[i] - cost[i * n + j]);
    f[j] = best;
  }
  double viol = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      viol = std::max(viol, std::fabs(f[i] - f[j]) - cost[i * n + j]);
  rep.max_lipschitz_violation = viol;
  rep.dual_value = 0.0;
  for (std::size_t i = 0; i < m; ++i) rep.dual_value += plan.marginal_row[i] * f[i];
  for (std::size_t j = 0; j < n; ++j) rep.dual_value -= plan.marginal_col[j] * f[j];
  rep.duality_gap = std::fabs(rep.primal_value - rep.dual_value);
  rep.pass = viol <= 1e-8 && rep.duality_gap <= 1e-8;
  return rep;
}

void plan_to_csv(const TransportPlan& plan, const std::string& path) {
  CsvWriter csv(path, {"i", "j", "mass"});
  for (std::size_t i = 0; i < plan.n_rows; ++i)
    for (std::size_t j = 0; j < plan.n_cols; ++j) {
      double w = plan.mass(i, j);
      if (w <= 0.0) continue;
      csv.field(i);
      csv.field(j);
      csv.field(w);
      csv.end_row();
    }
}

}  // namespace bisimlab
