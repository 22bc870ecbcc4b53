#pragma once

// Test-only oracles, independent of the library's solver paths:
//  - ot_vertex_enumeration: exact transportation optimum by enumerating every
//    basic feasible solution (spanning trees of the bipartite support graph).
//  - lp_transport_simplex: a generic two-phase dense tableau simplex applied
//    to the transportation LP (different algorithm/representation from the
//    shipped transportation simplex).
//  - finite-difference gradient helpers.

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace oracles {

// Union-find acyclicity over m row-nodes and n col-nodes.
inline bool forms_forest(const std::vector<std::size_t>& cells, std::size_t m, std::size_t n) {
  std::vector<std::size_t> parent(m + n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t cell : cells) {
    std::size_t i = cell / n, j = m + cell % n;
    std::size_t ri = find(i), rj = find(j);
    if (ri == rj) return false;
    parent[ri] = rj;
  }
  return true;
}

// Solve flows on a tree support by leaf elimination; returns false when the
// support cannot carry the marginals (disconnected forest with unbalanced
// components shows up as nonzero residual balance).
inline bool tree_flows(const std::vector<std::size_t>& cells, std::size_t m, std::size_t n,
                       const std::vector<double>& mu, const std::vector<double>& lam,
                       std::vector<double>& flows) {
  std::size_t k = cells.size();
  flows.assign(k, 0.0);
  std::vector<double> balance(m + n);
  for (std::size_t i = 0; i < m; ++i) balance[i] = mu[i];
  for (std::size_t j = 0; j < n; ++j) balance[m + j] = lam[j];
  std::vector<int> degree(m + n, 0);
  for (std::size_t cell : cells) {
    ++degree[cell / n];
    ++degree[m + cell % n];
  }
  std::vector<char> used(k, 0);
  bool progress = true;
  std::size_t remaining = k;
  while (remaining > 0 && progress) {
    progress = false;
    for (std::size_t e = 0; e < k; ++e) {
      if (used[e]) continue;
      std::size_t i = cells[e] / n, j = m + cells[e] % n;
      std::size_t leaf, other;
      if (degree[i] == 1) {
        leaf = i;
        other = j;
      } else if (degree[j] == 1) {
        leaf = j;
        other = i;
      } else {
        continue;
      }
      flows[e] = balance[leaf];
      balance[other] -= balance[leaf];
      balance[leaf] = 0.0;
      --degree[leaf];
      --degree[other];
      used[e] = 1;
      --remaining;
      progress = true;
    }
  }
  for (double b : balance)
    if (std::fabs(b) > 1e-9) return false;
  return remaining == 0;
}

// Exact optimum by enumerating all (m+n-1)-subsets of cells that form a
// spanning forest and carry nonnegative flows. Feasible for m*n <= ~25.
inline double ot_vertex_enumeration(const std::vector<double>& cost, std::size_t m, std::size_t n,
                                    const std::vector<double>& mu,
                                    const std::vector<double>& lam) {
  std::size_t cells_total = m * n;
  std::size_t k = m + n - 1;
  std::vector<std::size_t> pick(k);
  std::iota(pick.begin(), pick.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> flows;
  while (true) {
    if (forms_forest(pick, m, n) && tree_flows(pick, m, n, mu, lam, flows)) {
      bool ok = true;
      double value = 0.0;
      for (std::size_t e = 0; e < k; ++e) {
        if (flows[e] < -1e-12) {
          ok = false;
          break;
        }
        value += std::max(0.0, flows[e]) * cost[pick[e]];
      }
      if (ok) best = std::min(best, value);
    }
    // next combination
    std::size_t idx = k;
    while (idx > 0) {
      --idx;
      if (pick[idx] != idx + cells_total - k) break;
    }
    if (pick[idx] == idx + cells_total - k) break;
    ++pick[idx];
    for (std::size_t t = idx + 1; t < k; ++t) pick[t] = pick[t - 1] + 1;
  }
  return best;
}

// Generic two-phase dense tableau simplex with Bland's rule:
// min c x s.t. A x = b, x >= 0.
inline double lp_dense_simplex(std::vector<double> a, std::vector<double> b,
                               std::vector<double> c, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    if (b[r] < 0.0) {
      b[r] = -b[r];
      for (std::size_t j = 0; j < cols; ++j) a[r * cols + j] = -a[r * cols + j];
    }
  std::size_t total = cols + rows;  // + artificial per row
  std::vector<double> tab(rows * total, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) tab[r * total + j] = a[r * cols + j];
    tab[r * total + cols + r] = 1.0;
  }
  std::vector<std::size_t> basis(rows);
  for (std::size_t r = 0; r < rows; ++r) basis[r] = cols + r;
  std::vector<double> rhs = b;

  auto pivot = [&](std::size_t pr, std::size_t pc) {
    double inv = 1.0 / tab[pr * total + pc];
    for (std::size_t j = 0; j < total; ++j) tab[pr * total + j] *= inv;
    rhs[pr] *= inv;
    for (std::size_t r = 0; r < rows; ++r) {
      if (r == pr) continue;
      double f = tab[r * total + pc];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < total; ++j) tab[r * total + j] -= f * tab[pr * total + j];
      rhs[r] -= f * rhs[pr];
    }
    basis[pr] = pc;
  };

  auto run_phase = [&](const std::vector<double>& obj, std::size_t active_cols) {
    while (true) {
      // reduced costs via simplex multipliers
      std::vector<double> y(rows, 0.0);
      for (std::size_t r = 0; r < rows; ++r) y[r] = obj[basis[r]];
      std::ptrdiff_t enter = -1;
      for (std::size_t j = 0; j < active_cols; ++j) {
        double rc = obj[j];
        for (std::size_t r = 0; r < rows; ++r) rc -= y[r] * tab[r * total + j];
        if (rc < -1e-10) {
          enter = static_cast<std::ptrdiff_t>(j);  // Bland: lowest index
          break;
        }
      }
      if (enter < 0) break;
      std::ptrdiff_t leave = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < rows; ++r) {
        double aij = tab[r * total + enter];
        if (aij > 1e-12) {
          double ratio = rhs[r] / aij;
          if (ratio < best_ratio - 1e-15 ||
              (std::fabs(ratio - best_ratio) <= 1e-15 &&
               (leave < 0 || basis[r] < basis[static_cast<std::size_t>(leave)]))) {
            best_ratio = ratio;
            leave = static_cast<std::ptrdiff_t>(r);
          }
        }
      }
      if (leave < 0) return false;  // unbounded
      pivot(static_cast<std::size_t>(leave), static_cast<std::size_t>(enter));
    }
    return true;
  };

  std::vector<double> phase1(total, 0.0);
  for (std::size_t j = cols; j < total; ++j) phase1[j] = 1.0;
  run_phase(phase1, total);
  double art = 0.0;
  for (std::size_t r = 0; r < rows; ++r)
    if (basis[r] >= cols) art += rhs[r];
  if (art > 1e-7) return std::numeric_limits<double>::quiet_NaN();  // infeasible
  // Drive any residual artificial out of the basis when possible.
  for (std::size_t r = 0; r < rows; ++r) {
    if (basis[r] < cols) continue;
    for (std::size_t j = 0; j < cols; ++j)
      if (std::fabs(tab[r * total + j]) > 1e-9) {
        pivot(r, j);
        break;
      }
  }
  std::vector<double> phase2(total, 0.0);
  for (std::size_t j = 0; j < cols; ++j) phase2[j] = c[j];
  for (std::size_t j = cols; j < total; ++j) phase2[j] = 1e9;  // keep artificials out
  run_phase(phase2, cols);
  double value = 0.0;
  for (std::size_t r = 0; r < rows; ++r)
    if (basis[r] < cols) value += c[basis[r]] * rhs[r];
  return value;
}

// Transportation LP through the generic dense simplex.
inline double lp_transport_simplex(const std::vector<double>& cost, std::size_t m, std::size_t n,
                                   const std::vector<double>& mu, const std::vector<double>& lam) {
  std::size_t rows = m + n;
  std::size_t cols = m * n;
  std::vector<double> a(rows * cols, 0.0), b(rows, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) a[i * cols + i * n + j] = 1.0;
    b[i] = mu[i];
  }
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) a[(m + j) * cols + i * n + j] = 1.0;
    b[m + j] = lam[j];
  }
  return lp_dense_simplex(a, b, cost, rows, cols);
}

// Central-difference gradient of a scalar function of a parameter vector.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> params, double step = 1e-6) {
  std::vector<double> g(params.size(), 0.0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double keep = params[i];
    params[i] = keep + step;
    double hi = f(params);
    params[i] = keep - step;
    double lo = f(params);
    params[i] = keep;
    g[i] = (hi - lo) / (2.0 * step);
  }
  return g;
}

// Max relative error with a unit floor (zero gradients compare absolutely).
inline double max_rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double denom = std::max({1.0, std::fabs(a[i]), std::fabs(b[i])});
    worst = std::max(worst, std::fabs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace oracles
