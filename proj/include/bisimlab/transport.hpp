#pragma once

#include <string>
#include <vector>

#include "bisimlab/common.hpp"

namespace bisimlab {

// Optimal coupling for a discrete transportation problem, plus the duals of
// the final basis so optimality can be certified after the fact.
struct TransportPlan {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<double> coupling;  // [i][j]
  double cost = 0.0;
  std::vector<double> marginal_row;
  std::vector<double> marginal_col;
  std::vector<double> dual_row;
  std::vector<double> dual_col;

  double mass(std::size_t i, std::size_t j) const { return coupling[i * n_cols + j]; }
};

struct W1Result {
  double distance = 0.0;
  TransportPlan plan;
};

// Exact W1 by the transportation simplex: north-west-corner start, Bland's
// rule entering, ties broken at the lowest (row, col) index, supplies
// epsilon-perturbed against degeneracy with the perturbation removed from the
// reported plan. cost is row-major n_rows x n_cols, elementwise >= 0.
W1Result w1_discrete(const std::vector<double>& cost, std::size_t n_rows, std::size_t n_cols,
                     const std::vector<double>& mu, const std::vector<double>& lam);

// (W1 on d^p)^(1/p); d must be the ground metric matrix.
double wp_discrete(const std::vector<double>& metric, std::size_t n, double p,
                   const std::vector<double>& mu, const std::vector<double>& lam);

struct GaussianDist {
  std::vector<double> mean;
  std::vector<double> cov;  // dim x dim row-major, symmetric PSD

  std::size_t dim() const { return mean.size(); }
};

GaussianDist diagonal_gaussian(std::vector<double> mean, const std::vector<double>& stddev);

// Closed-form 2-Wasserstein between Gaussians (commuting-covariance form):
// W2^2 = ||mu_i - mu_j||_2^2 + ||Sigma_i^{1/2} - Sigma_j^{1/2}||_F^2.
double w2_gaussian(const GaussianDist& a, const GaussianDist& b);

struct CertifyReport {
  bool pass = false;
  double max_lipschitz_violation = 0.0;  // max over pairs of |f_i - f_j| - d_ij
  double duality_gap = 0.0;              // |primal - dual|
  double dual_value = 0.0;
  double primal_value = 0.0;
};

// Builds a Kantorovich potential from the plan's duals via the c-transform
// and checks 1-Lipschitz feasibility plus primal = dual within 1e-8.
// Requires a square cost matrix satisfying the triangle inequality (the only
// shape the metric solvers produce); a failure is a report, not an error.
CertifyReport certify_optimality(const TransportPlan& plan, const std::vector<double>& cost);

// Debug export: one "i,j,mass" row per strictly positive coupling entry.
void plan_to_csv(const TransportPlan& plan, const std::string& path);

}  // namespace bisimlab
