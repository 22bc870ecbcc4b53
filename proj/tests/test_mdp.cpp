#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bisimlab/linalg.hpp"
#include "bisimlab/mdp.hpp"
#include "bisimlab/rng.hpp"

using namespace bisimlab;

namespace {

FiniteMdp two_state_cycle(double r0, double r1, double gamma) {
  // 0 -> 1 -> 0 deterministic, one action.
  std::vector<double> p = {0, 1, 1, 0};
  std::vector<double> r = {r0, r1};
  return build_mdp(2, 1, p, r, {0.5, 0.5}, gamma);
}

}  // namespace

TEST_CASE("build_mdp validates and renormalizes") {
  SUBCASE("identity case") {
    FiniteMdp mdp = build_mdp(1, 1, {1.0}, {0.5}, {1.0}, 0.9);
    CHECK(mdp.r(0, 0) == doctest::Approx(0.5));
  }
  SUBCASE("row sum 0.9 rejected") {
    CHECK_THROWS_WITH_AS(build_mdp(1, 1, {0.9}, {0.5}, {1.0}, 0.9),
                         doctest::Contains("NonStochasticRow"), Error);
  }
  SUBCASE("row sum off by 1e-10 renormalized") {
    FiniteMdp mdp = build_mdp(1, 1, {1.0 + 1e-10}, {0.5}, {1.0}, 0.9);
    CHECK(mdp.row(0, 0)[0] == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("reward bounds") {
    CHECK_THROWS_WITH_AS(build_mdp(1, 1, {1.0}, {1.5}, {1.0}, 0.9),
                         doctest::Contains("RewardOutOfBounds"), Error);
  }
}

TEST_CASE("policy_kernel examples") {
  // 1 state, 2 actions, rewards (0, 1).
  FiniteMdp mdp = build_mdp(1, 2, {1.0, 1.0}, {0.0, 1.0}, {1.0}, 0.9);
  SUBCASE("uniform policy averages rewards") {
    PolicyKernel pk = policy_kernel(mdp, uniform_policy(1, 2));
    CHECK(pk.reward[0] == doctest::Approx(0.5));
  }
  SUBCASE("deterministic policy selects") {
    PolicyKernel pk = policy_kernel(mdp, deterministic_policy({0}, 2));
    CHECK(pk.reward[0] == doctest::Approx(0.0));
  }
  SUBCASE("rows stochastic on random MDP (direct summation oracle)") {
    FiniteMdp m3 = generate_mdp(7, 3, 2, false, 0.0);
    PolicyTable pi = uniform_policy(3, 2);
    PolicyKernel pk = policy_kernel(m3, pi);
    for (std::size_t s = 0; s < 3; ++s) {
      double total = 0.0;
      for (std::size_t t = 0; t < 3; ++t) {
        double expect = 0.0;
        for (std::size_t a = 0; a < 2; ++a) expect += pi.p(s, a) * m3.row(s, a)[t];
        CHECK(pk.row(s)[t] == doctest::Approx(expect).epsilon(1e-12));
        total += pk.row(s)[t];
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_WITH_AS(policy_kernel(mdp, uniform_policy(2, 2)),
                         doctest::Contains("ShapeMismatch"), Error);
  }
}

TEST_CASE("policy_evaluation closed forms and solver agreement") {
  SUBCASE("self-loop geometric series") {
    FiniteMdp mdp = build_mdp(1, 1, {1.0}, {1.0}, {1.0}, 0.9);
    ValueFunction v = policy_evaluation(mdp, uniform_policy(1, 1), 0.9);
    CHECK(v.values[0] == doctest::Approx(10.0).epsilon(1e-9));
  }
  SUBCASE("constant reward is constant value") {
    FiniteMdp mdp = generate_mdp(3, 4, 2, false, 0.0);
    for (auto& r : mdp.reward) r = 0.3;
    ValueFunction v = policy_evaluation(mdp, uniform_policy(4, 2), 0.8);
    for (double x : v.values) CHECK(x == doctest::Approx(0.3 / 0.2).epsilon(1e-9));
  }
  SUBCASE("two-state cycle matches independent linear solve") {
    FiniteMdp mdp = two_state_cycle(1.0, 0.0, 0.5);
    PolicyTable pi = uniform_policy(2, 1);
    ValueFunction v = policy_evaluation(mdp, pi, 0.5);
    // Oracle: solve (I - gamma P) V = r directly.
    std::vector<double> a = {1.0, -0.5, -0.5, 1.0};
    std::vector<double> expected = solve_dense(a, {1.0, 0.0}, 2);
    CHECK(v.values[0] == doctest::Approx(expected[0]).epsilon(1e-12));
    CHECK(v.values[1] == doctest::Approx(expected[1]).epsilon(1e-12));
    CHECK(expected[0] == doctest::Approx(4.0 / 3.0));
  }
  SUBCASE("iterative and direct agree within 10x tol on 100 random MDPs") {
    for (int k = 0; k < 100; ++k) {
      FiniteMdp mdp = generate_mdp(100 + k, 5, 2, false, 0.2);
      PolicyTable pi = uniform_policy(5, 2);
      ValueFunction vd = policy_evaluation(mdp, pi, 0.9, 1e-10);
      ValueFunction vi = policy_evaluation_iterative(mdp, pi, 0.9, 1e-10);
      for (std::size_t s = 0; s < 5; ++s)
        CHECK(std::fabs(vd.values[s] - vi.values[s]) <= 1e-9);
    }
  }
}

TEST_CASE("policy evaluation is monotone in rewards") {
  Rng rng(42);
  for (int k = 0; k < 30; ++k) {
    FiniteMdp mdp = generate_mdp(500 + k, 6, 2, false, 0.3);
    PolicyTable pi = uniform_policy(6, 2);
    ValueFunction before = policy_evaluation(mdp, pi, 0.9);
    std::size_t idx = rng.uniform_int(mdp.reward.size());
    mdp.reward[idx] = std::min(1.0, mdp.reward[idx] + 0.2);
    ValueFunction after = policy_evaluation(mdp, pi, 0.9);
    for (std::size_t s = 0; s < 6; ++s) CHECK(after.values[s] >= before.values[s] - 1e-10);
  }
}

TEST_CASE("lemma: value gap between discount factors") {
  for (int k = 0; k < 40; ++k) {
    FiniteMdp mdp = generate_mdp(900 + k, 6, 3, false, 0.2);
    PolicyTable pi = uniform_policy(6, 3);
    double g1 = 0.3 + 0.4 * (k % 5) / 5.0;
    double g2 = g1 + 0.2;
    ValueFunction v1 = policy_evaluation(mdp, pi, g1);
    ValueFunction v2 = policy_evaluation(mdp, pi, g2);
    double bound = (g2 - g1) / ((1.0 - g1) * (1.0 - g2));
    for (std::size_t s = 0; s < 6; ++s)
      CHECK(std::fabs(v1.values[s] - v2.values[s]) <= bound + 1e-9);
  }
}

TEST_CASE("stationary_distribution") {
  SUBCASE("doubly stochastic gives uniform") {
    std::vector<double> p = {0.5, 0.25, 0.25, 0.25, 0.5, 0.25, 0.25, 0.25, 0.5};
    FiniteMdp mdp = build_mdp(3, 1, p, {0.1, 0.2, 0.3}, {1.0, 0.0, 0.0}, 0.9);
    auto rho = stationary_distribution(mdp, uniform_policy(3, 1));
    for (double x : rho) CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-8));
  }
  SUBCASE("absorbing state takes all mass") {
    std::vector<double> p = {0.0, 1.0, 0.0, 1.0};  // 0 -> 1, 1 -> 1
    FiniteMdp mdp = build_mdp(2, 1, p, {0.0, 0.0}, {1.0, 0.0}, 0.9);
    auto rho = stationary_distribution(mdp, uniform_policy(2, 1));
    CHECK(rho[1] == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("ergodic 5-state matches left-eigenvector solve") {
    FiniteMdp mdp = generate_mdp(11, 5, 2, false, 0.0);
    PolicyTable pi = uniform_policy(5, 2);
    auto rho = stationary_distribution(mdp, pi);
    PolicyKernel pk = policy_kernel(mdp, pi);
    // Oracle: solve rho (P - I) = 0 with a sum-to-one row.
    std::size_t n = 5;
    std::vector<double> a(n * n, 0.0), b(n, 0.0);
    for (std::size_t j = 0; j + 1 < n; ++j)
      for (std::size_t i = 0; i < n; ++i)
        a[j * n + i] = pk.kernel[i * n + j] - (i == j ? 1.0 : 0.0);
    for (std::size_t i = 0; i < n; ++i) a[(n - 1) * n + i] = 1.0;
    b[n - 1] = 1.0;
    auto expected = solve_dense(a, b, n);
    for (std::size_t i = 0; i < n; ++i) CHECK(rho[i] == doctest::Approx(expected[i]).epsilon(1e-8));
  }
  SUBCASE("deterministic periodic chain still yields a stationary distribution") {
    FiniteMdp mdp = two_state_cycle(1.0, 0.0, 0.9);
    auto rho = stationary_distribution(mdp, uniform_policy(2, 1));
    CHECK(rho[0] == doctest::Approx(0.5).epsilon(1e-8));
    PolicyKernel pk = policy_kernel(mdp, uniform_policy(2, 1));
    double res = 0.0;
    for (std::size_t j = 0; j < 2; ++j) {
      double rpj = rho[0] * pk.kernel[0 * 2 + j] + rho[1] * pk.kernel[1 * 2 + j];
      res += std::fabs(rpj - rho[j]);
    }
    CHECK(res <= 1e-10);
  }
}

TEST_CASE("generate_mdp reproducibility and flags") {
  FiniteMdp a = generate_mdp(77, 6, 3, false, 0.5);
  FiniteMdp b = generate_mdp(77, 6, 3, false, 0.5);
  CHECK(a.transition == b.transition);
  CHECK(a.reward == b.reward);

  FiniteMdp sparse = generate_mdp(5, 4, 3, false, 1.0);
  for (double r : sparse.reward) CHECK(r == 0.0);

  FiniteMdp det = generate_mdp(9, 5, 2, true, 0.0);
  CHECK(is_deterministic_mdp(det));
  for (std::size_t s = 0; s < 5; ++s)
    for (std::size_t a2 = 0; a2 < 2; ++a2) {
      int ones = 0;
      for (std::size_t t = 0; t < 5; ++t)
        if (det.row(s, a2)[t] == 1.0) ++ones;
      CHECK(ones == 1);
    }

  // exact sparsity fraction
  FiniteMdp half = generate_mdp(13, 4, 4, false, 0.5);
  int zeros = 0;
  for (double r : half.reward)
    if (r == 0.0) ++zeros;
  CHECK(zeros == 8);
}

TEST_CASE("MDP JSON round trip") {
  FiniteMdp mdp = generate_mdp(3, 4, 2, false, 0.25);
  FiniteMdp back = mdp_from_json(mdp_to_json(mdp));
  CHECK(back.n_states == mdp.n_states);
  CHECK(back.gamma == doctest::Approx(mdp.gamma));
  for (std::size_t i = 0; i < mdp.transition.size(); ++i)
    CHECK(back.transition[i] == doctest::Approx(mdp.transition[i]).epsilon(1e-12));
  for (std::size_t i = 0; i < mdp.reward.size(); ++i)
    CHECK(back.reward[i] == doctest::Approx(mdp.reward[i]).epsilon(1e-12));
}
