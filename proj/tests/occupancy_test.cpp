#include "opelab/occupancy.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "opelab/error.hpp"
#include "opelab/scenarios.hpp"

using namespace opelab;

namespace {

EvaluationProblem single_state(int horizon, std::vector<double> mu,
                               std::vector<double> pi) {
  const int A = static_cast<int>(mu.size());
  EvaluationProblem problem;
  problem.mdp = TabularMdp::stationary(1, A, horizon, 1.0,
                                       std::vector<double>(A, 1.0),
                                       std::vector<double>(A, 0.5), {1.0});
  problem.behavior = PolicyTable{1, A, std::move(mu)};
  problem.target = PolicyTable{1, A, std::move(pi)};
  return problem;
}

double occupancy_sum(const OccupancyTables& occ, const std::vector<double>& d,
                     int t) {
  double sum = 0.0;
  for (int s = 0; s < occ.num_states; ++s) {
    for (int a = 0; a < occ.num_actions; ++a) {
      sum += d[(static_cast<std::size_t>(t - 1) * occ.num_states + s) *
                   occ.num_actions +
               a];
    }
  }
  return sum;
}

}  // namespace

TEST_SUITE("occupancy") {
  TEST_CASE("occupancies are probability tables at every step") {
    for (const EvaluationProblem& problem :
         {counterexample_mdp(1), random_ergodic(3, 4, 3, 6, 0.9, 0.5)}) {
      const OccupancyTables occ = occupancies(problem, false);
      for (int t = 1; t <= occ.horizon; ++t) {
        CHECK(occupancy_sum(occ, occ.d_mu, t) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(occupancy_sum(occ, occ.d_pi, t) == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("first-step ratio is the policy ratio at the start state") {
    const EvaluationProblem problem = counterexample_mdp(1);
    const OccupancyTables occ = occupancies(problem, false);
    CHECK(occ.ratio_at(1, 0, 0) == doctest::Approx(1.2).epsilon(1e-14));
    CHECK(occ.ratio_at(1, 0, 1) == doctest::Approx(0.8).epsilon(1e-14));
  }

  TEST_CASE("second-step ratios at the merge state") {
    // Both policies reach the merge state with probability 1, so the ratio
    // reduces to the policy ratio there.
    const EvaluationProblem problem = counterexample_mdp(1);
    const OccupancyTables occ = occupancies(problem, false);
    CHECK(occ.ratio_at(2, 1, 0) == doctest::Approx(1.2).epsilon(1e-14));
    CHECK(occ.ratio_at(2, 1, 1) == doctest::Approx(0.8).epsilon(1e-14));
  }

  TEST_CASE("identical policies give ratio one on the support") {
    EvaluationProblem problem = random_ergodic(5, 3, 2, 5, 1.0, 0.0);
    const OccupancyTables occ = occupancies(problem, false);
    for (int t = 1; t <= occ.horizon; ++t) {
      for (int s = 0; s < occ.num_states; ++s) {
        for (int a = 0; a < occ.num_actions; ++a) {
          if (occ.mu_at(t, s, a) > 0.0) {
            CHECK(occ.ratio_at(t, s, a) == doctest::Approx(1.0).epsilon(1e-10));
          }
        }
      }
    }
  }

  TEST_CASE("the ratio has behavior-weighted mean one at every step") {
    const EvaluationProblem problem = random_ergodic(9, 4, 2, 6, 1.0, 0.6);
    const OccupancyTables occ = occupancies(problem, false);
    for (int t = 1; t <= occ.horizon; ++t) {
      double mean = 0.0;
      for (int s = 0; s < occ.num_states; ++s) {
        for (int a = 0; a < occ.num_actions; ++a) {
          mean += occ.mu_at(t, s, a) * occ.ratio_at(t, s, a);
        }
      }
      CHECK(mean == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("occupancies throw when the target escapes behavior support") {
    EvaluationProblem problem = counterexample_mdp(1);
    problem.behavior.at(1, 1) = 0.0;
    problem.behavior.at(1, 0) = 1.0;
    CHECK_THROWS_AS(occupancies(problem, false), SupportViolation);
  }

  TEST_CASE("conditioned cumulative weights reduce to occupancy ratios") {
    // At t = 1 the identity is the policy ratio itself; deeper steps are the
    // nontrivial content.
    CHECK(conditional_weight_check(counterexample_mdp(1), 1) <= 1e-14);
    CHECK(conditional_weight_check(counterexample_mdp(1), 2) <= 1e-12);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const EvaluationProblem problem =
          random_ergodic(seed, 4, 2, 5, 1.0, 0.5);
      for (int t = 1; t <= 5; ++t) {
        CAPTURE(seed);
        CAPTURE(t);
        CHECK(conditional_weight_check(problem, t) <= 1e-10);
      }
    }
  }

  TEST_CASE("stationary distribution of a single-state chain is trivial") {
    const EvaluationProblem problem = single_state(3, {0.5, 0.5}, {0.5, 0.5});
    const std::vector<double> pi = stationary_distribution(problem.mdp, problem.behavior);
    REQUIRE(pi.size() == 1);
    CHECK(pi[0] == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("doubly stochastic chains have uniform stationary distributions") {
    // One action; rows and columns of the kernel both sum to one.
    const std::vector<double> transition = {0.2, 0.5, 0.3,   //
                                            0.5, 0.3, 0.2,   //
                                            0.3, 0.2, 0.5};
    TabularMdp mdp = TabularMdp::stationary(3, 1, 4, 1.0, transition,
                                            {0.5, 0.5, 0.5}, {1.0, 0.0, 0.0});
    const PolicyTable policy = PolicyTable::uniform(3, 1);
    const std::vector<double> st = stationary_distribution(mdp, policy);
    for (double p : st) {
      CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    }
  }

  TEST_CASE("long-run occupancy marginals converge to the stationary law") {
    EvaluationProblem problem = random_ergodic(17, 3, 2, 8, 1.0, 0.3);
    problem.mdp = with_horizon(problem.mdp, 10000);
    const OccupancyTables occ = occupancies(problem, true);
    REQUIRE(occ.stationary_mu.has_value());
    const std::vector<double>& st = *occ.stationary_mu;
    for (int s = 0; s < occ.num_states; ++s) {
      double marginal = 0.0;
      for (int a = 0; a < occ.num_actions; ++a) {
        marginal += occ.mu_at(10000, s, a);
      }
      CHECK(std::abs(marginal - st[s]) <= 1e-8);
    }
  }

  TEST_CASE("periodic chains make power iteration fail loudly") {
    // Deterministic two-state swap has period two.
    const std::vector<double> swap = {0.0, 1.0,  //
                                      1.0, 0.0};
    TabularMdp mdp = TabularMdp::stationary(2, 1, 3, 1.0, swap, {0.5, 0.5},
                                            {1.0, 0.0});
    CHECK_THROWS_AS(stationary_distribution(mdp, PolicyTable::uniform(2, 1)),
                    ConvergenceError);
  }

  TEST_CASE("identical policies have zero likelihood decay rate") {
    const EvaluationProblem problem = random_ergodic(2, 3, 2, 4, 1.0, 0.0);
    CHECK(kl_rate(problem) == doctest::Approx(0.0).epsilon(1e-12));
  }

  TEST_CASE("single-state decay rate matches the closed-form divergence") {
    const EvaluationProblem problem = single_state(2, {0.5, 0.5}, {0.6, 0.4});
    const double expected = 0.5 * std::log(25.0 / 24.0);
    CHECK(kl_rate(problem) == doctest::Approx(expected).epsilon(1e-12));
  }

  TEST_CASE("decay rate is infinite when the target drops a behavior action") {
    // Still a valid problem (target support within behavior support), but the
    // divergence KL(mu || pi) blows up on the dropped action.
    const EvaluationProblem problem = single_state(2, {0.5, 0.5}, {1.0, 0.0});
    CHECK(std::isinf(kl_rate(problem)));
    CHECK(kl_rate(problem) > 0.0);
  }

  TEST_CASE("diagnostics on identical policies are all unit scale") {
    const ProblemDiagnostics d = diagnostics(random_ergodic(4, 3, 2, 4, 1.0, 0.0));
    CHECK(d.c == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(d.u_rho == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.u_s == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(d.m_rho_sq == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("diagnostics on the first counterexample") {
    const ProblemDiagnostics d = diagnostics(counterexample_mdp(1));
    CHECK(d.u_rho == doctest::Approx(1.2).epsilon(1e-12));
    // E_mu[rho^2] = 0.5 * 1.2^2 + 0.5 * 0.8^2 at both decision states.
    CHECK(d.m_rho_sq == doctest::Approx(1.04).epsilon(1e-12));
  }

  TEST_CASE("the two-lane construction has maximal step ratio two") {
    const ProblemDiagnostics d = diagnostics(two_lane(8));
    CHECK(d.u_rho == doctest::Approx(2.0).epsilon(1e-12));
  }

  TEST_CASE("discount-averaged occupancy reduces to the first step at gamma zero") {
    EvaluationProblem problem = random_ergodic(21, 3, 2, 5, 0.0, 0.4);
    const OccupancyTables occ = occupancies(problem, false);
    for (int s = 0; s < occ.num_states; ++s) {
      for (int a = 0; a < occ.num_actions; ++a) {
        CHECK(occ.d_mu_avg[static_cast<std::size_t>(s) * occ.num_actions + a] ==
              doctest::Approx(occ.mu_at(1, s, a)).epsilon(1e-12));
      }
    }
  }
}
