#include "opelab/conditions.hpp"

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "opelab/oracle.hpp"
#include "opelab/scenarios.hpp"

using namespace opelab;

namespace {

bool has_violation(const ConditionReport& report, const std::string& family,
                   int t, int k) {
  return std::any_of(report.violations.begin(), report.violations.end(),
                     [&](const PairWitness& w) {
                       return w.family == family && w.t == t && w.k == k;
                     });
}

}  // namespace

TEST_SUITE("conditions") {
  TEST_CASE("degenerate problems satisfy both conditions") {
    // Horizon one with constant rewards: every covariance family collapses.
    EvaluationProblem tiny = random_ergodic(1, 2, 2, 1, 1.0, 0.4);
    for (double& r : tiny.mdp.reward) r = 1.0;
    CHECK(theorem1_condition(tiny).holds);
    CHECK(theorem2_condition(tiny).holds);

    // Identical policies: all weights are one, margins sit at zero.
    const EvaluationProblem onpolicy = random_ergodic(2, 3, 2, 4, 1.0, 0.0);
    const ConditionReport r1 = theorem1_condition(onpolicy);
    const ConditionReport r2 = theorem2_condition(onpolicy);
    CHECK(r1.holds);
    CHECK(r2.holds);
    CHECK(std::abs(r2.margin) <= 1e-10);
  }

  TEST_CASE("first counterexample violates the cumulative-weight condition") {
    const ConditionReport report = theorem1_condition(counterexample_mdp(1));
    CHECK(!report.holds);
    CHECK(report.margin == doctest::Approx(-0.0832).epsilon(1e-9));
    // The pairwise second-moment comparison fails at (t, k) = (1, 2) ...
    CHECK(has_violation(report, "second_moment", 1, 2));
    // ... and the covariance form fails on the diagonal at k = 2.
    CHECK(has_violation(report, "correlation", 2, 2));
    REQUIRE(!report.violations.empty());
    for (const PairWitness& w : report.violations) {
      CHECK(w.lhs < w.rhs);  // every witness is a real inequality failure
    }
  }

  TEST_CASE("second counterexample violates the occupancy-dominance condition") {
    // Var(SIS) > Var(PDIS) on example 2, so the sufficient condition for the
    // opposite ordering cannot hold (contrapositive).
    const ConditionReport report = theorem2_condition(counterexample_mdp(2));
    CHECK(!report.holds);
    CHECK(report.margin < 0.0);
  }

  TEST_CASE("third counterexample also escapes the occupancy-dominance condition") {
    CHECK(!theorem2_condition(counterexample_mdp(3)).holds);
  }

  TEST_CASE("first counterexample satisfies occupancy dominance with zero margin") {
    const ConditionReport report = theorem2_condition(counterexample_mdp(1));
    CHECK(report.holds);
    CHECK(std::abs(report.margin) <= 1e-10);
    CHECK(report.pairs_checked == 3);  // (1,1), (1,2), (2,2)
  }

  TEST_CASE("variance-gap inequality, trajectory-conditioned: both sides vanish") {
    for (int which = 1; which <= 3; ++which) {
      const VarianceGap gap =
          lemma2_gap(counterexample_mdp(which), Lemma2Conditioning::kIdentity);
      CAPTURE(which);
      CHECK(std::abs(gap.lhs) <= 1e-12);
      CHECK(std::abs(gap.rhs) <= 1e-12);
    }
  }

  TEST_CASE("variance-gap inequality on the first counterexample, prefix form") {
    const EvaluationProblem problem = counterexample_mdp(1);
    const VarianceGap gap = lemma2_gap(problem, Lemma2Conditioning::kPrefix);
    // lhs is exactly Var(IS) - Var(PDIS) = 0.12 - 0.2448.
    CHECK(gap.lhs == doctest::Approx(-0.1248).epsilon(1e-9));
    CHECK(gap.lhs >= gap.rhs - 1e-10);
    const double var_is =
        moment_dp_variance(problem, EstimatorKind::is()).variance;
    const double var_pdis =
        moment_dp_variance(problem, EstimatorKind::pdis()).variance;
    CHECK(gap.lhs == doctest::Approx(var_is - var_pdis).epsilon(1e-10));
  }

  TEST_CASE("variance-gap inequality on the first counterexample, state-action form") {
    const EvaluationProblem problem = counterexample_mdp(1);
    const VarianceGap gap = lemma2_gap(problem, Lemma2Conditioning::kStateAction);
    // lhs is exactly Var(PDIS) - Var(SIS) = 0.2448 - 0.2.
    CHECK(gap.lhs == doctest::Approx(0.0448).epsilon(1e-9));
    CHECK(gap.lhs >= gap.rhs - 1e-10);
  }

  TEST_CASE("variance-gap inequality holds across random problems") {
    for (std::uint64_t seed = 0; seed < 15; ++seed) {
      const EvaluationProblem problem =
          random_ergodic(seed, 3, 2, 2 + static_cast<int>(seed % 3), 1.0,
                         0.2 + 0.1 * static_cast<double>(seed % 4));
      for (Lemma2Conditioning c : {Lemma2Conditioning::kPrefix,
                                   Lemma2Conditioning::kStateAction,
                                   Lemma2Conditioning::kIdentity}) {
        const VarianceGap gap = lemma2_gap(problem, c);
        CAPTURE(seed);
        CHECK(gap.lhs >= gap.rhs - 1e-10);
      }
    }
  }

  TEST_CASE("holding conditions imply the variance orderings on random suites") {
    const auto generator = [](std::uint64_t seed) {
      return random_ergodic(seed, 3, 2, 2 + static_cast<int>(seed % 4), 1.0,
                            0.1 + 0.15 * static_cast<double>(seed % 5));
    };
    for (OrderingTheorem theorem :
         {OrderingTheorem::kPdisLeqIs, OrderingTheorem::kSisLeqPdis}) {
      const ImplicationSummary summary = verify_implication(generator, 30, theorem);
      CHECK(summary.n == 30);
      CHECK(summary.violations.empty());
      CHECK(summary.ordering_held_given_condition == summary.condition_held);
      CHECK(summary.condition_held > 0);  // the suite exercises the implication
    }
  }
}
