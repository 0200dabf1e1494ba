#include "opelab/estimators.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "opelab/error.hpp"
#include "opelab/montecarlo.hpp"
#include "opelab/scenarios.hpp"

using namespace opelab;

namespace {

// The four length-2 action paths of a counterexample, in fixture order
// (a1,a1), (a1,a2), (a2,a1), (a2,a2).
Trajectory counterexample_path(const EvaluationProblem& problem, int index) {
  Trajectory traj;
  traj.states = {0, 1};
  traj.actions = {index >> 1, index & 1};
  traj.rewards = {problem.mdp.r(1, 0, traj.actions[0]),
                  problem.mdp.r(2, 1, traj.actions[1])};
  traj.prob_mu = 0.25;
  return traj;
}

}  // namespace

TEST_SUITE("estimators") {
  TEST_CASE("per-path returns on all three counterexamples") {
    for (int which = 1; which <= 3; ++which) {
      const CounterexampleFixture fix = counterexample_fixture(which);
      const EvaluationProblem problem = counterexample_mdp(which);
      const OccupancyTables occ = occupancies(problem, false);
      for (int i = 0; i < 4; ++i) {
        CAPTURE(which);
        CAPTURE(i);
        const Trajectory traj = counterexample_path(problem, i);
        CHECK(is_return(problem, traj) ==
              doctest::Approx(fix.is_returns[i]).epsilon(1e-12));
        CHECK(pdis_return(problem, traj) ==
              doctest::Approx(fix.pdis_returns[i]).epsilon(1e-12));
        CHECK(sis_return(problem, occ, traj) ==
              doctest::Approx(fix.sis_returns[i]).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("identical policies collapse every estimator to the raw return") {
    const EvaluationProblem problem = random_ergodic(13, 3, 2, 5, 0.9, 0.0);
    const OccupancyTables occ = occupancies(problem, false);
    SamplerConfig config;
    config.seed = 7;
    config.num_trajectories = 25;
    const std::vector<double> disc = problem.mdp.discounts();
    for (const Trajectory& traj : sample_trajectories(problem, config)) {
      const double g = traj.return_value(disc);
      CHECK(is_return(problem, traj) == doctest::Approx(g).epsilon(1e-10));
      CHECK(pdis_return(problem, traj) == doctest::Approx(g).epsilon(1e-10));
      CHECK(sis_return(problem, occ, traj) == doctest::Approx(g).epsilon(1e-10));
    }
  }

  TEST_CASE("every estimator agrees at horizon one") {
    EvaluationProblem problem = random_ergodic(19, 3, 2, 1, 1.0, 0.5);
    const OccupancyTables occ = occupancies(problem, false);
    SamplerConfig config;
    config.seed = 3;
    config.num_trajectories = 10;
    for (const Trajectory& traj : sample_trajectories(problem, config)) {
      const StepRatios rho = step_ratios(problem, traj);
      const double expected = rho.per_step[0] * traj.rewards[0];
      CHECK(is_return(problem, traj) == doctest::Approx(expected).epsilon(1e-12));
      CHECK(pdis_return(problem, traj) == doctest::Approx(expected).epsilon(1e-12));
      CHECK(sis_return(problem, occ, traj) == doctest::Approx(expected).epsilon(1e-12));
    }
  }

  TEST_CASE("approximate weights are used verbatim") {
    const EvaluationProblem problem = counterexample_mdp(1);
    const OccupancyTables occ = occupancies(problem, false);
    const Trajectory traj = counterexample_path(problem, 0);  // rewards (1, 0)

    WeightTable zero;
    zero.num_states = 3;
    zero.num_actions = 2;
    zero.horizon = 2;
    zero.w.assign(2 * 3 * 2, 0.0);
    CHECK(asis_return(problem, zero, traj) == 0.0);

    // Shifting the oracle weights by a constant shifts the estimate by the
    // shift times the (undiscounted, unit-reward-weighted) reward total.
    WeightTable shifted = WeightTable::oracle(occ);
    for (double& w : shifted.w) w += 0.5;
    const double base = sis_return(problem, occ, traj);
    const double reward_total = traj.rewards[0] + traj.rewards[1];
    CHECK(asis_return(problem, shifted, traj) ==
          doctest::Approx(base + 0.5 * reward_total).epsilon(1e-12));
  }

  TEST_CASE("estimator selectors name themselves and parse back") {
    CHECK(EstimatorKind::is().name() == "IS");
    CHECK(EstimatorKind::pdis().name() == "PDIS");
    CHECK(EstimatorKind::sis().name() == "SIS");
    CHECK(kind_from_name("IS").id == EstimatorId::kIs);
    CHECK(kind_from_name("PDIS").id == EstimatorId::kPdis);
    CHECK(kind_from_name("SIS").id == EstimatorId::kSis);
    CHECK_THROWS_AS(kind_from_name("WIS"), ConfigError);
  }

  TEST_CASE("dispatching requires occupancies only for the oracle weights") {
    const EvaluationProblem problem = counterexample_mdp(1);
    const Trajectory traj = counterexample_path(problem, 1);
    CHECK(estimator_return(problem, EstimatorKind::is(), nullptr, traj) ==
          doctest::Approx(1.92).epsilon(1e-12));
    const OccupancyTables occ = occupancies(problem, false);
    CHECK(estimator_return(problem, EstimatorKind::sis(), &occ, traj) ==
          doctest::Approx(2.0).epsilon(1e-12));
  }

  TEST_CASE("batch statistics match hand-rolled mean, variance, stderr") {
    const EvaluationProblem problem = counterexample_mdp(1);
    TrajectoryBatch batch = {counterexample_path(problem, 0),
                             counterexample_path(problem, 1),
                             counterexample_path(problem, 3)};
    const BatchStats stats = batch_estimate(problem, EstimatorKind::is(), batch);
    // Values 1.44, 1.92, 1.28.
    const double mean = (1.44 + 1.92 + 1.28) / 3.0;
    double ss = 0.0;
    for (double v : {1.44, 1.92, 1.28}) ss += (v - mean) * (v - mean);
    CHECK(stats.n == 3);
    CHECK(stats.estimate == doctest::Approx(mean).epsilon(1e-12));
    REQUIRE(stats.sample_variance.has_value());
    CHECK(*stats.sample_variance == doctest::Approx(ss / 2.0).epsilon(1e-12));
    REQUIRE(stats.standard_error.has_value());
    CHECK(*stats.standard_error ==
          doctest::Approx(std::sqrt(ss / 2.0 / 3.0)).epsilon(1e-12));
  }

  TEST_CASE("a single-trajectory batch has no variance estimate") {
    const EvaluationProblem problem = counterexample_mdp(1);
    TrajectoryBatch batch = {counterexample_path(problem, 2)};
    const BatchStats stats = batch_estimate(problem, EstimatorKind::pdis(), batch);
    CHECK(stats.n == 1);
    CHECK(stats.estimate == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(!stats.sample_variance.has_value());
    CHECK(!stats.standard_error.has_value());
  }

  TEST_CASE("regression-projected weights reproduce plain importance sampling") {
    const EvaluationProblem problem = random_ergodic(23, 3, 2, 4, 1.0, 0.4);
    for (int n : {2, 5, 40}) {
      SamplerConfig config;
      config.seed = 100 + n;
      config.num_trajectories = n;
      const TrajectoryBatch batch = sample_trajectories(problem, config);
      const BatchStats is_stats =
          batch_estimate(problem, EstimatorKind::is(), batch);
      const RcisResult rcis = rcis_estimate(problem, batch);
      CAPTURE(n);
      CHECK(std::abs(rcis.estimate - is_stats.estimate) <= 1e-12);
    }
  }

  TEST_CASE("the identity survives a rank-deficient design") {
    // Constant rewards and identical policies make every return equal, so
    // the regression design [G, 1] has rank one.
    EvaluationProblem problem = random_ergodic(29, 2, 2, 3, 1.0, 0.3);
    for (double& r : problem.mdp.reward) r = 1.0;
    SamplerConfig config;
    config.seed = 5;
    config.num_trajectories = 12;
    const TrajectoryBatch batch = sample_trajectories(problem, config);
    const BatchStats is_stats = batch_estimate(problem, EstimatorKind::is(), batch);
    const RcisResult rcis = rcis_estimate(problem, batch);
    CHECK(std::abs(rcis.estimate - is_stats.estimate) <= 1e-12);
  }

  TEST_CASE("the identity holds for any feature map containing the return") {
    const EvaluationProblem problem = random_ergodic(31, 3, 2, 4, 0.8, 0.5);
    SamplerConfig config;
    config.seed = 11;
    config.num_trajectories = 30;
    const TrajectoryBatch batch = sample_trajectories(problem, config);
    const BatchStats is_stats = batch_estimate(problem, EstimatorKind::is(), batch);
    const FeatureMap cubic = [](const EvaluationProblem& p, const Trajectory& t) {
      const double g = t.return_value(p.mdp.discounts());
      return std::vector<double>{1.0, g, g * g, g * g * g};
    };
    const RcisResult rcis = rcis_estimate_with_features(problem, batch, cubic);
    CHECK(std::abs(rcis.estimate - is_stats.estimate) <= 1e-10);
  }
}
