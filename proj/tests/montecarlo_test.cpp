#include "opelab/montecarlo.hpp"

#include <array>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "opelab/error.hpp"
#include "opelab/mdp.hpp"
#include "opelab/scenarios.hpp"

using namespace opelab;

namespace {

bool same_batch(const TrajectoryBatch& a, const TrajectoryBatch& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].states != b[i].states || a[i].actions != b[i].actions ||
        a[i].rewards != b[i].rewards || a[i].prob_mu != b[i].prob_mu) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_SUITE("montecarlo") {
  TEST_CASE("batches do not depend on the worker count") {
    const EvaluationProblem problem = random_ergodic(3, 4, 2, 6, 1.0, 0.4);
    SamplerConfig one;
    one.seed = 99;
    one.num_trajectories = 500;
    one.num_workers = 1;
    SamplerConfig many = one;
    many.num_workers = 8;
    CHECK(same_batch(sample_trajectories(problem, one),
                     sample_trajectories(problem, many)));
  }

  TEST_CASE("different seeds give different batches") {
    const EvaluationProblem problem = random_ergodic(3, 4, 2, 6, 1.0, 0.4);
    SamplerConfig a;
    a.seed = 1;
    a.num_trajectories = 50;
    SamplerConfig b = a;
    b.seed = 2;
    CHECK(!same_batch(sample_trajectories(problem, a),
                      sample_trajectories(problem, b)));
  }

  TEST_CASE("negative batch sizes are rejected") {
    SamplerConfig config;
    config.num_trajectories = -1;
    CHECK_THROWS_AS(sample_trajectories(counterexample_mdp(1), config),
                    ValidationError);
  }

  TEST_CASE("sampled trajectories carry their exact probability") {
    const EvaluationProblem problem = counterexample_mdp(1);
    SamplerConfig config;
    config.seed = 4;
    config.num_trajectories = 100;
    for (const Trajectory& traj : sample_trajectories(problem, config)) {
      REQUIRE(traj.prob_mu.has_value());
      CHECK(*traj.prob_mu == doctest::Approx(0.25).epsilon(1e-14));
      CHECK(traj.states[0] == 0);
      CHECK(traj.states[1] == 1);
    }
  }

  TEST_CASE("path frequencies approach the uniform law") {
    const EvaluationProblem problem = counterexample_mdp(1);
    SamplerConfig config;
    config.seed = 12;
    config.num_trajectories = 40000;
    std::array<int, 4> counts{};
    for (const Trajectory& traj : sample_trajectories(problem, config)) {
      counts[static_cast<std::size_t>(traj.actions[0] * 2 + traj.actions[1])]++;
    }
    for (int c : counts) {
      // 4 sigma for a Bernoulli(1/4) over 40k draws is about 0.0087.
      CHECK(std::abs(c / 40000.0 - 0.25) <= 0.01);
    }
  }

  TEST_CASE("batch estimates straddle the exact value within four sigma") {
    for (const EvaluationProblem& problem :
         {counterexample_mdp(1), random_ergodic(8, 3, 2, 5, 1.0, 0.3)}) {
      const double v = target_value(problem);
      for (const EstimatorKind& kind :
           {EstimatorKind::is(), EstimatorKind::pdis(), EstimatorKind::sis()}) {
        SamplerConfig config;
        config.seed = 21;
        config.num_trajectories = 20000;
        const BatchStats stats = estimator_stats(problem, kind, config);
        CAPTURE(kind.name());
        REQUIRE(stats.standard_error.has_value());
        CHECK(std::abs(stats.estimate - v) <= 4.0 * *stats.standard_error);
      }
    }
  }

  TEST_CASE("two-lane sample variance approaches the quadratic law") {
    const EvaluationProblem problem = two_lane(10);
    SamplerConfig config;
    config.seed = 31;
    config.num_trajectories = 2000;
    const BatchStats stats = estimator_stats(problem, EstimatorKind::sis(), config);
    REQUIRE(stats.sample_variance.has_value());
    CHECK(std::abs(*stats.sample_variance - 100.0) / 100.0 <= 0.05);
  }

  TEST_CASE("convergence curves are prefix-consistent") {
    const EvaluationProblem problem = random_ergodic(5, 3, 2, 4, 1.0, 0.4);
    const std::vector<int> small_grid = {100};
    const std::vector<int> big_grid = {100, 1000};
    const std::vector<ConvergenceRow> small_rows = convergence_curve(
        problem, EstimatorKind::pdis(), 77, small_grid);
    const std::vector<ConvergenceRow> big_rows = convergence_curve(
        problem, EstimatorKind::pdis(), 77, big_grid, /*workers=*/4);
    REQUIRE(small_rows.size() == 1);
    REQUIRE(big_rows.size() == 2);
    CHECK(small_rows[0].mean == big_rows[0].mean);
    CHECK(*small_rows[0].sample_variance == *big_rows[0].sample_variance);
    CHECK(big_rows[1].n == 1000);
  }

  TEST_CASE("convergence grids reject nonpositive entries") {
    const std::vector<int> bad = {10, 0};
    CHECK_THROWS_AS(
        convergence_curve(counterexample_mdp(1), EstimatorKind::is(), 1, bad),
        ValidationError);
  }

  TEST_CASE("on-policy sampling estimates the target value directly") {
    for (const EvaluationProblem& problem :
         {counterexample_mdp(1), random_ergodic(14, 3, 2, 6, 0.9, 0.5)}) {
      const double v = target_value(problem);
      SamplerConfig config;
      config.seed = 55;
      config.num_trajectories = 20000;
      const TrajectoryBatch batch = sample_target_trajectories(problem, config);
      const std::vector<double> disc = problem.mdp.discounts();
      double sum = 0.0;
      double sq = 0.0;
      for (const Trajectory& traj : batch) {
        const double g = traj.return_value(disc);
        sum += g;
        sq += g * g;
      }
      const double n = static_cast<double>(batch.size());
      const double mean = sum / n;
      const double se = std::sqrt((sq / n - mean * mean) / n);
      CHECK(std::abs(mean - v) <= 4.0 * se + 1e-9);
    }
  }

  TEST_CASE("on-policy trajectories still record behavior probabilities") {
    const EvaluationProblem problem = counterexample_mdp(1);
    SamplerConfig config;
    config.seed = 9;
    config.num_trajectories = 50;
    for (const Trajectory& traj : sample_target_trajectories(problem, config)) {
      REQUIRE(traj.prob_mu.has_value());
      CHECK(*traj.prob_mu == doctest::Approx(0.25).epsilon(1e-14));
    }
  }
}
