#include "opelab/sweeps.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "doctest.h"
#include "opelab/error.hpp"
#include "opelab/scenarios.hpp"

using namespace opelab;

namespace {

// Two frozen lanes that never mix: the return is T times the initial
// state's reward, so every estimator's variance is exactly 0.0625 T^2.
EvaluationProblem frozen_pair(int horizon) {
  const std::vector<double> identity = {1.0, 0.0,   // state 0, action 0
                                        1.0, 0.0,   // state 0, action 1
                                        0.0, 1.0,   // state 1, action 0
                                        0.0, 1.0};  // state 1, action 1
  EvaluationProblem problem;
  problem.mdp = TabularMdp::stationary(2, 2, horizon, 1.0, identity,
                                       {0.25, 0.25, 0.75, 0.75}, {0.5, 0.5});
  problem.behavior = PolicyTable::uniform(2, 2);
  problem.target = PolicyTable::uniform(2, 2);
  return problem;
}

const SweepRow& find_row(const SweepResult& result, const std::string& name,
                         int horizon) {
  for (const SweepRow& row : result.rows) {
    if (row.estimator == name && row.horizon == horizon) return row;
  }
  throw std::runtime_error("row not found");
}

const RateFit& find_fit(const SweepResult& result, const std::string& name) {
  for (const RateFit& fit : result.fits) {
    if (fit.estimator == name) return fit;
  }
  throw std::runtime_error("fit not found");
}

}  // namespace

TEST_SUITE("sweeps") {
  TEST_CASE("exact recursion and enumeration sweeps agree row by row") {
    const auto family = [](int horizon) {
      return random_ergodic(7, 3, 2, horizon, 1.0, 0.3);
    };
    const std::vector<int> grid = {2, 3, 4, 5};
    const std::vector<EstimatorKind> kinds = {
        EstimatorKind::is(), EstimatorKind::pdis(), EstimatorKind::sis()};
    const SweepResult dp = horizon_sweep(family, grid, kinds, SweepMethod::kExactDp);
    const SweepResult brute =
        horizon_sweep(family, grid, kinds, SweepMethod::kEnumeration);
    REQUIRE(dp.rows.size() == 12);
    REQUIRE(brute.rows.size() == 12);
    for (const SweepRow& row : dp.rows) {
      const SweepRow& other = find_row(brute, row.estimator, row.horizon);
      CAPTURE(row.estimator);
      CAPTURE(row.horizon);
      CHECK(std::abs(row.mean - other.mean) <= 1e-10);
      CHECK(std::abs(row.variance - other.variance) <= 1e-9);
      CHECK(row.method == "exact_dp");
      CHECK(other.method == "enumeration");
    }
  }

  TEST_CASE("quadratic variance growth fits degree two with no exponential rate") {
    const std::vector<int> grid = {100, 200, 300, 400};
    const std::vector<EstimatorKind> kinds = {
        EstimatorKind::is(), EstimatorKind::pdis(), EstimatorKind::sis()};
    const SweepResult result =
        horizon_sweep(frozen_pair, grid, kinds, SweepMethod::kExactDp);
    for (const SweepRow& row : result.rows) {
      CAPTURE(row.estimator);
      CAPTURE(row.horizon);
      const double expected = 0.0625 * row.horizon * row.horizon;
      CHECK(std::abs(row.variance - expected) / expected <= 1e-9);
      CHECK(row.mean == doctest::Approx(0.5 * row.horizon).epsilon(1e-12));
    }
    for (const char* name : {"IS", "PDIS", "SIS"}) {
      const RateFit& fit = find_fit(result, name);
      REQUIRE(fit.valid);
      CHECK(std::abs(fit.beta - 2.0) <= 1e-6);
      CHECK(std::abs(fit.alpha) <= 0.01);
      CHECK(fit.beta_residual <= 1e-6);
      CHECK(fit.t_min == 100);
      CHECK(fit.t_max == 400);
    }
  }

  TEST_CASE("monte carlo sweeps tag their rows and approximate the exact curve") {
    const auto family = [](int horizon) {
      return random_ergodic(19, 3, 2, horizon, 1.0, 0.2);
    };
    const std::vector<int> grid = {3, 5};
    const std::vector<EstimatorKind> kinds = {EstimatorKind::pdis()};
    SamplerConfig mc;
    mc.seed = 71;
    mc.num_trajectories = 4000;
    const SweepResult sampled =
        horizon_sweep(family, grid, kinds, SweepMethod::kMonteCarlo, &mc);
    const SweepResult exact =
        horizon_sweep(family, grid, kinds, SweepMethod::kExactDp);
    for (const SweepRow& row : sampled.rows) {
      CHECK(row.method == "monte_carlo");
      CHECK(row.seed == 71);
      const SweepRow& truth = find_row(exact, row.estimator, row.horizon);
      CAPTURE(row.horizon);
      CHECK(std::abs(row.variance - truth.variance) / truth.variance <= 0.25);
    }
  }

  TEST_CASE("empty grids are rejected") {
    const std::vector<int> empty_grid;
    const std::vector<int> grid = {4, 8};
    const std::vector<double> empty_gammas;
    const std::vector<double> gammas = {0.5};
    const std::vector<EstimatorKind> kinds = {EstimatorKind::is()};
    const auto family = [](int horizon) {
      return random_ergodic(1, 2, 2, horizon, 1.0, 0.2);
    };
    const auto gfamily = [](int horizon, double gamma) {
      return random_ergodic(1, 2, 2, horizon, gamma, 0.2);
    };
    CHECK_THROWS_AS(
        horizon_sweep(family, empty_grid, kinds, SweepMethod::kExactDp),
        ValidationError);
    CHECK_THROWS_AS(pdis_regime(gfamily, empty_grid, gammas), ValidationError);
    CHECK_THROWS_AS(pdis_regime(gfamily, grid, empty_gammas), ValidationError);
  }

  TEST_CASE("monte carlo sweeps require a sampler configuration") {
    const std::vector<int> grid = {3};
    const std::vector<EstimatorKind> kinds = {EstimatorKind::is()};
    const auto family = [](int horizon) {
      return random_ergodic(1, 2, 2, horizon, 1.0, 0.2);
    };
    CHECK_THROWS_AS(
        horizon_sweep(family, grid, kinds, SweepMethod::kMonteCarlo, nullptr),
        ValidationError);
  }

  TEST_CASE("discount regimes split at the weighted-ratio threshold") {
    const auto family = [](int horizon, double gamma) {
      return random_ergodic(11, 3, 2, horizon, gamma, 0.6);
    };
    const std::vector<int> grid = {4, 6, 8, 10, 12, 14, 16};
    const std::vector<double> gammas = {0.0, 1.0};
    const std::vector<RegimeRow> rows = pdis_regime(family, grid, gammas);
    REQUIRE(rows.size() == 2);

    // gamma = 0: only the first reward survives, so the variance is constant
    // in T and the growth is trivially polynomial.
    CHECK(rows[0].gamma == 0.0);
    CHECK(rows[0].u_rho_gamma == 0.0);
    CHECK(std::abs(rows[0].alpha) <= 1e-9);
    CHECK(rows[0].classification == "polynomial");

    // gamma = 1 with a wide policy gap: squared cumulative weights compound,
    // so the exponential rate is far above the threshold.
    CHECK(rows[1].gamma == 1.0);
    CHECK(rows[1].u_rho_gamma > 1.0);
    CHECK(rows[1].alpha > 0.01);
    CHECK(rows[1].classification == "exponential");
  }

  TEST_CASE("perturbed-weight rows on the first counterexample") {
    const EvaluationProblem problem = counterexample_mdp(1);
    const std::vector<double> eps = {0.0, 0.01};
    const std::vector<AsisRow> rows = asis_experiment(problem, eps, 13);
    REQUIRE(rows.size() == 2);

    const AsisRow& clean = rows[0];
    CHECK(clean.eps_realized == 0.0);
    CHECK(std::abs(clean.bias) <= 1e-12);
    CHECK(clean.mse == doctest::Approx(0.2).epsilon(1e-10));
    CHECK(clean.sis_variance == doctest::Approx(0.2).epsilon(1e-10));
    CHECK(clean.bound == doctest::Approx(0.4).epsilon(1e-10));
    CHECK(!clean.mc_mse.has_value());

    const AsisRow& noisy = rows[1];
    CHECK(noisy.eps_target == 0.01);
    CHECK(noisy.eps_realized ==
          doctest::Approx(0.01).epsilon(0.01));  // rescaled to the target
    CHECK(noisy.bound ==
          doctest::Approx(2.0 * 0.2 + 2.0 * 4.0 * noisy.eps_realized)
              .epsilon(1e-10));
    CHECK(noisy.mse <= noisy.bound + 1e-9);
    CHECK(noisy.mse ==
          doctest::Approx(noisy.bias * noisy.bias + noisy.variance)
              .epsilon(1e-10));
  }

  TEST_CASE("perturbed-weight bound under clipping on the two-lane problem") {
    const EvaluationProblem problem = two_lane(10);
    const std::vector<double> eps = {0.05};
    const std::vector<AsisRow> rows = asis_experiment(problem, eps, 29);
    REQUIRE(rows.size() == 1);
    const AsisRow& row = rows[0];
    CHECK(row.sis_variance == doctest::Approx(100.0).epsilon(1e-10));
    CHECK(row.eps_realized <= 0.05 * 1.01);
    CHECK(row.eps_realized > 0.0);
    CHECK(row.bound <= 210.0 + 1e-9);
    CHECK(row.bound >= 200.0);
    CHECK(row.mse <= row.bound + 1e-9);
  }

  TEST_CASE("perturbed-weight monte carlo cross-check lands near the exact error") {
    const EvaluationProblem problem = counterexample_mdp(1);
    const std::vector<double> eps = {0.01};
    SamplerConfig mc;
    mc.seed = 41;
    mc.num_trajectories = 4000;
    const std::vector<AsisRow> rows = asis_experiment(problem, eps, 13, &mc);
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].mc_mse.has_value());
    CHECK(std::abs(*rows[0].mc_mse - rows[0].mse) / rows[0].mse <= 0.5);
  }

  TEST_CASE("identical policies have zero decay and zero log-ratio") {
    const EvaluationProblem problem = random_ergodic(23, 3, 2, 4, 1.0, 0.0);
    SamplerConfig config;
    config.seed = 17;
    config.num_trajectories = 20;
    const RateCheckReport report = likelihood_rate_check(problem, 50, config);
    CHECK(report.c == 0.0);
    CHECK(report.mean_log_ratio == 0.0);
    CHECK(report.deviation == 0.0);
    CHECK(report.excluded == 0);
    CHECK(report.frac_below_half_rate == 0.0);
  }

  TEST_CASE("a deterministic target gives an exactly constant log-ratio") {
    // Behavior splits evenly; the target commits to one action.  Supported
    // trajectories use that action at every step, so the per-step ratio is
    // exactly two and unsupported trajectories are excluded.
    EvaluationProblem problem;
    problem.mdp = TabularMdp::stationary(1, 2, 3, 1.0, {1.0, 1.0},
                                         {0.5, 0.5}, {1.0});
    problem.behavior = PolicyTable{1, 2, {0.5, 0.5}};
    problem.target = PolicyTable{1, 2, {1.0, 0.0}};
    SamplerConfig config;
    config.seed = 3;
    config.num_trajectories = 400;
    const RateCheckReport report = likelihood_rate_check(problem, 3, config);
    CHECK(report.excluded > 0);
    CHECK(report.excluded < 400);
    CHECK(std::abs(report.mean_log_ratio - std::log(2.0)) <= 1e-12);
    CHECK(std::isinf(report.c));
  }

  TEST_CASE("rate checks refuse problems whose rewards depend on time") {
    EvaluationProblem problem = counterexample_mdp(1);
    problem.mdp.stationary_reward = false;
    SamplerConfig config;
    config.seed = 1;
    config.num_trajectories = 5;
    CHECK_THROWS_AS(likelihood_rate_check(problem, 10, config), ValidationError);
  }
}
