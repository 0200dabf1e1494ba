#pragma once

// Seeded Monte Carlo: trajectory sampling under the behavior policy and
// batch statistics for any estimator.  Every trajectory is generated from a
// substream derived only from (seed, trajectory index), so batches are
// bitwise identical for a given (seed, n) regardless of worker count.

#include <cstdint>
#include <span>
#include <vector>

#include "opelab/estimators.hpp"
#include "opelab/mdp.hpp"

namespace opelab {

struct SamplerConfig {
  std::uint64_t seed = 0;
  int num_trajectories = 0;
  unsigned num_workers = 1;  // 0 = hardware concurrency
};

// n = config.num_trajectories episodes sampled under the behavior policy.
// Each trajectory carries its exact probability under the behavior policy.
TrajectoryBatch sample_trajectories(const EvaluationProblem& problem,
                                    const SamplerConfig& config);

// Episodes with actions drawn from the target policy instead.  Only meant
// for cross-checking the target value (the mean raw discounted return
// converges to it); estimator batches must come from sample_trajectories.
// Each trajectory still records its probability under the behavior policy.
TrajectoryBatch sample_target_trajectories(const EvaluationProblem& problem,
                                           const SamplerConfig& config);

// Sampling + batch_estimate in one step (occupancies resolved once).
BatchStats estimator_stats(const EvaluationProblem& problem,
                           const EstimatorKind& kind,
                           const SamplerConfig& config);

// Running statistics over nested prefixes of one batch: row for n reuses the
// first n trajectories of the largest batch, so the curve is internally
// consistent (enlarging a batch never rewrites history).
struct ConvergenceRow {
  int n = 0;
  double mean = 0.0;
  std::optional<double> sample_variance;
  std::optional<double> standard_error;
};

std::vector<ConvergenceRow> convergence_curve(const EvaluationProblem& problem,
                                              const EstimatorKind& kind,
                                              std::uint64_t seed,
                                              std::span<const int> n_grid,
                                              unsigned workers = 1);

}  // namespace opelab
