#include "opelab/montecarlo.hpp"

#include <cmath>
#include <span>
#include <vector>

#include "opelab/parallel.hpp"
#include "opelab/rng.hpp"

namespace opelab {

namespace {

// One episode from its own substream.  The stream is a pure function of
// (seed, index), so trajectory i is the same no matter which worker draws it
// or how many trajectories surround it.  Actions come from `actor`; the
// recorded probability is always the behavior policy's.
Trajectory sample_one(const EvaluationProblem& problem,
                      const PolicyTable& actor, std::uint64_t seed,
                      std::uint64_t index) {
  const TabularMdp& mdp = problem.mdp;
  const int A = mdp.num_actions;
  Xoshiro256pp rng = Xoshiro256pp::stream(seed, index);

  Trajectory traj;
  const int T = mdp.horizon;
  traj.states.resize(T);
  traj.actions.resize(T);
  traj.rewards.resize(T);

  int s = sample_index(rng, std::span<const double>(mdp.initial_dist));
  double prob = mdp.initial_dist[s];
  for (int t = 1; t <= T; ++t) {
    const std::span<const double> act(
        actor.probs.data() + static_cast<std::size_t>(s) * A,
        static_cast<std::size_t>(A));
    const int a = sample_index(rng, act);
    traj.states[t - 1] = s;
    traj.actions[t - 1] = a;
    traj.rewards[t - 1] = mdp.r(t, s, a);
    prob *= problem.behavior.at(s, a);
    if (t < T) {
      const std::span<const double> row(
          mdp.transition.data() +
          (static_cast<std::size_t>(s) * A + a) * mdp.num_states,
          static_cast<std::size_t>(mdp.num_states));
      const int s2 = sample_index(rng, row);
      prob *= row[s2];
      s = s2;
    }
  }
  traj.prob_mu = prob;
  return traj;
}

TrajectoryBatch sample_batch(const EvaluationProblem& problem,
                             const PolicyTable& actor,
                             const SamplerConfig& config) {
  if (config.num_trajectories < 0) {
    throw ValidationError("num_trajectories must be nonnegative");
  }
  const std::size_t n = static_cast<std::size_t>(config.num_trajectories);
  TrajectoryBatch batch(n);
  parallel_for(n, config.num_workers, [&](std::size_t i) {
    batch[i] = sample_one(problem, actor, config.seed, i);
  });
  return batch;
}

}  // namespace

TrajectoryBatch sample_trajectories(const EvaluationProblem& problem,
                                    const SamplerConfig& config) {
  return sample_batch(problem, problem.behavior, config);
}

TrajectoryBatch sample_target_trajectories(const EvaluationProblem& problem,
                                           const SamplerConfig& config) {
  return sample_batch(problem, problem.target, config);
}

BatchStats estimator_stats(const EvaluationProblem& problem,
                           const EstimatorKind& kind,
                           const SamplerConfig& config) {
  const TrajectoryBatch batch = sample_trajectories(problem, config);
  return batch_estimate(problem, kind, batch);
}

std::vector<ConvergenceRow> convergence_curve(const EvaluationProblem& problem,
                                              const EstimatorKind& kind,
                                              std::uint64_t seed,
                                              std::span<const int> n_grid,
                                              unsigned workers) {
  int n_max = 0;
  for (int n : n_grid) {
    if (n < 1) throw ValidationError("convergence grid entries must be >= 1");
    n_max = std::max(n_max, n);
  }
  SamplerConfig config;
  config.seed = seed;
  config.num_trajectories = n_max;
  config.num_workers = workers;
  const TrajectoryBatch batch = sample_trajectories(problem, config);

  OccupancyTables occ;
  const OccupancyTables* occ_ptr = nullptr;
  if (kind.id == EstimatorId::kSis) {
    occ = occupancies(problem, false);
    occ_ptr = &occ;
  }
  std::vector<double> values(batch.size());
  parallel_for(batch.size(), workers, [&](std::size_t i) {
    values[i] = estimator_return(problem, kind, occ_ptr, batch[i]);
  });

  // Prefix sums in index order keep every row equal to the stats of the
  // first n trajectories, independent of worker count.
  std::vector<ConvergenceRow> rows;
  rows.reserve(n_grid.size());
  for (int n : n_grid) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += values[i];
    ConvergenceRow row;
    row.n = n;
    row.mean = sum / n;
    if (n >= 2) {
      double ss = 0.0;
      for (int i = 0; i < n; ++i) {
        const double d = values[i] - row.mean;
        ss += d * d;
      }
      row.sample_variance = ss / (n - 1);
      row.standard_error = std::sqrt(*row.sample_variance / n);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace opelab
