#pragma once

// Per-trajectory importance-sampling estimators of the target policy value,
// batch aggregation, and the regression-coefficient form.
//
//   IS    g = rho_{1:T} * sum_t gamma^{t-1} r_t
//   PDIS  g = sum_t gamma^{t-1} rho_{1:t} r_t
//   SIS   g = sum_t gamma^{t-1} w*_t(s_t, a_t) r_t,  w*_t = d_t^pi / d_t^mu
//   ASIS  g = sum_t gamma^{t-1} w_t(s_t, a_t) r_t for a supplied weight table
//
// All four are unbiased for v^pi when the weights are exact; SIS binds the
// oracle ratio computed from the problem itself.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "opelab/mdp.hpp"
#include "opelab/occupancy.hpp"

namespace opelab {

// Time-dependent state-action weights, same layout as occupancy tables.
struct WeightTable {
  int num_states = 0;
  int num_actions = 0;
  int horizon = 0;
  std::vector<double> w;

  double at(int t, int s, int a) const {
    return w[(static_cast<std::size_t>(t - 1) * num_states + s) * num_actions +
             a];
  }
  double& mutable_at(int t, int s, int a) {
    return w[(static_cast<std::size_t>(t - 1) * num_states + s) * num_actions +
             a];
  }

  // The oracle SIS weights d_t^pi / d_t^mu.
  static WeightTable oracle(const OccupancyTables& occ);
};

enum class EstimatorId { kIs, kPdis, kSis, kAsis };

// Estimator selector.  ASIS carries its weight table; SIS resolves the
// oracle table from the problem at evaluation time.
struct EstimatorKind {
  EstimatorId id = EstimatorId::kIs;
  std::shared_ptr<const WeightTable> weights;  // ASIS only

  static EstimatorKind is() { return {EstimatorId::kIs, nullptr}; }
  static EstimatorKind pdis() { return {EstimatorId::kPdis, nullptr}; }
  static EstimatorKind sis() { return {EstimatorId::kSis, nullptr}; }
  static EstimatorKind asis(WeightTable table) {
    return {EstimatorId::kAsis,
            std::make_shared<const WeightTable>(std::move(table))};
  }

  std::string name() const;
};

EstimatorKind kind_from_name(const std::string& name);  // "IS"/"PDIS"/"SIS"

double is_return(const EvaluationProblem& problem, const Trajectory& traj);
double pdis_return(const EvaluationProblem& problem, const Trajectory& traj);
double sis_return(const EvaluationProblem& problem, const OccupancyTables& occ,
                  const Trajectory& traj);
double asis_return(const EvaluationProblem& problem, const WeightTable& table,
                   const Trajectory& traj);

// Dispatches on kind; `occ` may be null unless kind is SIS.
double estimator_return(const EvaluationProblem& problem,
                        const EstimatorKind& kind, const OccupancyTables* occ,
                        const Trajectory& traj);

// Sample mean, Bessel-corrected sample variance, and standard error of a
// batch.  Variance and stderr are absent when the batch has one trajectory.
struct BatchStats {
  double estimate = 0.0;
  std::optional<double> sample_variance;
  std::optional<double> standard_error;
  int n = 0;
};

BatchStats batch_estimate(const EvaluationProblem& problem,
                          const EstimatorKind& kind,
                          const TrajectoryBatch& batch);

// Regression-coefficient estimator.  Regresses the trajectory IS weight
// rho_{1:T} on per-trajectory features (default: the return G and an
// intercept) by least squares, then averages G * (projected weight).
// Whenever the return lies in the feature span — it does for the default
// features, even when the design is rank-deficient — the projection is
// invisible to the average and the estimate coincides exactly with plain IS.
struct RcisResult {
  double estimate = 0.0;
  std::vector<double> coefficients;  // fitted theta; zeros on columns dropped
                                     // as linearly dependent
};

// Features map one trajectory to a feature vector; all trajectories must map
// to the same dimension.
using FeatureMap = std::function<std::vector<double>(
    const EvaluationProblem&, const Trajectory&)>;

RcisResult rcis_estimate(const EvaluationProblem& problem,
                         const TrajectoryBatch& batch);
RcisResult rcis_estimate_with_features(const EvaluationProblem& problem,
                                       const TrajectoryBatch& batch,
                                       const FeatureMap& features);

}  // namespace opelab
