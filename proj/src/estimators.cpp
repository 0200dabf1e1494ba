#include "opelab/estimators.hpp"

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace opelab {

WeightTable WeightTable::oracle(const OccupancyTables& occ) {
  WeightTable table;
  table.num_states = occ.num_states;
  table.num_actions = occ.num_actions;
  table.horizon = occ.horizon;
  table.w = occ.ratio;
  return table;
}

std::string EstimatorKind::name() const {
  switch (id) {
    case EstimatorId::kIs:
      return "IS";
    case EstimatorId::kPdis:
      return "PDIS";
    case EstimatorId::kSis:
      return "SIS";
    case EstimatorId::kAsis:
      return "ASIS";
  }
  return "?";
}

EstimatorKind kind_from_name(const std::string& name) {
  if (name == "IS") return EstimatorKind::is();
  if (name == "PDIS") return EstimatorKind::pdis();
  if (name == "SIS") return EstimatorKind::sis();
  throw ConfigError("unknown estimator name '" + name +
                    "' (expected IS, PDIS, or SIS)");
}

double is_return(const EvaluationProblem& problem, const Trajectory& traj) {
  const StepRatios rho = step_ratios(problem, traj);
  const std::vector<double> disc = problem.mdp.discounts();
  return rho.cumulative.back() * traj.return_value(disc);
}

double pdis_return(const EvaluationProblem& problem, const Trajectory& traj) {
  const StepRatios rho = step_ratios(problem, traj);
  const std::vector<double> disc = problem.mdp.discounts();
  double g = 0.0;
  for (int t = 0; t < traj.length(); ++t) {
    g += disc[t] * rho.cumulative[t] * traj.rewards[t];
  }
  return g;
}

double sis_return(const EvaluationProblem& problem, const OccupancyTables& occ,
                  const Trajectory& traj) {
  const std::vector<double> disc = problem.mdp.discounts();
  double g = 0.0;
  for (int t = 1; t <= traj.length(); ++t) {
    g += disc[t - 1] *
         occ.ratio_at(t, traj.states[t - 1], traj.actions[t - 1]) *
         traj.rewards[t - 1];
  }
  return g;
}

double asis_return(const EvaluationProblem& problem, const WeightTable& table,
                   const Trajectory& traj) {
  const std::vector<double> disc = problem.mdp.discounts();
  double g = 0.0;
  for (int t = 1; t <= traj.length(); ++t) {
    g += disc[t - 1] * table.at(t, traj.states[t - 1], traj.actions[t - 1]) *
         traj.rewards[t - 1];
  }
  return g;
}

double estimator_return(const EvaluationProblem& problem,
                        const EstimatorKind& kind, const OccupancyTables* occ,
                        const Trajectory& traj) {
  switch (kind.id) {
    case EstimatorId::kIs:
      return is_return(problem, traj);
    case EstimatorId::kPdis:
      return pdis_return(problem, traj);
    case EstimatorId::kSis:
      if (occ == nullptr) {
        throw ValidationError(
            "SIS return requires occupancy tables; none were supplied");
      }
      return sis_return(problem, *occ, traj);
    case EstimatorId::kAsis:
      if (!kind.weights) {
        throw ValidationError("ASIS kind carries no weight table");
      }
      return asis_return(problem, *kind.weights, traj);
  }
  throw ValidationError("unknown estimator kind");
}

BatchStats batch_estimate(const EvaluationProblem& problem,
                          const EstimatorKind& kind,
                          const TrajectoryBatch& batch) {
  if (batch.empty()) {
    throw ValidationError("batch_estimate requires at least one trajectory");
  }
  OccupancyTables occ;
  const OccupancyTables* occ_ptr = nullptr;
  if (kind.id == EstimatorId::kSis) {
    occ = occupancies(problem);
    occ_ptr = &occ;
  }

  const std::size_t n = batch.size();
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = estimator_return(problem, kind, occ_ptr, batch[i]);
  }

  BatchStats stats;
  stats.n = static_cast<int>(n);
  double sum = 0.0;
  for (double v : values) sum += v;
  stats.estimate = sum / static_cast<double>(n);
  if (n >= 2) {
    double ss = 0.0;
    for (double v : values) {
      const double d = v - stats.estimate;
      ss += d * d;
    }
    const double var = ss / static_cast<double>(n - 1);
    stats.sample_variance = var;
    stats.standard_error = std::sqrt(var / static_cast<double>(n));
  }
  return stats;
}

namespace {

// In-place modified Gram-Schmidt with re-orthogonalization.  Returns the
// orthonormal basis (columns) of the design's column space and, for each
// original column, its expansion in that basis (the R factor, with dropped
// columns marked).  Columns whose residual falls below `tol` relative to
// their original norm are dropped as linearly dependent.
struct QrBasis {
  std::vector<std::vector<double>> q;          // orthonormal columns
  std::vector<std::vector<double>> r_columns;  // r_columns[j][i] = <q_i, x_j>
  std::vector<bool> kept;
};

QrBasis orthonormalize(const std::vector<std::vector<double>>& columns,
                       double tol) {
  QrBasis basis;
  basis.kept.assign(columns.size(), false);
  basis.r_columns.resize(columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j) {
    std::vector<double> v = columns[j];
    double orig = 0.0;
    for (double x : v) orig += x * x;
    orig = std::sqrt(orig);
    std::vector<double> coeffs(basis.q.size(), 0.0);
    // Two passes of projection: plain MGS leaves O(eps * condition) residue,
    // which the identity tests would see.
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t i = 0; i < basis.q.size(); ++i) {
        double dot = 0.0;
        for (std::size_t row = 0; row < v.size(); ++row) {
          dot += basis.q[i][row] * v[row];
        }
        coeffs[i] += dot;
        for (std::size_t row = 0; row < v.size(); ++row) {
          v[row] -= dot * basis.q[i][row];
        }
      }
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    basis.r_columns[j] = std::move(coeffs);
    if (orig == 0.0 || norm <= tol * std::max(orig, 1.0)) {
      continue;  // linearly dependent on earlier columns; dropped
    }
    for (double& x : v) x /= norm;
    basis.r_columns[j].push_back(norm);
    basis.kept[j] = true;
    basis.q.push_back(std::move(v));
  }
  return basis;
}

constexpr double kRankTol = 1e-10;

}  // namespace

RcisResult rcis_estimate_with_features(const EvaluationProblem& problem,
                                       const TrajectoryBatch& batch,
                                       const FeatureMap& features) {
  if (batch.empty()) {
    throw ValidationError("rcis_estimate requires at least one trajectory");
  }
  const std::size_t n = batch.size();
  const std::vector<double> disc = problem.mdp.discounts();

  std::vector<double> weights(n);  // regression response: rho_{1:T}
  std::vector<double> returns(n);
  for (std::size_t i = 0; i < n; ++i) {
    weights[i] = step_ratios(problem, batch[i]).cumulative.back();
    returns[i] = batch[i].return_value(disc);
  }

  std::vector<std::vector<double>> feats(n);
  for (std::size_t i = 0; i < n; ++i) feats[i] = features(problem, batch[i]);
  const std::size_t p = feats[0].size();
  for (const auto& f : feats) {
    if (f.size() != p) {
      throw ValidationError("feature map returned vectors of varying length");
    }
  }

  // Column-major design.
  std::vector<std::vector<double>> columns(p, std::vector<double>(n));
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t i = 0; i < n; ++i) columns[j][i] = feats[i][j];
  }

  const QrBasis basis = orthonormalize(columns, kRankTol);

  // Projection of the weights onto the feature span.
  std::vector<double> qty(basis.q.size(), 0.0);
  for (std::size_t i = 0; i < basis.q.size(); ++i) {
    for (std::size_t row = 0; row < n; ++row) {
      qty[i] += basis.q[i][row] * weights[row];
    }
  }
  std::vector<double> fitted(n, 0.0);
  for (std::size_t i = 0; i < basis.q.size(); ++i) {
    for (std::size_t row = 0; row < n; ++row) {
      fitted[row] += qty[i] * basis.q[i][row];
    }
  }

  RcisResult result;
  double sum = 0.0;
  for (std::size_t row = 0; row < n; ++row) sum += returns[row] * fitted[row];
  result.estimate = sum / static_cast<double>(n);

  // Back-substitute theta for the kept columns (zeros elsewhere).
  result.coefficients.assign(p, 0.0);
  std::vector<std::size_t> kept_index;
  for (std::size_t j = 0; j < p; ++j) {
    if (basis.kept[j]) kept_index.push_back(j);
  }
  for (std::size_t k = kept_index.size(); k-- > 0;) {
    const std::size_t j = kept_index[k];
    double value = qty[k];
    for (std::size_t m = k + 1; m < kept_index.size(); ++m) {
      value -= basis.r_columns[kept_index[m]][k] *
               result.coefficients[kept_index[m]];
    }
    result.coefficients[j] = value / basis.r_columns[j][k];
  }
  return result;
}

RcisResult rcis_estimate(const EvaluationProblem& problem,
                         const TrajectoryBatch& batch) {
  const FeatureMap default_features =
      [](const EvaluationProblem& prob,
         const Trajectory& traj) -> std::vector<double> {
    const std::vector<double> disc = prob.mdp.discounts();
    return {traj.return_value(disc), 1.0};
  };
  return rcis_estimate_with_features(problem, batch, default_features);
}

}  // namespace opelab
