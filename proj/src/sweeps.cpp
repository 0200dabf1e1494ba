#include "opelab/sweeps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "opelab/occupancy.hpp"
#include "opelab/rng.hpp"

namespace opelab {

std::string sweep_method_name(SweepMethod method) {
  switch (method) {
    case SweepMethod::kExactDp:
      return "exact_dp";
    case SweepMethod::kEnumeration:
      return "enumeration";
    case SweepMethod::kMonteCarlo:
      return "monte_carlo";
  }
  return "?";
}

namespace {

struct LineFit {
  double slope = 0.0;
  double rms_residual = 0.0;
  bool valid = false;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  LineFit fit;
  const std::size_t n = x.size();
  if (n < 2) return fit;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0) return fit;
  fit.slope = sxy / sxx;
  const double intercept = my - fit.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - (intercept + fit.slope * x[i]);
    ss += e * e;
  }
  fit.rms_residual = std::sqrt(ss / n);
  fit.valid = true;
  return fit;
}

RateFit fit_rates(const std::string& estimator,
                  const std::vector<std::pair<int, double>>& curve) {
  RateFit fit;
  fit.estimator = estimator;
  std::vector<double> t, log_t, log_v;
  int t_min = 0, t_max = 0;
  for (const auto& [horizon, variance] : curve) {
    if (horizon < kFitWindowMinT) continue;
    if (!(variance > 0.0) || !std::isfinite(variance)) continue;
    if (t.empty() || horizon < t_min) t_min = horizon;
    t_max = std::max(t_max, horizon);
    t.push_back(static_cast<double>(horizon));
    log_t.push_back(std::log(static_cast<double>(horizon)));
    log_v.push_back(std::log(variance));
  }
  fit.t_min = t_min;
  fit.t_max = t_max;
  const LineFit alpha = fit_line(t, log_v);
  const LineFit beta = fit_line(log_t, log_v);
  fit.valid = alpha.valid && beta.valid;
  if (fit.valid) {
    fit.alpha = alpha.slope;
    fit.alpha_residual = alpha.rms_residual;
    fit.beta = beta.slope;
    fit.beta_residual = beta.rms_residual;
  }
  return fit;
}

}  // namespace

SweepResult horizon_sweep(const std::function<EvaluationProblem(int)>& family,
                          std::span<const int> t_grid,
                          std::span<const EstimatorKind> kinds,
                          SweepMethod method, const SamplerConfig* mc,
                          std::size_t cap) {
  if (t_grid.empty()) {
    throw ValidationError("sweep horizon grid must be non-empty");
  }
  if (method == SweepMethod::kMonteCarlo &&
      (mc == nullptr || mc->num_trajectories < 2)) {
    throw ValidationError(
        "Monte Carlo sweeps need a sampler config with at least two "
        "trajectories");
  }

  SweepResult result;
  for (int horizon : t_grid) {
    const EvaluationProblem problem = family(horizon);
    if (problem.mdp.horizon != horizon) {
      throw ValidationError(
          "sweep family returned a problem with the wrong horizon");
    }
    for (const EstimatorKind& kind : kinds) {
      SweepRow row;
      row.estimator = kind.name();
      row.horizon = horizon;
      row.gamma = problem.mdp.gamma;
      row.method = sweep_method_name(method);
      switch (method) {
        case SweepMethod::kExactDp: {
          const MomentReport report = moment_dp_variance(problem, kind);
          row.mean = report.mean;
          row.variance = report.variance;
          break;
        }
        case SweepMethod::kEnumeration: {
          const MomentReport report = exact_moments(problem, kind, cap);
          row.mean = report.mean;
          row.variance = report.variance;
          break;
        }
        case SweepMethod::kMonteCarlo: {
          const BatchStats stats = estimator_stats(problem, kind, *mc);
          row.mean = stats.estimate;
          row.variance = *stats.sample_variance;
          row.seed = mc->seed;
          break;
        }
      }
      result.rows.push_back(std::move(row));
    }
  }

  for (const EstimatorKind& kind : kinds) {
    std::vector<std::pair<int, double>> curve;
    for (const SweepRow& row : result.rows) {
      if (row.estimator == kind.name()) {
        curve.emplace_back(row.horizon, row.variance);
      }
    }
    result.fits.push_back(fit_rates(kind.name(), curve));
  }
  return result;
}

std::vector<RegimeRow> pdis_regime(
    const std::function<EvaluationProblem(int, double)>& family,
    std::span<const int> t_grid, std::span<const double> gamma_grid) {
  if (t_grid.empty() || gamma_grid.empty()) {
    throw ValidationError("regime grids must be non-empty");
  }
  std::vector<RegimeRow> rows;
  for (double gamma : gamma_grid) {
    std::vector<std::pair<int, double>> curve;
    double u_rho = 0.0;
    for (int horizon : t_grid) {
      const EvaluationProblem problem = family(horizon, gamma);
      const MomentReport report =
          moment_dp_variance(problem, EstimatorKind::pdis());
      curve.emplace_back(horizon, report.variance);
      if (horizon == t_grid.back()) {
        u_rho = diagnostics(problem).u_rho;
      }
    }
    const RateFit fit = fit_rates("PDIS", curve);
    RegimeRow row;
    row.gamma = gamma;
    row.alpha = fit.alpha;
    row.beta = fit.beta;
    row.u_rho_gamma = u_rho * gamma;
    row.classification =
        fit.valid && fit.alpha > kRegimeAlphaThreshold ? "exponential"
                                                       : "polynomial";
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<AsisRow> asis_experiment(const EvaluationProblem& problem,
                                     std::span<const double> eps_grid,
                                     std::uint64_t perturbation_seed,
                                     const SamplerConfig* mc) {
  const TabularMdp& mdp = problem.mdp;
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const int T = mdp.horizon;
  const std::size_t sa = static_cast<std::size_t>(S) * A;

  const OccupancyTables occ = occupancies(problem, false);
  const WeightTable oracle = WeightTable::oracle(occ);
  const double v_pi = target_value(problem);
  const double sis_variance =
      moment_dp_variance(problem, EstimatorKind::sis()).variance;

  // One pool of unit Gaussian noise over the behavior-reachable entries,
  // shared across the grid so epsilon alone moves between rows.
  Xoshiro256pp rng = Xoshiro256pp::stream(perturbation_seed, 0);
  std::vector<double> noise(sa * T, 0.0);
  for (int t = 1; t <= T; ++t) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const std::size_t i = (static_cast<std::size_t>(t - 1) * S + s) * A + a;
        if (occ.d_mu[i] > 0.0) noise[i] = next_gaussian(rng);
      }
    }
  }
  // Worst per-time-step behavior-weighted mean square of the unit noise,
  // used to scale it onto each epsilon target.
  double worst_unit = 0.0;
  for (int t = 1; t <= T; ++t) {
    double step = 0.0;
    for (std::size_t j = 0; j < sa; ++j) {
      const std::size_t i = static_cast<std::size_t>(t - 1) * sa + j;
      step += occ.d_mu[i] * noise[i] * noise[i];
    }
    worst_unit = std::max(worst_unit, step);
  }

  std::vector<AsisRow> rows;
  for (double eps : eps_grid) {
    if (eps < 0.0) {
      throw ValidationError("weight-error grid entries must be nonnegative");
    }
    WeightTable table = oracle;
    if (eps > 0.0 && worst_unit > 0.0) {
      const double scale = std::sqrt(eps / worst_unit);
      for (std::size_t i = 0; i < table.w.size(); ++i) {
        table.w[i] = std::max(0.0, table.w[i] + scale * noise[i]);
      }
    }
    // Realized error after clipping; this is the epsilon the bound uses.
    double realized = 0.0;
    for (int t = 1; t <= T; ++t) {
      double step = 0.0;
      for (std::size_t j = 0; j < sa; ++j) {
        const std::size_t i = static_cast<std::size_t>(t - 1) * sa + j;
        const double diff = table.w[i] - oracle.w[i];
        step += occ.d_mu[i] * diff * diff;
      }
      realized = std::max(realized, step);
    }

    const EstimatorKind kind = EstimatorKind::asis(std::move(table));
    const MomentReport report = moment_dp_variance(problem, kind);

    AsisRow row;
    row.eps_target = eps;
    row.eps_realized = realized;
    row.bias = report.mean - v_pi;
    row.variance = report.variance;
    row.mse = row.bias * row.bias + report.variance;
    row.sis_variance = sis_variance;
    row.bound = 2.0 * sis_variance +
                2.0 * static_cast<double>(T) * static_cast<double>(T) *
                    realized;
    if (mc != nullptr && mc->num_trajectories > 0) {
      const TrajectoryBatch batch = sample_trajectories(problem, *mc);
      double sq = 0.0;
      for (const Trajectory& traj : batch) {
        const double value = estimator_return(problem, kind, nullptr, traj);
        sq += (value - v_pi) * (value - v_pi);
      }
      row.mc_mse = sq / static_cast<double>(batch.size());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

RateCheckReport likelihood_rate_check(const EvaluationProblem& problem,
                                      int horizon,
                                      const SamplerConfig& config) {
  if (horizon < 1) {
    throw ValidationError("likelihood rate check requires horizon >= 1");
  }
  if (config.num_trajectories < 2) {
    throw ValidationError(
        "likelihood rate check needs at least two trajectories");
  }
  EvaluationProblem scaled;
  scaled.mdp = with_horizon(problem.mdp, horizon);
  scaled.behavior = problem.behavior;
  scaled.target = problem.target;

  RateCheckReport report;
  report.horizon = horizon;
  report.n = config.num_trajectories;
  report.c = kl_rate(scaled);

  const TrajectoryBatch batch = sample_trajectories(scaled, config);
  std::vector<double> averages;
  averages.reserve(batch.size());
  for (const Trajectory& traj : batch) {
    double log_sum = 0.0;
    bool supported = true;
    for (int t = 0; t < horizon; ++t) {
      const double mu = scaled.behavior(traj.states[t], traj.actions[t]);
      const double pi = scaled.target(traj.states[t], traj.actions[t]);
      if (pi <= 0.0) {
        supported = false;
        break;
      }
      log_sum += std::log(pi / mu);
    }
    if (!supported) {
      ++report.excluded;
      continue;
    }
    averages.push_back(log_sum / horizon);
  }

  const std::size_t n = averages.size();
  if (n == 0) {
    report.mean_log_ratio = -std::numeric_limits<double>::infinity();
    report.deviation = std::numeric_limits<double>::infinity();
    report.frac_below_half_rate = 1.0;
    return report;
  }
  double mean = 0.0;
  for (double v : averages) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  int below = report.excluded;  // unsupported steps have rho = 0 < any bound
  for (double v : averages) {
    ss += (v - mean) * (v - mean);
    if (v < -0.5 * report.c) ++below;
  }
  report.mean_log_ratio = mean;
  report.deviation = std::abs(mean + report.c);
  report.standard_error =
      n >= 2 ? std::sqrt(ss / static_cast<double>(n - 1) /
                         static_cast<double>(n))
             : 0.0;
  report.frac_below_half_rate =
      static_cast<double>(below) / static_cast<double>(batch.size());
  return report;
}

}  // namespace opelab
