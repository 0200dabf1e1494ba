#pragma once

// Horizon-scaling experiments: variance growth curves with exponential /
// polynomial rate fits, the discount-regime classification for the
// per-decision estimator, the perturbed-weights bias/variance experiment,
// and the empirical likelihood-decay rate check.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "opelab/estimators.hpp"
#include "opelab/mdp.hpp"
#include "opelab/montecarlo.hpp"
#include "opelab/oracle.hpp"

namespace opelab {

enum class SweepMethod { kExactDp, kEnumeration, kMonteCarlo };

std::string sweep_method_name(SweepMethod method);

struct SweepRow {
  std::string estimator;
  int horizon = 0;
  double gamma = 1.0;
  double mean = 0.0;
  double variance = 0.0;
  std::string method;
  std::uint64_t seed = 0;  // Monte Carlo only; 0 for exact methods
};

// Least-squares rate fits of a variance curve over the fit window
// [t_min, t_max] (t_min is clamped to at least kFitWindowMinT because tiny
// horizons are dominated by transients):
//   alpha: slope of log Var against T        (exponential rate)
//   beta:  slope of log Var against log T    (polynomial degree)
// Rows with nonpositive or nonfinite variance are excluded; `valid` is false
// (and the numbers meaningless) when fewer than two points survive.
inline constexpr int kFitWindowMinT = 4;

struct RateFit {
  std::string estimator;
  double alpha = 0.0;
  double beta = 0.0;
  int t_min = 0;
  int t_max = 0;
  double alpha_residual = 0.0;  // RMS residual of the log-linear fit
  double beta_residual = 0.0;
  bool valid = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<RateFit> fits;
};

// Exact (or Monte Carlo) variance of each estimator kind at every horizon in
// `t_grid`, on the problems produced by `family`.  `mc` is required when
// method = kMonteCarlo and ignored otherwise; the same seed is reused at
// every grid point (each point samples its own batch).
SweepResult horizon_sweep(const std::function<EvaluationProblem(int)>& family,
                          std::span<const int> t_grid,
                          std::span<const EstimatorKind> kinds,
                          SweepMethod method,
                          const SamplerConfig* mc = nullptr,
                          std::size_t cap = kDefaultEnumCap);

// Classification of the per-decision estimator's growth regime per discount
// factor: fits alpha and beta on exact variances over t_grid and labels the
// regime "exponential" when alpha exceeds kRegimeAlphaThreshold, else
// "polynomial".  u_rho_gamma = gamma * max reachable step ratio; values
// <= 1 should land in the polynomial regime.
inline constexpr double kRegimeAlphaThreshold = 0.01;

struct RegimeRow {
  double gamma = 1.0;
  double alpha = 0.0;
  double beta = 0.0;
  double u_rho_gamma = 0.0;
  std::string classification;
};

std::vector<RegimeRow> pdis_regime(
    const std::function<EvaluationProblem(int, double)>& family,
    std::span<const int> t_grid, std::span<const double> gamma_grid);

// Approximate-weights experiment.  For each epsilon in `eps_grid`, perturbs
// the oracle weights with seeded Gaussian noise scaled so the worst
// time-step behavior-weighted mean-square weight error hits epsilon (then
// clips negative weights to zero and reports the realized error), and
// computes the exact MSE of the resulting biased estimator by the moment
// recursion.  The reported bound is
//     2 * Var(SIS) + 2 * T^2 * eps_realized
// and MSE <= bound must hold.  When `mc` is given, an empirical MSE cross-
// check column is added.
struct AsisRow {
  double eps_target = 0.0;
  double eps_realized = 0.0;
  double mse = 0.0;
  double bias = 0.0;
  double variance = 0.0;
  double sis_variance = 0.0;
  double bound = 0.0;
  std::optional<double> mc_mse;
};

std::vector<AsisRow> asis_experiment(const EvaluationProblem& problem,
                                     std::span<const double> eps_grid,
                                     std::uint64_t perturbation_seed,
                                     const SamplerConfig* mc = nullptr);

// Empirical check of the likelihood decay rate: samples n trajectories of
// length `horizon` (the problem is re-horizoned, which requires a stationary
// reward table), computes the per-trajectory average log step ratio, and
// compares against -c.  Trajectories that step outside the target support
// (log rho = -infinity) are counted in `excluded` and dropped from the mean.
struct RateCheckReport {
  int horizon = 0;
  int n = 0;
  int excluded = 0;
  double c = 0.0;               // exact rate from the stationary KL
  double mean_log_ratio = 0.0;  // average of (1/T) sum_t log rho_t
  double deviation = 0.0;       // |mean_log_ratio + c|
  double standard_error = 0.0;  // of the per-trajectory averages
  double frac_below_half_rate = 0.0;  // fraction with rho_{1:T} < e^{-cT/2}
};

RateCheckReport likelihood_rate_check(const EvaluationProblem& problem,
                                      int horizon,
                                      const SamplerConfig& config);

}  // namespace opelab
