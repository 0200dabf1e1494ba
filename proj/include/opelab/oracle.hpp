#pragma once

// Exact (closed-form) moments of the estimators, by two independent routes:
// brute-force trajectory enumeration, and backward moment recursions that
// run in time polynomial in |S|, |A|, T.  The two must agree; tests and the
// acceptance suite hold them to 1e-9 of each other.

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "opelab/estimators.hpp"
#include "opelab/mdp.hpp"
#include "opelab/paths.hpp"

namespace opelab {

// Discrete law of an estimator's per-trajectory value.  One atom per
// enumerated trajectory; equal values are NOT merged (compare moments, not
// atom lists, unless you merge first).
struct ReturnDistribution {
  std::vector<std::pair<double, double>> atoms;  // (value, probability)

  double total_probability() const;
  double mean() const;
  double variance() const;
  // Copy with atoms sorted by value and values within `tol` of each other
  // combined; for readable laws of small problems.
  ReturnDistribution merged(double tol = 1e-12) const;
};

// Law of the per-trajectory estimator value under the behavior policy, by
// full enumeration.  SIS resolves oracle weights from the problem; ASIS uses
// the table carried by `kind`.
ReturnDistribution enumerate_returns(const EvaluationProblem& problem,
                                     const EstimatorKind& kind,
                                     std::size_t cap = kDefaultEnumCap);

enum class MomentMethod { kEnumeration, kMomentDp };

std::string method_name(MomentMethod method);

// Exact first and second moments of one estimator.  `overflow_t` is set
// (and variance is +infinity) when the moment recursion left the double
// range at some time step, which legitimately happens for exponentially
// growing IS moments at large horizons.
struct MomentReport {
  std::string estimator;
  double mean = 0.0;
  double variance = 0.0;
  MomentMethod method = MomentMethod::kEnumeration;
  std::optional<int> overflow_t;
};

// Enumeration-based moments (streaming; does not materialize the atom list).
MomentReport exact_moments(const EvaluationProblem& problem,
                           const EstimatorKind& kind,
                           std::size_t cap = kDefaultEnumCap);

// Backward-recursion moments, polynomial in |S||A|T:
//   IS    tracks E[Y], E[Z], E[Y^2], E[YZ], E[Z^2] per state where
//         Y_t = rho_{t:T} and Z_t = rho_{t:T} * sum_{k>=t} gamma^{k-t} r_k
//         restricted to the weight tail (exact factorization of the
//         product-form estimator);
//   PDIS  tracks E[X], E[X^2] for the tail X_t = rho_t (r_t + gamma X_{t+1});
//   SIS / ASIS track the partial sums of the state-action-weighted rewards.
MomentReport moment_dp_variance(const EvaluationProblem& problem,
                                const EstimatorKind& kind);

// Per-pair covariance tables over 1 <= t <= k <= T for the summand
// decompositions (entries with t > k are zero; the tables are symmetric in
// meaning):
//   pdis(t, k) = Cov(gamma^{t-1} rho_{1:t} r_t, gamma^{k-1} rho_{1:k} r_k)
//   sis(t, k)  = Cov(gamma^{t-1} w*_t r_t,      gamma^{k-1} w*_k r_k)
// Summing each table (diagonal once, off-diagonal twice) reproduces the
// PDIS / SIS variances.
struct CovarianceTerms {
  int horizon = 0;
  std::vector<double> c_pdis;  // [(t-1)*horizon + (k-1)], t <= k
  std::vector<double> c_sis;

  double pdis(int t, int k) const {
    return c_pdis[static_cast<std::size_t>(t - 1) * horizon + (k - 1)];
  }
  double sis(int t, int k) const {
    return c_sis[static_cast<std::size_t>(t - 1) * horizon + (k - 1)];
  }
  double pdis_total() const;
  double sis_total() const;
};

CovarianceTerms exact_cov_terms(const EvaluationProblem& problem,
                                std::size_t cap = kDefaultEnumCap);

// Conditional expectations of the trajectory IS weight, by enumeration.
//   kStateAction: E[rho_{1:t} | s_t = s, a_t = a], keyed by the pair (s, a);
//                 reference = d_t^pi(s,a) / d_t^mu(s,a).
//   kPrefix:      E[rho_{1:T} | (s_1, a_1, ..., s_t, a_t)], keyed by the
//                 whole prefix; reference = rho_{1:t} (the tail averages to
//                 its mean, 1, under the behavior policy).
enum class ConditioningStatistic { kStateAction, kPrefix };

struct ConditionalEntry {
  std::vector<std::pair<int, int>> key;  // (s, a) pairs; length 1 or t
  double value = 0.0;
  double reference = 0.0;
  double mass = 0.0;  // probability of the conditioning event
};

std::vector<ConditionalEntry> conditional_expectation(
    const EvaluationProblem& problem, int t, ConditioningStatistic statistic,
    std::size_t cap = kDefaultEnumCap);

}  // namespace opelab
