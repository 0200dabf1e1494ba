#pragma once

// Checkers for the sufficient conditions under which the estimator variances
// are provably ordered, and for the covariance-gap inequality underlying
// them.  All quantities are computed exactly by enumeration; a condition
// "holds" only when every pair in the relevant family clears -kCovSlack, so
// a holding condition implies the corresponding variance ordering.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "opelab/mdp.hpp"
#include "opelab/oracle.hpp"

namespace opelab {

// Slack for covariance sign checks (exact zeros accumulate rounding).
inline constexpr double kCovSlack = 1e-12;

struct PairWitness {
  std::string family;  // which inequality family the pair belongs to
  int t = 0;
  int k = 0;
  double lhs = 0.0;  // quantity required to dominate
  double rhs = 0.0;  // quantity it must dominate (0 for sign conditions)
};

struct ConditionReport {
  bool holds = true;
  double margin = 0.0;  // min over pairs of lhs - rhs
  int pairs_checked = 0;
  std::vector<PairWitness> violations;  // empty iff holds
};

// Sufficient condition for Var(PDIS) <= Var(IS).  Two pair families, both
// over 1 <= t <= k <= T and both computed exactly from one enumeration:
//   "correlation":    Cov(rho_{1:k}, r_t * rho_{1:k}) >= 0
//                     (the nonnegative-correlation form of the condition);
//   "second_moment":  E[rho_{1:k}^2 r_t r_k] >= E[rho_{1:t} rho_{1:k} r_t r_k]
//                     (the pairwise comparison the ordering decomposes
//                     into; the remaining gap to the full-product weight is
//                     unconditional because squared tail weights have
//                     conditional mean >= 1 and rewards are nonnegative).
// The report holds only when every pair of BOTH families clears -kCovSlack;
// a holding report therefore implies the variance ordering.  When the
// initial distribution is not a point mass, the families are additionally
// checked from each positive-mass initial state on its own (witness families
// carry an "[s1=..]" suffix).
ConditionReport theorem1_condition(const EvaluationProblem& problem,
                                   std::size_t cap = kDefaultEnumCap);

// Sufficient condition for Var(SIS) <= Var(PDIS): per-pair covariance
// dominance of the cumulative-weight summands over the occupancy-weighted
// summands,
//     Cov(rho_{1:t} r_t, rho_{1:k} r_k) >= Cov(w*_t r_t, w*_k r_k)
// for all 1 <= t <= k <= T.  Diagonal pairs always hold (law of total
// variance); they are checked anyway.  Holding implies the ordering.
ConditionReport theorem2_condition(const EvaluationProblem& problem,
                                   std::size_t cap = kDefaultEnumCap);

// The variance-gap lower bound for sums of conditioned summands.  For
// Y_t = the summand at step t and X_t = the conditioning statistic,
//   lhs = Var(sum_t Y_t) - Var(sum_t E[Y_t | X_t])
//   rhs = 2 * sum_{t<k} (E[Y_t Y_k] - E[E[Y_t|X_t] E[Y_k|X_k]])
// and lhs >= rhs always.  Instantiations:
//   kPrefix:      Y_t = gamma^{t-1} rho_{1:T} r_t (full-product weight)
//                 conditioned on the prefix (s_1, a_1, .., s_t, a_t), whose
//                 projection is the per-decision summand
//                 -> lhs = Var(IS) - Var(PDIS)
//   kStateAction: Y_t = gamma^{t-1} rho_{1:t} r_t conditioned on (s_t, a_t),
//                 whose projection is the occupancy-weighted summand
//                 -> lhs = Var(PDIS) - Var(SIS)
//   kIdentity:    Y_t = gamma^{t-1} rho_{1:t} r_t conditioned on the whole
//                 trajectory -> lhs = rhs = 0.
// Conditional expectations are computed by grouping enumerated paths, not
// via closed-form identities, so the inequality is tested end to end.
enum class Lemma2Conditioning { kPrefix, kStateAction, kIdentity };

struct VarianceGap {
  double lhs = 0.0;
  double rhs = 0.0;
};

VarianceGap lemma2_gap(const EvaluationProblem& problem,
                       Lemma2Conditioning conditioning,
                       std::size_t cap = kDefaultEnumCap);

// Randomized implication check: for seeds 0..n-1, generate a problem, test
// the chosen condition, and when it holds verify the implied ordering of
// exact variances (slack kCovSlack scaled to the variance magnitude).  A
// "violation" is a seed where the condition holds but the ordering fails —
// there must be none for the theorems to be implemented correctly.
enum class OrderingTheorem { kPdisLeqIs, kSisLeqPdis };

struct ImplicationViolation {
  std::uint64_t seed = 0;
  double lhs_variance = 0.0;
  double rhs_variance = 0.0;
};

struct ImplicationSummary {
  int n = 0;
  int condition_held = 0;
  int ordering_held_given_condition = 0;
  std::vector<ImplicationViolation> violations;
};

ImplicationSummary verify_implication(
    const std::function<EvaluationProblem(std::uint64_t)>& generator, int n,
    OrderingTheorem theorem, std::size_t cap = kDefaultEnumCap,
    unsigned workers = 1);

}  // namespace opelab
