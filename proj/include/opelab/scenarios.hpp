#pragma once

// Built-in problem families: the three two-step counterexamples that realize
// every strict ordering of the IS / PDIS / SIS variances, the two-lane
// construction whose SIS variance grows as T^2, and seeded random ergodic
// problems for property tests and sweeps.

#include <array>
#include <cstdint>

#include "opelab/mdp.hpp"

namespace opelab {

// Reference values for one counterexample: per-path estimator returns under
// the behavior policy (all four action paths are equiprobable), their common
// mean, and the population variances.  These are frozen reference numbers;
// counterexample_mdp(k) must reproduce them exactly.
struct CounterexampleFixture {
  int example = 0;
  // Paths ordered (a1,a1), (a1,a2), (a2,a1), (a2,a2).
  std::array<double, 4> is_returns{};
  std::array<double, 4> pdis_returns{};
  std::array<double, 4> sis_returns{};
  std::array<double, 4> path_probs{};
  double mean = 0.0;
  double var_is = 0.0;
  double var_pdis = 0.0;
  double var_sis = 0.0;
  // Strict variance ordering, ascending, as estimator names.
  std::array<const char*, 3> ordering{};
};

// which in {1, 2, 3}:
//   1: Var(IS) < Var(SIS) < Var(PDIS)
//   2: Var(PDIS) < Var(SIS) < Var(IS)
//   3: Var(IS) < Var(PDIS) < Var(SIS)
CounterexampleFixture counterexample_fixture(int which);

// The tabular MDP realizing fixture `which`: three states (start, middle,
// absorbing), two actions, horizon 2, gamma = 1, uniform behavior policy.
EvaluationProblem counterexample_mdp(int which);

// Two-lane construction with horizon T >= 4 (shorter horizons are rejected
// with ValidationError): from the start state the
// behavior policy splits evenly between a rewarding lane (reward 1 per step)
// and a zero lane, while the target policy commits to the rewarding lane.
// Each lane is a deterministic chain of per-time states, so the SIS weight
// is 2 on the rewarding lane and 0 on the other at every step; the SIS
// estimate is uniform on {0, 2T}, with mean v^pi = T and variance T^2.
EvaluationProblem two_lane(int horizon);

// Seeded random ergodic problem: strictly positive transition kernel,
// uniform behavior policy, target within per-state total variation
// `policy_gap` of it (and strictly positive), i.i.d. uniform [0, 1] rewards
// frozen per (s, a).  Bitwise deterministic in the arguments.
EvaluationProblem random_ergodic(std::uint64_t seed, int num_states,
                                 int num_actions, int horizon, double gamma,
                                 double policy_gap);

}  // namespace opelab
