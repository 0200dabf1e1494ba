#include "opelab/scenarios.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "opelab/rng.hpp"

namespace opelab {

namespace {

// Shared chassis of the three counterexamples: start state 0, merge state 1,
// absorbing state 2; both actions move 0 -> 1 -> 2; uniform behavior policy;
// horizon 2; gamma 1.  Only the target policy and the reward table differ.
EvaluationProblem counterexample_base(double pi_start_a0, double pi_mid_a0,
                                      double r_start_a0, double r_start_a1,
                                      double r_mid_a0, double r_mid_a1) {
  const int S = 3;
  const int A = 2;
  std::vector<double> transition(static_cast<std::size_t>(S) * A * S, 0.0);
  for (int a = 0; a < A; ++a) {
    transition[(0 * A + a) * S + 1] = 1.0;  // start -> merge
    transition[(1 * A + a) * S + 2] = 1.0;  // merge -> absorbing
    transition[(2 * A + a) * S + 2] = 1.0;
  }
  const std::vector<double> reward_sa = {r_start_a0, r_start_a1,  // state 0
                                         r_mid_a0,   r_mid_a1,    // state 1
                                         0.0,        0.0};        // absorbing
  const std::vector<double> initial = {1.0, 0.0, 0.0};

  EvaluationProblem problem;
  problem.mdp = TabularMdp::stationary(S, A, /*horizon=*/2, /*gamma=*/1.0,
                                       transition, reward_sa, initial,
                                       /*absorbing_state=*/2);
  problem.behavior = PolicyTable::uniform(S, A);
  problem.target = PolicyTable::uniform(S, A);
  problem.target.at(0, 0) = pi_start_a0;
  problem.target.at(0, 1) = 1.0 - pi_start_a0;
  problem.target.at(1, 0) = pi_mid_a0;
  problem.target.at(1, 1) = 1.0 - pi_mid_a0;
  return problem;
}

}  // namespace

CounterexampleFixture counterexample_fixture(int which) {
  CounterexampleFixture fix;
  fix.example = which;
  fix.path_probs = {0.25, 0.25, 0.25, 0.25};
  switch (which) {
    case 1:
      fix.is_returns = {1.44, 1.92, 0.96, 1.28};
      fix.pdis_returns = {1.2, 2.16, 0.8, 1.44};
      fix.sis_returns = {1.2, 2.0, 0.8, 1.6};
      fix.mean = 1.4;
      fix.var_is = 0.12;
      fix.var_pdis = 0.2448;
      fix.var_sis = 0.2;
      fix.ordering = {"IS", "SIS", "PDIS"};
      return fix;
    case 2:
      fix.is_returns = {0.0, 1.44, 0.64, 1.92};
      fix.pdis_returns = {0.0, 1.44, 0.8, 1.76};
      fix.sis_returns = {0.0, 1.2, 0.8, 2.0};
      fix.mean = 1.0;
      fix.var_is = 0.5424;
      fix.var_pdis = 0.4528;
      fix.var_sis = 0.52;
      fix.ordering = {"PDIS", "SIS", "IS"};
      return fix;
    case 3:
      fix.is_returns = {0.0, 0.96, 0.96, 1.28};
      fix.pdis_returns = {0.0, 0.96, 0.8, 1.44};
      fix.sis_returns = {0.0, 0.8, 0.8, 1.6};
      fix.mean = 0.8;
      fix.var_is = 0.2304;
      fix.var_pdis = 0.2688;
      fix.var_sis = 0.32;
      fix.ordering = {"IS", "PDIS", "SIS"};
      return fix;
    default:
      throw ValidationError("counterexample index must be 1, 2, or 3, got " +
                            std::to_string(which));
  }
}

EvaluationProblem counterexample_mdp(int which) {
  switch (which) {
    case 1:
      // Rewards 1 everywhere except the merge state's first action; the
      // start-state reward is action-independent, so the full-product weight
      // is the only noise source there.
      return counterexample_base(0.6, 0.6, 1.0, 1.0, 0.0, 1.0);
    case 2:
      // Target prefers opposite actions at the two states; rewards follow
      // the second action at both.
      return counterexample_base(0.6, 0.4, 0.0, 1.0, 0.0, 1.0);
    case 3:
      // Same target as example 1, rewards as example 2.
      return counterexample_base(0.6, 0.6, 0.0, 1.0, 0.0, 1.0);
    default:
      throw ValidationError("counterexample index must be 1, 2, or 3, got " +
                            std::to_string(which));
  }
}

EvaluationProblem two_lane(int horizon) {
  // Short horizons collapse the two lanes before the variance separation the
  // construction is meant to exhibit can appear.
  if (horizon < 4) {
    throw ValidationError("two_lane requires horizon >= 4, got " +
                          std::to_string(horizon));
  }
  const int T = horizon;
  // State layout: 0 = start; 1..T-1 = rewarding lane at times 2..T;
  // T..2T-2 = zero lane at times 2..T; 2T-1 = absorbing.
  const int S = 2 * T;
  const int A = 2;
  const int absorbing = S - 1;
  auto lane1 = [&](int t) { return t - 1; };      // t in 2..T
  auto lane2 = [&](int t) { return T + t - 2; };  // t in 2..T

  std::vector<double> transition(static_cast<std::size_t>(S) * A * S, 0.0);
  auto link = [&](int s, int s2) {
    for (int a = 0; a < A; ++a) {
      transition[(static_cast<std::size_t>(s) * A + a) * S + s2] = 1.0;
    }
  };
  // The two actions at the start pick the lane; inside a lane both actions
  // continue down the chain.
  transition[(0 * A + 0) * S + lane1(2)] = 1.0;
  transition[(0 * A + 1) * S + lane2(2)] = 1.0;
  for (int t = 2; t < T; ++t) {
    link(lane1(t), lane1(t + 1));
    link(lane2(t), lane2(t + 1));
  }
  link(lane1(T), absorbing);
  link(lane2(T), absorbing);
  link(absorbing, absorbing);

  std::vector<double> reward_sa(static_cast<std::size_t>(S) * A, 0.0);
  reward_sa[0 * A + 0] = 1.0;  // entering the rewarding lane
  for (int t = 2; t <= T; ++t) {
    reward_sa[static_cast<std::size_t>(lane1(t)) * A + 0] = 1.0;
    reward_sa[static_cast<std::size_t>(lane1(t)) * A + 1] = 1.0;
  }

  std::vector<double> initial(S, 0.0);
  initial[0] = 1.0;

  EvaluationProblem problem;
  problem.mdp = TabularMdp::stationary(S, A, T, /*gamma=*/1.0, transition,
                                       reward_sa, initial, absorbing);
  problem.behavior = PolicyTable::uniform(S, A);
  problem.target = PolicyTable::uniform(S, A);
  problem.target.at(0, 0) = 1.0;  // target commits to the rewarding lane
  problem.target.at(0, 1) = 0.0;
  return problem;
}

EvaluationProblem random_ergodic(std::uint64_t seed, int num_states,
                                 int num_actions, int horizon, double gamma,
                                 double policy_gap) {
  if (num_states < 1 || num_actions < 2) {
    throw ValidationError(
        "random_ergodic requires at least one state and two actions");
  }
  if (!(policy_gap >= 0.0 && policy_gap < 1.0)) {
    throw ValidationError("random_ergodic requires policy_gap in [0, 1)");
  }
  const int S = num_states;
  const int A = num_actions;
  Xoshiro256pp rng = Xoshiro256pp::stream(seed, 0);

  // Strictly positive kernel: floor every raw weight away from zero before
  // normalizing, so the chain is irreducible and aperiodic by construction.
  std::vector<double> transition(static_cast<std::size_t>(S) * A * S);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      double* row = transition.data() + (static_cast<std::size_t>(s) * A + a) * S;
      double sum = 0.0;
      for (int s2 = 0; s2 < S; ++s2) {
        row[s2] = 0.1 + rng.next_double();
        sum += row[s2];
      }
      for (int s2 = 0; s2 < S; ++s2) row[s2] /= sum;
    }
  }

  std::vector<double> reward_sa(static_cast<std::size_t>(S) * A);
  for (double& r : reward_sa) r = rng.next_double();

  std::vector<double> initial(S);
  double init_sum = 0.0;
  for (int s = 0; s < S; ++s) {
    initial[s] = 0.1 + rng.next_double();
    init_sum += initial[s];
  }
  for (int s = 0; s < S; ++s) initial[s] /= init_sum;

  EvaluationProblem problem;
  problem.mdp = TabularMdp::stationary(S, A, horizon, gamma, transition,
                                       reward_sa, initial);
  problem.behavior = PolicyTable::uniform(S, A);

  // Target: shift mass m <= policy_gap from one action to another per state,
  // keeping every probability strictly positive.  Per-state total variation
  // from the behavior policy is exactly m.
  problem.target = PolicyTable::uniform(S, A);
  const double uniform = 1.0 / A;
  for (int s = 0; s < S; ++s) {
    const int gain = static_cast<int>(rng.next_double() * A) % A;
    int lose = static_cast<int>(rng.next_double() * (A - 1)) % (A - 1);
    if (lose >= gain) ++lose;
    const double scale = 0.5 + 0.5 * rng.next_double();
    const double m = std::min(policy_gap * scale, 0.95 * uniform);
    problem.target.at(s, gain) = uniform + m;
    problem.target.at(s, lose) = uniform - m;
  }
  return problem;
}

}  // namespace opelab
