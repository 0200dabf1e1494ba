#pragma once

// Core types for finite-horizon tabular Markov decision processes and the
// off-policy evaluation problems built on them.  Conventions used throughout
// the library:
//   - time steps are 1-based: t = 1..T;
//   - a trajectory is (s_1, a_1, r_1, ..., s_T, a_T, r_T);
//   - the discounted return is G = sum_t gamma^{t-1} r_t;
//   - rewards lie in [0, 1];
//   - probability vectors must sum to 1 within kProbTol.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "opelab/error.hpp"

namespace opelab {

// Tolerance for probability normalization (transition rows, policies, the
// initial distribution).
inline constexpr double kProbTol = 1e-12;

// A stationary stochastic policy: probs[s*num_actions + a] = pi(a|s).
struct PolicyTable {
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> probs;

  double operator()(int s, int a) const {
    return probs[static_cast<std::size_t>(s) * num_actions + a];
  }
  double& at(int s, int a) {
    return probs[static_cast<std::size_t>(s) * num_actions + a];
  }
  double at(int s, int a) const {
    return probs[static_cast<std::size_t>(s) * num_actions + a];
  }

  static PolicyTable uniform(int num_states, int num_actions);
};

// Finite-horizon tabular MDP.  Transitions are stationary; rewards are
// deterministic in (t, s, a) and may be time-dependent.  An absorbing state
// is optional metadata: when set, it must self-loop under every action with
// zero reward (used to represent episodes that end before the horizon).
struct TabularMdp {
  int num_states = 0;
  int num_actions = 0;
  int horizon = 0;
  double gamma = 1.0;
  // transition[(s*num_actions + a)*num_states + s2] = p(s2 | s, a)
  std::vector<double> transition;
  // reward[((t-1)*num_states + s)*num_actions + a] = r_t(s, a), t = 1..horizon
  std::vector<double> reward;
  std::vector<double> initial_dist;  // [s]
  std::optional<int> absorbing_state;
  bool stationary_reward = false;

  double p(int s, int a, int s2) const {
    return transition[(static_cast<std::size_t>(s) * num_actions + a) *
                          num_states +
                      s2];
  }
  double& p_at(int s, int a, int s2) {
    return transition[(static_cast<std::size_t>(s) * num_actions + a) *
                          num_states +
                      s2];
  }
  double r(int t, int s, int a) const {
    return reward[(static_cast<std::size_t>(t - 1) * num_states + s) *
                      num_actions +
                  a];
  }
  double& r_at(int t, int s, int a) {
    return reward[(static_cast<std::size_t>(t - 1) * num_states + s) *
                      num_actions +
                  a];
  }

  // Discount factors gamma^{t-1} for t = 1..horizon, computed by cumulative
  // product so gamma = 0 yields (1, 0, 0, ...) without evaluating 0^0.
  std::vector<double> discounts() const;

  // Builds an MDP whose reward table repeats the given stationary r(s, a)
  // at every time step.
  static TabularMdp stationary(int num_states, int num_actions, int horizon,
                               double gamma, std::vector<double> transition,
                               std::vector<double> reward_sa,
                               std::vector<double> initial_dist,
                               std::optional<int> absorbing_state = {});
};

// Copy of `mdp` with a new horizon.  Requires a stationary reward table
// (the broadcast is otherwise ambiguous).
TabularMdp with_horizon(const TabularMdp& mdp, int horizon);

// An off-policy evaluation problem: evaluate `target` from data collected
// under `behavior`.
struct EvaluationProblem {
  TabularMdp mdp;
  PolicyTable behavior;
  PolicyTable target;
};

// One sampled episode of exactly `horizon` steps.  `prob_mu` is the exact
// probability of the episode under the behavior policy when known.
struct Trajectory {
  std::vector<int> states;
  std::vector<int> actions;
  std::vector<double> rewards;
  std::optional<double> prob_mu;

  int length() const { return static_cast<int>(states.size()); }

  // Discounted return sum_t discounts[t-1] * r_t.
  double return_value(std::span<const double> discounts) const;
};

using TrajectoryBatch = std::vector<Trajectory>;

// One structural defect found by validate_problem.  Indices are -1 where a
// coordinate does not apply.
struct Violation {
  std::string what;
  int t = -1;
  int s = -1;
  int a = -1;
};

// Checks shapes, row normalization, reward range, the absorbing-state
// invariant, and absolute continuity (target support within behavior support
// on every state reachable under the behavior policy within the horizon).
// Returns every violation found; empty means valid.
std::vector<Violation> validate_problem(const EvaluationProblem& problem);

// Throws ValidationError listing the first few violations, if any.
void ensure_valid(const EvaluationProblem& problem);

// Just the absolute-continuity part of validation: throws SupportViolation
// at the first behavior-reachable (s, a) where the target has mass and the
// behavior does not.  (This is the exact condition under which the
// importance-weighted estimators are well defined.)
void ensure_support(const EvaluationProblem& problem);

// Exact target value v^pi = E_pi[sum_t gamma^{t-1} r_t] by backward dynamic
// programming over (t, s).
double target_value(const EvaluationProblem& problem);

// Per-step ratios rho_t = pi(a_t|s_t) / mu(a_t|s_t) and their cumulative
// products rho_{1:t} along one trajectory.
struct StepRatios {
  std::vector<double> per_step;
  std::vector<double> cumulative;
};

// Throws SupportViolation if the trajectory visits an action with
// mu(a_t|s_t) = 0.
StepRatios step_ratios(const EvaluationProblem& problem,
                       const Trajectory& traj);

}  // namespace opelab
