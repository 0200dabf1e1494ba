#pragma once

// Exhaustive walk over the positive-probability trajectory prefixes of an
// evaluation problem under the behavior policy.  This is the oracle machinery
// behind exact moments, covariance tables, and conditional expectations; it
// deliberately trades cost (exponential in depth) for exactness.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "opelab/error.hpp"
#include "opelab/mdp.hpp"

namespace opelab {

// Default cap on the number of positive-probability paths a single
// enumeration may visit.  Overridable per call; the CLI also honors the
// OPE_LAB_ENUM_CAP environment variable.
inline constexpr std::size_t kDefaultEnumCap = 10'000'000;

// View of one complete path (or prefix) handed to enumeration visitors.
// Spans alias the walker's stacks and are invalid after the visitor returns.
//   rho_step[i] = pi(a|s) / mu(a|s) at step i+1
//   rho_cum[i]  = product of rho_step[0..i]
//   prob        = probability of the path under the behavior policy
struct PathView {
  std::span<const int> states;
  std::span<const int> actions;
  std::span<const double> rewards;
  std::span<const double> rho_step;
  std::span<const double> rho_cum;
  double prob = 0.0;
};

// Calls visit(PathView) once per positive-probability prefix of length
// `depth` (depth = horizon enumerates complete trajectories).  Branches with
// zero probability under the behavior policy are pruned, so every visited
// path has prob > 0.  Throws SupportViolation if the target policy puts mass
// on an action the behavior policy never takes at a reached state, and
// EnumerationCapError once more than `cap` paths complete.
template <typename Visitor>
void for_each_prefix(const EvaluationProblem& problem, int depth,
                     std::size_t cap, Visitor&& visit) {
  const TabularMdp& mdp = problem.mdp;
  const int S = mdp.num_states;
  const int A = mdp.num_actions;

  std::vector<int> states(depth + 1);
  std::vector<int> actions(depth);
  std::vector<double> rewards(depth);
  std::vector<double> rho_step(depth);
  std::vector<double> rho_cum(depth);
  std::size_t visited = 0;

  // Explicit recursion over (t, partial path); depth is small by contract.
  auto walk = [&](auto&& self, int t, double prob) -> void {
    if (t > depth) {
      if (++visited > cap) {
        throw EnumerationCapError(
            "path enumeration exceeded cap of " + std::to_string(cap) +
                " trajectories; raise the cap or use the moment recursion",
            cap);
      }
      PathView view;
      view.states = std::span<const int>(states.data(), depth);
      view.actions = std::span<const int>(actions.data(), depth);
      view.rewards = std::span<const double>(rewards.data(), depth);
      view.rho_step = std::span<const double>(rho_step.data(), depth);
      view.rho_cum = std::span<const double>(rho_cum.data(), depth);
      view.prob = prob;
      visit(view);
      return;
    }
    const int s = states[t - 1];
    for (int a = 0; a < A; ++a) {
      const double mu = problem.behavior(s, a);
      const double pi = problem.target(s, a);
      if (mu <= 0.0) {
        if (pi > 0.0) {
          throw SupportViolation(
              "target policy has mass on action " + std::to_string(a) +
                  " at state " + std::to_string(s) +
                  " where the behavior policy has none",
              t, s, a);
        }
        continue;
      }
      actions[t - 1] = a;
      rewards[t - 1] = mdp.r(t, s, a);
      rho_step[t - 1] = pi / mu;
      rho_cum[t - 1] = (t == 1 ? 1.0 : rho_cum[t - 2]) * rho_step[t - 1];
      if (t == depth) {
        // Last step: the successor state is irrelevant to the prefix.
        states[t] = -1;
        self(self, t + 1, prob * mu);
        continue;
      }
      for (int s2 = 0; s2 < S; ++s2) {
        const double pr = mdp.p(s, a, s2);
        if (pr <= 0.0) continue;
        states[t] = s2;
        self(self, t + 1, prob * mu * pr);
      }
    }
  };

  for (int s0 = 0; s0 < S; ++s0) {
    const double p0 = mdp.initial_dist[s0];
    if (p0 <= 0.0) continue;
    states[0] = s0;
    if (depth == 0) {
      PathView view;
      view.prob = p0;
      visit(view);
      continue;
    }
    walk(walk, 1, p0);
  }
}

// Complete-trajectory walk (depth = horizon).
template <typename Visitor>
void for_each_path(const EvaluationProblem& problem, std::size_t cap,
                   Visitor&& visit) {
  for_each_prefix(problem, problem.mdp.horizon, cap,
                  std::forward<Visitor>(visit));
}

}  // namespace opelab
