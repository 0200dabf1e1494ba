#include "opelab/mdp.hpp"

#include <cmath>
#include <cstddef>
#include <queue>
#include <sstream>
#include <utility>

namespace opelab {

PolicyTable PolicyTable::uniform(int num_states, int num_actions) {
  PolicyTable table;
  table.num_states = num_states;
  table.num_actions = num_actions;
  table.probs.assign(static_cast<std::size_t>(num_states) * num_actions,
                     1.0 / num_actions);
  return table;
}

std::vector<double> TabularMdp::discounts() const {
  std::vector<double> disc(horizon);
  double d = 1.0;
  for (int t = 0; t < horizon; ++t) {
    disc[t] = d;
    d *= gamma;
  }
  return disc;
}

TabularMdp TabularMdp::stationary(int num_states, int num_actions, int horizon,
                                  double gamma, std::vector<double> transition,
                                  std::vector<double> reward_sa,
                                  std::vector<double> initial_dist,
                                  std::optional<int> absorbing_state) {
  TabularMdp mdp;
  mdp.num_states = num_states;
  mdp.num_actions = num_actions;
  mdp.horizon = horizon;
  mdp.gamma = gamma;
  mdp.transition = std::move(transition);
  mdp.initial_dist = std::move(initial_dist);
  mdp.absorbing_state = absorbing_state;
  mdp.stationary_reward = true;
  mdp.reward.reserve(static_cast<std::size_t>(horizon) * reward_sa.size());
  for (int t = 0; t < horizon; ++t) {
    mdp.reward.insert(mdp.reward.end(), reward_sa.begin(), reward_sa.end());
  }
  return mdp;
}

TabularMdp with_horizon(const TabularMdp& mdp, int horizon) {
  if (!mdp.stationary_reward) {
    throw ValidationError(
        "with_horizon requires a stationary reward table; this MDP has "
        "time-dependent rewards");
  }
  const std::size_t per_step =
      static_cast<std::size_t>(mdp.num_states) * mdp.num_actions;
  std::vector<double> reward_sa(mdp.reward.begin(),
                                mdp.reward.begin() + per_step);
  return TabularMdp::stationary(mdp.num_states, mdp.num_actions, horizon,
                                mdp.gamma, mdp.transition, reward_sa,
                                mdp.initial_dist, mdp.absorbing_state);
}

double Trajectory::return_value(std::span<const double> discounts) const {
  double g = 0.0;
  for (std::size_t t = 0; t < rewards.size(); ++t) g += discounts[t] * rewards[t];
  return g;
}

namespace {

bool near_one(double x) { return std::abs(x - 1.0) <= kProbTol; }

void check_policy(const PolicyTable& policy, const TabularMdp& mdp,
                  const char* label, std::vector<Violation>& out) {
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  if (policy.num_states != S || policy.num_actions != A ||
      policy.probs.size() != static_cast<std::size_t>(S) * A) {
    out.push_back({std::string(label) + " policy shape does not match the MDP",
                   -1, -1, -1});
    return;
  }
  for (int s = 0; s < S; ++s) {
    double sum = 0.0;
    for (int a = 0; a < A; ++a) {
      const double q = policy(s, a);
      if (q < 0.0) {
        out.push_back({std::string(label) + " policy has a negative entry", -1,
                       s, a});
      }
      sum += q;
    }
    if (!near_one(sum)) {
      out.push_back({std::string(label) + " policy row does not sum to 1", -1,
                     s, -1});
    }
  }
}

// States with positive behavior occupancy at some t <= horizon.
std::vector<bool> reachable_states(const EvaluationProblem& problem) {
  const TabularMdp& mdp = problem.mdp;
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  std::vector<bool> reached(S, false);
  std::vector<bool> frontier(S, false);
  for (int s = 0; s < S; ++s) {
    if (mdp.initial_dist[s] > 0.0) reached[s] = frontier[s] = true;
  }
  for (int t = 1; t < mdp.horizon; ++t) {
    std::vector<bool> next(S, false);
    bool grew = false;
    for (int s = 0; s < S; ++s) {
      if (!frontier[s]) continue;
      for (int a = 0; a < A; ++a) {
        if (problem.behavior(s, a) <= 0.0) continue;
        for (int s2 = 0; s2 < S; ++s2) {
          if (mdp.p(s, a, s2) > 0.0 && !next[s2]) next[s2] = true;
        }
      }
    }
    for (int s = 0; s < S; ++s) {
      if (next[s] && !reached[s]) {
        reached[s] = true;
        grew = true;
      }
    }
    frontier = std::move(next);
    if (!grew) break;  // reachable set saturated before the horizon
  }
  return reached;
}

}  // namespace

std::vector<Violation> validate_problem(const EvaluationProblem& problem) {
  const TabularMdp& mdp = problem.mdp;
  std::vector<Violation> out;

  if (mdp.num_states <= 0 || mdp.num_actions <= 0) {
    out.push_back({"num_states and num_actions must be positive", -1, -1, -1});
    return out;
  }
  if (mdp.horizon <= 0) {
    out.push_back({"horizon must be at least 1", -1, -1, -1});
    return out;
  }
  if (!(mdp.gamma >= 0.0 && mdp.gamma <= 1.0)) {
    out.push_back({"gamma must lie in [0, 1]", -1, -1, -1});
  }

  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const int T = mdp.horizon;
  const std::size_t sa = static_cast<std::size_t>(S) * A;

  if (mdp.transition.size() != sa * S) {
    out.push_back({"transition tensor has wrong size", -1, -1, -1});
    return out;
  }
  if (mdp.reward.size() != sa * T) {
    out.push_back({"reward table has wrong size", -1, -1, -1});
    return out;
  }
  if (mdp.initial_dist.size() != static_cast<std::size_t>(S)) {
    out.push_back({"initial distribution has wrong size", -1, -1, -1});
    return out;
  }

  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      double sum = 0.0;
      for (int s2 = 0; s2 < S; ++s2) {
        const double pr = mdp.p(s, a, s2);
        if (pr < 0.0) {
          out.push_back({"negative transition probability", -1, s, a});
        }
        sum += pr;
      }
      if (!near_one(sum)) {
        out.push_back({"transition row does not sum to 1", -1, s, a});
      }
    }
  }

  for (int t = 1; t <= T; ++t) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const double r = mdp.r(t, s, a);
        if (!(r >= 0.0 && r <= 1.0)) {
          out.push_back({"reward outside [0, 1]", t, s, a});
        }
      }
    }
  }

  double init_sum = 0.0;
  for (int s = 0; s < S; ++s) {
    if (mdp.initial_dist[s] < 0.0) {
      out.push_back({"negative initial probability", -1, s, -1});
    }
    init_sum += mdp.initial_dist[s];
  }
  if (!near_one(init_sum)) {
    out.push_back({"initial distribution does not sum to 1", -1, -1, -1});
  }

  check_policy(problem.behavior, mdp, "behavior", out);
  check_policy(problem.target, mdp, "target", out);

  if (mdp.absorbing_state) {
    const int z = *mdp.absorbing_state;
    if (z < 0 || z >= S) {
      out.push_back({"absorbing state index out of range", -1, z, -1});
    } else {
      for (int a = 0; a < A; ++a) {
        if (std::abs(mdp.p(z, a, z) - 1.0) > kProbTol) {
          out.push_back({"absorbing state does not self-loop", -1, z, a});
        }
      }
      for (int t = 1; t <= T; ++t) {
        for (int a = 0; a < A; ++a) {
          if (mdp.r(t, z, a) != 0.0) {
            out.push_back({"absorbing state has nonzero reward", t, z, a});
          }
        }
      }
    }
  }

  // Absolute continuity on states the behavior policy can actually reach.
  if (out.empty()) {
    const std::vector<bool> reached = reachable_states(problem);
    for (int s = 0; s < S; ++s) {
      if (!reached[s]) continue;
      for (int a = 0; a < A; ++a) {
        if (problem.target(s, a) > 0.0 && problem.behavior(s, a) <= 0.0) {
          out.push_back(
              {"target policy puts mass outside behavior support", -1, s, a});
        }
      }
    }
  }

  return out;
}

void ensure_valid(const EvaluationProblem& problem) {
  const std::vector<Violation> violations = validate_problem(problem);
  if (violations.empty()) return;
  std::ostringstream msg;
  msg << "invalid evaluation problem (" << violations.size() << " defect"
      << (violations.size() == 1 ? "" : "s") << "):";
  const std::size_t shown = std::min<std::size_t>(violations.size(), 5);
  for (std::size_t i = 0; i < shown; ++i) {
    const Violation& v = violations[i];
    msg << " [" << v.what;
    if (v.t >= 0) msg << " t=" << v.t;
    if (v.s >= 0) msg << " s=" << v.s;
    if (v.a >= 0) msg << " a=" << v.a;
    msg << "]";
  }
  if (shown < violations.size()) msg << " ...";
  throw ValidationError(msg.str());
}

void ensure_support(const EvaluationProblem& problem) {
  const std::vector<bool> reached = reachable_states(problem);
  const int S = problem.mdp.num_states;
  const int A = problem.mdp.num_actions;
  for (int s = 0; s < S; ++s) {
    if (!reached[s]) continue;
    for (int a = 0; a < A; ++a) {
      if (problem.target(s, a) > 0.0 && problem.behavior(s, a) <= 0.0) {
        throw SupportViolation(
            "target policy has mass on action " + std::to_string(a) +
                " at reachable state " + std::to_string(s) +
                " where the behavior policy has none",
            -1, s, a);
      }
    }
  }
}

double target_value(const EvaluationProblem& problem) {
  const TabularMdp& mdp = problem.mdp;
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  // v_t(s) = E_pi[sum_{k>=t} gamma^{k-t} r_k | s_t = s]; the value is
  // v_1 averaged over the initial distribution.
  std::vector<double> v(S, 0.0);
  for (int t = mdp.horizon; t >= 1; --t) {
    std::vector<double> prev(S, 0.0);
    for (int s = 0; s < S; ++s) {
      double sum = 0.0;
      for (int a = 0; a < A; ++a) {
        const double pi = problem.target(s, a);
        if (pi <= 0.0) continue;
        double cont = 0.0;
        if (t < mdp.horizon) {
          for (int s2 = 0; s2 < S; ++s2) {
            const double pr = mdp.p(s, a, s2);
            if (pr > 0.0) cont += pr * v[s2];
          }
        }
        sum += pi * (mdp.r(t, s, a) + mdp.gamma * cont);
      }
      prev[s] = sum;
    }
    v = std::move(prev);
  }
  double value = 0.0;
  for (int s = 0; s < S; ++s) value += mdp.initial_dist[s] * v[s];
  return value;
}

StepRatios step_ratios(const EvaluationProblem& problem,
                       const Trajectory& traj) {
  const int T = problem.mdp.horizon;
  if (traj.length() != T) {
    throw ValidationError("trajectory length " +
                          std::to_string(traj.length()) +
                          " does not match horizon " + std::to_string(T));
  }
  StepRatios out;
  out.per_step.resize(T);
  out.cumulative.resize(T);
  double cum = 1.0;
  for (int t = 1; t <= T; ++t) {
    const int s = traj.states[t - 1];
    const int a = traj.actions[t - 1];
    const double mu = problem.behavior(s, a);
    if (mu <= 0.0) {
      throw SupportViolation(
          "trajectory takes action " + std::to_string(a) + " at state " +
              std::to_string(s) + " with zero behavior probability",
          t, s, a);
    }
    out.per_step[t - 1] = problem.target(s, a) / mu;
    cum *= out.per_step[t - 1];
    out.cumulative[t - 1] = cum;
  }
  return out;
}

}  // namespace opelab
