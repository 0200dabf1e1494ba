#include "opelab/occupancy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace opelab {

namespace {

// Forward recursion for the state-action occupancy of one policy:
// d_1(s, a) = p1(s) policy(a|s); d_{t+1}(s', a') = policy(a'|s') *
// sum_{s,a} d_t(s, a) p(s'|s, a).
std::vector<double> policy_occupancy(const TabularMdp& mdp,
                                     const PolicyTable& policy) {
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const int T = mdp.horizon;
  const std::size_t sa = static_cast<std::size_t>(S) * A;
  std::vector<double> d(sa * T, 0.0);

  std::vector<double> state(S, 0.0);
  for (int s = 0; s < S; ++s) state[s] = mdp.initial_dist[s];
  for (int t = 1; t <= T; ++t) {
    double* slab = d.data() + static_cast<std::size_t>(t - 1) * sa;
    for (int s = 0; s < S; ++s) {
      if (state[s] <= 0.0) continue;
      for (int a = 0; a < A; ++a) {
        slab[static_cast<std::size_t>(s) * A + a] = state[s] * policy(s, a);
      }
    }
    if (t == T) break;
    std::vector<double> next(S, 0.0);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const double mass = slab[static_cast<std::size_t>(s) * A + a];
        if (mass <= 0.0) continue;
        for (int s2 = 0; s2 < S; ++s2) {
          const double pr = mdp.p(s, a, s2);
          if (pr > 0.0) next[s2] += mass * pr;
        }
      }
    }
    state = std::move(next);
  }
  return d;
}

}  // namespace

OccupancyTables occupancies(const EvaluationProblem& problem,
                            bool with_stationary) {
  const TabularMdp& mdp = problem.mdp;
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const int T = mdp.horizon;
  const std::size_t sa = static_cast<std::size_t>(S) * A;

  OccupancyTables occ;
  occ.num_states = S;
  occ.num_actions = A;
  occ.horizon = T;
  occ.d_mu = policy_occupancy(mdp, problem.behavior);
  occ.d_pi = policy_occupancy(mdp, problem.target);

  occ.ratio.assign(sa * T, 0.0);
  for (int t = 1; t <= T; ++t) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const std::size_t i = (static_cast<std::size_t>(t - 1) * S + s) * A + a;
        const double mu = occ.d_mu[i];
        const double pi = occ.d_pi[i];
        if (mu > 0.0) {
          occ.ratio[i] = pi / mu;
        } else if (pi > 0.0) {
          throw SupportViolation(
              "target occupancy positive where behavior occupancy is zero", t,
              s, a);
        }
        // mu = pi = 0: ratio stays 0 by convention.
      }
    }
  }

  // Discount-averaged behavior occupancy with geometric weights gamma^{t-1};
  // the weights always sum to at least 1, so gamma = 0 recovers d_1.
  occ.d_mu_avg.assign(sa, 0.0);
  const std::vector<double> disc = mdp.discounts();
  double weight_sum = 0.0;
  for (int t = 1; t <= T; ++t) {
    weight_sum += disc[t - 1];
    const double* slab = occ.d_mu.data() + static_cast<std::size_t>(t - 1) * sa;
    for (std::size_t i = 0; i < sa; ++i) occ.d_mu_avg[i] += disc[t - 1] * slab[i];
  }
  for (std::size_t i = 0; i < sa; ++i) occ.d_mu_avg[i] /= weight_sum;

  if (with_stationary) {
    try {
      occ.stationary_mu = stationary_distribution(mdp, problem.behavior);
      occ.stationary_pi = stationary_distribution(mdp, problem.target);
    } catch (const ConvergenceError&) {
      occ.stationary_mu.reset();
      occ.stationary_pi.reset();
    }
  }
  return occ;
}

std::vector<double> stationary_distribution(const TabularMdp& mdp,
                                            const PolicyTable& policy) {
  const int S = mdp.num_states;
  const int A = mdp.num_actions;

  // State transition matrix of the policy-induced chain, row-major.
  std::vector<double> chain(static_cast<std::size_t>(S) * S, 0.0);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const double q = policy(s, a);
      if (q <= 0.0) continue;
      for (int s2 = 0; s2 < S; ++s2) {
        chain[static_cast<std::size_t>(s) * S + s2] += q * mdp.p(s, a, s2);
      }
    }
  }

  std::vector<double> d(S, 1.0 / S);
  std::vector<double> next(S, 0.0);
  double residual = std::numeric_limits<double>::infinity();
  for (std::size_t iter = 0; iter < kStationaryMaxIter; ++iter) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int s = 0; s < S; ++s) {
      const double mass = d[s];
      if (mass <= 0.0) continue;
      const double* row = chain.data() + static_cast<std::size_t>(s) * S;
      for (int s2 = 0; s2 < S; ++s2) next[s2] += mass * row[s2];
    }
    residual = 0.0;
    for (int s = 0; s < S; ++s) residual += std::abs(next[s] - d[s]);
    d.swap(next);
    if (residual <= kStationaryTol) return d;
  }
  throw ConvergenceError(
      "power iteration did not reach residual " +
          std::to_string(kStationaryTol) + " (last residual " +
          std::to_string(residual) + "); the chain may be periodic",
      residual);
}

double kl_rate(const EvaluationProblem& problem) {
  const std::vector<double> d =
      stationary_distribution(problem.mdp, problem.behavior);
  const int S = problem.mdp.num_states;
  const int A = problem.mdp.num_actions;
  double rate = 0.0;
  for (int s = 0; s < S; ++s) {
    if (d[s] <= 0.0) continue;
    double kl = 0.0;
    for (int a = 0; a < A; ++a) {
      const double mu = problem.behavior(s, a);
      if (mu <= 0.0) continue;
      const double pi = problem.target(s, a);
      if (pi <= 0.0) return std::numeric_limits<double>::infinity();
      kl += mu * std::log(mu / pi);
    }
    rate += d[s] * kl;
  }
  // KL is nonnegative; clamp the rounding dust so callers can rely on it.
  return std::max(rate, 0.0);
}

ProblemDiagnostics diagnostics(const EvaluationProblem& problem) {
  const TabularMdp& mdp = problem.mdp;
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const OccupancyTables occ = occupancies(problem);

  std::vector<bool> reached(S, false);
  for (int t = 1; t <= occ.horizon; ++t) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        if (occ.mu_at(t, s, a) > 0.0) reached[s] = true;
      }
    }
  }

  ProblemDiagnostics diag;
  diag.c = kl_rate(problem);

  for (int s = 0; s < S; ++s) {
    if (!reached[s]) continue;
    double second = 0.0;
    for (int a = 0; a < A; ++a) {
      const double mu = problem.behavior(s, a);
      if (mu <= 0.0) continue;
      const double rho = problem.target(s, a) / mu;
      diag.u_rho = std::max(diag.u_rho, rho);
      second += mu * rho * rho;
    }
    diag.m_rho_sq = std::max(diag.m_rho_sq, second);
  }

  const std::vector<double> st_mu =
      occ.stationary_mu ? *occ.stationary_mu
                        : stationary_distribution(mdp, problem.behavior);
  const std::vector<double> st_pi =
      occ.stationary_pi ? *occ.stationary_pi
                        : stationary_distribution(mdp, problem.target);
  for (int s = 0; s < S; ++s) {
    if (st_mu[s] > kStationaryTol) {
      diag.u_s = std::max(diag.u_s, st_pi[s] / st_mu[s]);
    } else if (st_pi[s] > kStationaryTol) {
      diag.u_s = std::numeric_limits<double>::infinity();
    }
  }
  return diag;
}

double conditional_weight_check(const EvaluationProblem& problem, int t,
                                std::size_t cap) {
  if (t < 1 || t > problem.mdp.horizon) {
    throw ValidationError("conditional weight check: t out of range");
  }
  const int S = problem.mdp.num_states;
  const int A = problem.mdp.num_actions;
  const std::size_t sa = static_cast<std::size_t>(S) * A;

  // Accumulate P(prefix) * rho_{1:t} and P(prefix) per terminal (s_t, a_t).
  std::vector<double> weighted(sa, 0.0);
  std::vector<double> mass(sa, 0.0);
  for_each_prefix(problem, t, cap, [&](const PathView& path) {
    const std::size_t i =
        static_cast<std::size_t>(path.states[t - 1]) * A + path.actions[t - 1];
    weighted[i] += path.prob * path.rho_cum[t - 1];
    mass[i] += path.prob;
  });

  const OccupancyTables occ = occupancies(problem);
  double worst = 0.0;
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const std::size_t i = static_cast<std::size_t>(s) * A + a;
      if (mass[i] <= 0.0) continue;
      const double conditional = weighted[i] / mass[i];
      worst = std::max(worst, std::abs(conditional - occ.ratio_at(t, s, a)));
    }
  }
  return worst;
}

}  // namespace opelab
