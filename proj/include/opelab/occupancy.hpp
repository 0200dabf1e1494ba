#pragma once

// Exact occupancy measures, stationary distributions, and the likelihood-rate
// / boundedness diagnostics that govern how estimator variance scales with
// the horizon.

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "opelab/mdp.hpp"
#include "opelab/paths.hpp"

namespace opelab {

// Tolerance for occupancy-table normalization checks.
inline constexpr double kOccTol = 1e-10;

// Power-iteration parameters for stationary distributions (L1 residual).
inline constexpr double kStationaryTol = 1e-10;
inline constexpr std::size_t kStationaryMaxIter = 1'000'000;

// Time-indexed state-action occupancies under both policies, their ratio,
// and the discounted-average behavior occupancy.  Layout matches rewards:
// index [((t-1)*S + s)*A + a].  The marginal time-state occupancy is the sum
// over actions.  Stationary distributions are filled when power iteration
// converges, and left empty otherwise (e.g. periodic chains).
struct OccupancyTables {
  int num_states = 0;
  int num_actions = 0;
  int horizon = 0;
  std::vector<double> d_mu;
  std::vector<double> d_pi;
  // ratio = d_pi / d_mu with the 0/0 -> 0 convention; a (d_pi > 0, d_mu = 0)
  // entry is a support violation and occupancies() throws instead.
  std::vector<double> ratio;
  // Discount-averaged behavior occupancy: sum_t gamma^{t-1} d_t / sum_t
  // gamma^{t-1}, over (s, a).
  std::vector<double> d_mu_avg;
  std::optional<std::vector<double>> stationary_mu;  // over states
  std::optional<std::vector<double>> stationary_pi;

  double mu_at(int t, int s, int a) const {
    return d_mu[(static_cast<std::size_t>(t - 1) * num_states + s) *
                    num_actions +
                a];
  }
  double pi_at(int t, int s, int a) const {
    return d_pi[(static_cast<std::size_t>(t - 1) * num_states + s) *
                    num_actions +
                a];
  }
  double ratio_at(int t, int s, int a) const {
    return ratio[(static_cast<std::size_t>(t - 1) * num_states + s) *
                     num_actions +
                 a];
  }
};

// Exact forward recursion for d_t^mu and d_t^pi, t = 1..horizon.  With
// `with_stationary` (the default) also attempts the stationary
// distributions as a convenience, leaving them empty when power iteration
// does not converge.  Throws SupportViolation when some (t, s, a) has
// d_t^pi > 0 and d_t^mu = 0.
OccupancyTables occupancies(const EvaluationProblem& problem,
                            bool with_stationary = true);

// Stationary distribution of the state chain induced by `policy`, by power
// iteration from the uniform distribution.  Throws ConvergenceError if the
// L1 residual has not reached kStationaryTol within kStationaryMaxIter
// sweeps (periodic or multi-chain cases).
std::vector<double> stationary_distribution(const TabularMdp& mdp,
                                            const PolicyTable& policy);

// Asymptotic likelihood decay rate c = E_{s ~ stationary(mu)}[KL(mu(.|s) ||
// pi(.|s))].  Nonnegative; +infinity when the target misses behavior support
// on a stationary-positive state.
double kl_rate(const EvaluationProblem& problem);

// Scale diagnostics:
//   c         - likelihood decay rate (see kl_rate)
//   u_rho     - max over reachable (s, a) of pi(a|s)/mu(a|s)
//   u_s       - max over stationary-positive states of the stationary state
//               ratio d^pi(s)/d^mu(s)
//   m_rho_sq  - max over reachable s of E_{a~mu}[rho(s,a)^2]
// "Reachable" means d_t^mu(s) > 0 for some t <= horizon.
struct ProblemDiagnostics {
  double c = 0.0;
  double u_rho = 0.0;
  double u_s = 0.0;
  double m_rho_sq = 0.0;
};

ProblemDiagnostics diagnostics(const EvaluationProblem& problem);

// Max over (s, a) with d_t^mu(s, a) > 0 of |E_mu[rho_{1:t} | s_t = s, a_t =
// a] - d_t^pi(s,a)/d_t^mu(s,a)|, the conditional expectation computed by
// brute-force enumeration of length-t prefixes.  This is the identity that
// licenses replacing cumulative importance weights with occupancy ratios.
double conditional_weight_check(const EvaluationProblem& problem, int t,
                                std::size_t cap = kDefaultEnumCap);

}  // namespace opelab
