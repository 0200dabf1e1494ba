#include "opelab/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <utility>
#include <vector>

#include "opelab/numerics.hpp"
#include "opelab/occupancy.hpp"

namespace opelab {

namespace {

// Per-path estimator evaluation shared by the enumeration routines.  SIS
// resolves the oracle weight table once up front; ASIS uses the table the
// kind carries.
struct PathEvaluator {
  EstimatorId id;
  std::vector<double> disc;
  std::shared_ptr<const WeightTable> table;  // SIS / ASIS only

  PathEvaluator(const EvaluationProblem& problem, const EstimatorKind& kind)
      : id(kind.id), disc(problem.mdp.discounts()) {
    if (id == EstimatorId::kSis) {
      table = std::make_shared<const WeightTable>(
          WeightTable::oracle(occupancies(problem, false)));
    } else if (id == EstimatorId::kAsis) {
      if (!kind.weights) {
        throw ValidationError("ASIS kind carries no weight table");
      }
      table = kind.weights;
    }
  }

  double value(const PathView& path) const {
    const int T = static_cast<int>(path.actions.size());
    double g = 0.0;
    switch (id) {
      case EstimatorId::kIs:
        for (int t = 0; t < T; ++t) g += disc[t] * path.rewards[t];
        return path.rho_cum[T - 1] * g;
      case EstimatorId::kPdis:
        for (int t = 0; t < T; ++t) {
          g += disc[t] * path.rho_cum[t] * path.rewards[t];
        }
        return g;
      case EstimatorId::kSis:
      case EstimatorId::kAsis:
        for (int t = 0; t < T; ++t) {
          g += disc[t] * table->at(t + 1, path.states[t], path.actions[t]) *
               path.rewards[t];
        }
        return g;
    }
    return 0.0;
  }
};

// Variance within rounding dust of zero is zero.
double settle_variance(double raw) {
  return (raw < 0.0 && raw >= -1e-12) ? 0.0 : raw;
}

}  // namespace

double ReturnDistribution::total_probability() const {
  NeumaierSum p;
  for (const auto& [value, prob] : atoms) p.add(prob);
  return p.value();
}

double ReturnDistribution::mean() const {
  NeumaierSum m;
  for (const auto& [value, prob] : atoms) m.add(prob * value);
  return m.value();
}

double ReturnDistribution::variance() const {
  const double m = mean();
  NeumaierSum second;
  for (const auto& [value, prob] : atoms) second.add(prob * value * value);
  return settle_variance(second.value() - m * m);
}

ReturnDistribution ReturnDistribution::merged(double tol) const {
  ReturnDistribution out;
  if (atoms.empty()) return out;
  std::vector<std::pair<double, double>> sorted = atoms;
  std::sort(sorted.begin(), sorted.end());
  double rep = sorted.front().first;
  double mass = 0.0;
  for (const auto& [value, prob] : sorted) {
    if (value - rep > tol) {
      out.atoms.emplace_back(rep, mass);
      rep = value;
      mass = prob;
    } else {
      mass += prob;
    }
  }
  out.atoms.emplace_back(rep, mass);
  return out;
}

ReturnDistribution enumerate_returns(const EvaluationProblem& problem,
                                     const EstimatorKind& kind,
                                     std::size_t cap) {
  const PathEvaluator eval(problem, kind);
  ReturnDistribution dist;
  for_each_path(problem, cap, [&](const PathView& path) {
    dist.atoms.emplace_back(eval.value(path), path.prob);
  });
  return dist;
}

std::string method_name(MomentMethod method) {
  return method == MomentMethod::kEnumeration ? "enumeration" : "moment_dp";
}

MomentReport exact_moments(const EvaluationProblem& problem,
                           const EstimatorKind& kind, std::size_t cap) {
  const PathEvaluator eval(problem, kind);
  NeumaierSum m1;
  NeumaierSum m2;
  for_each_path(problem, cap, [&](const PathView& path) {
    const double v = eval.value(path);
    m1.add(path.prob * v);
    m2.add(path.prob * v * v);
  });
  MomentReport report;
  report.estimator = kind.name();
  const double mean = m1.value();
  report.mean = mean;
  report.variance = settle_variance(m2.value() - mean * mean);
  report.method = MomentMethod::kEnumeration;
  return report;
}

namespace {

bool all_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

// Expectation of `values` over the successor distribution of (s, a).
double successor_mean(const TabularMdp& mdp, int s, int a,
                      const std::vector<double>& values) {
  double sum = 0.0;
  for (int s2 = 0; s2 < mdp.num_states; ++s2) {
    const double pr = mdp.p(s, a, s2);
    if (pr > 0.0) sum += pr * values[s2];
  }
  return sum;
}

MomentReport finish_dp(const std::string& name, const TabularMdp& mdp,
                       const std::vector<double>& first,
                       const std::vector<double>& second,
                       std::optional<int> overflow_t) {
  MomentReport report;
  report.estimator = name;
  report.method = MomentMethod::kMomentDp;
  report.overflow_t = overflow_t;
  double m1 = 0.0;
  for (int s = 0; s < mdp.num_states; ++s) m1 += mdp.initial_dist[s] * first[s];
  report.mean = m1;
  if (overflow_t) {
    report.variance = std::numeric_limits<double>::infinity();
    return report;
  }
  double m2 = 0.0;
  for (int s = 0; s < mdp.num_states; ++s) {
    m2 += mdp.initial_dist[s] * second[s];
  }
  report.variance = settle_variance(m2 - m1 * m1);
  return report;
}

// Backward recursion for the product-form estimator.  Conditional on
// s_t = s, track the tail weight Y_t = rho_{t:T} and the weighted tail
// return Z_t = rho_{t:T} * sum_{k=t}^{T} gamma^{k-t} r_k:
//   Y_t = rho_t * Y_{t+1},  Z_t = rho_t * (r_t * Y_{t+1} + gamma * Z_{t+1})
// with Y_{T+1} = 1, Z_{T+1} = 0.  The estimator is Z_1, so five conditional
// moments (Y, Z, Y^2, YZ, Z^2) close the recursion.
MomentReport is_moment_dp(const EvaluationProblem& problem) {
  const TabularMdp& mdp = problem.mdp;
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const double gamma = mdp.gamma;

  std::vector<double> ey(S, 1.0), ez(S, 0.0);
  std::vector<double> ey2(S, 1.0), eyz(S, 0.0), ez2(S, 0.0);
  std::optional<int> overflow_t;

  for (int t = mdp.horizon; t >= 1; --t) {
    std::vector<double> ney(S, 0.0), nez(S, 0.0);
    std::vector<double> ney2(S, 0.0), neyz(S, 0.0), nez2(S, 0.0);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const double mu = problem.behavior(s, a);
        if (mu <= 0.0) continue;
        const double rho = problem.target(s, a) / mu;
        const double w1 = mu * rho;        // = pi(a|s)
        const double w2 = mu * rho * rho;  // second-moment weight
        const double r = mdp.r(t, s, a);
        const double y = successor_mean(mdp, s, a, ey);
        const double z = successor_mean(mdp, s, a, ez);
        ney[s] += w1 * y;
        nez[s] += w1 * (r * y + gamma * z);
        if (!overflow_t) {
          const double y2 = successor_mean(mdp, s, a, ey2);
          const double yz = successor_mean(mdp, s, a, eyz);
          const double z2 = successor_mean(mdp, s, a, ez2);
          ney2[s] += w2 * y2;
          neyz[s] += w2 * (r * y2 + gamma * yz);
          nez2[s] += w2 * (r * r * y2 + 2.0 * gamma * r * yz +
                           gamma * gamma * z2);
        }
      }
    }
    ey = std::move(ney);
    ez = std::move(nez);
    if (!overflow_t) {
      if (all_finite(ney2) && all_finite(neyz) && all_finite(nez2)) {
        ey2 = std::move(ney2);
        eyz = std::move(neyz);
        ez2 = std::move(nez2);
      } else {
        // Second moments left double range at this step; the means stay
        // bounded, so keep refining them and report infinite variance.
        overflow_t = t;
      }
    }
  }
  return finish_dp("IS", mdp, ez, ez2, overflow_t);
}

// Backward recursion for the per-decision estimator's tail
// X_t = rho_t * (r_t + gamma * X_{t+1}), X_{T+1} = 0; the estimator is X_1.
MomentReport pdis_moment_dp(const EvaluationProblem& problem) {
  const TabularMdp& mdp = problem.mdp;
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const double gamma = mdp.gamma;

  std::vector<double> m1(S, 0.0), m2(S, 0.0);
  std::optional<int> overflow_t;

  for (int t = mdp.horizon; t >= 1; --t) {
    std::vector<double> nm1(S, 0.0), nm2(S, 0.0);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const double mu = problem.behavior(s, a);
        if (mu <= 0.0) continue;
        const double rho = problem.target(s, a) / mu;
        const double r = mdp.r(t, s, a);
        const double mean_next = successor_mean(mdp, s, a, m1);
        nm1[s] += mu * rho * (r + gamma * mean_next);
        if (!overflow_t) {
          const double second_next = successor_mean(mdp, s, a, m2);
          nm2[s] += mu * rho * rho *
                    (r * r + 2.0 * gamma * r * mean_next +
                     gamma * gamma * second_next);
        }
      }
    }
    m1 = std::move(nm1);
    if (!overflow_t) {
      if (all_finite(nm2)) {
        m2 = std::move(nm2);
      } else {
        overflow_t = t;
      }
    }
  }
  return finish_dp("PDIS", mdp, m1, m2, overflow_t);
}

// Backward recursion for additive state-action-weighted estimators
// (SIS / ASIS): S_t = g_t(s_t, a_t) + S_{t+1} with absolute discounts
// folded into g_t = gamma^{t-1} w_t r_t.
MomentReport weighted_moment_dp(const EvaluationProblem& problem,
                                const std::string& name,
                                const WeightTable& table) {
  const TabularMdp& mdp = problem.mdp;
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  if (table.num_states != S || table.num_actions != A ||
      table.horizon != mdp.horizon) {
    throw ValidationError("weight table shape does not match the problem");
  }
  const std::vector<double> disc = mdp.discounts();

  std::vector<double> es(S, 0.0), es2(S, 0.0);
  std::optional<int> overflow_t;

  for (int t = mdp.horizon; t >= 1; --t) {
    std::vector<double> nes(S, 0.0), nes2(S, 0.0);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const double mu = problem.behavior(s, a);
        if (mu <= 0.0) continue;
        const double g = disc[t - 1] * table.at(t, s, a) * mdp.r(t, s, a);
        const double mean_next = successor_mean(mdp, s, a, es);
        nes[s] += mu * (g + mean_next);
        if (!overflow_t) {
          const double second_next = successor_mean(mdp, s, a, es2);
          nes2[s] += mu * (g * g + 2.0 * g * mean_next + second_next);
        }
      }
    }
    es = std::move(nes);
    if (!overflow_t) {
      if (all_finite(nes2)) {
        es2 = std::move(nes2);
      } else {
        overflow_t = t;
      }
    }
  }
  return finish_dp(name, mdp, es, es2, overflow_t);
}

}  // namespace

MomentReport moment_dp_variance(const EvaluationProblem& problem,
                                const EstimatorKind& kind) {
  ensure_support(problem);
  switch (kind.id) {
    case EstimatorId::kIs:
      return is_moment_dp(problem);
    case EstimatorId::kPdis:
      return pdis_moment_dp(problem);
    case EstimatorId::kSis: {
      const WeightTable table =
          WeightTable::oracle(occupancies(problem, false));
      return weighted_moment_dp(problem, "SIS", table);
    }
    case EstimatorId::kAsis:
      if (!kind.weights) {
        throw ValidationError("ASIS kind carries no weight table");
      }
      return weighted_moment_dp(problem, "ASIS", *kind.weights);
  }
  throw ValidationError("unknown estimator kind");
}

double CovarianceTerms::pdis_total() const {
  double sum = 0.0;
  for (int t = 1; t <= horizon; ++t) {
    for (int k = t; k <= horizon; ++k) {
      sum += (t == k ? 1.0 : 2.0) * pdis(t, k);
    }
  }
  return sum;
}

double CovarianceTerms::sis_total() const {
  double sum = 0.0;
  for (int t = 1; t <= horizon; ++t) {
    for (int k = t; k <= horizon; ++k) {
      sum += (t == k ? 1.0 : 2.0) * sis(t, k);
    }
  }
  return sum;
}

CovarianceTerms exact_cov_terms(const EvaluationProblem& problem,
                                std::size_t cap) {
  const int T = problem.mdp.horizon;
  const std::vector<double> disc = problem.mdp.discounts();
  const WeightTable table = WeightTable::oracle(occupancies(problem, false));

  // First moments of the summands and their pairwise products.
  std::vector<double> mean_pdis(T, 0.0), mean_sis(T, 0.0);
  std::vector<double> cross_pdis(static_cast<std::size_t>(T) * T, 0.0);
  std::vector<double> cross_sis(static_cast<std::size_t>(T) * T, 0.0);
  std::vector<double> y(T), z(T);

  for_each_path(problem, cap, [&](const PathView& path) {
    for (int t = 0; t < T; ++t) {
      y[t] = disc[t] * path.rho_cum[t] * path.rewards[t];
      z[t] = disc[t] * table.at(t + 1, path.states[t], path.actions[t]) *
             path.rewards[t];
    }
    for (int t = 0; t < T; ++t) {
      mean_pdis[t] += path.prob * y[t];
      mean_sis[t] += path.prob * z[t];
      for (int k = t; k < T; ++k) {
        cross_pdis[static_cast<std::size_t>(t) * T + k] +=
            path.prob * y[t] * y[k];
        cross_sis[static_cast<std::size_t>(t) * T + k] +=
            path.prob * z[t] * z[k];
      }
    }
  });

  CovarianceTerms terms;
  terms.horizon = T;
  terms.c_pdis.assign(static_cast<std::size_t>(T) * T, 0.0);
  terms.c_sis.assign(static_cast<std::size_t>(T) * T, 0.0);
  for (int t = 0; t < T; ++t) {
    for (int k = t; k < T; ++k) {
      const std::size_t i = static_cast<std::size_t>(t) * T + k;
      terms.c_pdis[i] = cross_pdis[i] - mean_pdis[t] * mean_pdis[k];
      terms.c_sis[i] = cross_sis[i] - mean_sis[t] * mean_sis[k];
    }
  }
  return terms;
}

std::vector<ConditionalEntry> conditional_expectation(
    const EvaluationProblem& problem, int t, ConditioningStatistic statistic,
    std::size_t cap) {
  const int T = problem.mdp.horizon;
  if (t < 1 || t > T) {
    throw ValidationError("conditional_expectation: t out of range");
  }
  std::vector<ConditionalEntry> entries;

  if (statistic == ConditioningStatistic::kStateAction) {
    const int S = problem.mdp.num_states;
    const int A = problem.mdp.num_actions;
    std::vector<double> weighted(static_cast<std::size_t>(S) * A, 0.0);
    std::vector<double> mass(static_cast<std::size_t>(S) * A, 0.0);
    for_each_prefix(problem, t, cap, [&](const PathView& path) {
      const std::size_t i =
          static_cast<std::size_t>(path.states[t - 1]) * A +
          path.actions[t - 1];
      weighted[i] += path.prob * path.rho_cum[t - 1];
      mass[i] += path.prob;
    });
    const OccupancyTables occ = occupancies(problem, false);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const std::size_t i = static_cast<std::size_t>(s) * A + a;
        if (mass[i] <= 0.0) continue;
        ConditionalEntry entry;
        entry.key = {{s, a}};
        entry.value = weighted[i] / mass[i];
        entry.reference = occ.ratio_at(t, s, a);
        entry.mass = mass[i];
        entries.push_back(std::move(entry));
      }
    }
    return entries;
  }

  // Prefix conditioning: group complete trajectories by their first t
  // (state, action) pairs; the conditional expectation of the full weight
  // over each group must reproduce the prefix weight rho_{1:t}.
  struct Group {
    double weighted = 0.0;
    double mass = 0.0;
    double rho_prefix = 0.0;
  };
  const int A = problem.mdp.num_actions;
  std::map<std::vector<int>, Group> groups;
  for_each_path(problem, cap, [&](const PathView& path) {
    std::vector<int> key(t);
    for (int i = 0; i < t; ++i) {
      key[i] = path.states[i] * A + path.actions[i];
    }
    Group& group = groups[key];
    group.weighted += path.prob * path.rho_cum[T - 1];
    group.mass += path.prob;
    group.rho_prefix = path.rho_cum[t - 1];
  });
  for (const auto& [key, group] : groups) {
    ConditionalEntry entry;
    entry.key.reserve(key.size());
    for (int code : key) entry.key.emplace_back(code / A, code % A);
    entry.value = group.weighted / group.mass;
    entry.reference = group.rho_prefix;
    entry.mass = group.mass;
    entries.push_back(std::move(entry));
  }
  return entries;
}

}  // namespace opelab
