#include "opelab/conditions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <utility>
#include <vector>

#include "opelab/occupancy.hpp"
#include "opelab/parallel.hpp"

namespace opelab {

namespace {

constexpr double kOrderingSlack = 1e-10;

void record_pair(ConditionReport& report, const std::string& family, int t,
                 int k, double lhs, double rhs) {
  ++report.pairs_checked;
  const double margin = lhs - rhs;
  if (report.pairs_checked == 1 || margin < report.margin) {
    report.margin = margin;
  }
  if (margin < -kCovSlack) {
    report.holds = false;
    report.violations.push_back({family, t, k, lhs, rhs});
  }
}

void theorem1_accumulate(const EvaluationProblem& problem, std::size_t cap,
                         const std::string& suffix, ConditionReport& report) {
  const int T = problem.mdp.horizon;
  const std::size_t tt = static_cast<std::size_t>(T) * T;

  // One sweep accumulates, for every 1 <= t <= k <= T (index (t-1)*T+(k-1)):
  //   correlation family:  E[rho_{1:k}], E[r_t rho_{1:k}], E[r_t rho_{1:k}^2]
  //   second-moment family: E[rho_{1:k}^2 r_t r_k], E[rho_{1:t} rho_{1:k}
  //   r_t r_k]
  std::vector<double> mean_rho(T, 0.0);
  std::vector<double> r_rho(tt, 0.0), r_rho2(tt, 0.0);
  std::vector<double> sq_pair(tt, 0.0), mixed_pair(tt, 0.0);

  for_each_path(problem, cap, [&](const PathView& path) {
    for (int k = 0; k < T; ++k) {
      const double rho_k = path.rho_cum[k];
      mean_rho[k] += path.prob * rho_k;
      for (int t = 0; t <= k; ++t) {
        const std::size_t i = static_cast<std::size_t>(t) * T + k;
        const double rt = path.rewards[t];
        r_rho[i] += path.prob * rt * rho_k;
        r_rho2[i] += path.prob * rt * rho_k * rho_k;
        const double pair = rt * path.rewards[k];
        sq_pair[i] += path.prob * pair * rho_k * rho_k;
        mixed_pair[i] += path.prob * pair * path.rho_cum[t] * rho_k;
      }
    }
  });

  for (int t = 1; t <= T; ++t) {
    for (int k = t; k <= T; ++k) {
      const std::size_t i = static_cast<std::size_t>(t - 1) * T + (k - 1);
      record_pair(report, "correlation" + suffix, t, k,
                  r_rho2[i] - mean_rho[k - 1] * r_rho[i], 0.0);
      record_pair(report, "second_moment" + suffix, t, k, sq_pair[i],
                  mixed_pair[i]);
    }
  }
}

}  // namespace

ConditionReport theorem1_condition(const EvaluationProblem& problem,
                                   std::size_t cap) {
  ConditionReport report;
  theorem1_accumulate(problem, cap, "", report);

  // The hypothesis ranges over initial states: when the start is
  // distributional, every positive-mass start must satisfy it on its own.
  const std::vector<double>& p1 = problem.mdp.initial_dist;
  int positive = 0;
  for (double p : p1) positive += p > 0.0 ? 1 : 0;
  if (positive > 1) {
    for (int s = 0; s < problem.mdp.num_states; ++s) {
      if (!(p1[s] > 0.0)) continue;
      EvaluationProblem variant = problem;
      variant.mdp.initial_dist.assign(p1.size(), 0.0);
      variant.mdp.initial_dist[s] = 1.0;
      theorem1_accumulate(variant, cap, "[s1=" + std::to_string(s) + "]",
                          report);
    }
  }
  return report;
}

ConditionReport theorem2_condition(const EvaluationProblem& problem,
                                   std::size_t cap) {
  const CovarianceTerms terms = exact_cov_terms(problem, cap);
  ConditionReport report;
  for (int t = 1; t <= terms.horizon; ++t) {
    for (int k = t; k <= terms.horizon; ++k) {
      record_pair(report, "dominance", t, k, terms.pdis(t, k),
                  terms.sis(t, k));
    }
  }
  return report;
}

VarianceGap lemma2_gap(const EvaluationProblem& problem,
                       Lemma2Conditioning conditioning, std::size_t cap) {
  const TabularMdp& mdp = problem.mdp;
  const int T = mdp.horizon;
  const int A = mdp.num_actions;
  const std::vector<double> disc = mdp.discounts();

  // Summand values along one path.  kPrefix compares the full-product
  // summands against their prefix-conditioned projections; the other two
  // modes start from the per-decision summands.
  std::vector<double> y(T);
  auto fill_summands = [&](const PathView& path) {
    for (int t = 0; t < T; ++t) {
      const double base = conditioning == Lemma2Conditioning::kPrefix
                              ? path.rho_cum[T - 1]
                              : path.rho_cum[t];
      y[t] = disc[t] * base * path.rewards[t];
    }
  };

  // Pass 1: conditional means of each summand given its statistic, by
  // grouping (no closed-form shortcuts).
  struct Cell {
    double weighted = 0.0;
    double mass = 0.0;
  };
  // kStateAction: cells indexed by (t, s, a).
  std::vector<Cell> sa_cells;
  // kPrefix: one map per step keyed by the encoded action-state prefix.
  std::vector<std::map<std::vector<int>, Cell>> prefix_cells;
  const int S = mdp.num_states;

  if (conditioning == Lemma2Conditioning::kStateAction) {
    sa_cells.assign(static_cast<std::size_t>(T) * S * A, Cell{});
  } else if (conditioning == Lemma2Conditioning::kPrefix) {
    prefix_cells.resize(T);
  }

  if (conditioning != Lemma2Conditioning::kIdentity) {
    for_each_path(problem, cap, [&](const PathView& path) {
      fill_summands(path);
      if (conditioning == Lemma2Conditioning::kStateAction) {
        for (int t = 0; t < T; ++t) {
          Cell& cell =
              sa_cells[(static_cast<std::size_t>(t) * S + path.states[t]) * A +
                       path.actions[t]];
          cell.weighted += path.prob * y[t];
          cell.mass += path.prob;
        }
      } else {
        std::vector<int> key;
        key.reserve(T);
        for (int t = 0; t < T; ++t) {
          key.push_back(path.states[t] * A + path.actions[t]);
          Cell& cell = prefix_cells[t][key];
          cell.weighted += path.prob * y[t];
          cell.mass += path.prob;
        }
      }
    });
  }

  // Pass 2: moments of the raw and projected sums plus the pairwise cross
  // moments entering the bound.
  double sum_y = 0.0, sum_y_sq = 0.0;
  double sum_e = 0.0, sum_e_sq = 0.0;
  std::vector<double> cross_y(static_cast<std::size_t>(T) * T, 0.0);
  std::vector<double> cross_e(static_cast<std::size_t>(T) * T, 0.0);
  std::vector<double> cond(T);

  for_each_path(problem, cap, [&](const PathView& path) {
    fill_summands(path);
    if (conditioning == Lemma2Conditioning::kIdentity) {
      for (int t = 0; t < T; ++t) cond[t] = y[t];
    } else if (conditioning == Lemma2Conditioning::kStateAction) {
      for (int t = 0; t < T; ++t) {
        const Cell& cell =
            sa_cells[(static_cast<std::size_t>(t) * S + path.states[t]) * A +
                     path.actions[t]];
        cond[t] = cell.weighted / cell.mass;
      }
    } else {
      std::vector<int> key;
      key.reserve(T);
      for (int t = 0; t < T; ++t) {
        key.push_back(path.states[t] * A + path.actions[t]);
        const Cell& cell = prefix_cells[t].at(key);
        cond[t] = cell.weighted / cell.mass;
      }
    }
    double ty = 0.0, te = 0.0;
    for (int t = 0; t < T; ++t) {
      ty += y[t];
      te += cond[t];
    }
    sum_y += path.prob * ty;
    sum_y_sq += path.prob * ty * ty;
    sum_e += path.prob * te;
    sum_e_sq += path.prob * te * te;
    for (int t = 0; t < T; ++t) {
      for (int k = t + 1; k < T; ++k) {
        cross_y[static_cast<std::size_t>(t) * T + k] +=
            path.prob * y[t] * y[k];
        cross_e[static_cast<std::size_t>(t) * T + k] +=
            path.prob * cond[t] * cond[k];
      }
    }
  });

  VarianceGap gap;
  gap.lhs = (sum_y_sq - sum_y * sum_y) - (sum_e_sq - sum_e * sum_e);
  double rhs = 0.0;
  for (int t = 0; t < T; ++t) {
    for (int k = t + 1; k < T; ++k) {
      const std::size_t i = static_cast<std::size_t>(t) * T + k;
      rhs += cross_y[i] - cross_e[i];
    }
  }
  gap.rhs = 2.0 * rhs;
  return gap;
}

ImplicationSummary verify_implication(
    const std::function<EvaluationProblem(std::uint64_t)>& generator, int n,
    OrderingTheorem theorem, std::size_t cap, unsigned workers) {
  struct Slot {
    bool condition_holds = false;
    bool ordering_holds = false;
    double lhs_variance = 0.0;
    double rhs_variance = 0.0;
  };
  std::vector<Slot> slots(n);

  parallel_for(static_cast<std::size_t>(n), workers, [&](std::size_t i) {
    const EvaluationProblem problem =
        generator(static_cast<std::uint64_t>(i));
    const ConditionReport report = theorem == OrderingTheorem::kPdisLeqIs
                                       ? theorem1_condition(problem, cap)
                                       : theorem2_condition(problem, cap);
    Slot& slot = slots[i];
    slot.condition_holds = report.holds;
    if (!report.holds) return;
    if (theorem == OrderingTheorem::kPdisLeqIs) {
      slot.lhs_variance =
          moment_dp_variance(problem, EstimatorKind::pdis()).variance;
      slot.rhs_variance =
          moment_dp_variance(problem, EstimatorKind::is()).variance;
    } else {
      slot.lhs_variance =
          moment_dp_variance(problem, EstimatorKind::sis()).variance;
      slot.rhs_variance =
          moment_dp_variance(problem, EstimatorKind::pdis()).variance;
    }
    slot.ordering_holds =
        slot.lhs_variance <= slot.rhs_variance + kOrderingSlack;
  });

  ImplicationSummary summary;
  summary.n = n;
  for (int i = 0; i < n; ++i) {
    const Slot& slot = slots[i];
    if (!slot.condition_holds) continue;
    ++summary.condition_held;
    if (slot.ordering_holds) {
      ++summary.ordering_held_given_condition;
    } else {
      summary.violations.push_back({static_cast<std::uint64_t>(i),
                                    slot.lhs_variance, slot.rhs_variance});
    }
  }
  return summary;
}

}  // namespace opelab
