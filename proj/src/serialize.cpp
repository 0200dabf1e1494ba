#include "opelab/serialize.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

namespace opelab {

std::string format_double(double x) {
  char buf[64];
  const std::to_chars_result res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

namespace {

Json policy_to_json(const PolicyTable& policy) {
  Json rows = Json::array();
  for (int s = 0; s < policy.num_states; ++s) {
    Json row = Json::array();
    for (int a = 0; a < policy.num_actions; ++a) row.push_back(policy(s, a));
    rows.push_back(std::move(row));
  }
  return rows;
}

const Json& expect_array(const Json& doc, const char* key,
                         const std::string& context) {
  if (!doc.contains(key)) {
    throw ConfigError(context + ": missing key '" + key + "'");
  }
  const Json& value = doc.at(key);
  if (!value.is_array()) {
    throw ConfigError(context + ": '" + key + "' must be an array");
  }
  return value;
}

double expect_number(const Json& doc, const char* key,
                     const std::string& context) {
  if (!doc.contains(key)) {
    throw ConfigError(context + ": missing key '" + key + "'");
  }
  const Json& value = doc.at(key);
  if (!value.is_number()) {
    throw ConfigError(context + ": '" + key + "' must be a number");
  }
  return value.get<double>();
}

int expect_int(const Json& doc, const char* key, const std::string& context) {
  if (!doc.contains(key)) {
    throw ConfigError(context + ": missing key '" + key + "'");
  }
  const Json& value = doc.at(key);
  if (!value.is_number_integer()) {
    throw ConfigError(context + ": '" + key + "' must be an integer");
  }
  return value.get<int>();
}

std::vector<double> number_vector(const Json& arr, std::size_t expect,
                                  const std::string& context) {
  if (arr.size() != expect) {
    throw ConfigError(context + ": expected " + std::to_string(expect) +
                      " entries, found " + std::to_string(arr.size()));
  }
  std::vector<double> out;
  out.reserve(expect);
  for (const Json& v : arr) {
    if (!v.is_number()) {
      throw ConfigError(context + ": entries must be numbers");
    }
    out.push_back(v.get<double>());
  }
  return out;
}

PolicyTable policy_from_json(const Json& rows, int S, int A,
                             const std::string& context) {
  PolicyTable policy;
  policy.num_states = S;
  policy.num_actions = A;
  policy.probs.reserve(static_cast<std::size_t>(S) * A);
  if (!rows.is_array() || rows.size() != static_cast<std::size_t>(S)) {
    throw ConfigError(context + ": expected one row per state");
  }
  for (const Json& row : rows) {
    if (!row.is_array()) {
      throw ConfigError(context + ": rows must be arrays");
    }
    const std::vector<double> vals =
        number_vector(row, static_cast<std::size_t>(A), context);
    policy.probs.insert(policy.probs.end(), vals.begin(), vals.end());
  }
  return policy;
}

}  // namespace

void reject_unknown_keys(const Json& doc,
                         std::initializer_list<const char*> allowed,
                         const std::string& context) {
  if (!doc.is_object()) {
    throw ConfigError(context + ": expected a JSON object");
  }
  for (const auto& item : doc.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError(context + ": unknown key '" + item.key() + "'");
    }
  }
}

Json problem_to_json(const EvaluationProblem& problem) {
  const TabularMdp& mdp = problem.mdp;
  const int S = mdp.num_states;
  const int A = mdp.num_actions;

  Json doc;
  doc["num_states"] = S;
  doc["num_actions"] = A;
  doc["horizon"] = mdp.horizon;
  doc["gamma"] = mdp.gamma;

  Json transition = Json::array();
  for (int s = 0; s < S; ++s) {
    Json per_action = Json::array();
    for (int a = 0; a < A; ++a) {
      Json row = Json::array();
      for (int s2 = 0; s2 < S; ++s2) row.push_back(mdp.p(s, a, s2));
      per_action.push_back(std::move(row));
    }
    transition.push_back(std::move(per_action));
  }
  doc["transition"] = std::move(transition);

  if (mdp.stationary_reward) {
    Json reward = Json::array();
    for (int s = 0; s < S; ++s) {
      Json row = Json::array();
      for (int a = 0; a < A; ++a) row.push_back(mdp.r(1, s, a));
      reward.push_back(std::move(row));
    }
    doc["reward"] = std::move(reward);
  } else {
    Json reward = Json::array();
    for (int t = 1; t <= mdp.horizon; ++t) {
      Json per_state = Json::array();
      for (int s = 0; s < S; ++s) {
        Json row = Json::array();
        for (int a = 0; a < A; ++a) row.push_back(mdp.r(t, s, a));
        per_state.push_back(std::move(row));
      }
      reward.push_back(std::move(per_state));
    }
    doc["reward"] = std::move(reward);
  }

  doc["initial_dist"] = mdp.initial_dist;
  doc["behavior"] = policy_to_json(problem.behavior);
  doc["target"] = policy_to_json(problem.target);
  if (mdp.absorbing_state) doc["absorbing_state"] = *mdp.absorbing_state;
  return doc;
}

EvaluationProblem problem_from_json(const Json& doc) {
  EvaluationProblem problem = problem_from_json_unchecked(doc);
  ensure_valid(problem);
  return problem;
}

EvaluationProblem problem_from_json_unchecked(const Json& doc) {
  const std::string context = "problem document";
  reject_unknown_keys(doc,
                      {"num_states", "num_actions", "horizon", "gamma",
                       "transition", "reward", "initial_dist", "behavior",
                       "target", "absorbing_state"},
                      context);

  const int S = expect_int(doc, "num_states", context);
  const int A = expect_int(doc, "num_actions", context);
  const int T = expect_int(doc, "horizon", context);
  const double gamma = expect_number(doc, "gamma", context);
  if (S <= 0 || A <= 0 || T <= 0) {
    throw ConfigError(context +
                      ": num_states, num_actions, horizon must be positive");
  }

  TabularMdp mdp;
  mdp.num_states = S;
  mdp.num_actions = A;
  mdp.horizon = T;
  mdp.gamma = gamma;

  const Json& transition = expect_array(doc, "transition", context);
  if (transition.size() != static_cast<std::size_t>(S)) {
    throw ConfigError(context + ": transition must have one entry per state");
  }
  mdp.transition.reserve(static_cast<std::size_t>(S) * A * S);
  for (const Json& per_action : transition) {
    if (!per_action.is_array() ||
        per_action.size() != static_cast<std::size_t>(A)) {
      throw ConfigError(context +
                        ": transition[s] must have one row per action");
    }
    for (const Json& row : per_action) {
      if (!row.is_array()) {
        throw ConfigError(context + ": transition rows must be arrays");
      }
      const std::vector<double> vals = number_vector(
          row, static_cast<std::size_t>(S), context + ": transition row");
      mdp.transition.insert(mdp.transition.end(), vals.begin(), vals.end());
    }
  }

  const Json& reward = expect_array(doc, "reward", context);
  const bool stationary =
      !reward.empty() && reward.front().is_array() &&
      (reward.front().empty() || !reward.front().front().is_array());
  if (stationary) {
    if (reward.size() != static_cast<std::size_t>(S)) {
      throw ConfigError(context +
                        ": stationary reward must have one row per state");
    }
    std::vector<double> reward_sa;
    for (const Json& row : reward) {
      const std::vector<double> vals = number_vector(
          row, static_cast<std::size_t>(A), context + ": reward row");
      reward_sa.insert(reward_sa.end(), vals.begin(), vals.end());
    }
    mdp.stationary_reward = true;
    for (int t = 0; t < T; ++t) {
      mdp.reward.insert(mdp.reward.end(), reward_sa.begin(), reward_sa.end());
    }
  } else {
    if (reward.size() != static_cast<std::size_t>(T)) {
      throw ConfigError(
          context +
          ": time-dependent reward must have one entry per time step");
    }
    for (const Json& per_state : reward) {
      if (!per_state.is_array() ||
          per_state.size() != static_cast<std::size_t>(S)) {
        throw ConfigError(context +
                          ": reward[t] must have one row per state");
      }
      for (const Json& row : per_state) {
        const std::vector<double> vals = number_vector(
            row, static_cast<std::size_t>(A), context + ": reward row");
        mdp.reward.insert(mdp.reward.end(), vals.begin(), vals.end());
      }
    }
  }

  mdp.initial_dist =
      number_vector(expect_array(doc, "initial_dist", context),
                    static_cast<std::size_t>(S), context + ": initial_dist");
  if (doc.contains("absorbing_state")) {
    mdp.absorbing_state = expect_int(doc, "absorbing_state", context);
  }

  EvaluationProblem problem;
  problem.mdp = std::move(mdp);
  problem.behavior = policy_from_json(expect_array(doc, "behavior", context),
                                      S, A, context + ": behavior");
  problem.target = policy_from_json(expect_array(doc, "target", context), S,
                                    A, context + ": target");
  return problem;
}

Json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open file: " + path.string());
  }
  Json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("file " + path.string() + " is not valid JSON: " +
                      e.what());
  }
  return doc;
}

EvaluationProblem load_problem_file(const std::filesystem::path& path) {
  return problem_from_json(load_json_file(path));
}

void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw OpeError("cannot open " + tmp.string() + " for writing");
    }
    out << content;
    out.flush();
    if (!out) {
      throw OpeError("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw OpeError("failed to move " + tmp.string() + " into place: " +
                   ec.message());
  }
}

std::string occupancy_csv(const OccupancyTables& occ) {
  std::string out = "t,s,a,d_mu,d_pi,ratio\n";
  for (int t = 1; t <= occ.horizon; ++t) {
    for (int s = 0; s < occ.num_states; ++s) {
      for (int a = 0; a < occ.num_actions; ++a) {
        out += std::to_string(t);
        out += ',';
        out += std::to_string(s);
        out += ',';
        out += std::to_string(a);
        out += ',';
        out += format_double(occ.mu_at(t, s, a));
        out += ',';
        out += format_double(occ.pi_at(t, s, a));
        out += ',';
        out += format_double(occ.ratio_at(t, s, a));
        out += '\n';
      }
    }
  }
  return out;
}

std::string distribution_csv(const ReturnDistribution& dist) {
  std::string out = "value,probability\n";
  for (const auto& [value, prob] : dist.atoms) {
    out += format_double(value);
    out += ',';
    out += format_double(prob);
    out += '\n';
  }
  return out;
}

std::string batch_csv(const TrajectoryBatch& batch) {
  std::string out = "traj_id,t,s,a,r\n";
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Trajectory& traj = batch[i];
    for (int t = 1; t <= traj.length(); ++t) {
      out += std::to_string(i);
      out += ',';
      out += std::to_string(t);
      out += ',';
      out += std::to_string(traj.states[t - 1]);
      out += ',';
      out += std::to_string(traj.actions[t - 1]);
      out += ',';
      out += format_double(traj.rewards[t - 1]);
      out += '\n';
    }
  }
  return out;
}

std::string sweep_csv(const SweepResult& result) {
  std::string out = "estimator,horizon,gamma,mean,variance,method,seed\n";
  for (const SweepRow& row : result.rows) {
    out += row.estimator;
    out += ',';
    out += std::to_string(row.horizon);
    out += ',';
    out += format_double(row.gamma);
    out += ',';
    out += format_double(row.mean);
    out += ',';
    out += format_double(row.variance);
    out += ',';
    out += row.method;
    out += ',';
    out += std::to_string(row.seed);
    out += '\n';
  }
  return out;
}

Json fits_json(const SweepResult& result) {
  Json fits = Json::array();
  for (const RateFit& fit : result.fits) {
    Json entry;
    entry["estimator"] = fit.estimator;
    entry["alpha"] = fit.alpha;
    entry["beta"] = fit.beta;
    entry["t_min"] = fit.t_min;
    entry["t_max"] = fit.t_max;
    entry["residual"] = fit.alpha_residual;
    entry["beta_residual"] = fit.beta_residual;
    entry["valid"] = fit.valid;
    fits.push_back(std::move(entry));
  }
  return fits;
}

Json condition_report_json(const ConditionReport& report) {
  Json doc;
  doc["holds"] = report.holds;
  doc["margin"] = report.margin;
  doc["pairs_checked"] = report.pairs_checked;
  Json violations = Json::array();
  for (const PairWitness& witness : report.violations) {
    Json entry;
    entry["family"] = witness.family;
    entry["t"] = witness.t;
    entry["k"] = witness.k;
    entry["lhs"] = witness.lhs;
    entry["rhs"] = witness.rhs;
    violations.push_back(std::move(entry));
  }
  doc["violations"] = std::move(violations);
  return doc;
}

Json implication_summary_json(const ImplicationSummary& summary) {
  Json doc;
  doc["n"] = summary.n;
  doc["condition_held"] = summary.condition_held;
  doc["ordering_held_given_condition"] = summary.ordering_held_given_condition;
  Json violations = Json::array();
  for (const ImplicationViolation& v : summary.violations) {
    Json entry;
    entry["seed"] = v.seed;
    entry["lhs_variance"] = v.lhs_variance;
    entry["rhs_variance"] = v.rhs_variance;
    violations.push_back(std::move(entry));
  }
  doc["violations"] = std::move(violations);
  return doc;
}

}  // namespace opelab
