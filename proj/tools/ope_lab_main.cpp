// Command-line front end: validates problem documents, produces exact or
// Monte Carlo evaluation reports, reproduces the three-counterexample
// variance grid, runs horizon sweeps with rate fits, checks the
// variance-ordering conditions, and analyzes the built-in constructions.
//
// Exit codes: 0 success, 1 a check failed, 2 bad configuration, 3 runtime
// error (support violation, enumeration cap, non-convergence).

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "opelab/conditions.hpp"
#include "opelab/estimators.hpp"
#include "opelab/mdp.hpp"
#include "opelab/montecarlo.hpp"
#include "opelab/occupancy.hpp"
#include "opelab/oracle.hpp"
#include "opelab/paths.hpp"
#include "opelab/scenarios.hpp"
#include "opelab/serialize.hpp"
#include "opelab/sweeps.hpp"

namespace {

using namespace opelab;

struct GlobalOpts {
  std::string config_path;
  std::string out_path;
  unsigned workers = 0;  // 0 = all hardware threads
  std::uint64_t seed = 1;
  std::string format = "table";
};

std::size_t enum_cap_from_env() {
  const char* env = std::getenv("OPE_LAB_ENUM_CAP");
  if (env == nullptr || *env == '\0') return kDefaultEnumCap;
  char* end = nullptr;
  const unsigned long long parsed = std::strtoull(env, &end, 10);
  if (end == env || *end != '\0' || parsed == 0) {
    throw ConfigError("OPE_LAB_ENUM_CAP must be a positive integer, got '" +
                      std::string(env) + "'");
  }
  return static_cast<std::size_t>(parsed);
}

template <typename T>
T value_or(const Json& node, const char* key, T fallback) {
  return node.contains(key) ? node.at(key).get<T>() : fallback;
}

Json require_config(const GlobalOpts& g, const char* command) {
  if (g.config_path.empty()) {
    throw ConfigError(std::string(command) + ": --config is required");
  }
  return load_json_file(g.config_path);
}

// Problem source: {"file": path} | {"inline": document} |
// {"scenario": name, ...parameters}.
EvaluationProblem problem_from_node(const Json& node) {
  if (!node.is_object()) {
    throw ConfigError(
        "problem: expected an object with 'file', 'inline', or 'scenario'");
  }
  if (node.contains("file")) {
    reject_unknown_keys(node, {"file"}, "problem");
    return load_problem_file(node.at("file").get<std::string>());
  }
  if (node.contains("inline")) {
    reject_unknown_keys(node, {"inline"}, "problem");
    return problem_from_json(node.at("inline"));
  }
  if (!node.contains("scenario")) {
    throw ConfigError("problem: need one of 'file', 'inline', 'scenario'");
  }
  const std::string name = node.at("scenario").get<std::string>();
  if (name == "example1" || name == "example2" || name == "example3") {
    reject_unknown_keys(node, {"scenario"}, "problem");
    return counterexample_mdp(name.back() - '0');
  }
  if (name == "two_lane") {
    reject_unknown_keys(node, {"scenario", "horizon"}, "problem");
    return two_lane(value_or<int>(node, "horizon", 8));
  }
  if (name == "random_ergodic") {
    reject_unknown_keys(node,
                        {"scenario", "seed", "num_states", "num_actions",
                         "horizon", "gamma", "policy_gap"},
                        "problem");
    return random_ergodic(value_or<std::uint64_t>(node, "seed", 1),
                          value_or<int>(node, "num_states", 3),
                          value_or<int>(node, "num_actions", 2),
                          value_or<int>(node, "horizon", 4),
                          value_or<double>(node, "gamma", 1.0),
                          value_or<double>(node, "policy_gap", 0.3));
  }
  throw ConfigError("problem: unknown scenario '" + name + "'");
}

void emit(const GlobalOpts& g, const std::string& content) {
  if (g.out_path.empty()) {
    std::cout << content;
  } else {
    write_text_atomic(g.out_path, content);
    std::cout << "wrote " << g.out_path << '\n';
  }
}

std::string dump(const Json& doc) { return doc.dump(2) + "\n"; }

std::vector<EstimatorKind> kinds_from_config(const Json& config) {
  std::vector<EstimatorKind> kinds;
  if (config.contains("estimators")) {
    for (const Json& name : config.at("estimators")) {
      kinds.push_back(kind_from_name(name.get<std::string>()));
    }
    if (kinds.empty()) {
      throw ConfigError("config: 'estimators' must be non-empty");
    }
  } else {
    kinds = {EstimatorKind::is(), EstimatorKind::pdis(),
             EstimatorKind::sis()};
  }
  return kinds;
}

std::vector<int> parse_int_grid(const Json& node, const char* what) {
  std::vector<int> grid;
  if (node.is_array()) {
    for (const Json& v : node) grid.push_back(v.get<int>());
  } else if (node.is_object()) {
    reject_unknown_keys(node, {"from", "to", "step"}, what);
    const int from = node.at("from").get<int>();
    const int to = node.at("to").get<int>();
    const int step = value_or<int>(node, "step", 1);
    if (step < 1) {
      throw ConfigError(std::string(what) + ": step must be >= 1");
    }
    for (int t = from; t <= to; t += step) grid.push_back(t);
  } else {
    throw ConfigError(std::string(what) +
                      ": expected an array or {from, to, step}");
  }
  return grid;
}

SamplerConfig sampler_from_config(const Json& config, const GlobalOpts& g) {
  const Json& mc = config.at("mc");
  reject_unknown_keys(mc, {"seed", "num_trajectories"}, "mc config");
  SamplerConfig sampler;
  sampler.seed = value_or<std::uint64_t>(mc, "seed", g.seed);
  if (!mc.contains("num_trajectories")) {
    throw ConfigError("mc config: missing 'num_trajectories'");
  }
  sampler.num_trajectories = mc.at("num_trajectories").get<int>();
  if (sampler.num_trajectories < 1) {
    throw ConfigError("mc config: num_trajectories must be >= 1");
  }
  sampler.num_workers = g.workers;
  return sampler;
}

// ---------------------------------------------------------------------------
// validate

int cmd_validate(const GlobalOpts& g) {
  const Json doc = require_config(g, "validate");

  // Accept a bare problem document or a config with a "problem" entry; load
  // without semantic checks so every defect can be reported at once.
  EvaluationProblem problem;
  if (doc.contains("num_states")) {
    problem = problem_from_json_unchecked(doc);
  } else if (doc.contains("problem")) {
    const Json& node = doc.at("problem");
    if (node.is_object() && node.contains("file")) {
      reject_unknown_keys(node, {"file"}, "problem");
      problem = problem_from_json_unchecked(
          load_json_file(node.at("file").get<std::string>()));
    } else if (node.is_object() && node.contains("inline")) {
      reject_unknown_keys(node, {"inline"}, "problem");
      problem = problem_from_json_unchecked(node.at("inline"));
    } else {
      problem = problem_from_node(node);
    }
  } else {
    throw ConfigError(
        "validate: config must be a problem document or contain 'problem'");
  }

  const std::vector<Violation> violations = validate_problem(problem);

  if (g.format == "json") {
    Json out;
    out["valid"] = violations.empty();
    Json list = Json::array();
    for (const Violation& v : violations) {
      Json entry;
      entry["what"] = v.what;
      entry["t"] = v.t;
      entry["s"] = v.s;
      entry["a"] = v.a;
      list.push_back(std::move(entry));
    }
    out["violations"] = std::move(list);
    if (violations.empty()) out["v_pi"] = target_value(problem);
    emit(g, dump(out));
  } else {
    std::ostringstream out;
    if (violations.empty()) {
      out << "valid: " << problem.mdp.num_states << " states, "
          << problem.mdp.num_actions << " actions, horizon "
          << problem.mdp.horizon << ", gamma "
          << format_double(problem.mdp.gamma) << ", v_pi "
          << format_double(target_value(problem)) << '\n';
    } else {
      out << "invalid: " << violations.size() << " defect(s)\n";
      for (const Violation& v : violations) {
        out << "  - " << v.what;
        if (v.t >= 0 || v.s >= 0 || v.a >= 0) {
          out << " (t=" << v.t << ", s=" << v.s << ", a=" << v.a << ")";
        }
        out << '\n';
      }
    }
    emit(g, out.str());
  }
  return violations.empty() ? 0 : 1;
}

// ---------------------------------------------------------------------------
// evaluate

int cmd_evaluate(const GlobalOpts& g) {
  const Json config = require_config(g, "evaluate");
  reject_unknown_keys(config,
                      {"problem", "estimators", "method", "mc", "diagnostics"},
                      "evaluate config");
  if (!config.contains("problem")) {
    throw ConfigError("evaluate config: missing 'problem'");
  }
  const EvaluationProblem problem = problem_from_node(config.at("problem"));
  const std::size_t cap = enum_cap_from_env();
  const std::vector<EstimatorKind> kinds = kinds_from_config(config);
  const std::string method = value_or<std::string>(config, "method",
                                                   "exact_dp");

  Json report;
  report["v_pi"] = target_value(problem);
  if (value_or<bool>(config, "diagnostics", true)) {
    try {
      const ProblemDiagnostics diag = diagnostics(problem);
      Json d;
      d["c"] = diag.c;
      d["u_rho"] = diag.u_rho;
      d["u_s"] = diag.u_s;
      d["m_rho_sq"] = diag.m_rho_sq;
      report["diagnostics"] = std::move(d);
    } catch (const ConvergenceError& e) {
      report["diagnostics"] = nullptr;
      std::cerr << "note: diagnostics skipped (" << e.what() << ")\n";
    }
  }

  Json rows = Json::array();
  for (const EstimatorKind& kind : kinds) {
    Json row;
    row["estimator"] = kind.name();
    if (method == "exact_dp" || method == "enumeration") {
      const MomentReport m = method == "exact_dp"
                                 ? moment_dp_variance(problem, kind)
                                 : exact_moments(problem, kind, cap);
      row["mean"] = m.mean;
      row["variance"] = m.variance;
      row["method"] = method_name(m.method);
      if (m.overflow_t) row["overflow_t"] = *m.overflow_t;
    } else if (method == "monte_carlo") {
      if (!config.contains("mc")) {
        throw ConfigError("evaluate config: monte_carlo needs an 'mc' entry");
      }
      const SamplerConfig sampler = sampler_from_config(config, g);
      const BatchStats stats = estimator_stats(problem, kind, sampler);
      row["mean"] = stats.estimate;
      if (stats.sample_variance) {
        row["variance"] = *stats.sample_variance;
      } else {
        row["variance"] = nullptr;
      }
      if (stats.standard_error) row["standard_error"] = *stats.standard_error;
      row["n"] = stats.n;
      row["seed"] = sampler.seed;
      row["method"] = "monte_carlo";
    } else {
      throw ConfigError("evaluate config: unknown method '" + method + "'");
    }
    rows.push_back(std::move(row));
  }
  report["estimators"] = std::move(rows);

  if (g.format == "json") {
    emit(g, dump(report));
  } else if (g.format == "csv") {
    std::string out = "estimator,mean,variance,method\n";
    for (const Json& row : report.at("estimators")) {
      out += row.at("estimator").get<std::string>();
      out += ',';
      out += format_double(row.at("mean").get<double>());
      out += ',';
      out += row.at("variance").is_null()
                 ? ""
                 : format_double(row.at("variance").get<double>());
      out += ',';
      out += row.at("method").get<std::string>();
      out += '\n';
    }
    emit(g, out);
  } else {
    std::ostringstream out;
    out << "v_pi = " << format_double(report.at("v_pi").get<double>()) << '\n';
    if (report.contains("diagnostics") && !report.at("diagnostics").is_null()) {
      const Json& d = report.at("diagnostics");
      out << "diagnostics: c = " << format_double(d.at("c").get<double>())
          << ", u_rho = " << format_double(d.at("u_rho").get<double>())
          << ", u_s = " << format_double(d.at("u_s").get<double>())
          << ", m_rho_sq = " << format_double(d.at("m_rho_sq").get<double>())
          << '\n';
    }
    for (const Json& row : report.at("estimators")) {
      out << row.at("estimator").get<std::string>() << ": mean = "
          << format_double(row.at("mean").get<double>()) << ", variance = "
          << (row.at("variance").is_null()
                  ? std::string("n/a")
                  : format_double(row.at("variance").get<double>()))
          << " (" << row.at("method").get<std::string>() << ")";
      if (row.contains("overflow_t")) {
        out << " [second moment overflowed at t = "
            << row.at("overflow_t").get<int>() << "]";
      }
      out << '\n';
    }
    emit(g, out.str());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// counterexamples

int cmd_counterexamples(const GlobalOpts& g) {
  constexpr double kCrossTol = 1e-9;
  const std::size_t cap = enum_cap_from_env();

  struct Row {
    int example = 0;
    double mean = 0.0;  // reference mean (all estimators are unbiased)
    double var_is = 0.0, var_pdis = 0.0, var_sis = 0.0;  // reference
    double enum_is = 0.0, enum_pdis = 0.0, enum_sis = 0.0;
    std::string ordering;
    bool ok = true;
  };
  std::vector<Row> rows;
  bool all_ok = true;

  for (int which = 1; which <= 3; ++which) {
    const CounterexampleFixture fix = counterexample_fixture(which);
    const EvaluationProblem problem = counterexample_mdp(which);
    Row row;
    row.example = which;
    row.mean = fix.mean;
    row.var_is = fix.var_is;
    row.var_pdis = fix.var_pdis;
    row.var_sis = fix.var_sis;
    row.ordering = std::string(fix.ordering[0]) + " < " + fix.ordering[1] +
                   " < " + fix.ordering[2];

    const MomentReport is = exact_moments(problem, EstimatorKind::is(), cap);
    const MomentReport pdis =
        exact_moments(problem, EstimatorKind::pdis(), cap);
    const MomentReport sis = exact_moments(problem, EstimatorKind::sis(), cap);
    row.enum_is = is.variance;
    row.enum_pdis = pdis.variance;
    row.enum_sis = sis.variance;
    row.ok = std::abs(is.mean - fix.mean) <= kCrossTol &&
             std::abs(pdis.mean - fix.mean) <= kCrossTol &&
             std::abs(sis.mean - fix.mean) <= kCrossTol &&
             std::abs(is.variance - fix.var_is) <= kCrossTol &&
             std::abs(pdis.variance - fix.var_pdis) <= kCrossTol &&
             std::abs(sis.variance - fix.var_sis) <= kCrossTol;
    all_ok = all_ok && row.ok;
    rows.push_back(std::move(row));
  }

  if (g.format == "csv") {
    std::string out =
        "example,estimator,mean,variance,variance_enumerated,ordering,cross_"
        "check\n";
    for (const Row& row : rows) {
      const char* names[3] = {"IS", "PDIS", "SIS"};
      const double ref[3] = {row.var_is, row.var_pdis, row.var_sis};
      const double enu[3] = {row.enum_is, row.enum_pdis, row.enum_sis};
      for (int i = 0; i < 3; ++i) {
        out += std::to_string(row.example);
        out += ',';
        out += names[i];
        out += ',';
        out += format_double(row.mean);
        out += ',';
        out += format_double(ref[i]);
        out += ',';
        out += format_double(enu[i]);
        out += ',';
        out += row.ordering;
        out += ',';
        out += row.ok ? "ok" : "deviation";
        out += '\n';
      }
    }
    emit(g, out);
  } else if (g.format == "json") {
    Json out = Json::array();
    for (const Row& row : rows) {
      Json entry;
      entry["example"] = row.example;
      entry["mean"] = row.mean;
      Json variance;
      variance["IS"] = row.var_is;
      variance["PDIS"] = row.var_pdis;
      variance["SIS"] = row.var_sis;
      entry["variance"] = std::move(variance);
      entry["ordering"] = row.ordering;
      entry["cross_check"] = row.ok ? "ok" : "deviation";
      out.push_back(std::move(entry));
    }
    emit(g, dump(out));
  } else {
    std::ostringstream out;
    out << "example  mean  Var(IS)  Var(PDIS)  Var(SIS)  ordering"
        << std::string(9, ' ') << "cross-check\n";
    for (const Row& row : rows) {
      std::string line = std::to_string(row.example);
      line.append(9 - line.size(), ' ');
      auto cell = [&line](const std::string& text, std::size_t width) {
        line += text;
        line.append(text.size() < width ? width - text.size() : 1, ' ');
      };
      cell(format_double(row.mean), 6);
      cell(format_double(row.var_is), 9);
      cell(format_double(row.var_pdis), 11);
      cell(format_double(row.var_sis), 10);
      cell(row.ordering, 17);
      line += row.ok ? "ok" : "DEVIATION";
      out << line << '\n';
    }
    emit(g, out.str());
  }
  return all_ok ? 0 : 1;
}

// ---------------------------------------------------------------------------
// sweep

int cmd_sweep(const GlobalOpts& g) {
  const Json config = require_config(g, "sweep");
  reject_unknown_keys(config,
                      {"experiment", "family", "problem", "t_grid",
                       "gamma_grid", "estimators", "method", "mc", "eps_grid",
                       "perturbation_seed", "out_csv", "out_fits"},
                      "sweep config");
  const std::string experiment =
      value_or<std::string>(config, "experiment", "horizon");
  const std::size_t cap = enum_cap_from_env();

  const std::string out_csv =
      value_or<std::string>(config, "out_csv", g.out_path);

  // Family node: two_lane, or random_ergodic with per-seed parameters; the
  // horizon is supplied by the grid.
  auto parse_family =
      [&]() -> std::pair<std::function<EvaluationProblem(int, double)>,
                         double> {
    if (!config.contains("family")) {
      throw ConfigError("sweep config: missing 'family'");
    }
    const Json& node = config.at("family");
    const std::string name = node.at("scenario").get<std::string>();
    if (name == "two_lane") {
      reject_unknown_keys(node, {"scenario"}, "family");
      return {[](int T, double) { return two_lane(T); }, 1.0};
    }
    if (name == "random_ergodic") {
      reject_unknown_keys(node,
                          {"scenario", "seed", "num_states", "num_actions",
                           "gamma", "policy_gap"},
                          "family");
      const std::uint64_t seed = value_or<std::uint64_t>(node, "seed", g.seed);
      const int S = value_or<int>(node, "num_states", 3);
      const int A = value_or<int>(node, "num_actions", 2);
      const double gamma = value_or<double>(node, "gamma", 1.0);
      const double gap = value_or<double>(node, "policy_gap", 0.3);
      return {[seed, S, A, gap](int T, double gm) {
                return random_ergodic(seed, S, A, T, gm, gap);
              },
              gamma};
    }
    throw ConfigError("family: unknown scenario '" + name + "'");
  };

  if (experiment == "horizon") {
    auto [family2, gamma] = parse_family();
    auto family = [&family2, gamma](int T) { return family2(T, gamma); };
    if (!config.contains("t_grid")) {
      throw ConfigError("sweep config: missing 't_grid'");
    }
    const std::vector<int> t_grid =
        parse_int_grid(config.at("t_grid"), "t_grid");
    const std::vector<EstimatorKind> kinds = kinds_from_config(config);

    const std::string method_str =
        value_or<std::string>(config, "method", "exact_dp");
    SweepMethod method;
    if (method_str == "exact_dp") {
      method = SweepMethod::kExactDp;
    } else if (method_str == "enumeration") {
      method = SweepMethod::kEnumeration;
    } else if (method_str == "monte_carlo") {
      method = SweepMethod::kMonteCarlo;
    } else {
      throw ConfigError("sweep config: unknown method '" + method_str + "'");
    }

    SamplerConfig sampler;
    const bool has_mc = config.contains("mc");
    if (method == SweepMethod::kMonteCarlo) {
      if (!has_mc) {
        throw ConfigError("sweep config: monte_carlo needs an 'mc' entry");
      }
      sampler = sampler_from_config(config, g);
    }

    const SweepResult result =
        horizon_sweep(family, t_grid, kinds, method,
                      method == SweepMethod::kMonteCarlo ? &sampler : nullptr,
                      cap);

    const std::string csv = sweep_csv(result);
    const std::string fits = dump(fits_json(result));
    if (out_csv.empty()) {
      std::cout << csv << fits;
    } else {
      write_text_atomic(out_csv, csv);
      const std::string out_fits =
          value_or<std::string>(config, "out_fits", out_csv + ".fits.json");
      write_text_atomic(out_fits, fits);
      std::cout << "wrote " << out_csv << " and " << out_fits << '\n';
    }
    for (const RateFit& fit : result.fits) {
      if (fit.valid) {
        std::cout << "fit " << fit.estimator << ": alpha = "
                  << format_double(fit.alpha) << " (log-linear rms "
                  << format_double(fit.alpha_residual) << "), beta = "
                  << format_double(fit.beta) << " (log-log rms "
                  << format_double(fit.beta_residual) << "), window = ["
                  << fit.t_min << ", " << fit.t_max << "]\n";
      } else {
        std::cout << "fit " << fit.estimator
                  << ": insufficient usable points\n";
      }
    }
    return 0;
  }

  if (experiment == "pdis_regime") {
    auto [family2, gamma] = parse_family();
    (void)gamma;  // the grid supplies per-row discounts
    if (!config.contains("t_grid") || !config.contains("gamma_grid")) {
      throw ConfigError(
          "sweep config: pdis_regime needs 't_grid' and 'gamma_grid'");
    }
    const std::vector<int> t_grid =
        parse_int_grid(config.at("t_grid"), "t_grid");
    std::vector<double> gamma_grid;
    for (const Json& v : config.at("gamma_grid")) {
      gamma_grid.push_back(v.get<double>());
    }
    const std::vector<RegimeRow> regime =
        pdis_regime(family2, t_grid, gamma_grid);

    std::string out = "gamma,alpha,beta,u_rho_gamma,classification\n";
    for (const RegimeRow& row : regime) {
      out += format_double(row.gamma);
      out += ',';
      out += format_double(row.alpha);
      out += ',';
      out += format_double(row.beta);
      out += ',';
      out += format_double(row.u_rho_gamma);
      out += ',';
      out += row.classification;
      out += '\n';
      std::cout << "gamma " << format_double(row.gamma) << ": "
                << row.classification << " (alpha = "
                << format_double(row.alpha) << ", beta = "
                << format_double(row.beta) << ", gamma*U_rho = "
                << format_double(row.u_rho_gamma) << ")\n";
    }
    if (!out_csv.empty()) {
      write_text_atomic(out_csv, out);
      std::cout << "wrote " << out_csv << '\n';
    } else if (g.format == "csv") {
      std::cout << out;
    }
    return 0;
  }

  if (experiment == "asis") {
    if (!config.contains("problem")) {
      throw ConfigError("sweep config: asis needs a 'problem' entry");
    }
    const EvaluationProblem problem = problem_from_node(config.at("problem"));
    std::vector<double> eps_grid = {0.0, 0.01, 0.05, 0.2};
    if (config.contains("eps_grid")) {
      eps_grid.clear();
      for (const Json& v : config.at("eps_grid")) {
        eps_grid.push_back(v.get<double>());
      }
      if (eps_grid.empty()) {
        throw ConfigError("sweep config: 'eps_grid' must be non-empty");
      }
    }
    const std::uint64_t pseed =
        value_or<std::uint64_t>(config, "perturbation_seed", g.seed);
    SamplerConfig sampler;
    const bool has_mc = config.contains("mc");
    if (has_mc) sampler = sampler_from_config(config, g);

    const std::vector<AsisRow> rows = asis_experiment(
        problem, eps_grid, pseed, has_mc ? &sampler : nullptr);

    bool all_ok = true;
    std::string out =
        "eps_target,eps_realized,mse,bias,variance,sis_variance,bound,mc_"
        "mse\n";
    for (const AsisRow& row : rows) {
      const bool ok = row.mse <= row.bound + 1e-9;
      all_ok = all_ok && ok;
      out += format_double(row.eps_target);
      out += ',';
      out += format_double(row.eps_realized);
      out += ',';
      out += format_double(row.mse);
      out += ',';
      out += format_double(row.bias);
      out += ',';
      out += format_double(row.variance);
      out += ',';
      out += format_double(row.sis_variance);
      out += ',';
      out += format_double(row.bound);
      out += ',';
      if (row.mc_mse) out += format_double(*row.mc_mse);
      out += '\n';
      std::cout << "eps " << format_double(row.eps_target) << ": mse = "
                << format_double(row.mse) << (ok ? " <= " : " EXCEEDS ")
                << "bound " << format_double(row.bound) << '\n';
    }
    if (!out_csv.empty()) {
      write_text_atomic(out_csv, out);
      std::cout << "wrote " << out_csv << '\n';
    } else if (g.format == "csv") {
      std::cout << out;
    }
    return all_ok ? 0 : 1;
  }

  throw ConfigError("sweep config: unknown experiment '" + experiment + "'");
}

// ---------------------------------------------------------------------------
// conditions

int cmd_conditions(const GlobalOpts& g) {
  const Json config = require_config(g, "conditions");
  const std::string mode = value_or<std::string>(config, "mode", "check");
  const std::size_t cap = enum_cap_from_env();

  if (mode == "check") {
    reject_unknown_keys(config, {"mode", "theorem", "problem", "lemma2"},
                        "conditions config");
    if (!config.contains("problem")) {
      throw ConfigError("conditions config: missing 'problem'");
    }
    const EvaluationProblem problem = problem_from_node(config.at("problem"));
    const int theorem = value_or<int>(config, "theorem", 0);  // 0 = both
    if (theorem < 0 || theorem > 2) {
      throw ConfigError("conditions config: theorem must be 1, 2, or absent");
    }

    Json out;
    std::ostringstream text;
    auto render = [&text](const char* label, const ConditionReport& report) {
      text << label << ": " << (report.holds ? "holds" : "FAILS")
           << " (margin " << format_double(report.margin) << " over "
           << report.pairs_checked << " pairs";
      if (!report.holds) {
        const PairWitness& w = report.violations.front();
        text << "; first violation " << w.family << " t=" << w.t
             << " k=" << w.k << " lhs=" << format_double(w.lhs)
             << " rhs=" << format_double(w.rhs);
      }
      text << ")\n";
    };
    if (theorem == 0 || theorem == 1) {
      const ConditionReport report = theorem1_condition(problem, cap);
      out["theorem1"] = condition_report_json(report);
      render("theorem1 condition", report);
    }
    if (theorem == 0 || theorem == 2) {
      const ConditionReport report = theorem2_condition(problem, cap);
      out["theorem2"] = condition_report_json(report);
      render("theorem2 condition", report);
    }
    if (value_or<bool>(config, "lemma2", true)) {
      Json gaps;
      const struct {
        const char* name;
        Lemma2Conditioning conditioning;
      } modes[] = {{"prefix", Lemma2Conditioning::kPrefix},
                   {"state_action", Lemma2Conditioning::kStateAction},
                   {"identity", Lemma2Conditioning::kIdentity}};
      for (const auto& m : modes) {
        const VarianceGap gap = lemma2_gap(problem, m.conditioning, cap);
        Json entry;
        entry["lhs"] = gap.lhs;
        entry["rhs"] = gap.rhs;
        gaps[m.name] = std::move(entry);
        text << "variance-gap bound (" << m.name
             << "): lhs = " << format_double(gap.lhs)
             << ", rhs = " << format_double(gap.rhs)
             << (gap.lhs >= gap.rhs - 1e-10 ? " (bound holds)"
                                            : " (BOUND VIOLATED)")
             << '\n';
      }
      out["lemma2"] = std::move(gaps);
    }
    emit(g, g.format == "json" ? dump(out) : text.str());
    return 0;
  }

  if (mode == "implication") {
    reject_unknown_keys(config, {"mode", "theorem", "family", "n"},
                        "conditions config");
    if (!config.contains("theorem")) {
      throw ConfigError("conditions config: implication needs 'theorem'");
    }
    const int theorem = config.at("theorem").get<int>();
    if (theorem != 1 && theorem != 2) {
      throw ConfigError("conditions config: theorem must be 1 or 2");
    }
    if (!config.contains("family")) {
      throw ConfigError("conditions config: implication needs 'family'");
    }
    const Json& node = config.at("family");
    reject_unknown_keys(node,
                        {"scenario", "num_states", "num_actions", "horizon",
                         "gamma", "policy_gap"},
                        "family");
    if (node.at("scenario").get<std::string>() != "random_ergodic") {
      throw ConfigError(
          "conditions config: implication family must be random_ergodic");
    }
    const int S = value_or<int>(node, "num_states", 3);
    const int A = value_or<int>(node, "num_actions", 2);
    const int T = value_or<int>(node, "horizon", 4);
    const double gamma = value_or<double>(node, "gamma", 1.0);
    const double gap = value_or<double>(node, "policy_gap", 0.3);
    const int n = value_or<int>(config, "n", 100);
    if (n < 1) throw ConfigError("conditions config: n must be >= 1");

    const auto generator = [=](std::uint64_t seed) {
      return random_ergodic(seed, S, A, T, gamma, gap);
    };
    const ImplicationSummary summary = verify_implication(
        generator, n,
        theorem == 1 ? OrderingTheorem::kPdisLeqIs
                     : OrderingTheorem::kSisLeqPdis,
        cap, g.workers);

    Json out;
    out["theorem"] = theorem;
    const Json body = implication_summary_json(summary);
    for (const auto& item : body.items()) out[item.key()] = item.value();

    std::cout << "theorem " << theorem << " implication: condition held on "
              << summary.condition_held << "/" << summary.n << " problems; ";
    if (summary.violations.empty()) {
      std::cout << "ordering held on all of them\n";
    } else {
      std::cout << summary.violations.size() << " ORDERING VIOLATION(S)\n";
    }
    if (g.format == "json" || !g.out_path.empty()) emit(g, dump(out));
    return summary.violations.empty() ? 0 : 1;
  }

  throw ConfigError("conditions config: unknown mode '" + mode + "'");
}

// ---------------------------------------------------------------------------
// two-lane

int cmd_two_lane(const GlobalOpts& g, int horizon) {
  if (horizon < 4) throw ConfigError("two-lane: --horizon must be >= 4");
  const std::size_t cap = enum_cap_from_env();
  const EvaluationProblem problem = two_lane(horizon);
  const double v_pi = target_value(problem);
  const MomentReport is = moment_dp_variance(problem, EstimatorKind::is());
  const MomentReport pdis = moment_dp_variance(problem, EstimatorKind::pdis());
  const MomentReport sis = moment_dp_variance(problem, EstimatorKind::sis());

  const double t_sq = static_cast<double>(horizon) * horizon;
  const bool sis_ok = std::abs(sis.variance - t_sq) <= 1e-9 * t_sq;

  // The per-trajectory law of the occupancy-weighted estimate: enumerated
  // below 2^16 paths, otherwise derived from the lane structure (the lanes
  // are deterministic chains, so the estimate is 2T on one and 0 on the
  // other, each with probability 1/2).
  ReturnDistribution law;
  std::string law_method;
  if (horizon <= 16) {
    law = enumerate_returns(problem, EstimatorKind::sis(), cap).merged();
    law_method = "enumeration";
  } else {
    law.atoms = {{0.0, 0.5}, {2.0 * horizon, 0.5}};
    law_method = "structural";
  }

  if (g.format == "json") {
    Json out;
    out["horizon"] = horizon;
    out["v_pi"] = v_pi;
    Json rows = Json::array();
    for (const MomentReport* m : {&is, &pdis, &sis}) {
      Json row;
      row["estimator"] = m->estimator;
      row["mean"] = m->mean;
      row["variance"] = m->variance;
      rows.push_back(std::move(row));
    }
    out["estimators"] = std::move(rows);
    Json atoms = Json::array();
    for (const auto& [value, prob] : law.atoms) {
      Json atom;
      atom["value"] = value;
      atom["probability"] = prob;
      atoms.push_back(std::move(atom));
    }
    Json dist;
    dist["method"] = law_method;
    dist["atoms"] = std::move(atoms);
    out["sis_distribution"] = std::move(dist);
    out["sis_variance_equals_t_squared"] = sis_ok;
    emit(g, dump(out));
  } else if (g.format == "csv") {
    std::string out = "estimator,mean,variance\n";
    for (const MomentReport* m : {&is, &pdis, &sis}) {
      out += m->estimator;
      out += ',';
      out += format_double(m->mean);
      out += ',';
      out += format_double(m->variance);
      out += '\n';
    }
    emit(g, out);
  } else {
    std::ostringstream out;
    out << "two-lane horizon " << horizon << ": v_pi = "
        << format_double(v_pi) << '\n';
    for (const MomentReport* m : {&is, &pdis, &sis}) {
      out << m->estimator << ": mean = " << format_double(m->mean)
          << ", variance = " << format_double(m->variance) << '\n';
    }
    out << "SIS law (" << law_method << "):";
    for (const auto& [value, prob] : law.atoms) {
      out << "  " << format_double(value) << " w.p. " << format_double(prob);
    }
    out << '\n';
    out << "Var(SIS) " << (sis_ok ? "matches" : "DOES NOT MATCH") << " T^2 = "
        << format_double(t_sq) << '\n';
    emit(g, out.str());
  }
  return sis_ok ? 0 : 1;
}

// ---------------------------------------------------------------------------
// rate-check

int cmd_rate_check(const GlobalOpts& g, int horizon, int n) {
  if (horizon < 1) throw ConfigError("rate-check: --horizon must be >= 1");
  if (n < 2) throw ConfigError("rate-check: --n must be >= 2");

  EvaluationProblem problem;
  if (!g.config_path.empty()) {
    const Json config = load_json_file(g.config_path);
    reject_unknown_keys(config, {"problem"}, "rate-check config");
    if (!config.contains("problem")) {
      throw ConfigError("rate-check config: missing 'problem'");
    }
    problem = problem_from_node(config.at("problem"));
  } else {
    // Default fixture: a small strictly-ergodic chain with a positive
    // behavior-to-target gap, so the decay rate is positive.
    problem = random_ergodic(g.seed, 5, 2, 8, 1.0, 0.3);
  }

  SamplerConfig sampler;
  sampler.seed = g.seed;
  sampler.num_trajectories = n;
  sampler.num_workers = g.workers;
  const RateCheckReport report =
      likelihood_rate_check(problem, horizon, sampler);
  const bool within = report.deviation <= 3.0 * report.standard_error;

  if (g.format == "json") {
    Json out;
    out["horizon"] = report.horizon;
    out["n"] = report.n;
    out["excluded"] = report.excluded;
    out["c"] = report.c;
    out["mean_log_ratio"] = report.mean_log_ratio;
    out["deviation"] = report.deviation;
    out["standard_error"] = report.standard_error;
    out["frac_below_half_rate"] = report.frac_below_half_rate;
    out["within_three_se"] = within;
    emit(g, dump(out));
  } else {
    std::ostringstream out;
    out << "likelihood decay over " << report.n << " trajectories of length "
        << report.horizon << " (" << report.excluded << " excluded)\n";
    out << "exact rate -c = " << format_double(-report.c)
        << ", empirical mean = " << format_double(report.mean_log_ratio)
        << ", se = " << format_double(report.standard_error) << '\n';
    out << "deviation " << format_double(report.deviation)
        << (within ? " within " : " EXCEEDS ") << "3 standard errors\n";
    out << "fraction below the half-rate envelope: "
        << format_double(report.frac_below_half_rate) << '\n';
    emit(g, out.str());
  }
  return within ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tabular off-policy evaluation laboratory"};
  app.require_subcommand(1);

  GlobalOpts g;
  int two_lane_horizon = 8;
  int rate_horizon = 10000;
  int rate_n = 100;

  CLI::App* validate = app.add_subcommand(
      "validate", "Check a problem document and report every defect");
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "Exact or Monte Carlo estimator report for one problem");
  CLI::App* counterexamples = app.add_subcommand(
      "counterexamples",
      "Reproduce the three-example variance grid with ordering annotations");
  CLI::App* sweep = app.add_subcommand(
      "sweep",
      "Horizon sweeps with rate fits, discount-regime classification, and "
      "perturbed-weight experiments");
  CLI::App* conditions = app.add_subcommand(
      "conditions",
      "Variance-ordering sufficient conditions and implication suites");
  CLI::App* two_lane_cmd = app.add_subcommand(
      "two-lane", "Exact analysis of the two-lane construction");
  CLI::App* rate_check = app.add_subcommand(
      "rate-check",
      "Empirical likelihood-ratio decay against the stationary KL rate");

  for (CLI::App* cmd : {validate, evaluate, counterexamples, sweep, conditions,
                        two_lane_cmd, rate_check}) {
    cmd->add_option("--config", g.config_path, "JSON run configuration file");
    cmd->add_option("--out", g.out_path,
                    "Write the main artifact here (default: stdout)");
    cmd->add_option("--workers", g.workers,
                    "Worker threads; 0 = all hardware threads");
    cmd->add_option("--seed", g.seed, "Base seed for randomized steps");
    cmd->add_option("--format", g.format, "Output format")
        ->check(CLI::IsMember({"csv", "json", "table"}));
  }
  two_lane_cmd->add_option("--horizon", two_lane_horizon, "Chain length T");
  rate_check->add_option("--horizon", rate_horizon, "Trajectory length");
  rate_check->add_option("--n", rate_n, "Number of trajectories");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (validate->parsed()) return cmd_validate(g);
    if (evaluate->parsed()) return cmd_evaluate(g);
    if (counterexamples->parsed()) return cmd_counterexamples(g);
    if (sweep->parsed()) return cmd_sweep(g);
    if (conditions->parsed()) return cmd_conditions(g);
    if (two_lane_cmd->parsed()) return cmd_two_lane(g, two_lane_horizon);
    if (rate_check->parsed()) return cmd_rate_check(g, rate_horizon, rate_n);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "invalid problem: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const SupportViolation& e) {
    std::cerr << "support violation: " << e.what() << '\n';
    return 3;
  } catch (const OpeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
