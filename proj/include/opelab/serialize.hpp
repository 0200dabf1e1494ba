#pragma once

// JSON problem documents, CSV table formats, and atomic file output.  All
// floating-point text is written with enough digits to round-trip exactly,
// so identical runs produce identical bytes.

#include <filesystem>
#include <initializer_list>
#include <string>

#include "json.hpp"
#include "opelab/conditions.hpp"
#include "opelab/mdp.hpp"
#include "opelab/occupancy.hpp"
#include "opelab/oracle.hpp"
#include "opelab/sweeps.hpp"

namespace opelab {

using Json = nlohmann::ordered_json;

// Shortest round-trip decimal form of a double (stable across runs).
std::string format_double(double x);

// Problem document schema (object keys):
//   num_states, num_actions, horizon, gamma, transition [s][a][s'],
//   reward [t][s][a] or [s][a] (stationary shorthand), initial_dist,
//   behavior [s][a], target [s][a], absorbing_state (optional).
// Unknown keys are rejected with ConfigError; problem_from_json validates
// the result and throws ValidationError on structural defects.
Json problem_to_json(const EvaluationProblem& problem);
EvaluationProblem problem_from_json(const Json& doc);

// Shape-checks only (ConfigError on malformed documents) without validating
// the probabilistic semantics, so callers can report every defect at once.
EvaluationProblem problem_from_json_unchecked(const Json& doc);

EvaluationProblem load_problem_file(const std::filesystem::path& path);

// Parses a JSON document, mapping I/O and syntax failures to ConfigError.
Json load_json_file(const std::filesystem::path& path);

// Writes content to path via a temporary file in the same directory plus an
// atomic rename, so readers never observe a partial file.
void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content);

// CSV tables.  Column layouts are stable interfaces:
//   occupancy:    t,s,a,d_mu,d_pi,ratio
//   distribution: value,probability
//   batch:        traj_id,t,s,a,r
//   sweep:        estimator,horizon,gamma,mean,variance,method,seed
std::string occupancy_csv(const OccupancyTables& occ);
std::string distribution_csv(const ReturnDistribution& dist);
std::string batch_csv(const TrajectoryBatch& batch);
std::string sweep_csv(const SweepResult& result);

// Rate-fit summary: [{estimator, alpha, beta, t_min, t_max, residual}].
Json fits_json(const SweepResult& result);

// Condition-check summary: counts plus violation witnesses.
Json condition_report_json(const ConditionReport& report);
Json implication_summary_json(const ImplicationSummary& summary);

// Helper for config parsing: throws ConfigError naming the offending key if
// `doc` (an object) contains a key outside `allowed`.
void reject_unknown_keys(const Json& doc,
                         std::initializer_list<const char*> allowed,
                         const std::string& context);

}  // namespace opelab
