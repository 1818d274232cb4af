#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spinopt/optimizer.hpp"

namespace spinopt {

enum class ExportKind { history, fields, trajectory };

// One parameter swept over an increasing list of values; every other setting
// is shared between the runs.
struct SweepSpec {
  std::string parameter;  // "T0" or "alpha0"
  std::vector<double> values;
};

struct ExperimentSpec {
  std::string name = "run";
  int spins = 2;
  OptimizationConfig config;
  std::optional<SweepSpec> sweep;
  std::vector<ExportKind> outputs{ExportKind::history};
  std::string output_dir = ".";
  int jobs = 1;
};

// Throws std::invalid_argument on an inconsistent spec (unknown sweep
// parameter, non-increasing or non-positive sweep values, empty name, bad
// job count).
void validate_experiment(const ExperimentSpec& spec);

struct ExperimentOutcome {
  // 0 success, 3 a run ended in guard_failure, 4 output could not be written
  int status = 0;
  std::vector<std::string> files;  // paths written, in deterministic order
  std::string detail;
};

// Runs the experiment (sweep points concurrently when jobs > 1, each point
// owning its files) and writes one run history JSON per run plus the selected
// CSV exports. File contents depend only on the experiment definition, never
// on wall clock or scheduling, so re-running byte-reproduces every output.
ExperimentOutcome run_experiment(const ExperimentSpec& spec);

// `<name>.json`, or `<name>_<param>=<value>.json` for a sweep point; CSV
// exports swap the extension for `_history.csv`, `_fields.csv`,
// `_trajectory.csv`.
std::string run_basename(const ExperimentSpec& spec, std::optional<double> sweep_value);

// JSON payload for one finished run: config echo, per-iteration records,
// final duration/fidelity/fields, termination reason. Round-trip-exact
// numbers, stable key order.
std::string history_json(const ExperimentSpec& spec, std::optional<double> sweep_value,
                         const RunHistory& history);

// Columns k,J,T,P,fluence, one row per iteration.
std::string export_history_csv(const RunHistory& history);

// Columns s,t,E_1x,E_1y,...: the midpoint grid in rescaled and physical time
// with one column per control channel.
std::string export_fields_csv(const ControlSet& fields);

// Columns s,P(s) at the grid points s = 0, 1/N, ..., 1: the fidelity of the
// evolving propagator against the target along the solution.
std::string export_probability_csv(const SpinChainModel& model, const ControlSet& fields,
                                   const ControlTarget& target);

}  // namespace spinopt
