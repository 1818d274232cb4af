#pragma once

#include <string>

#include "spinopt/dynamics.hpp"

namespace spinopt {

enum class TimeUpdateMode { systematic, gradient, frozen };

enum class SeedFieldKind { zero, strict_zero, fixed };

// Starting guess for the control fields. `zero` is zeros plus a deterministic
// perturbation of size ~1e-8, shaped like sin(pi s) and slightly different on
// every channel. The perturbation matters: on some targets (the two-spin
// controlled NOT among them) the drift spectrum makes exact zeros a stationary
// point of the field update, with every update trace cancelling in conjugate
// pairs, and the iteration would never leave it while the duration update
// walks T toward zero. `strict_zero` keeps the literal zeros for studying
// exactly that behavior. `fixed` supplies explicit samples.
struct SeedField {
  SeedFieldKind kind = SeedFieldKind::zero;
  Eigen::MatrixXd samples;

  static SeedField zero() { return {SeedFieldKind::zero, {}}; }
  static SeedField strict_zero() { return {SeedFieldKind::strict_zero, {}}; }
  static SeedField fixed(Eigen::MatrixXd s) { return {SeedFieldKind::fixed, std::move(s)}; }
};

// Materialize the seed on an m-channel, N-point grid with duration T.
ControlSet seed_fields(const SeedField& seed, int m, int N, double T);

struct OptimizationConfig {
  double alpha0 = 0.08;
  double T0 = 0.5;
  double a = 5e-4;            // relative probe size of the systematic duration update
  TimeUpdateMode time_update = TimeUpdateMode::systematic;
  double r0 = 1e-2;           // initial step of the gradient duration update
  int grid = 2000;
  int max_iter = 5000;
  double stop_tol = 0.0;      // 0 disables the stagnation stop
  PenaltyMode penalty_mode = PenaltyMode::direct;
  double penalty_floor = 1e-3;
  ControlTarget target;
  SeedField seed_field;
};

struct IterationRecord {
  int k = 0;
  double J = 0.0;
  double T = 0.0;
  double P = 0.0;
  double fluence = 0.0;
  double dJ_field = 0.0;
  double dJ_time = 0.0;
};

enum class Termination { max_iter, stop_tol, guard_failure };

struct RunHistory {
  std::vector<IterationRecord> records;
  ControlSet final_fields;
  double final_J = 0.0;
  double final_T = 0.0;
  double final_P = 0.0;
  Termination termination = Termination::max_iter;
  std::string detail;
};

// Monotonicity slack 1e-9 (1 + |J|): measured per-iteration decreases beyond
// this indicate the grid is too coarse for the requested fields.
double monotonicity_slack(double J);

struct FieldUpdateResult {
  ControlSet fields;
  double delta_J = 0.0;             // measured change of the cost
  double delta_J_quadrature = 0.0;  // T ds sum_k alpha_k sum_j (E - E')^2, the model prediction
  double cost_before = 0.0;
  double cost_after = 0.0;
  Trajectory forward;               // trajectory under the updated fields
  SpectralStepCache cache;          // eigensystems of the updated interval Hamiltonians
};

// One monotonic field refresh at fixed duration: adjoint sweep back from the
// target under the current fields, then a forward sweep that replaces each
// sample with Im Tr[V^dag H_j U] / alpha(s_k) before stepping across the
// interval. The returned quadrature is the nonnegative first-order prediction
// of the cost gain; the measured delta_J approaches it as the grid refines.
FieldUpdateResult field_update_sweep(const SpinChainModel& model, const ControlSet& fields,
                                     const PenaltySchedule& penalty, const ControlTarget& target);

// Same, reusing previously computed eigensystems of the current fields.
FieldUpdateResult field_update_sweep(const SpinChainModel& model, const ControlSet& fields,
                                     const PenaltySchedule& penalty, const ControlTarget& target,
                                     const SpectralStepCache& current_cache);

struct TimeUpdateResult {
  double T = 0.0;
  double delta_J = 0.0;
  double cost_after = 0.0;
};

// Compare the cost at durations (1-a)T, T, (1+a)T and keep the best, with
// ties resolved toward the unchanged and then the smaller duration.
TimeUpdateResult time_update_systematic(const SpinChainModel& model, const ControlSet& fields,
                                        const PenaltySchedule& penalty, const ControlTarget& target,
                                        double a);

// Exact derivative of the discrete cost with respect to duration at fixed
// field samples.
double time_gradient(const SpinChainModel& model, const ControlSet& fields,
                     const PenaltySchedule& penalty, const ControlTarget& target);

// Ascent step T + r dJ/dT with r halved (at most 30 times) until the cost
// does not decrease; keeps T if no acceptable step is found.
TimeUpdateResult time_update_gradient(const SpinChainModel& model, const ControlSet& fields,
                                      const PenaltySchedule& penalty, const ControlTarget& target,
                                      double r0);

// Alternate field and duration updates from the configured seed until the
// iteration budget, the stagnation rule (|dJ| < stop_tol for 50 consecutive
// iterations), or a monotonicity guard failure ends the run.
RunHistory run(const SpinChainModel& model, const OptimizationConfig& cfg);

}  // namespace spinopt
