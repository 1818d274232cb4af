#pragma once

#include <variant>
#include <vector>

#include "spinopt/spin_model.hpp"

namespace spinopt {

// Control fields on the unit interval: one row per channel, N samples taken
// at the interval midpoints s_k = (k + 1/2)/N. The physical pulse lasts
// `duration`, with t = s * duration.
struct ControlSet {
  Eigen::MatrixXd samples;
  double duration = 1.0;

  int channels() const { return int(samples.rows()); }
  int grid() const { return int(samples.cols()); }
  double ds() const { return 1.0 / grid(); }

  static double midpoint(int k, int N) { return (k + 0.5) / N; }
  static ControlSet zeros(int m, int N, double T);
};

enum class PenaltyMode { direct, shaped };

// Per-sample weights alpha(s_k). `direct` follows alpha0 sin^2(pi s) with a
// floor that keeps the weight positive at the ends; `shaped` inverts the
// profile so deviations near the ends are punished hardest and optimized
// fields switch on and off smoothly.
struct PenaltySchedule {
  Eigen::VectorXd weights;

  int grid() const { return int(weights.size()); }

  static PenaltySchedule build(double alpha0, int N, PenaltyMode mode = PenaltyMode::direct,
                               double floor_fraction = 1e-3);
  static PenaltySchedule constant(double alpha0, int N);
};

struct StateTransfer {
  StateVector initial;
  StateVector target;
};

using ControlTarget = std::variant<GateTarget, StateTransfer>;

// Initial condition and target in matrix form: dim x dim for gate synthesis
// (initial = identity), dim x 1 for state transfer.
struct TargetMatrices {
  ComplexMatrix initial;
  ComplexMatrix target;
};

TargetMatrices target_matrices(const ControlTarget& target, int dim);

// Snapshots at the grid points s = 0, 1/N, ..., 1 (N+1 entries).
struct Trajectory {
  std::vector<ComplexMatrix> points;

  int grid() const { return int(points.size()) - 1; }
  const ComplexMatrix& front() const { return points.front(); }
  const ComplexMatrix& back() const { return points.back(); }
};

// H0 + sum_j E_j H_j for one column of field samples.
ComplexMatrix control_hamiltonian(const SpinChainModel& model, const Eigen::VectorXd& field_values);

// Eigensystems of the interval Hamiltonians H(s_k). Rebuilding a propagation
// step at a different duration is then a phase reconstruction instead of a
// fresh diagonalization, which is what makes duration line searches cheap.
struct SpectralStepCache {
  std::vector<ComplexMatrix> vectors;
  std::vector<Eigen::VectorXd> values;

  int grid() const { return int(vectors.size()); }
  void reserve(int N);
  void push(const ComplexMatrix& h);

  // exp(-i angle H_k)
  ComplexMatrix step(int k, double angle) const;
};

SpectralStepCache build_step_cache(const SpinChainModel& model, const ControlSet& fields);

// Forward evolution of `init` (states as dim x 1 matrices, propagators as
// dim x dim) across the whole grid.
Trajectory propagate_forward(const SpinChainModel& model, const ControlSet& fields,
                             const ComplexMatrix& init);
Trajectory propagate_forward(const SpectralStepCache& cache, double duration,
                             const ComplexMatrix& init);

// Backward sweep of the adjoint equation from a final condition; entry k of
// the result matches grid point s = k/N. Forward and backward steps are exact
// adjoints, so Tr[V_k^dag U_k] is conserved along the pair of sweeps.
Trajectory propagate_adjoint_backward(const SpinChainModel& model, const ControlSet& fields,
                                      const ComplexMatrix& final_condition);
Trajectory propagate_adjoint_backward(const SpectralStepCache& cache, double duration,
                                      const ComplexMatrix& final_condition);

// Endpoint only, without storing the trajectory.
ComplexMatrix final_state(const SpectralStepCache& cache, double duration,
                          const ComplexMatrix& init);

// duration * ds * sum_k alpha(s_k) sum_j E_j(s_k)^2
double fluence(const ControlSet& fields, const PenaltySchedule& penalty);

// 2 Re Tr[G^dag U]
double gate_overlap(const ComplexMatrix& final_u, const GateTarget& target);

// gate_overlap normalized to 1 at a perfect gate
double fidelity_P(const ComplexMatrix& final_u, const GateTarget& target);

// |<target|state>|^2 for a normalized pair
double transfer_probability(const ComplexMatrix& state, const StateVector& target);

// Figure of merit the optimizer climbs: terminal overlap minus fluence.
double evaluate_cost(const SpinChainModel& model, const ControlSet& fields,
                     const PenaltySchedule& penalty, const ControlTarget& target);

}  // namespace spinopt
