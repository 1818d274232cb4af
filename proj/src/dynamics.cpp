#include "spinopt/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace spinopt {

namespace {

void require_compatible(const SpinChainModel& model, const ControlSet& fields) {
  if (fields.channels() != model.channels())
    throw std::invalid_argument("control set has the wrong number of channels for this model");
  if (fields.grid() < 1) throw std::invalid_argument("control set needs at least one sample");
  if (!(fields.duration > 0.0)) throw std::invalid_argument("control duration must be positive");
}

}  // namespace

ControlSet ControlSet::zeros(int m, int N, double T) {
  if (m < 1 || N < 1) throw std::invalid_argument("ControlSet::zeros: need m >= 1 and N >= 1");
  return ControlSet{Eigen::MatrixXd::Zero(m, N), T};
}

PenaltySchedule PenaltySchedule::build(double alpha0, int N, PenaltyMode mode,
                                       double floor_fraction) {
  if (!(alpha0 > 0.0)) throw std::invalid_argument("penalty weight alpha0 must be positive");
  if (N < 1) throw std::invalid_argument("penalty schedule needs at least one sample");
  if (!(floor_fraction > 0.0) || floor_fraction > 1.0)
    throw std::invalid_argument("penalty floor_fraction must lie in (0, 1]");
  Eigen::VectorXd w(N);
  for (int k = 0; k < N; ++k) {
    const double s = ControlSet::midpoint(k, N);
    const double shape = std::sin(M_PI * s) * std::sin(M_PI * s);
    if (mode == PenaltyMode::direct)
      w(k) = alpha0 * std::max(shape, floor_fraction);
    else
      w(k) = alpha0 / std::max(shape, floor_fraction);
  }
  return PenaltySchedule{std::move(w)};
}

PenaltySchedule PenaltySchedule::constant(double alpha0, int N) {
  if (!(alpha0 > 0.0)) throw std::invalid_argument("penalty weight alpha0 must be positive");
  if (N < 1) throw std::invalid_argument("penalty schedule needs at least one sample");
  return PenaltySchedule{Eigen::VectorXd::Constant(N, alpha0)};
}

TargetMatrices target_matrices(const ControlTarget& target, int dim) {
  if (const auto* gate = std::get_if<GateTarget>(&target)) {
    if (gate->matrix.rows() != dim || gate->matrix.cols() != dim)
      throw std::invalid_argument("gate target has the wrong dimension for this model");
    if (!is_unitary(gate->matrix))
      throw std::invalid_argument("gate target must be unitary");
    return {ComplexMatrix::Identity(dim, dim), gate->matrix};
  }
  const auto& st = std::get<StateTransfer>(target);
  if (st.initial.size() != dim || st.target.size() != dim)
    throw std::invalid_argument("state transfer vectors have the wrong dimension for this model");
  if (std::abs(st.initial.norm() - 1.0) > 1e-8 || std::abs(st.target.norm() - 1.0) > 1e-8)
    throw std::invalid_argument("state transfer vectors must be normalized");
  return {ComplexMatrix(st.initial), ComplexMatrix(st.target)};
}

ComplexMatrix control_hamiltonian(const SpinChainModel& model,
                                  const Eigen::VectorXd& field_values) {
  if (int(field_values.size()) != model.channels())
    throw std::invalid_argument("field sample column has the wrong number of channels");
  ComplexMatrix h = model.drift;
  for (int j = 0; j < model.channels(); ++j) h += field_values(j) * model.controls[size_t(j)];
  return h;
}

void SpectralStepCache::reserve(int N) {
  vectors.reserve(size_t(N));
  values.reserve(size_t(N));
}

void SpectralStepCache::push(const ComplexMatrix& h) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("interval Hamiltonian eigendecomposition failed");
  vectors.push_back(es.eigenvectors());
  values.push_back(es.eigenvalues());
}

ComplexMatrix SpectralStepCache::step(int k, double angle) const {
  const Eigen::VectorXcd phases =
      (cplx(0.0, -angle) * values[size_t(k)].cast<cplx>()).array().exp();
  return vectors[size_t(k)] * phases.asDiagonal() * vectors[size_t(k)].adjoint();
}

SpectralStepCache build_step_cache(const SpinChainModel& model, const ControlSet& fields) {
  require_compatible(model, fields);
  SpectralStepCache cache;
  cache.reserve(fields.grid());
  for (int k = 0; k < fields.grid(); ++k)
    cache.push(control_hamiltonian(model, fields.samples.col(k)));
  return cache;
}

Trajectory propagate_forward(const SpectralStepCache& cache, double duration,
                             const ComplexMatrix& init) {
  const int N = cache.grid();
  const double dtheta = duration / N;
  Trajectory traj;
  traj.points.reserve(size_t(N) + 1);
  traj.points.push_back(init);
  for (int k = 0; k < N; ++k) traj.points.push_back(cache.step(k, dtheta) * traj.points.back());
  return traj;
}

Trajectory propagate_forward(const SpinChainModel& model, const ControlSet& fields,
                             const ComplexMatrix& init) {
  if (init.rows() != model.dim())
    throw std::invalid_argument("initial condition has the wrong dimension for this model");
  return propagate_forward(build_step_cache(model, fields), fields.duration, init);
}

Trajectory propagate_adjoint_backward(const SpectralStepCache& cache, double duration,
                                      const ComplexMatrix& final_condition) {
  const int N = cache.grid();
  const double dtheta = duration / N;
  Trajectory traj;
  traj.points.assign(size_t(N) + 1, ComplexMatrix());
  traj.points[size_t(N)] = final_condition;
  for (int k = N - 1; k >= 0; --k)
    traj.points[size_t(k)] = cache.step(k, -dtheta) * traj.points[size_t(k) + 1];
  return traj;
}

Trajectory propagate_adjoint_backward(const SpinChainModel& model, const ControlSet& fields,
                                      const ComplexMatrix& final_condition) {
  if (final_condition.rows() != model.dim())
    throw std::invalid_argument("final condition has the wrong dimension for this model");
  return propagate_adjoint_backward(build_step_cache(model, fields), fields.duration,
                                    final_condition);
}

ComplexMatrix final_state(const SpectralStepCache& cache, double duration,
                          const ComplexMatrix& init) {
  const int N = cache.grid();
  const double dtheta = duration / N;
  ComplexMatrix u = init;
  ComplexMatrix next(u.rows(), u.cols());
  for (int k = 0; k < N; ++k) {
    next.noalias() = cache.step(k, dtheta) * u;
    u.swap(next);
  }
  return u;
}

double fluence(const ControlSet& fields, const PenaltySchedule& penalty) {
  if (penalty.grid() != fields.grid())
    throw std::invalid_argument("penalty schedule and control set use different grids");
  const Eigen::VectorXd per_sample = fields.samples.array().square().colwise().sum();
  return fields.duration * fields.ds() * penalty.weights.dot(per_sample);
}

double gate_overlap(const ComplexMatrix& final_u, const GateTarget& target) {
  return 2.0 * trace_inner(target.matrix, final_u).real();
}

double fidelity_P(const ComplexMatrix& final_u, const GateTarget& target) {
  return gate_overlap(final_u, target) / (2.0 * double(final_u.rows()));
}

double transfer_probability(const ComplexMatrix& state, const StateVector& target) {
  return std::norm(trace_inner(ComplexMatrix(target), state));
}

double evaluate_cost(const SpinChainModel& model, const ControlSet& fields,
                     const PenaltySchedule& penalty, const ControlTarget& target) {
  require_compatible(model, fields);
  const TargetMatrices tm = target_matrices(target, model.dim());
  const ComplexMatrix fin = final_state(build_step_cache(model, fields), fields.duration, tm.initial);
  return 2.0 * trace_inner(tm.target, fin).real() - fluence(fields, penalty);
}

}  // namespace spinopt
