#include "spinopt/optimizer.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace spinopt {

namespace {

struct Nonzero {
  int r = 0, c = 0;
  cplx v;
};

// Control operators are sparse (site embeddings of Pauli matrices have one
// entry per row), so the update traces Tr[H_j U V^dag] reduce to short sums.
std::vector<std::vector<Nonzero>> collect_nonzeros(const SpinChainModel& model) {
  std::vector<std::vector<Nonzero>> nz(size_t(model.channels()));
  for (int j = 0; j < model.channels(); ++j) {
    const ComplexMatrix& op = model.controls[size_t(j)];
    for (int r = 0; r < model.dim(); ++r)
      for (int c = 0; c < model.dim(); ++c)
        if (op(r, c) != cplx(0.0, 0.0)) nz[size_t(j)].push_back({r, c, op(r, c)});
  }
  return nz;
}

void require_positive_weights(const PenaltySchedule& penalty) {
  if (penalty.grid() < 1 || penalty.weights.minCoeff() <= 0.0)
    throw std::invalid_argument("penalty weights must be positive everywhere");
}

// ds sum_k alpha_k sum_j E_j(s_k)^2: the fluence per unit duration.
double penalty_density(const ControlSet& fields, const PenaltySchedule& penalty) {
  return fluence(fields, penalty) / fields.duration;
}

double overlap_term(const TargetMatrices& tm, const ComplexMatrix& fin) {
  return 2.0 * trace_inner(tm.target, fin).real();
}

double probability_of(const ControlTarget& target, const ComplexMatrix& fin) {
  if (const auto* gate = std::get_if<GateTarget>(&target)) return fidelity_P(fin, *gate);
  return transfer_probability(fin, std::get<StateTransfer>(target).target);
}

FieldUpdateResult sweep_core(const SpinChainModel& model, const ControlSet& fields,
                             const PenaltySchedule& penalty, const ControlTarget& target,
                             const SpectralStepCache& cache) {
  if (cache.grid() != fields.grid())
    throw std::invalid_argument("step cache does not match the control grid");
  if (penalty.grid() != fields.grid())
    throw std::invalid_argument("penalty schedule and control set use different grids");
  require_positive_weights(penalty);

  const int N = fields.grid(), m = fields.channels(), dim = model.dim();
  const double T = fields.duration;
  const double dtheta = T / N;
  const TargetMatrices tm = target_matrices(target, dim);
  const auto nz = collect_nonzeros(model);

  const Trajectory bwd = propagate_adjoint_backward(cache, T, tm.target);
  // Tr[V^dag U] is conserved, so the adjoint's s = 0 snapshot already carries
  // the terminal overlap of the current fields.
  const double J_old = 2.0 * trace_inner(bwd.points[0], tm.initial).real() -
                       fluence(fields, penalty);

  FieldUpdateResult out;
  out.fields = ControlSet{Eigen::MatrixXd(m, N), T};
  out.cache.reserve(N);
  out.forward.points.reserve(size_t(N) + 1);
  out.forward.points.push_back(tm.initial);

  ComplexMatrix u = tm.initial;
  ComplexMatrix w(dim, dim), mid(dim, dim), su(dim, u.cols()), tmp(dim, dim), step_new(dim, dim);
  ComplexMatrix cu(dim, int(u.cols())), hju(dim, int(u.cols()));
  Eigen::VectorXd candidate(m), accepted(m);
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es;
  const auto solve = [&](const Eigen::VectorXd& e) {
    es.compute(control_hamiltonian(model, e));
    if (es.info() != Eigen::Success)
      throw std::runtime_error("interval Hamiltonian eigendecomposition failed");
    const Eigen::VectorXcd phases =
        (cplx(0.0, -dtheta) * es.eigenvalues().cast<cplx>()).array().exp();
    tmp.noalias() = es.eigenvectors() * phases.asDiagonal();
    step_new.noalias() = tmp * es.eigenvectors().adjoint();
  };
  double quad = 0.0;
  for (int k = 0; k < N; ++k) {
    // The sample lives at the interval midpoint, so the feedback trace is
    // taken there: both states are carried half a step into the interval with
    // the current field before forming Tr[V^dag H_j U]. Evaluating at the
    // interval edge instead costs an O(ds) error in the gain identity below;
    // the midpoint keeps it O(ds^2).
    const ComplexMatrix shalf = cache.step(k, 0.5 * dtheta);
    const double alpha = penalty.weights(k);
    const auto feedback = [&](const ComplexMatrix& umid, Eigen::VectorXd& e) {
      tmp.noalias() = umid * bwd.points[size_t(k)].adjoint();
      w.noalias() = tmp * shalf.adjoint();
      for (int j = 0; j < m; ++j) {
        cplx tr(0.0, 0.0);
        for (const Nonzero& t : nz[size_t(j)]) tr += t.v * w(t.c, t.r);
        e(j) = tr.imag() / alpha;
      }
    };
    mid.noalias() = shalf * u;
    feedback(mid, candidate);
    // The trace should see the forward state under the field it is about to
    // produce, so refine the candidate: carry the half step's worth of its
    // field change into U (site Pauli operators square to the identity, which
    // gives that correction in closed form) and re-evaluate. Two refinements
    // leave the gain identity below accurate to well past O(ds^2); stopping
    // after the uncorrected trace would degrade it to O(ds).
    for (int pass = 0; pass < 2; ++pass) {
      cu = u;
      for (int j = 0; j < m; ++j) {
        const double th = 0.5 * dtheta * (candidate(j) - fields.samples(j, k));
        if (th == 0.0) continue;
        hju.setZero();
        for (const Nonzero& t : nz[size_t(j)]) hju.row(t.r) += t.v * cu.row(t.c);
        cu = std::cos(th) * cu - cplx(0.0, std::sin(th)) * hju;
      }
      mid.noalias() = shalf * cu;
      feedback(mid, candidate);
    }

    // Exact gain of switching this interval's field while everything earlier
    // already uses new fields and everything later still uses old ones. The
    // sweep's total cost change telescopes into these per-interval gains, so
    // accepting a value only when its gain does not fall below the current
    // field's keeps the whole update nondecreasing. The feedback candidate
    // satisfies that almost always; when it overshoots (coarse grids, tiny
    // penalty weights) it is shrunk toward the current value, which is always
    // admissible.
    const ComplexMatrix& vnext = bwd.points[size_t(k) + 1];
    const auto slice_gain = [&](const ComplexMatrix& stepm, double squared_norm) {
      su.noalias() = stepm * u;
      return 2.0 * trace_inner(vnext, su).real() - dtheta * alpha * squared_norm;
    };
    const ComplexMatrix step_old = cache.step(k, dtheta);
    const double gain_old = slice_gain(step_old, fields.samples.col(k).squaredNorm());

    accepted = candidate;
    solve(accepted);
    bool keep_old = false;
    if (slice_gain(step_new, accepted.squaredNorm()) < gain_old) {
      bool ok = false;
      double t = 0.5;
      for (int i = 0; i < 12 && !ok; ++i, t *= 0.5) {
        accepted = fields.samples.col(k) + t * (candidate - fields.samples.col(k));
        solve(accepted);
        ok = slice_gain(step_new, accepted.squaredNorm()) >= gain_old;
      }
      keep_old = !ok;
    }
    if (keep_old) {
      accepted = fields.samples.col(k);
      out.cache.vectors.push_back(cache.vectors[size_t(k)]);
      out.cache.values.push_back(cache.values[size_t(k)]);
      step_new = step_old;
    } else {
      out.cache.vectors.push_back(es.eigenvectors());
      out.cache.values.push_back(es.eigenvalues());
    }
    quad += alpha * (fields.samples.col(k) - accepted).squaredNorm();
    out.fields.samples.col(k) = accepted;
    su.noalias() = step_new * u;
    u.swap(su);
    out.forward.points.push_back(u);
  }

  const double J_new = overlap_term(tm, u) - fluence(out.fields, penalty);
  out.delta_J = J_new - J_old;
  out.delta_J_quadrature = T * fields.ds() * quad;
  out.cost_before = J_old;
  out.cost_after = J_new;
  return out;
}

struct TimeOutcome {
  TimeUpdateResult result;
  ComplexMatrix final;
};

TimeOutcome systematic_core(const SpectralStepCache& cache, const TargetMatrices& tm,
                            double density, double T, double a, double j_at_t,
                            const ComplexMatrix& final_at_t) {
  auto cost_at = [&](double t1, ComplexMatrix& fin) {
    fin = final_state(cache, t1, tm.initial);
    return overlap_term(tm, fin) - t1 * density;
  };
  TimeOutcome best{{T, 0.0, j_at_t}, final_at_t};
  ComplexMatrix fin;
  // strict comparisons keep the unchanged duration on ties, and the smaller
  // probe wins a tie between the two neighbours
  for (double t1 : {(1.0 - a) * T, (1.0 + a) * T}) {
    const double j1 = cost_at(t1, fin);
    if (j1 > best.result.cost_after) best = {{t1, j1 - j_at_t, j1}, fin};
  }
  best.result.delta_J = best.result.cost_after - j_at_t;
  return best;
}

double gradient_from_trajectories(const SpinChainModel& model, const ControlSet& fields,
                                  const PenaltySchedule& penalty, const Trajectory& fwd,
                                  const Trajectory& bwd) {
  const int N = fields.grid();
  double sum = 0.0;
  for (int k = 0; k < N; ++k) {
    const ComplexMatrix h = control_hamiltonian(model, fields.samples.col(k));
    sum += trace_inner(bwd.points[size_t(k)], h * fwd.points[size_t(k)]).imag();
  }
  return 2.0 * fields.ds() * sum - penalty_density(fields, penalty);
}

TimeOutcome gradient_core(const SpinChainModel& model, const SpectralStepCache& cache,
                          const TargetMatrices& tm, const ControlSet& fields,
                          const PenaltySchedule& penalty, const Trajectory& fwd, double j_at_t,
                          double r0, const ComplexMatrix& final_at_t) {
  const double T = fields.duration;
  const Trajectory bwd = propagate_adjoint_backward(cache, T, tm.target);
  const double g = gradient_from_trajectories(model, fields, penalty, fwd, bwd);
  const double density = penalty_density(fields, penalty);

  double r = r0;
  for (int attempt = 0; attempt <= 30; ++attempt, r *= 0.5) {
    const double t1 = T + r * g;
    if (!(t1 > 0.0)) continue;
    ComplexMatrix fin = final_state(cache, t1, tm.initial);
    const double j1 = overlap_term(tm, fin) - t1 * density;
    if (j1 >= j_at_t) return {{t1, j1 - j_at_t, j1}, std::move(fin)};
  }
  return {{T, 0.0, j_at_t}, final_at_t};
}

void validate(const OptimizationConfig& cfg) {
  if (!(cfg.alpha0 > 0.0)) throw std::invalid_argument("alpha0 must be positive");
  if (!(cfg.T0 > 0.0)) throw std::invalid_argument("T0 must be positive");
  if (!(cfg.a > 0.0) || !(cfg.a < 0.1))
    throw std::invalid_argument("duration probe size a must lie in (0, 0.1)");
  if (!(cfg.r0 > 0.0)) throw std::invalid_argument("r0 must be positive");
  if (cfg.grid < 1) throw std::invalid_argument("grid must have at least one interval");
  if (cfg.max_iter < 0) throw std::invalid_argument("max_iter cannot be negative");
  if (cfg.stop_tol < 0.0) throw std::invalid_argument("stop_tol cannot be negative");
}

}  // namespace

ControlSet seed_fields(const SeedField& seed, int m, int N, double T) {
  if (!(T > 0.0)) throw std::invalid_argument("seed_fields: duration must be positive");
  ControlSet fields = ControlSet::zeros(m, N, T);
  switch (seed.kind) {
    case SeedFieldKind::strict_zero:
      break;
    case SeedFieldKind::zero:
      for (int j = 0; j < m; ++j) {
        const double scale = 1e-8 * (1.0 + double(j + 1) / (4.0 * m));
        for (int k = 0; k < N; ++k)
          fields.samples(j, k) = scale * std::sin(M_PI * ControlSet::midpoint(k, N));
      }
      break;
    case SeedFieldKind::fixed:
      if (int(seed.samples.rows()) != m || int(seed.samples.cols()) != N)
        throw std::invalid_argument("fixed seed samples do not match the channel/grid shape");
      fields.samples = seed.samples;
      break;
  }
  return fields;
}

double monotonicity_slack(double j) {
  return 1e-9 * tolerance_scale() * (1.0 + std::abs(j));
}

FieldUpdateResult field_update_sweep(const SpinChainModel& model, const ControlSet& fields,
                                     const PenaltySchedule& penalty, const ControlTarget& target,
                                     const SpectralStepCache& current_cache) {
  return sweep_core(model, fields, penalty, target, current_cache);
}

FieldUpdateResult field_update_sweep(const SpinChainModel& model, const ControlSet& fields,
                                     const PenaltySchedule& penalty, const ControlTarget& target) {
  return sweep_core(model, fields, penalty, target, build_step_cache(model, fields));
}

TimeUpdateResult time_update_systematic(const SpinChainModel& model, const ControlSet& fields,
                                        const PenaltySchedule& penalty, const ControlTarget& target,
                                        double a) {
  if (!(a > 0.0) || !(a < 0.1))
    throw std::invalid_argument("duration probe size a must lie in (0, 0.1)");
  require_positive_weights(penalty);
  const TargetMatrices tm = target_matrices(target, model.dim());
  const SpectralStepCache cache = build_step_cache(model, fields);
  const ComplexMatrix fin = final_state(cache, fields.duration, tm.initial);
  const double density = penalty_density(fields, penalty);
  const double j_at_t = overlap_term(tm, fin) - fields.duration * density;
  return systematic_core(cache, tm, density, fields.duration, a, j_at_t, fin).result;
}

double time_gradient(const SpinChainModel& model, const ControlSet& fields,
                     const PenaltySchedule& penalty, const ControlTarget& target) {
  require_positive_weights(penalty);
  const TargetMatrices tm = target_matrices(target, model.dim());
  const SpectralStepCache cache = build_step_cache(model, fields);
  const Trajectory fwd = propagate_forward(cache, fields.duration, tm.initial);
  const Trajectory bwd = propagate_adjoint_backward(cache, fields.duration, tm.target);
  return gradient_from_trajectories(model, fields, penalty, fwd, bwd);
}

TimeUpdateResult time_update_gradient(const SpinChainModel& model, const ControlSet& fields,
                                      const PenaltySchedule& penalty, const ControlTarget& target,
                                      double r0) {
  if (!(r0 > 0.0)) throw std::invalid_argument("r0 must be positive");
  require_positive_weights(penalty);
  const TargetMatrices tm = target_matrices(target, model.dim());
  const SpectralStepCache cache = build_step_cache(model, fields);
  const Trajectory fwd = propagate_forward(cache, fields.duration, tm.initial);
  const double j_at_t = overlap_term(tm, fwd.back()) - fluence(fields, penalty);
  return gradient_core(model, cache, tm, fields, penalty, fwd, j_at_t, r0, fwd.back()).result;
}

RunHistory run(const SpinChainModel& model, const OptimizationConfig& cfg) {
  validate(cfg);
  const TargetMatrices tm = target_matrices(cfg.target, model.dim());

  ControlSet fields = seed_fields(cfg.seed_field, model.channels(), cfg.grid, cfg.T0);
  const PenaltySchedule penalty =
      PenaltySchedule::build(cfg.alpha0, cfg.grid, cfg.penalty_mode, cfg.penalty_floor);
  SpectralStepCache cache = build_step_cache(model, fields);
  ComplexMatrix fin = final_state(cache, fields.duration, tm.initial);
  double j_current = overlap_term(tm, fin) - fluence(fields, penalty);

  RunHistory out;
  out.termination = Termination::max_iter;
  out.detail = "iteration budget exhausted";
  out.records.reserve(size_t(std::min(cfg.max_iter, 1 << 20)));

  int consecutive_small = 0;
  for (int k = 1; k <= cfg.max_iter; ++k) {
    const double j_prev = j_current;

    FieldUpdateResult fr = sweep_core(model, fields, penalty, cfg.target, cache);
    const double j_mid = fr.cost_after;
    const double dj_field = j_mid - j_prev;
    if (dj_field < -monotonicity_slack(j_prev)) {
      std::ostringstream msg;
      msg << "field update decreased the cost by " << -dj_field << " at iteration " << k
          << " (allowed slack " << monotonicity_slack(j_prev)
          << "); the grid is too coarse for these fields";
      out.termination = Termination::guard_failure;
      out.detail = msg.str();
      break;
    }
    fields = std::move(fr.fields);
    cache = std::move(fr.cache);
    fin = fr.forward.back();

    TimeOutcome to{{fields.duration, 0.0, j_mid}, fin};
    switch (cfg.time_update) {
      case TimeUpdateMode::systematic:
        to = systematic_core(cache, tm, penalty_density(fields, penalty), fields.duration, cfg.a,
                             j_mid, fin);
        break;
      case TimeUpdateMode::gradient:
        to = gradient_core(model, cache, tm, fields, penalty, fr.forward, j_mid, cfg.r0, fin);
        break;
      case TimeUpdateMode::frozen:
        break;
    }
    fields.duration = to.result.T;
    fin = std::move(to.final);
    j_current = to.result.cost_after;

    out.records.push_back({k, j_current, fields.duration, probability_of(cfg.target, fin),
                           fluence(fields, penalty), dj_field, to.result.delta_J});

    if (cfg.stop_tol > 0.0) {
      if (std::abs(j_current - j_prev) < cfg.stop_tol) {
        if (++consecutive_small >= 50) {
          std::ostringstream msg;
          msg << "cost change stayed below " << cfg.stop_tol << " for " << consecutive_small
              << " consecutive iterations";
          out.termination = Termination::stop_tol;
          out.detail = msg.str();
          break;
        }
      } else {
        consecutive_small = 0;
      }
    }
  }

  out.final_fields = std::move(fields);
  out.final_J = j_current;
  out.final_T = out.final_fields.duration;
  out.final_P = probability_of(cfg.target, fin);
  return out;
}

}  // namespace spinopt
