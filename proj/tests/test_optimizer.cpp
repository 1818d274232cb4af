#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "spinopt/optimizer.hpp"

using namespace spinopt;

namespace {

ControlSet smooth_fields(int m, int N, double T, unsigned seed, double amplitude = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ControlSet fields = ControlSet::zeros(m, N, T);
  for (int j = 0; j < m; ++j) {
    double c1 = amplitude * u(rng), c2 = amplitude * u(rng), c3 = amplitude * u(rng);
    for (int k = 0; k < N; ++k) {
      double s = ControlSet::midpoint(k, N);
      fields.samples(j, k) =
          c1 * std::sin(M_PI * s) + c2 * std::sin(2 * M_PI * s) + c3 * std::sin(3 * M_PI * s);
    }
  }
  return fields;
}

StateVector random_state(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  StateVector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = cplx(g(rng), g(rng));
  v.normalize();
  return v;
}

ComplexMatrix random_unitary(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  ComplexMatrix a(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) a(i, j) = cplx(g(rng), g(rng));
  return hermitian_phase_exp((a + a.adjoint()) / 2.0, 1.0);
}

}  // namespace

TEST_CASE("monotonicity slack grows with the cost magnitude") {
  CHECK(monotonicity_slack(0.0) == 1e-9);
  CHECK(monotonicity_slack(7.0) == doctest::Approx(8e-9).epsilon(1e-12));
  CHECK(monotonicity_slack(-7.0) == doctest::Approx(8e-9).epsilon(1e-12));
}

TEST_CASE("literal zero fields are a stationary point of the two-spin gate update") {
  // The drift eigenvalues on the two swapped basis states are opposite, so
  // every update trace cancels in exact conjugate pairs. The sweep must
  // reproduce the zero field bit for bit and move nothing.
  SpinChainModel model(2);
  ControlSet fields = seed_fields(SeedField::strict_zero(), 4, 400, 0.5);
  PenaltySchedule penalty = PenaltySchedule::build(0.08, 400, PenaltyMode::direct);
  FieldUpdateResult fr = field_update_sweep(model, fields, penalty, GateTarget{build_cnnot(2)});
  CHECK(fr.fields.samples.cwiseAbs().maxCoeff() == 0.0);
  CHECK(fr.delta_J_quadrature == 0.0);
  CHECK(fr.delta_J == 0.0);
}

TEST_CASE("the default seed's perturbation breaks the stationary point") {
  SpinChainModel model(2);
  ControlSet fields = seed_fields(SeedField::zero(), 4, 400, 0.5);
  CHECK(fields.samples.cwiseAbs().maxCoeff() > 0.0);
  CHECK(fields.samples.cwiseAbs().maxCoeff() < 2e-8);
  PenaltySchedule penalty = PenaltySchedule::build(0.08, 400, PenaltyMode::direct);
  FieldUpdateResult fr = field_update_sweep(model, fields, penalty, GateTarget{build_cnnot(2)});
  CHECK(fr.fields.samples.cwiseAbs().maxCoeff() > 0.0);
  CHECK(fr.delta_J_quadrature > 0.0);
  CHECK(fr.delta_J >= -monotonicity_slack(fr.cost_before));
}

TEST_CASE("measured field-update gain approaches the quadrature prediction") {
  SpinChainModel model(2);
  int N = 1000;
  ControlSet fields = smooth_fields(4, N, 1.5, 5, 0.5);
  PenaltySchedule penalty = PenaltySchedule::build(0.1, N, PenaltyMode::shaped);
  FieldUpdateResult fr = field_update_sweep(model, fields, penalty, GateTarget{build_cnnot(2)});
  CHECK(fr.delta_J_quadrature > 0.0);
  CHECK(fr.delta_J > 0.0);
  CHECK(std::abs(fr.delta_J - fr.delta_J_quadrature) < 1e-3 * fr.delta_J_quadrature);
}

TEST_CASE("grid refinement drives the measured gain onto the quadrature prediction") {
  // After a few sweeps wash out the arbitrary start, the mismatch between the
  // measured gain and its quadrature should fall off at second order in ds.
  SpinChainModel model(2);
  GateTarget g{build_cnnot(2)};
  auto rel_at = [&](int N) {
    ControlSet fields = smooth_fields(4, N, 2.0, 11, 0.7);
    PenaltySchedule penalty = PenaltySchedule::build(0.08, N, PenaltyMode::shaped);
    for (int p = 0; p < 3; ++p) fields = field_update_sweep(model, fields, penalty, g).fields;
    FieldUpdateResult fr = field_update_sweep(model, fields, penalty, g);
    return std::abs(fr.delta_J - fr.delta_J_quadrature) / fr.delta_J_quadrature;
  };
  double coarse = rel_at(2000), fine = rel_at(8000);
  CHECK(fine < 1e-6);
  CHECK(coarse > 8.0 * fine);
}

TEST_CASE("field update never loses more than the slack on random instances") {
  for (unsigned seed : {1u, 2u, 3u, 4u, 5u, 6u}) {
    int n = 1 + int(seed % 2);
    SpinChainModel model(n);
    ControlSet fields = smooth_fields(2 * n, 600, 0.3 + 0.4 * seed, 100 + seed);
    PenaltySchedule penalty = PenaltySchedule::build(0.05 + 0.01 * seed, 600,
                                                     seed % 2 ? PenaltyMode::direct
                                                              : PenaltyMode::shaped);
    FieldUpdateResult fr =
        field_update_sweep(model, fields, penalty, GateTarget{build_cnnot(n)});
    CHECK(fr.delta_J_quadrature >= 0.0);
    CHECK(fr.delta_J >= -monotonicity_slack(fr.cost_before));
  }
}

TEST_CASE("field update is bitwise deterministic") {
  SpinChainModel model(2);
  ControlSet fields = smooth_fields(4, 500, 1.1, 42);
  PenaltySchedule penalty = PenaltySchedule::build(0.08, 500, PenaltyMode::direct);
  GateTarget g{build_cnnot(2)};
  FieldUpdateResult a = field_update_sweep(model, fields, penalty, g);
  FieldUpdateResult b = field_update_sweep(model, fields, penalty, g);
  CHECK((a.fields.samples.array() == b.fields.samples.array()).all());
  CHECK(a.delta_J == b.delta_J);
}

TEST_CASE("sweep bookkeeping is consistent with the standalone evaluators") {
  SpinChainModel model(2);
  ControlSet fields = smooth_fields(4, 300, 0.9, 77);
  PenaltySchedule penalty = PenaltySchedule::build(0.06, 300, PenaltyMode::direct);
  GateTarget g{build_cnnot(2)};
  FieldUpdateResult fr = field_update_sweep(model, fields, penalty, g);
  CHECK(fr.cost_before == doctest::Approx(evaluate_cost(model, fields, penalty, g)).epsilon(1e-12));
  CHECK(fr.cost_after ==
        doctest::Approx(evaluate_cost(model, fr.fields, penalty, g)).epsilon(1e-12));
  CHECK(fr.forward.grid() == 300);
  CHECK((fr.forward.back() - final_state(fr.cache, 0.9, ComplexMatrix::Identity(4, 4)))
            .cwiseAbs()
            .maxCoeff() < 1e-13);
}

TEST_CASE("duration gradient matches central finite differences") {
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    int n = 1 + trial % 2;
    SpinChainModel model(n);
    double T = 0.4 + 2.0 * u(rng);
    ControlSet fields = smooth_fields(2 * n, 500, T, 300 + unsigned(trial), 0.8);
    double alpha0 = 0.02 + 0.2 * u(rng);
    PenaltySchedule penalty =
        trial % 3 == 0 ? PenaltySchedule::constant(alpha0, 500)
                       : PenaltySchedule::build(alpha0, 500,
                                                trial % 3 == 1 ? PenaltyMode::direct
                                                               : PenaltyMode::shaped);
    ControlTarget target;
    if (trial % 2 == 0) {
      target = GateTarget{random_unitary(model.dim(), rng)};
    } else {
      target = StateTransfer{random_state(model.dim(), rng), random_state(model.dim(), rng)};
    }

    double g = time_gradient(model, fields, penalty, target);
    double h = 1e-5;
    ControlSet lo = fields, hi = fields;
    lo.duration = T - h;
    hi.duration = T + h;
    double g_fd =
        (evaluate_cost(model, hi, penalty, target) - evaluate_cost(model, lo, penalty, target)) /
        (2.0 * h);
    CHECK(std::abs(g - g_fd) <= std::max(1e-4 * std::abs(g_fd), 1e-8));
  }
}

TEST_CASE("duration gradient reproduces the single-spin closed form") {
  // Constant x field c with target exp(-i phi sx): everything commutes, so
  // J(T) = 4 cos(cT - phi) - alpha T c^2 exactly, for any grid.
  SpinChainModel model(1);
  double c = 0.8, phi = 0.9, alpha = 0.05, T = 1.7;
  int N = 40;
  ControlSet fields = ControlSet::zeros(2, N, T);
  fields.samples.row(0).setConstant(c);
  PenaltySchedule penalty = PenaltySchedule::constant(alpha, N);
  GateTarget g{hermitian_phase_exp(pauli_x(), phi)};

  double expect = -4.0 * c * std::sin(c * T - phi) - alpha * c * c;
  CHECK(time_gradient(model, fields, penalty, g) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("gradient duration step climbs the single-spin cost") {
  SpinChainModel model(1);
  double c = 0.8, phi = 0.9, alpha = 0.01;
  int N = 40;
  double T = 6.1;  // cT - phi between pi and 2 pi: pushing T up increases J
  ControlSet fields = ControlSet::zeros(2, N, T);
  fields.samples.row(0).setConstant(c);
  PenaltySchedule penalty = PenaltySchedule::constant(alpha, N);
  GateTarget g{hermitian_phase_exp(pauli_x(), phi)};

  auto j_of = [&](double t) { return 4.0 * std::cos(c * t - phi) - alpha * t * c * c; };
  TimeUpdateResult r = time_update_gradient(model, fields, penalty, g, 1e-2);
  CHECK(r.T > T);
  CHECK(r.cost_after > j_of(T) - 1e-12);
  CHECK(r.cost_after == doctest::Approx(j_of(r.T)).epsilon(1e-12));
  CHECK(r.delta_J > 0.0);

  // an oversized first step must be cut down until the cost stops dropping
  TimeUpdateResult big = time_update_gradient(model, fields, penalty, g, 50.0);
  CHECK(big.cost_after >= j_of(T) - 1e-12);
}

TEST_CASE("systematic duration probe picks the right neighbour on a known profile") {
  // Zero fields on two spins leave only the drift: J(T) = 4 cos T.
  SpinChainModel model(2);
  int N = 60;
  PenaltySchedule penalty = PenaltySchedule::build(0.08, N, PenaltyMode::direct);
  GateTarget g{build_cnnot(2)};
  double a = 0.01;

  ControlSet at_half = seed_fields(SeedField::strict_zero(), 4, N, 0.5);
  TimeUpdateResult down = time_update_systematic(model, at_half, penalty, g, a);
  CHECK(down.T == doctest::Approx(0.495).epsilon(1e-15));
  CHECK(down.delta_J ==
        doctest::Approx(4.0 * (std::cos(0.495) - std::cos(0.5))).epsilon(1e-10));

  ControlSet at_four = seed_fields(SeedField::strict_zero(), 4, N, 4.0);
  TimeUpdateResult up = time_update_systematic(model, at_four, penalty, g, a);
  CHECK(up.T == doctest::Approx(4.04).epsilon(1e-15));
  CHECK(up.delta_J > 0.0);
}

TEST_CASE("systematic duration probe keeps T when the cost is flat") {
  // A single drift-free spin with zero fields has a duration-independent cost.
  SpinChainModel model(1);
  ControlSet fields = seed_fields(SeedField::strict_zero(), 2, 30, 1.3);
  PenaltySchedule penalty = PenaltySchedule::constant(0.1, 30);
  GateTarget g{hermitian_phase_exp(pauli_x(), 0.4)};
  TimeUpdateResult r = time_update_systematic(model, fields, penalty, g, 0.05);
  CHECK(r.T == 1.3);
  CHECK(r.delta_J == 0.0);
}

TEST_CASE("zero-iteration run returns the seed untouched") {
  SpinChainModel model(2);
  OptimizationConfig cfg;
  cfg.target = GateTarget{build_cnnot(2)};
  cfg.grid = 100;
  cfg.max_iter = 0;
  RunHistory h = run(model, cfg);
  CHECK(h.records.empty());
  CHECK(h.termination == Termination::max_iter);
  CHECK(h.final_T == cfg.T0);
  CHECK(h.final_J == doctest::Approx(4.0 * std::cos(0.5)).epsilon(1e-10));
}

TEST_CASE("short run obeys the per-iteration accounting") {
  SpinChainModel model(2);
  OptimizationConfig cfg;
  cfg.target = GateTarget{build_cnnot(2)};
  cfg.grid = 500;
  cfg.max_iter = 50;
  RunHistory h = run(model, cfg);
  REQUIRE(h.records.size() == 50);
  double j_prev = 4.0 * std::cos(0.5);
  for (size_t i = 0; i < h.records.size(); ++i) {
    const IterationRecord& r = h.records[i];
    CHECK(r.k == int(i) + 1);
    CHECK(r.T > 0.0);
    CHECK(r.P >= -1e-9);
    CHECK(r.P <= 1.0 + 1e-9);
    CHECK(r.fluence >= 0.0);
    CHECK(r.dJ_field >= -monotonicity_slack(j_prev));
    CHECK(r.dJ_time >= 0.0);
    CHECK(r.J == doctest::Approx(j_prev + r.dJ_field + r.dJ_time).epsilon(1e-12));
    j_prev = r.J;
  }
  CHECK(h.final_J == h.records.back().J);
  CHECK(h.final_T == h.records.back().T);
  CHECK(h.termination == Termination::max_iter);
}

TEST_CASE("identical configurations give bitwise identical runs") {
  SpinChainModel model(2);
  OptimizationConfig cfg;
  cfg.target = GateTarget{build_cnnot(2)};
  cfg.grid = 300;
  cfg.max_iter = 30;
  RunHistory h1 = run(model, cfg);
  RunHistory h2 = run(model, cfg);
  REQUIRE(h1.records.size() == h2.records.size());
  for (size_t i = 0; i < h1.records.size(); ++i) {
    CHECK(h1.records[i].J == h2.records[i].J);
    CHECK(h1.records[i].T == h2.records[i].T);
    CHECK(h1.records[i].P == h2.records[i].P);
  }
  CHECK((h1.final_fields.samples.array() == h2.final_fields.samples.array()).all());
}

TEST_CASE("frozen mode never touches the duration") {
  SpinChainModel model(2);
  OptimizationConfig cfg;
  cfg.target = GateTarget{build_cnnot(2)};
  cfg.grid = 400;
  cfg.max_iter = 40;
  cfg.T0 = 2.0;
  cfg.time_update = TimeUpdateMode::frozen;
  RunHistory h = run(model, cfg);
  for (const IterationRecord& r : h.records) {
    CHECK(r.T == 2.0);
    CHECK(r.dJ_time == 0.0);
  }
  CHECK(h.final_T == 2.0);
  // the field updates alone must already climb
  CHECK(h.final_J > h.records.front().J);
}

TEST_CASE("stagnation rule stops after fifty consecutive small changes") {
  SpinChainModel model(2);
  OptimizationConfig cfg;
  cfg.target = GateTarget{build_cnnot(2)};
  cfg.grid = 200;
  cfg.max_iter = 500;
  cfg.stop_tol = 1e6;  // everything counts as small
  RunHistory h = run(model, cfg);
  CHECK(h.records.size() == 50);
  CHECK(h.termination == Termination::stop_tol);
}

TEST_CASE("strict-zero seed exposes the duration collapse on the two-spin gate") {
  SpinChainModel model(2);
  OptimizationConfig cfg;
  cfg.target = GateTarget{build_cnnot(2)};
  cfg.grid = 200;
  cfg.max_iter = 25;
  cfg.seed_field = SeedField::strict_zero();
  RunHistory h = run(model, cfg);
  CHECK(h.final_fields.samples.cwiseAbs().maxCoeff() == 0.0);
  double t_expect = 0.5;
  for (const IterationRecord& r : h.records) {
    t_expect *= 1.0 - cfg.a;
    CHECK(r.T == doctest::Approx(t_expect).epsilon(1e-13));
    CHECK(r.dJ_field == 0.0);
    CHECK(r.J == doctest::Approx(4.0 * std::cos(r.T)).epsilon(1e-10));
  }
}

TEST_CASE("state transfer runs climb like gate runs") {
  SpinChainModel model(2);
  StateVector from = StateVector::Zero(4), to = StateVector::Zero(4);
  from(0) = 1.0;
  to(3) = 1.0;
  OptimizationConfig cfg;
  cfg.target = StateTransfer{from, to};
  cfg.grid = 400;
  cfg.max_iter = 60;
  cfg.alpha0 = 0.05;
  cfg.T0 = 1.0;
  RunHistory h = run(model, cfg);
  double j_prev = -1e100;
  for (const IterationRecord& r : h.records) {
    CHECK(r.J >= j_prev - monotonicity_slack(r.J));
    j_prev = r.J;
    CHECK(r.P >= -1e-9);
    CHECK(r.P <= 1.0 + 1e-9);
  }
  CHECK(h.final_J > h.records.front().J);
}

TEST_CASE("configuration validation rejects out-of-range values") {
  SpinChainModel model(2);
  OptimizationConfig cfg;
  cfg.target = GateTarget{build_cnnot(2)};
  cfg.grid = 50;
  cfg.max_iter = 1;

  OptimizationConfig bad = cfg;
  bad.a = 0.1;
  CHECK_THROWS_AS(run(model, bad), std::invalid_argument);
  bad = cfg;
  bad.alpha0 = 0.0;
  CHECK_THROWS_AS(run(model, bad), std::invalid_argument);
  bad = cfg;
  bad.max_iter = -1;
  CHECK_THROWS_AS(run(model, bad), std::invalid_argument);
  bad = cfg;
  bad.T0 = -0.5;
  CHECK_THROWS_AS(run(model, bad), std::invalid_argument);
  bad = cfg;
  bad.seed_field = SeedField::fixed(Eigen::MatrixXd::Zero(4, 49));
  CHECK_THROWS_AS(run(model, bad), std::invalid_argument);
  bad = cfg;
  bad.target = GateTarget{build_cnnot(3)};
  CHECK_THROWS_AS(run(model, bad), std::invalid_argument);
}
