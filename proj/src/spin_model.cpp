#include "spinopt/spin_model.hpp"

#include <stdexcept>

namespace spinopt {

ComplexMatrix pauli_x() {
  ComplexMatrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

ComplexMatrix pauli_y() {
  ComplexMatrix m(2, 2);
  m << 0, cplx(0, -1), cplx(0, 1), 0;
  return m;
}

ComplexMatrix pauli_z() {
  ComplexMatrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

ComplexMatrix build_drift(int n, double coupling) {
  if (n < 1) throw std::invalid_argument("build_drift: need n >= 1");
  const int dim = 1 << n;
  ComplexMatrix out = ComplexMatrix::Zero(dim, dim);
  for (int i = 1; i < n; ++i)
    out += coupling * embed_site_operator(pauli_z(), i, n) *
           embed_site_operator(pauli_z(), i + 1, n);
  return out;
}

std::vector<ComplexMatrix> build_controls(int n) {
  if (n < 1) throw std::invalid_argument("build_controls: need n >= 1");
  std::vector<ComplexMatrix> ops;
  ops.reserve(2 * n);
  for (int i = 1; i <= n; ++i) {
    ops.push_back(embed_site_operator(pauli_x(), i, n));
    ops.push_back(embed_site_operator(pauli_y(), i, n));
  }
  return ops;
}

ComplexMatrix build_cnnot(int n) {
  if (n < 1) throw std::invalid_argument("build_cnnot: need n >= 1");
  const int dim = 1 << n;
  ComplexMatrix out = ComplexMatrix::Identity(dim, dim);
  out(dim - 2, dim - 2) = 0;
  out(dim - 1, dim - 1) = 0;
  out(dim - 2, dim - 1) = 1;
  out(dim - 1, dim - 2) = 1;
  return out;
}

SpinChainModel::SpinChainModel(int n_spins, double coupling_strength)
    : n(n_spins),
      coupling(coupling_strength),
      drift(build_drift(n_spins, coupling_strength)),
      controls(build_controls(n_spins)) {}

}  // namespace spinopt
