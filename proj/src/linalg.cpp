#include "spinopt/linalg.hpp"

#include <stdexcept>

namespace spinopt {

double& tolerance_scale() {
  static double scale = 1.0;
  return scale;
}

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

ComplexMatrix embed_site_operator(const ComplexMatrix& op, int site, int n) {
  if (n < 1) throw std::invalid_argument("embed_site_operator: need n >= 1");
  if (site < 1 || site > n) throw std::invalid_argument("embed_site_operator: site out of range");
  if (op.rows() != 2 || op.cols() != 2)
    throw std::invalid_argument("embed_site_operator: expected a 2x2 single-site operator");
  const Eigen::Index left = Eigen::Index(1) << (site - 1);
  const Eigen::Index right = Eigen::Index(1) << (n - site);
  ComplexMatrix out = op;
  if (left > 1) out = kron(ComplexMatrix::Identity(left, left), out);
  if (right > 1) out = kron(out, ComplexMatrix::Identity(right, right));
  return out;
}

cplx trace_inner(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("trace_inner: shape mismatch");
  return (a.array().conjugate() * b.array()).sum();
}

bool is_hermitian(const ComplexMatrix& a, double tol) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  const double dev = (a - a.adjoint()).cwiseAbs().maxCoeff();
  return dev <= tol * tolerance_scale() * scale;
}

bool is_unitary(const ComplexMatrix& u, double tol) {
  if (u.rows() != u.cols()) return false;
  const ComplexMatrix g = u.adjoint() * u;
  const double dev = (g - ComplexMatrix::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff();
  return dev <= tol * tolerance_scale();
}

ComplexMatrix hermitian_phase_exp(const ComplexMatrix& h, double dt) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("hermitian_phase_exp: eigendecomposition failed");
  const Eigen::VectorXcd phases =
      (cplx(0.0, -dt) * es.eigenvalues().cast<cplx>()).array().exp();
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

ComplexMatrix unitary_step(const ComplexMatrix& h, double dt, const ComplexMatrix& u) {
  if (h.rows() != u.rows())
    throw std::invalid_argument("unitary_step: dimension mismatch between H and state");
  return hermitian_phase_exp(h, dt) * u;
}

}  // namespace spinopt
