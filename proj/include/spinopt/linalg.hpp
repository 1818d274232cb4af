#pragma once

#include <Eigen/Dense>
#include <complex>

namespace spinopt {

using ComplexMatrix = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;
using cplx = std::complex<double>;

// Single knob that scales every fixed numeric tolerance in the library.
// Leave at 1.0 unless you know your platform's rounding behaves unusually.
double& tolerance_scale();

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);

// Lift a single-site operator to the n-spin space: identity on every other
// site. Sites are numbered from 1 at the most significant bit.
ComplexMatrix embed_site_operator(const ComplexMatrix& op, int site, int n);

// Frobenius inner product Tr[a^dag b]. Columns may be 1, so the same call
// covers <a|b> for state vectors stored as dim x 1 matrices.
cplx trace_inner(const ComplexMatrix& a, const ComplexMatrix& b);

// max|A - A^dag| <= tol * max(1, max|A|)
bool is_hermitian(const ComplexMatrix& a, double tol = 1e-12);

// max|U^dag U - I| <= tol
bool is_unitary(const ComplexMatrix& u, double tol = 1e-10);

// exp(-i dt H) for Hermitian H, through the spectral decomposition. Exact to
// roundoff, no step-size restriction.
ComplexMatrix hermitian_phase_exp(const ComplexMatrix& h, double dt);

// One propagation step U <- exp(-i dt H) U.
ComplexMatrix unitary_step(const ComplexMatrix& h, double dt, const ComplexMatrix& u);

}  // namespace spinopt
