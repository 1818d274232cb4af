#pragma once

#include <vector>

#include "spinopt/linalg.hpp"

namespace spinopt {

ComplexMatrix pauli_x();
ComplexMatrix pauli_y();
ComplexMatrix pauli_z();

// Nearest-neighbour Ising drift J sum_i sz_i sz_{i+1}; zero for a single spin.
ComplexMatrix build_drift(int n, double coupling = 1.0);

// Local x and y controls for every spin, ordered (1x, 1y, 2x, 2y, ...).
std::vector<ComplexMatrix> build_controls(int n);

// Identity on the computational basis except the last two states swap:
// a NOT on spin n conditioned on all other spins being 1.
ComplexMatrix build_cnnot(int n);

struct GateTarget {
  ComplexMatrix matrix;
};

struct SpinChainModel {
  int n = 0;
  double coupling = 1.0;
  ComplexMatrix drift;
  std::vector<ComplexMatrix> controls;

  explicit SpinChainModel(int n_spins, double coupling_strength = 1.0);

  int dim() const { return 1 << n; }
  int channels() const { return 2 * n; }
};

}  // namespace spinopt
