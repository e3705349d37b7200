#pragma once

#include <vector>

#include "graphprobe/types.hpp"

namespace graphprobe {

struct SymmetricEigen {
  std::vector<double> values;  // ascending
  Matrix vectors;              // column k pairs with values[k]
  int sweeps = 0;
};

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm falls below
/// `tolerance`. Throws ContractError if `m` is not symmetric within 1e-12 and
/// ConvergenceError after `max_sweeps` sweeps.
SymmetricEigen jacobi_eigen(const Matrix& m, double tolerance = 1e-10, int max_sweeps = 100);

/// Ascending eigenvalues of a symmetric matrix.
std::vector<double> symmetric_eigenvalues(const Matrix& m);

}  // namespace graphprobe
