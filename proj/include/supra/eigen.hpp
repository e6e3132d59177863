#pragma once

#include <cstddef>
#include <vector>

#include "supra/fem.hpp"
#include "supra/tensor.hpp"

namespace supra::eig {

/// Eigen-decomposition of a dense symmetric matrix.
struct SymEig {
  std::vector<double> values;  // ascending
  Tensor vectors;              // row k is the unit eigenvector of values[k]
};

/// Householder tridiagonalization followed by implicit QL with shifts.
/// Only the lower triangle of `a` is read.
SymEig symmetric_eig(const Tensor& a);

enum class Boundary { Neumann, Dirichlet };

struct Eigenpairs {
  Tensor lambda;  // [N], ascending
  Tensor phi;     // [V x N], columns M-orthonormal
};

inline constexpr std::size_t kMaxDenseVertices = 4096;

/// Smallest N solutions of K phi = lambda diag(m) phi. Dirichlet removes
/// boundary vertices from the problem and pads their entries with zeros.
/// Each eigenvector is signed so its largest-magnitude entry is positive.
Eigenpairs smallest_eigenpairs(const fem::SparseSym& k, const Tensor& mass, std::size_t n,
                               Boundary bc, const std::vector<bool>& boundary = {});

}  // namespace supra::eig
