#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "supra/mesh.hpp"
#include "supra/tensor.hpp"

namespace supra::fem {

/// Symmetric matrix in CSR form with sorted column indices per row.
struct SparseSym {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr;  // n + 1 entries
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;

  double at(std::size_t i, std::size_t j) const;
  /// y = A x
  std::vector<double> apply(const std::vector<double>& x) const;
  double quadratic_form(const std::vector<double>& x) const;
  /// Largest |A_ij - A_ji| over stored entries.
  double asymmetry() const;
  Tensor to_dense() const;
};

/// Builds a SparseSym from (i, j, v) triplets; duplicates are summed.
/// Throws std::invalid_argument if the result is asymmetric beyond 1e-12.
SparseSym from_triplets(std::size_t n, std::vector<std::uint32_t> ii, std::vector<std::uint32_t> jj,
                        std::vector<double> vv);

/// 3x3 P1 stiffness of one triangle, row-major, in the triangle's vertex order.
std::array<double, 9> element_stiffness(const std::array<double, 2>& a, const std::array<double, 2>& b,
                                        const std::array<double, 2>& c);

/// P1 stiffness. Off-diagonal K_ij = -(cot a_ij + cot b_ij)/2 over the angles
/// opposite edge ij; diagonals make every row sum to zero.
SparseSym assemble_stiffness(const mesh::TriMesh& mesh);

/// Row-sum lumped mass: m_i = (1/3) * sum of incident triangle areas.
Tensor assemble_lumped_mass(const mesh::TriMesh& mesh);

}  // namespace supra::fem
