#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "supra/mesh.hpp"
#include "supra/tensor.hpp"

namespace supra::basis {

enum class Kind { Fourier, Chebyshev, Laplacian };

std::string kind_name(Kind k);
Kind parse_kind(const std::string& s);

/// An orthonormal family sampled at M points. Phi(i, k) = e_k(x_i); the
/// weighted Gram matrix Phi^T diag(weights) Phi is the identity.
struct Basis {
  Kind kind = Kind::Fourier;
  Tensor phi;      // [M x N]
  Tensor psi;      // [M x N], diag(weights) * phi
  Tensor weights;  // [M], sums to 1
  Tensor coords;   // [M x 2], sample locations
  /// Laplacian only: eigenvalues of the unnormalized mesh, ascending.
  Tensor eigenvalues;
  // Geometry: grid dims for Fourier/Chebyshev (H, W), mesh hash for Laplacian.
  std::size_t grid_h = 0, grid_w = 0;
  std::string mesh_hash;
  // Construction parameters (modes or degrees per axis; N for Laplacian).
  std::size_t param_x = 0, param_y = 0;

  std::size_t num_points() const { return phi.rows(); }
  std::size_t size() const { return phi.cols(); }
  /// Stable fingerprint of the construction, stored in checkpoints.
  std::string fingerprint() const;
  /// max |G - I| of the weighted Gram matrix.
  double gram_deviation() const;
};

/// Grid point (i, j) with i, j starting at 1: x = (i/H, j/W). Row-major over i.
Tensor grid_coords(std::size_t h, std::size_t w);

/// Tensor-product Fourier family with modes 1..m in x and 1..n in y: blocks
/// cos-cos, cos-sin, sin-cos, sin-sin in that order, (i, j) lexicographic
/// inside each block, each function scaled by 2. N = 4mn. Requires 2m <= H-1
/// and 2n <= W-1.
Basis fourier_basis_2d(std::size_t m, std::size_t n, std::size_t h, std::size_t w);

/// T_p(2x-1) T_q(2y-1), p outer, orthonormalized by weighted Gram-Schmidt.
Basis chebyshev_basis_2d(std::size_t deg_x, std::size_t deg_y, std::size_t h, std::size_t w);

/// Smallest N Neumann eigenfunctions of the mesh, weights = lumped mass / area.
Basis laplacian_eigenbasis(const mesh::TriMesh& mesh, std::size_t n);

/// U[C x M] -> U diag(w) Phi  [C x N].
Tensor project(const Basis& b, const Tensor& u);
/// Uhat[C x N] -> Uhat Phi^T  [C x M].
Tensor reconstruct(const Basis& b, const Tensor& uhat);

/// Cache: phi.ndb, weights.ndb, coords.ndb, eigenvalues.ndb (Laplacian) and basis.json.
void save_basis(const Basis& b, const std::filesystem::path& dir);
Basis load_basis(const std::filesystem::path& dir);

}  // namespace supra::basis
