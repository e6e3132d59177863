#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "supra/mesh.hpp"
#include "supra/rng.hpp"
#include "supra/tensor.hpp"

namespace supra::pde {

// ---------------------------------------------------------------------------
// Random fields

struct GrfParams {
  double alpha = 2.0;
  double tau = 3.0;
  double length_scale = 1.0;
};

/// Gaussian random field on an H x W periodic grid by spectral synthesis.
/// Every mode n != 0 with |n_x| < H/2, |n_y| < W/2 (one of each +-n pair) gets
/// independent N(0,1) cosine and sine amplitudes scaled by
/// (4 pi^2 l^2 |n|^2 + tau^2)^(-alpha/2). The field is divided by its pointwise
/// standard deviation, so every sample has unit variance and zero grid mean.
Tensor grf_sample(std::size_t h, std::size_t w, const GrfParams& p, std::uint64_t seed);

/// a_hi where field >= 0, a_lo elsewhere.
Tensor darcy_coefficient(const Tensor& field, double a_hi = 12.0, double a_lo = 3.0);

// ---------------------------------------------------------------------------
// Solvers

enum class FaceMean { Harmonic, Arithmetic };

struct DarcyOptions {
  FaceMean mean = FaceMean::Harmonic;
  double tol = 1e-10;
};

/// -div(a grad u) = f on (0,1)^2 with u = 0 on the boundary. a, f and u are
/// H x W node values at x = i/(H-1), y = j/(W-1); the 5-point conservative
/// scheme uses face coefficients averaged from the two adjacent nodes.
/// Throws CgError (with residual history) past 10*H*W iterations.
Tensor darcy_solve_fd(const Tensor& a, const Tensor& f, const DarcyOptions& opt = {});

/// Applies the discrete operator of darcy_solve_fd to u (boundary rows give u).
Tensor darcy_apply(const Tensor& a, const Tensor& u, FaceMean mean = FaceMean::Harmonic);

/// P1 solve of K u = M f with u = 0 on boundary vertices; f and u are per-vertex.
Tensor poisson_fem_solve(const mesh::TriMesh& mesh, const Tensor& f, double tol = 1e-10);

/// Smooth random forcing on the plane, sampled at the mesh vertices:
/// a sum of low-order Fourier terms in (x, y) with Gaussian amplitudes.
Tensor smooth_forcing(const mesh::TriMesh& mesh, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Samples and datasets

struct Sample {
  Tensor inputs;  // [in x M]
  Tensor target;  // [out x M]
  std::size_t grid_h = 0, grid_w = 0;  // zero for mesh samples
  std::string mesh_hash;

  bool on_grid() const { return grid_h > 0; }
};

/// Flips every channel of a grid sample: rows reversed with probability 1/2,
/// then columns reversed with probability 1/2. Rejects mesh samples.
Sample augment_flip(const Sample& s, Rng& rng);
/// Deterministic flips; used by augment_flip and the equivariance tests.
Tensor flip_grid(const Tensor& channels, std::size_t h, std::size_t w, bool flip_rows, bool flip_cols);

enum class Task { Darcy, AnnulusPoisson };
std::string task_name(Task t);
Task parse_task(const std::string& s);

struct DatasetSpec {
  Task task = Task::Darcy;
  std::size_t n_train = 200, n_test = 50;
  std::uint64_t seed = 0;
  std::size_t grid = 32;  // Darcy: grid x grid nodes
  GrfParams grf;
  double a_hi = 12.0, a_lo = 3.0, forcing = 1.0;
  std::size_t radial = 9, angular = 48;  // annulus resolution
  double r_inner = 0.25, r_outer = 1.0;
};

/// Seed of sample k of a split; train and test draw from disjoint streams.
std::uint64_t sample_seed(std::uint64_t seed, bool test, std::size_t k);

Sample generate_sample(const DatasetSpec& spec, bool test, std::size_t k, const mesh::TriMesh* annulus = nullptr);

struct Manifest {
  std::filesystem::path dir;
  DatasetSpec spec;
  std::vector<std::string> train_files, test_files;
  std::size_t in_channels = 1, out_channels = 1, num_points = 0;
  std::string mesh_file, mesh_hash;
};

/// Writes train_XXXX.ndb / test_XXXX.ndb (each [(in+out) x M]), mesh.off for
/// the annulus task, and manifest.json. A non-empty out_dir requires force.
Manifest gen_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir, bool force);
/// Loads and validates manifest.json and the existence of every listed file.
Manifest load_manifest(const std::filesystem::path& dir);
std::vector<Sample> load_split(const Manifest& m, bool test);
mesh::TriMesh load_mesh(const Manifest& m);

}  // namespace supra::pde
