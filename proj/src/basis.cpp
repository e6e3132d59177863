#include "supra/basis.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "json.hpp"
#include "supra/autodiff.hpp"
#include "supra/eigen.hpp"
#include "supra/fem.hpp"
#include "supra/hash.hpp"
#include "supra/ndbin.hpp"

namespace supra::basis {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Tensor uniform_weights(std::size_t m) { return Tensor({m}, 1.0 / static_cast<double>(m)); }

void finish(Basis& b) {
  const std::size_t m = b.phi.rows(), n = b.phi.cols();
  b.psi = Tensor({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < n; ++k) b.psi(i, k) = b.weights[i] * b.phi(i, k);
}

void require_grid(std::size_t h, std::size_t w) {
  if (h == 0 || w == 0) throw std::invalid_argument("basis: grid dimensions must be positive");
}

double chebyshev_t(std::size_t p, double t) {
  double a = 1.0, b = t;
  if (p == 0) return a;
  for (std::size_t k = 1; k < p; ++k) {
    const double c = 2.0 * t * b - a;
    a = b;
    b = c;
  }
  return b;
}

}  // namespace

std::string kind_name(Kind k) {
  switch (k) {
    case Kind::Fourier: return "fourier";
    case Kind::Chebyshev: return "chebyshev";
    case Kind::Laplacian: return "laplacian";
  }
  return "?";
}

Kind parse_kind(const std::string& s) {
  if (s == "fourier") return Kind::Fourier;
  if (s == "chebyshev") return Kind::Chebyshev;
  if (s == "laplacian") return Kind::Laplacian;
  throw std::invalid_argument("unknown basis kind '" + s + "' (expected fourier, chebyshev or laplacian)");
}

std::string Basis::fingerprint() const {
  Fnv1a h;
  h.text(kind_name(kind));
  h.value(std::uint64_t{grid_h});
  h.value(std::uint64_t{grid_w});
  h.value(std::uint64_t{param_x});
  h.value(std::uint64_t{param_y});
  h.value(std::uint64_t{num_points()});
  h.value(std::uint64_t{size()});
  h.text(mesh_hash);
  return h.hex();
}

double Basis::gram_deviation() const {
  const Tensor g = ad::matmul(psi.transposed(), phi);
  double worst = 0.0;
  for (std::size_t a = 0; a < g.rows(); ++a)
    for (std::size_t c = 0; c < g.cols(); ++c) worst = std::max(worst, std::abs(g(a, c) - (a == c ? 1.0 : 0.0)));
  return worst;
}

Tensor grid_coords(std::size_t h, std::size_t w) {
  require_grid(h, w);
  Tensor x({h * w, 2});
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) {
      x(i * w + j, 0) = static_cast<double>(i + 1) / static_cast<double>(h);
      x(i * w + j, 1) = static_cast<double>(j + 1) / static_cast<double>(w);
    }
  return x;
}

Basis fourier_basis_2d(std::size_t m, std::size_t n, std::size_t h, std::size_t w) {
  require_grid(h, w);
  if (m == 0 || n == 0) throw std::invalid_argument("fourier_basis_2d: mode counts must be positive");
  if (2 * m > h - 1 || 2 * n > w - 1)
    throw std::invalid_argument("fourier_basis_2d: modes (" + std::to_string(m) + ", " + std::to_string(n) +
                                ") reach the Nyquist limit of a " + std::to_string(h) + "x" + std::to_string(w) +
                                " grid; need 2m <= H-1 and 2n <= W-1");
  Basis b;
  b.kind = Kind::Fourier;
  b.grid_h = h;
  b.grid_w = w;
  b.param_x = m;
  b.param_y = n;
  const std::size_t npts = h * w, nb = 4 * m * n;
  b.phi = Tensor({npts, nb});
  for (std::size_t pi = 0; pi < h; ++pi)
    for (std::size_t pj = 0; pj < w; ++pj) {
      const double x = static_cast<double>(pi + 1) / static_cast<double>(h);
      const double y = static_cast<double>(pj + 1) / static_cast<double>(w);
      auto row = b.phi.row(pi * w + pj);
      for (std::size_t i = 1; i <= m; ++i)
        for (std::size_t j = 1; j <= n; ++j) {
          const double cx = std::cos(kTwoPi * static_cast<double>(i) * x), sx = std::sin(kTwoPi * static_cast<double>(i) * x);
          const double cy = std::cos(kTwoPi * static_cast<double>(j) * y), sy = std::sin(kTwoPi * static_cast<double>(j) * y);
          const std::size_t k = (i - 1) * n + (j - 1);
          row[k] = 2.0 * cx * cy;
          row[m * n + k] = 2.0 * cx * sy;
          row[2 * m * n + k] = 2.0 * sx * cy;
          row[3 * m * n + k] = 2.0 * sx * sy;
        }
    }
  b.weights = uniform_weights(npts);
  b.coords = grid_coords(h, w);
  finish(b);
  return b;
}

Basis chebyshev_basis_2d(std::size_t deg_x, std::size_t deg_y, std::size_t h, std::size_t w) {
  require_grid(h, w);
  const std::size_t npts = h * w, nb = (deg_x + 1) * (deg_y + 1);
  if (nb > npts)
    throw std::invalid_argument("chebyshev_basis_2d: " + std::to_string(nb) + " functions exceed " +
                                std::to_string(npts) + " grid points");
  Basis b;
  b.kind = Kind::Chebyshev;
  b.grid_h = h;
  b.grid_w = w;
  b.param_x = deg_x;
  b.param_y = deg_y;
  b.weights = uniform_weights(npts);
  b.coords = grid_coords(h, w);
  const double wt = 1.0 / static_cast<double>(npts);

  // Columns stored as rows of `q` while orthonormalizing.
  Tensor q({nb, npts});
  for (std::size_t pi = 0; pi < h; ++pi)
    for (std::size_t pj = 0; pj < w; ++pj) {
      const double tx = 2.0 * static_cast<double>(pi + 1) / static_cast<double>(h) - 1.0;
      const double ty = 2.0 * static_cast<double>(pj + 1) / static_cast<double>(w) - 1.0;
      for (std::size_t p = 0; p <= deg_x; ++p)
        for (std::size_t r = 0; r <= deg_y; ++r) q(p * (deg_y + 1) + r, pi * w + pj) = chebyshev_t(p, tx) * chebyshev_t(r, ty);
    }
  auto wdot = [&](std::size_t a, std::size_t c) {
    double s = 0.0;
    for (std::size_t i = 0; i < npts; ++i) s += q(a, i) * q(c, i);
    return s * wt;
  };
  for (std::size_t k = 0; k < nb; ++k) {
    const double norm0 = std::sqrt(wdot(k, k));
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t j = 0; j < k; ++j) {
        const double c = wdot(j, k);
        for (std::size_t i = 0; i < npts; ++i) q(k, i) -= c * q(j, i);
      }
    const double norm = std::sqrt(wdot(k, k));
    if (!(norm > 1e-10 * norm0))
      throw std::invalid_argument("chebyshev_basis_2d: rank deficient at degree (" + std::to_string(k / (deg_y + 1)) +
                                  ", " + std::to_string(k % (deg_y + 1)) + ") on a " + std::to_string(h) + "x" +
                                  std::to_string(w) + " grid");
    for (std::size_t i = 0; i < npts; ++i) q(k, i) /= norm;
  }
  b.phi = q.transposed();
  finish(b);
  return b;
}

Basis laplacian_eigenbasis(const mesh::TriMesh& mesh, std::size_t n) {
  const auto k = fem::assemble_stiffness(mesh);
  const Tensor mass = fem::assemble_lumped_mass(mesh);
  const auto ep = eig::smallest_eigenpairs(k, mass, n, eig::Boundary::Neumann);
  double area = 0.0;
  for (double v : mass.values()) area += v;
  Basis b;
  b.kind = Kind::Laplacian;
  b.mesh_hash = mesh.hash();
  b.param_x = n;
  b.weights = Tensor({mesh.num_vertices()});
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) b.weights[i] = mass[i] / area;
  b.phi = ep.phi;
  const double s = std::sqrt(area);
  for (double& v : b.phi.values()) v *= s;
  b.eigenvalues = ep.lambda;
  b.coords = Tensor({mesh.num_vertices(), 2});
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
    b.coords(i, 0) = mesh.vertices[i][0];
    b.coords(i, 1) = mesh.vertices[i][1];
  }
  finish(b);
  return b;
}

Tensor project(const Basis& b, const Tensor& u) {
  require_matrix(u, "project");
  if (u.cols() != b.num_points())
    throw ShapeError("project: input " + shape_to_string(u.shape()) + " does not match a basis sampled at " +
                     std::to_string(b.num_points()) + " points");
  return ad::matmul(u, b.psi);
}

Tensor reconstruct(const Basis& b, const Tensor& uhat) {
  require_matrix(uhat, "reconstruct");
  if (uhat.cols() != b.size())
    throw ShapeError("reconstruct: coefficients " + shape_to_string(uhat.shape()) + " do not match a basis of " +
                     std::to_string(b.size()) + " functions");
  return ad::matmul_nt(uhat, b.phi);
}

void save_basis(const Basis& b, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  ndbin::save(b.phi, dir / "phi.ndb");
  ndbin::save(b.weights, dir / "weights.ndb");
  ndbin::save(b.coords, dir / "coords.ndb");
  if (b.kind == Kind::Laplacian) ndbin::save(b.eigenvalues, dir / "eigenvalues.ndb");
  nlohmann::json j = {{"kind", kind_name(b.kind)},       {"grid_h", b.grid_h},   {"grid_w", b.grid_w},
                      {"param_x", b.param_x},            {"param_y", b.param_y}, {"num_points", b.num_points()},
                      {"num_functions", b.size()},       {"mesh_hash", b.mesh_hash},
                      {"fingerprint", b.fingerprint()}};
  std::ofstream out(dir / "basis.json");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("save_basis: cannot write " + (dir / "basis.json").string());
}

Basis load_basis(const std::filesystem::path& dir) {
  std::ifstream in(dir / "basis.json");
  if (!in) throw std::runtime_error("load_basis: missing " + (dir / "basis.json").string());
  const auto j = nlohmann::json::parse(in);
  Basis b;
  b.kind = parse_kind(j.at("kind").get<std::string>());
  b.grid_h = j.at("grid_h").get<std::size_t>();
  b.grid_w = j.at("grid_w").get<std::size_t>();
  b.param_x = j.at("param_x").get<std::size_t>();
  b.param_y = j.at("param_y").get<std::size_t>();
  b.mesh_hash = j.at("mesh_hash").get<std::string>();
  b.phi = ndbin::load(dir / "phi.ndb");
  b.weights = ndbin::load(dir / "weights.ndb");
  b.coords = ndbin::load(dir / "coords.ndb");
  if (b.kind == Kind::Laplacian) b.eigenvalues = ndbin::load(dir / "eigenvalues.ndb");
  if (b.phi.ndim() != 2 || b.weights.size() != b.phi.rows() || b.coords.shape() != Shape{b.phi.rows(), 2})
    throw std::runtime_error("load_basis: tensor shapes in " + dir.string() + " are inconsistent");
  finish(b);
  if (b.fingerprint() != j.at("fingerprint").get<std::string>())
    throw std::runtime_error("load_basis: fingerprint mismatch in " + dir.string());
  return b;
}

}  // namespace supra::basis
