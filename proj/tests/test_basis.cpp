#include <cmath>
#include <cstring>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "supra/basis.hpp"
#include "supra/ndbin.hpp"
#include "test_util.hpp"

using namespace supra;
using basis::Basis;

namespace {

constexpr double kPi = std::numbers::pi;

template <class F>
Tensor sample_grid(std::size_t h, std::size_t w, F f) {
  const Tensor x = basis::grid_coords(h, w);
  Tensor u({1, h * w});
  for (std::size_t i = 0; i < h * w; ++i) u[i] = f(x(i, 0), x(i, 1));
  return u;
}

double rms(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

void check_round_trips(const Basis& b, std::uint64_t seed) {
  const Tensor coeffs = testing::random_tensor({3, b.size()}, seed);
  CHECK(max_abs_diff(basis::project(b, basis::reconstruct(b, coeffs)), coeffs) <= 1e-10);
  const Tensor u = testing::random_tensor({2, b.num_points()}, seed + 1);
  const Tensor once = basis::reconstruct(b, basis::project(b, u));
  const Tensor twice = basis::reconstruct(b, basis::project(b, once));
  CHECK(max_abs_diff(once, twice) <= 1e-10);
}

}  // namespace

TEST_CASE("ndbin round trips and rejects corrupt input") {
  const Tensor t = testing::random_tensor({3, 4, 2}, 5, -1e300, 1e300);
  const Tensor back = ndbin::decode(ndbin::encode(t));
  CHECK(back.shape() == t.shape());
  CHECK(std::memcmp(back.data(), t.data(), t.size() * sizeof(double)) == 0);

  const std::string enc = ndbin::encode(Tensor::vector({1, 2, 3}));
  CHECK(enc.size() == 4 + 1 + 1 + 8 + 24);
  CHECK(enc.substr(0, 4) == "NDB1");
  CHECK_THROWS_AS(ndbin::decode("NDB2" + enc.substr(4)), ndbin::FormatError);
  CHECK_THROWS_AS(ndbin::decode(enc.substr(0, enc.size() - 1)), ndbin::FormatError);
  std::string bad_dtype = enc;
  bad_dtype[4] = 1;
  CHECK_THROWS_AS(ndbin::decode(bad_dtype), ndbin::FormatError);
}

TEST_CASE("fourier basis counts and Nyquist rule") {
  CHECK(basis::fourier_basis_2d(6, 6, 32, 32).size() == 144);
  CHECK(basis::fourier_basis_2d(2, 3, 16, 16).size() == 24);
  CHECK_NOTHROW(basis::fourier_basis_2d(7, 7, 15, 15));
  CHECK_THROWS_AS(basis::fourier_basis_2d(8, 1, 16, 16), std::invalid_argument);
  CHECK_THROWS_AS(basis::fourier_basis_2d(1, 8, 16, 16), std::invalid_argument);
}

TEST_CASE("fourier Gram matrix is the identity") {
  CHECK(basis::fourier_basis_2d(1, 1, 16, 16).gram_deviation() <= 1e-12);
  CHECK(basis::fourier_basis_2d(6, 6, 32, 32).gram_deviation() <= 1e-12);
  CHECK(basis::fourier_basis_2d(3, 5, 12, 24).gram_deviation() <= 1e-12);
}

TEST_CASE("fourier ordering puts each block after the previous one") {
  const std::size_t m = 2, n = 3;
  const Basis b = basis::fourier_basis_2d(m, n, 16, 16);
  // sin-sin block, modes (i, j) = (1, 1) sits at index 3mn.
  const Tensor u = sample_grid(16, 16, [](double x, double y) { return 2 * std::sin(2 * kPi * x) * std::sin(2 * kPi * y); });
  const Tensor c = basis::project(b, u);
  for (std::size_t k = 0; k < b.size(); ++k) CHECK(std::abs(c[k] - (k == 3 * m * n ? 1.0 : 0.0)) <= 1e-12);
  // cos-sin block, mode (2, 3) sits at mn + (2-1)n + (3-1).
  const Tensor v = sample_grid(16, 16, [](double x, double y) { return 2 * std::cos(4 * kPi * x) * std::sin(6 * kPi * y); });
  const Tensor cv = basis::project(b, v);
  for (std::size_t k = 0; k < b.size(); ++k) CHECK(std::abs(cv[k] - (k == m * n + n + 2 ? 1.0 : 0.0)) <= 1e-12);
}

TEST_CASE("project and reconstruct of basis rows and zero") {
  const Basis b = basis::fourier_basis_2d(2, 2, 12, 12);
  const Tensor rows = b.phi.transposed();
  const Tensor c = basis::project(b, rows);
  for (std::size_t a = 0; a < b.size(); ++a)
    for (std::size_t k = 0; k < b.size(); ++k) CHECK(std::abs(c(a, k) - (a == k ? 1.0 : 0.0)) <= 1e-10);
  CHECK(max_abs_diff(basis::reconstruct(b, c), rows) <= 1e-10);
  const Tensor z({2, b.num_points()});
  const Tensor cz = basis::project(b, z);
  for (double v : cz.values()) CHECK(v == 0.0);
  CHECK_THROWS_AS(basis::project(b, Tensor({1, 10})), ShapeError);
  CHECK_THROWS_AS(basis::reconstruct(b, Tensor({1, 10})), ShapeError);
}

TEST_CASE("fourier projection error of a smooth function is non-increasing in N") {
  const Tensor u = sample_grid(32, 32, [](double x, double y) { return std::exp(std::sin(2 * kPi * x) + std::cos(2 * kPi * y)); });
  double prev = INFINITY;
  for (std::size_t m : {2u, 4u, 6u}) {
    const Basis b = basis::fourier_basis_2d(m, m, 32, 32);
    const double err = rms(u, basis::reconstruct(b, basis::project(b, u)));
    CHECK(err <= prev);
    prev = err;
  }
}

TEST_CASE("chebyshev basis") {
  const Basis c0 = basis::chebyshev_basis_2d(0, 0, 8, 8);
  CHECK(c0.size() == 1);
  for (std::size_t i = 0; i < c0.num_points(); ++i) CHECK(std::abs(std::abs(c0.phi(i, 0)) - 1.0) <= 1e-12);

  const Basis c9 = basis::chebyshev_basis_2d(9, 9, 32, 32);
  CHECK(c9.size() == 100);
  CHECK(c9.gram_deviation() <= 1e-8);
  check_round_trips(c9, 21);

  const Tensor t3 = sample_grid(32, 32, [](double x, double) {
    const double t = 2 * x - 1;
    return 4 * t * t * t - 3 * t;
  });
  CHECK(max_abs_diff(basis::reconstruct(c9, basis::project(c9, t3)), t3) <= 1e-10);

  CHECK_THROWS_AS(basis::chebyshev_basis_2d(10, 10, 8, 8), std::invalid_argument);
  try {
    (void)basis::chebyshev_basis_2d(4, 0, 3, 3);
    FAIL("expected rank deficiency");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("degree (3, 0)") != std::string::npos);
  }
}

TEST_CASE("laplacian eigenbasis") {
  const auto sq = mesh::generate_rect_mesh(24, 24);
  const Basis b = basis::laplacian_eigenbasis(sq, 8);
  CHECK(b.gram_deviation() <= 1e-8);
  CHECK(std::abs(b.eigenvalues[1] / (kPi * kPi) - 1.0) < 0.02);
  const Tensor ones({1, b.num_points()}, 1.0);
  const Tensor c = basis::project(b, ones);
  CHECK(std::abs(c[0] - 1.0) <= 1e-10);
  for (std::size_t k = 1; k < b.size(); ++k) CHECK(std::abs(c[k]) <= 1e-10);
  check_round_trips(b, 31);

  const auto ann = mesh::generate_annulus_mesh(0.25, 1.0, 8, 48);
  const Basis ba = basis::laplacian_eigenbasis(ann, 128);
  CHECK(ba.gram_deviation() <= 1e-8);
  check_round_trips(ba, 41);
}

TEST_CASE("basis cache round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "supra_test_basis_cache";
  std::filesystem::remove_all(dir);
  const Basis b = basis::laplacian_eigenbasis(mesh::generate_annulus_mesh(0.25, 1.0, 4, 16), 10);
  basis::save_basis(b, dir);
  const Basis back = basis::load_basis(dir);
  CHECK(back.fingerprint() == b.fingerprint());
  CHECK(max_abs_diff(back.phi, b.phi) == 0.0);
  CHECK(max_abs_diff(back.psi, b.psi) == 0.0);
  CHECK(max_abs_diff(back.eigenvalues, b.eigenvalues) == 0.0);
  std::filesystem::remove_all(dir);
}
