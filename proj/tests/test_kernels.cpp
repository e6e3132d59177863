#include <cmath>
#include <vector>

#include "doctest.h"
#include "supra/kernels.hpp"
#include "test_util.hpp"

using namespace supra;
using supra::testing::naive_matmul;
using supra::testing::random_tensor;

namespace {

struct GemmCase {
  std::size_t m, n, k;
};

const std::vector<GemmCase> kCases = {{1, 1, 1}, {5, 3, 4}, {4, 8, 1}, {7, 13, 9},  {32, 64, 1024},
                                      {33, 65, 17}, {8, 1, 300}, {64, 32, 128}, {3, 5, 2}};

double rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return num / std::max(den, 1e-300);
}

}  // namespace

TEST_CASE("scalar gemm variants agree with a long-double triple loop") {
  for (const auto& [m, n, k] : kCases) {
    const Tensor a = random_tensor({m, k}, 1 + m), b = random_tensor({k, n}, 2 + n);
    const Tensor expect = naive_matmul(a, b);
    std::vector<double> c(m * n, 0.0);
    kernels::scalar::gemm_nn(m, n, k, a.data(), b.data(), c.data());
    CHECK(rel_diff(c, expect.values()) < 1e-13);

    const Tensor bt = b.transposed();
    std::fill(c.begin(), c.end(), 0.0);
    kernels::scalar::gemm_nt(m, n, k, a.data(), bt.data(), c.data());
    CHECK(rel_diff(c, expect.values()) < 1e-13);

    const Tensor at = a.transposed();
    std::fill(c.begin(), c.end(), 0.0);
    kernels::scalar::gemm_tn(m, n, k, at.data(), b.data(), c.data());
    CHECK(rel_diff(c, expect.values()) < 1e-13);
  }
}

#if SUPRA_HAVE_AVX2_KERNELS
TEST_CASE("avx2 kernels match the scalar reference") {
  if (!kernels::avx2_available()) return;
  for (const auto& [m, n, k] : kCases) {
    CAPTURE(m);
    CAPTURE(n);
    CAPTURE(k);
    const Tensor a = random_tensor({m, k}, 11 + m), b = random_tensor({k, n}, 12 + n);
    const Tensor c0 = random_tensor({m, n}, 13);  // accumulate into nonzero C
    std::vector<double> ref = c0.values(), simd = c0.values();
    kernels::scalar::gemm_nn(m, n, k, a.data(), b.data(), ref.data());
    kernels::avx2::gemm_nn(m, n, k, a.data(), b.data(), simd.data());
    CHECK(rel_diff(simd, ref) < 1e-13);

    const Tensor bt = b.transposed();
    ref = c0.values();
    simd = c0.values();
    kernels::scalar::gemm_nt(m, n, k, a.data(), bt.data(), ref.data());
    kernels::avx2::gemm_nt(m, n, k, a.data(), bt.data(), simd.data());
    CHECK(rel_diff(simd, ref) < 1e-13);

    const Tensor at = a.transposed();
    ref = c0.values();
    simd = c0.values();
    kernels::scalar::gemm_tn(m, n, k, at.data(), b.data(), ref.data());
    kernels::avx2::gemm_tn(m, n, k, at.data(), b.data(), simd.data());
    CHECK(rel_diff(simd, ref) < 1e-13);
  }
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 9u, 31u, 1000u}) {
    const Tensor x = random_tensor({n + 1}, 21), y = random_tensor({n + 1}, 22);
    const double ds = kernels::scalar::dot(n, x.data(), y.data());
    const double dv = kernels::avx2::dot(n, x.data(), y.data());
    CHECK(std::abs(ds - dv) <= 1e-13 * std::max(1.0, std::abs(ds)));
    std::vector<double> ys = y.values(), yv = y.values();
    kernels::scalar::axpy(n, 0.37, x.data(), ys.data());
    kernels::avx2::axpy(n, 0.37, x.data(), yv.data());
    CHECK(rel_diff(yv, ys) < 1e-15);
  }
}
#endif

TEST_CASE("backend switch round-trips") {
  const auto before = kernels::active_backend();
  kernels::set_backend(kernels::Backend::Scalar);
  CHECK(kernels::active_backend() == kernels::Backend::Scalar);
  kernels::set_backend(kernels::Backend::Avx2);
  CHECK(kernels::active_backend() ==
        (kernels::avx2_available() ? kernels::Backend::Avx2 : kernels::Backend::Scalar));
  kernels::set_backend(before);
}
