#pragma once

// Dense inner-loop kernels. Each kernel has a scalar reference version and an
// AVX2+FMA version; the dispatching entry points pick one at runtime from the
// CPU feature bits. Setting SUPRA_SIMD=scalar in the environment forces the
// reference path.
//
// All matrices are row-major and contiguous. The gemm kernels accumulate into
// C (C += op(A) * op(B)).

#include <cstddef>
#include <string_view>

namespace supra::kernels {

enum class Backend { Scalar, Avx2 };

std::string_view backend_name(Backend b) noexcept;
bool avx2_available() noexcept;

/// Backend used by the dispatching entry points below.
Backend active_backend() noexcept;
/// Override the dispatch choice. Requesting Avx2 on a machine without it
/// falls back to Scalar. Not thread-safe against concurrent kernel calls.
void set_backend(Backend b) noexcept;

// C[m x n] += A[m x k] * B[k x n]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
// C[m x n] += A[m x k] * B[n x k]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
// C[m x n] += A[k x m]^T * B[k x n]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
double dot(std::size_t n, const double* x, const double* y);
// y += alpha * x
void axpy(std::size_t n, double alpha, const double* x, double* y);

namespace scalar {
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
double dot(std::size_t n, const double* x, const double* y);
void axpy(std::size_t n, double alpha, const double* x, double* y);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define SUPRA_HAVE_AVX2_KERNELS 1
namespace avx2 {
// Callers must check avx2_available() first.
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
double dot(std::size_t n, const double* x, const double* y);
void axpy(std::size_t n, double alpha, const double* x, double* y);
}  // namespace avx2
#else
#define SUPRA_HAVE_AVX2_KERNELS 0
#endif

}  // namespace supra::kernels
