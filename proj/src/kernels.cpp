#include "supra/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace supra::kernels {

namespace {

Backend detect() noexcept {
  if (const char* env = std::getenv("SUPRA_SIMD"); env && std::string(env) == "scalar") return Backend::Scalar;
  return avx2_available() ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend>& current() noexcept {
  static std::atomic<Backend> backend{detect()};
  return backend;
}

}  // namespace

std::string_view backend_name(Backend b) noexcept {
  switch (b) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
  }
  return "unknown";
}

bool avx2_available() noexcept {
#if SUPRA_HAVE_AVX2_KERNELS
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok;
#else
  return false;
#endif
}

Backend active_backend() noexcept { return current().load(std::memory_order_relaxed); }

void set_backend(Backend b) noexcept {
  if (b == Backend::Avx2 && !avx2_available()) b = Backend::Scalar;
  current().store(b, std::memory_order_relaxed);
}

#if SUPRA_HAVE_AVX2_KERNELS
#define SUPRA_DISPATCH(fn, ...)                                          \
  (active_backend() == Backend::Avx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))
#else
#define SUPRA_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  SUPRA_DISPATCH(gemm_nn, m, n, k, a, b, c);
}
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  SUPRA_DISPATCH(gemm_nt, m, n, k, a, b, c);
}
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  SUPRA_DISPATCH(gemm_tn, m, n, k, a, b, c);
}
double dot(std::size_t n, const double* x, const double* y) { return SUPRA_DISPATCH(dot, n, x, y); }
void axpy(std::size_t n, double alpha, const double* x, double* y) { SUPRA_DISPATCH(axpy, n, alpha, x, y); }

}  // namespace supra::kernels
