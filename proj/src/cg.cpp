#include "supra/cg.hpp"

#include <cmath>

#include "supra/kernels.hpp"

namespace supra {

CgResult conjugate_gradient(const LinearOp& a, const std::vector<double>& b, double tol, std::size_t max_iter) {
  const std::size_t n = b.size();
  CgResult res;
  res.x.assign(n, 0.0);
  const double bnorm = std::sqrt(kernels::dot(n, b.data(), b.data()));
  if (bnorm == 0.0) return res;

  std::vector<double> r = b, p = b, ap(n);
  double rr = bnorm * bnorm;
  std::vector<double> history;
  for (std::size_t it = 0; it < max_iter; ++it) {
    const double rel = std::sqrt(rr) / bnorm;
    history.push_back(rel);
    if (rel <= tol) {
      res.iterations = it;
      res.relative_residual = rel;
      return res;
    }
    a(p, ap);
    const double pap = kernels::dot(n, p.data(), ap.data());
    if (!(pap > 0.0) || !std::isfinite(pap))
      throw CgError("conjugate_gradient: operator is not positive definite (p^T A p = " + std::to_string(pap) + ")",
                    std::move(history));
    const double alpha = rr / pap;
    kernels::axpy(n, alpha, p.data(), res.x.data());
    kernels::axpy(n, -alpha, ap.data(), r.data());
    const double rr_new = kernels::dot(n, r.data(), r.data());
    const double beta = rr_new / rr;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    rr = rr_new;
  }
  const double rel = std::sqrt(rr) / bnorm;
  history.push_back(rel);
  if (rel <= tol) {
    res.iterations = max_iter;
    res.relative_residual = rel;
    return res;
  }
  throw CgError("conjugate_gradient: relative residual " + std::to_string(rel) + " after " + std::to_string(max_iter) +
                    " iterations, target " + std::to_string(tol),
                std::move(history));
}

}  // namespace supra
