#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace supra {

class CgError : public std::runtime_error {
 public:
  CgError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), residual_history(std::move(history)) {}
  /// ||r_k|| / ||b|| at every iteration.
  std::vector<double> residual_history;
};

struct CgResult {
  std::vector<double> x;
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

using LinearOp = std::function<void(const std::vector<double>& in, std::vector<double>& out)>;

/// Unpreconditioned conjugate gradients for a symmetric positive definite
/// operator, from x = 0, until ||b - A x|| <= tol * ||b||. Throws CgError
/// after max_iter iterations.
CgResult conjugate_gradient(const LinearOp& a, const std::vector<double>& b, double tol, std::size_t max_iter);

}  // namespace supra
