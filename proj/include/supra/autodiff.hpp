#pragma once

// Reverse-mode automatic differentiation over dense tensors.
//
// A Tape records one forward pass. Each recorded node keeps its forward value
// and a closure that pushes the node's adjoint into its operands. Nodes are
// appended in evaluation order, so the node list is already topologically
// sorted and backward() is a single reverse sweep.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "supra/tensor.hpp"

namespace supra::ad {

class Tape;

/// Handle to a node on a tape. Cheap to copy; only valid while its tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// A differentiable input (a parameter or an input we want gradients for).
  Var leaf(Tensor value);
  /// A non-differentiable input; backward never visits it.
  Var constant(Tensor value);
  /// Appends an operation result. `fn` is dropped if no parent needs gradients.
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn);
  Var record(Tensor value, std::span<const Var> parents, BackwardFn fn);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  /// Adjoint of a node after backward(); zeros if nothing flowed into it.
  const Tensor& grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  /// Adds `g` into the adjoint buffer of `id` (no-op for constants).
  void accumulate(std::size_t id, const Tensor& g);
  /// Direct access to the adjoint buffer, allocated on first use. Returns
  /// nullptr for nodes that do not require gradients.
  Tensor* grad_buffer(std::size_t id);

  /// Reverse sweep from a scalar loss. Throws ShapeError for non-scalar roots.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  Tensor zeros_;
};

// ---------------------------------------------------------------------------
// Operations. All operands must live on the same tape.

Var matmul(Var a, Var b);     // a[m x k] * b[k x n]
Var matmul_nt(Var a, Var b);  // a[m x k] * b[n x k]^T
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double s);

Var add_row_bias(Var x, Var b);  // x[r x c] + b[r] broadcast along each row
Var add_col_bias(Var x, Var b);  // x[r x c] + b[c] broadcast down each column
Var scale_rows(Var x, Var g);    // x[i][j] * g[i]
Var scale_cols(Var x, Var g);    // x[i][j] * g[j]

/// Per-row standardization: (x - mean) / sqrt(max(var, eps)), population variance.
Var standardize_rows(Var x, double eps);
/// Each row of x[C x N] standardized over its N entries, then gain/bias per column.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
/// Each channel of u[C x M] standardized over its M samples, then gain/bias per channel.
Var instance_norm(Var u, Var gain, Var bias, double eps = 1e-5);

Var gelu(Var x);
Var softmax_rows(Var w);

Var slice_cols(Var x, std::size_t begin, std::size_t count);
Var concat_cols(std::span<const Var> parts);

Var sum(Var x);
Var sum_squares(Var x);
Var sqrt(Var x);  // scalar only

/// Gradient of each row of x, read as an H x W grid with spacings (hx, hy).
/// Output row layout is [d/dx (H*W values) | d/dy (H*W values)]. Central
/// differences in the interior, one-sided at the edges.
Var grid_gradient(Var x, std::size_t h, std::size_t w, double hx, double hy);

// Plain-tensor forms of the same maps, for callers that do not need a tape.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor softmax_rows(const Tensor& w);
double gelu_scalar(double x);
Tensor grid_gradient(const Tensor& x, std::size_t h, std::size_t w, double hx, double hy);

// ---------------------------------------------------------------------------
// Finite-difference gradient checking.

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t components_checked = 0;
  /// (tensor, index) pairs where f was not finite at a perturbed point.
  std::vector<std::pair<std::size_t, std::size_t>> nonfinite;
};

using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

/// Compares the tape gradient of `f` at `params` with central differences
/// (f(θ+h e) - f(θ-h e)) / 2h, component by component. Relative error uses the
/// denominator max(|analytic|, floor). `h` must lie in [1e-7, 1e-4].
/// `stride` > 1 checks every stride-th component of each tensor.
GradCheckReport grad_check(const ScalarFn& f, std::vector<Tensor> params, double h, std::size_t stride = 1,
                           double floor = 1e-8);
GradCheckReport grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& theta, double h);

}  // namespace supra::ad
