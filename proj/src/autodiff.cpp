#include "supra/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "supra/kernels.hpp"

namespace supra::ad {

const Tensor& Var::value() const { return tape->value(id); }
const Tensor& Var::grad() const { return tape->grad(id); }

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor(), false, true, nullptr});
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor(), false, false, nullptr});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(fn));
}

Var Tape::record(Tensor value, std::span<const Var> parents, BackwardFn fn) {
  bool needs = false;
  for (const Var& p : parents) {
    if (p.tape != this) throw std::invalid_argument("operand recorded on a different tape");
    needs = needs || nodes_[p.id].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), Tensor(), false, needs, needs ? std::move(fn) : nullptr});
  return Var{this, nodes_.size() - 1};
}

const Tensor& Tape::grad(std::size_t id) const {
  const Node& n = nodes_.at(id);
  if (n.has_grad) return n.grad;
  // Shape-correct zeros for nodes that received no adjoint.
  auto& z = const_cast<Tensor&>(zeros_);
  if (z.shape() != n.value.shape()) z = Tensor(n.value.shape());
  return z;
}

Tensor* Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_.at(id);
  if (!n.requires_grad) return nullptr;
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape());
    n.has_grad = true;
  }
  return &n.grad;
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
  Tensor* buf = grad_buffer(id);
  if (!buf) return;
  if (buf->size() != g.size())
    throw ShapeError("adjoint " + shape_to_string(g.shape()) + " does not match value " +
                     shape_to_string(buf->shape()));
  kernels::axpy(g.size(), 1.0, g.data(), buf->data());
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw std::invalid_argument("backward: loss recorded on a different tape");
  const Tensor& lv = value(loss.id);
  if (lv.size() != 1)
    throw ShapeError("backward: loss must be a scalar, got shape " + shape_to_string(lv.shape()));
  if (Tensor* g = grad_buffer(loss.id)) (*g)[0] += 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad);
  }
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": operand shapes " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()) + " differ");
}

void require_2d(const Tensor& t, const char* op) {
  if (t.ndim() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_to_string(t.shape()));
}

void require_vector_len(const Tensor& t, std::size_t n, const char* op, const char* what) {
  if (t.size() != n)
    throw ShapeError(std::string(op) + ": " + what + " has " + std::to_string(t.size()) + " entries, expected " +
                     std::to_string(n));
}

}  // namespace

// ---------------------------------------------------------------------------
// Plain tensor maps.

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions differ, " + shape_to_string(a.shape()) + " * " +
                     shape_to_string(b.shape()));
  Tensor c(Shape{a.rows(), b.cols()});
  kernels::gemm_nn(a.rows(), b.cols(), a.cols(), a.data(), b.data(), c.data());
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul_nt");
  require_2d(b, "matmul_nt");
  if (a.cols() != b.cols())
    throw ShapeError("matmul_nt: inner dimensions differ, " + shape_to_string(a.shape()) + " * " +
                     shape_to_string(b.shape()) + "^T");
  Tensor c(Shape{a.rows(), b.rows()});
  kernels::gemm_nt(a.rows(), b.rows(), a.cols(), a.data(), b.data(), c.data());
  return c;
}

Tensor softmax_rows(const Tensor& w) {
  require_2d(w, "softmax_rows");
  Tensor out(w.shape());
  const std::size_t r = w.rows(), c = w.cols();
  for (std::size_t i = 0; i < r; ++i) {
    const double* x = w.data() + i * c;
    double* y = out.data() + i * c;
    const double mx = *std::max_element(x, x + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += (y[j] = std::exp(x[j] - mx));
    const double inv = 1.0 / s;
    for (std::size_t j = 0; j < c; ++j) y[j] *= inv;
  }
  return out;
}

double gelu_scalar(double x) {
  constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  return 0.5 * x * (1.0 + std::tanh(k * (x + 0.044715 * x * x * x)));
}

namespace {

double gelu_derivative(double x) {
  constexpr double k = 0.7978845608028654;
  const double inner = k * (x + 0.044715 * x * x * x);
  const double t = std::tanh(inner);
  const double dinner = k * (1.0 + 3.0 * 0.044715 * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner;
}

// out[r][0:HW] = d/dx, out[r][HW:2HW] = d/dy, x-axis = first grid index.
void grid_gradient_forward(const double* u, double* out, std::size_t h, std::size_t w, double hx, double hy) {
  const std::size_t hw = h * w;
  double* dx = out;
  double* dy = out + hw;
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const std::size_t p = i * w + j;
      if (h == 1) dx[p] = 0.0;
      else if (i == 0) dx[p] = (u[p + w] - u[p]) / hx;
      else if (i == h - 1) dx[p] = (u[p] - u[p - w]) / hx;
      else dx[p] = (u[p + w] - u[p - w]) / (2.0 * hx);
      if (w == 1) dy[p] = 0.0;
      else if (j == 0) dy[p] = (u[p + 1] - u[p]) / hy;
      else if (j == w - 1) dy[p] = (u[p] - u[p - 1]) / hy;
      else dy[p] = (u[p + 1] - u[p - 1]) / (2.0 * hy);
    }
  }
}

// Adjoint of grid_gradient_forward.
void grid_gradient_adjoint(const double* g, double* du, std::size_t h, std::size_t w, double hx, double hy) {
  const std::size_t hw = h * w;
  const double* gx = g;
  const double* gy = g + hw;
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const std::size_t p = i * w + j;
      if (h > 1) {
        if (i == 0) {
          du[p + w] += gx[p] / hx;
          du[p] -= gx[p] / hx;
        } else if (i == h - 1) {
          du[p] += gx[p] / hx;
          du[p - w] -= gx[p] / hx;
        } else {
          du[p + w] += gx[p] / (2.0 * hx);
          du[p - w] -= gx[p] / (2.0 * hx);
        }
      }
      if (w > 1) {
        if (j == 0) {
          du[p + 1] += gy[p] / hy;
          du[p] -= gy[p] / hy;
        } else if (j == w - 1) {
          du[p] += gy[p] / hy;
          du[p - 1] -= gy[p] / hy;
        } else {
          du[p + 1] += gy[p] / (2.0 * hy);
          du[p - 1] -= gy[p] / (2.0 * hy);
        }
      }
    }
  }
}

}  // namespace

Tensor grid_gradient(const Tensor& x, std::size_t h, std::size_t w, double hx, double hy) {
  require_2d(x, "grid_gradient");
  if (x.cols() != h * w)
    throw ShapeError("grid_gradient: row length " + std::to_string(x.cols()) + " is not " + std::to_string(h) +
                     "x" + std::to_string(w));
  Tensor out(Shape{x.rows(), 2 * h * w});
  for (std::size_t r = 0; r < x.rows(); ++r)
    grid_gradient_forward(x.data() + r * h * w, out.data() + r * 2 * h * w, h, w, hx, hy);
  return out;
}

// ---------------------------------------------------------------------------
// Recorded operations.

Var matmul(Var a, Var b) {
  Tensor out = matmul(a.value(), b.value());
  const std::size_t m = a.value().rows(), k = a.value().cols(), n = b.value().cols();
  return a.tape->record(std::move(out), {a, b}, [a, b, m, k, n](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_buffer(a.id)) kernels::gemm_nt(m, k, n, g.data(), t.value(b.id).data(), ga->data());
    if (Tensor* gb = t.grad_buffer(b.id)) kernels::gemm_tn(k, n, m, t.value(a.id).data(), g.data(), gb->data());
  });
}

Var matmul_nt(Var a, Var b) {
  Tensor out = matmul_nt(a.value(), b.value());
  const std::size_t m = a.value().rows(), k = a.value().cols(), n = b.value().rows();
  return a.tape->record(std::move(out), {a, b}, [a, b, m, k, n](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_buffer(a.id)) kernels::gemm_nn(m, k, n, g.data(), t.value(b.id).data(), ga->data());
    if (Tensor* gb = t.grad_buffer(b.id)) kernels::gemm_tn(n, k, m, g.data(), t.value(a.id).data(), gb->data());
  });
}

Var transpose(Var a) {
  require_2d(a.value(), "transpose");
  return a.tape->record(a.value().transposed(), {a}, [a](Tape& t, const Tensor& g) {
    t.accumulate(a.id, g.transposed());
  });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  kernels::axpy(out.size(), 1.0, b.value().data(), out.data());
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a.id, g);
    t.accumulate(b.id, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  kernels::axpy(out.size(), -1.0, b.value().data(), out.data());
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a.id, g);
    if (Tensor* gb = t.grad_buffer(b.id)) kernels::axpy(g.size(), -1.0, g.data(), gb->data());
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_buffer(a.id))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * t.value(b.id)[i];
    if (Tensor* gb = t.grad_buffer(b.id))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * t.value(a.id)[i];
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= s;
  return a.tape->record(std::move(out), {a}, [a, s](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_buffer(a.id)) kernels::axpy(g.size(), s, g.data(), ga->data());
  });
}

Var add_row_bias(Var x, Var b) {
  const Tensor& xv = x.value();
  require_2d(xv, "add_row_bias");
  require_vector_len(b.value(), xv.rows(), "add_row_bias", "bias");
  Tensor out = xv;
  const std::size_t r = xv.rows(), c = xv.cols();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) += b.value()[i];
  return x.tape->record(std::move(out), {x, b}, [x, b, r, c](Tape& t, const Tensor& g) {
    t.accumulate(x.id, g);
    if (Tensor* gb = t.grad_buffer(b.id))
      for (std::size_t i = 0; i < r; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += g(i, j);
        (*gb)[i] += s;
      }
  });
}

Var add_col_bias(Var x, Var b) {
  const Tensor& xv = x.value();
  require_2d(xv, "add_col_bias");
  require_vector_len(b.value(), xv.cols(), "add_col_bias", "bias");
  Tensor out = xv;
  const std::size_t r = xv.rows(), c = xv.cols();
  for (std::size_t i = 0; i < r; ++i) kernels::axpy(c, 1.0, b.value().data(), out.data() + i * c);
  return x.tape->record(std::move(out), {x, b}, [x, b, r, c](Tape& t, const Tensor& g) {
    t.accumulate(x.id, g);
    if (Tensor* gb = t.grad_buffer(b.id))
      for (std::size_t i = 0; i < r; ++i) kernels::axpy(c, 1.0, g.data() + i * c, gb->data());
  });
}

Var scale_rows(Var x, Var s) {
  const Tensor& xv = x.value();
  require_2d(xv, "scale_rows");
  require_vector_len(s.value(), xv.rows(), "scale_rows", "gain");
  Tensor out = xv;
  const std::size_t r = xv.rows(), c = xv.cols();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) *= s.value()[i];
  return x.tape->record(std::move(out), {x, s}, [x, s, r, c](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_buffer(x.id))
      for (std::size_t i = 0; i < r; ++i) kernels::axpy(c, t.value(s.id)[i], g.data() + i * c, gx->data() + i * c);
    if (Tensor* gs = t.grad_buffer(s.id))
      for (std::size_t i = 0; i < r; ++i)
        (*gs)[i] += kernels::dot(c, g.data() + i * c, t.value(x.id).data() + i * c);
  });
}

Var scale_cols(Var x, Var s) {
  const Tensor& xv = x.value();
  require_2d(xv, "scale_cols");
  require_vector_len(s.value(), xv.cols(), "scale_cols", "gain");
  Tensor out = xv;
  const std::size_t r = xv.rows(), c = xv.cols();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) *= s.value()[j];
  return x.tape->record(std::move(out), {x, s}, [x, s, r, c](Tape& t, const Tensor& g) {
    const Tensor& sv = t.value(s.id);
    const Tensor& xv2 = t.value(x.id);
    if (Tensor* gx = t.grad_buffer(x.id))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) (*gx)(i, j) += g(i, j) * sv[j];
    if (Tensor* gs = t.grad_buffer(s.id))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) (*gs)[j] += g(i, j) * xv2(i, j);
  });
}

Var standardize_rows(Var x, double eps) {
  const Tensor& xv = x.value();
  require_2d(xv, "standardize_rows");
  const std::size_t r = xv.rows(), c = xv.cols();
  Tensor out(xv.shape());
  std::vector<double> inv_sd(r);
  std::vector<char> floored(r);
  for (std::size_t i = 0; i < r; ++i) {
    const double* xi = xv.data() + i * c;
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += xi[j];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (xi[j] - mean) * (xi[j] - mean);
    var /= static_cast<double>(c);
    floored[i] = var <= eps;
    inv_sd[i] = 1.0 / std::sqrt(std::max(var, eps));
    for (std::size_t j = 0; j < c; ++j) out(i, j) = (xi[j] - mean) * inv_sd[i];
  }
  const std::size_t yid = x.tape->size();
  return x.tape->record(std::move(out), {x},
                        [x, yid, inv_sd = std::move(inv_sd), floored = std::move(floored), r, c](
                            Tape& t, const Tensor& g) {
                          Tensor* gx = t.grad_buffer(x.id);
                          if (!gx) return;
                          const Tensor& yv = t.value(yid);
                          for (std::size_t i = 0; i < r; ++i) {
                            const double* gi = g.data() + i * c;
                            const double* yi = yv.data() + i * c;
                            double* dxi = gx->data() + i * c;
                            double mg = 0.0;
                            for (std::size_t j = 0; j < c; ++j) mg += gi[j];
                            mg /= static_cast<double>(c);
                            // Below the eps floor the scale is constant; only the mean is removed.
                            const double mgy = floored[i] ? 0.0 : kernels::dot(c, gi, yi) / static_cast<double>(c);
                            for (std::size_t j = 0; j < c; ++j) dxi[j] += inv_sd[i] * (gi[j] - mg - yi[j] * mgy);
                          }
                        });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  return add_col_bias(scale_cols(standardize_rows(x, eps), gain), bias);
}

Var instance_norm(Var u, Var gain, Var bias, double eps) {
  return add_row_bias(scale_rows(standardize_rows(u, eps), gain), bias);
}

Var gelu(Var x) {
  Tensor out = x.value();
  for (double& v : out.values()) v = gelu_scalar(v);
  return x.tape->record(std::move(out), {x}, [x](Tape& t, const Tensor& g) {
    Tensor* gx = t.grad_buffer(x.id);
    if (!gx) return;
    const Tensor& xv = t.value(x.id);
    for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * gelu_derivative(xv[i]);
  });
}

Var softmax_rows(Var w) {
  Tensor out = softmax_rows(w.value());
  const std::size_t yid = w.tape->size();
  return w.tape->record(std::move(out), {w}, [w, yid](Tape& t, const Tensor& g) {
    Tensor* gw = t.grad_buffer(w.id);
    if (!gw) return;
    const Tensor& yv = t.value(yid);
    const std::size_t r = yv.rows(), c = yv.cols();
    for (std::size_t i = 0; i < r; ++i) {
      const double* gi = g.data() + i * c;
      const double* yi = yv.data() + i * c;
      const double s = kernels::dot(c, gi, yi);
      double* di = gw->data() + i * c;
      for (std::size_t j = 0; j < c; ++j) di[j] += yi[j] * (gi[j] - s);
    }
  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  const Tensor& xv = x.value();
  require_2d(xv, "slice_cols");
  if (count == 0 || begin + count > xv.cols())
    throw ShapeError("slice_cols: columns [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of range for " + shape_to_string(xv.shape()));
  const std::size_t r = xv.rows(), c = xv.cols();
  Tensor out(Shape{r, count});
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(xv.data() + i * c + begin, count, out.data() + i * count);
  return x.tape->record(std::move(out), {x}, [x, begin, count, r, c](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_buffer(x.id))
      for (std::size_t i = 0; i < r; ++i) kernels::axpy(count, 1.0, g.data() + i * count, gx->data() + i * c + begin);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  const std::size_t r = parts[0].value().rows();
  std::size_t c = 0;
  for (const Var& p : parts) {
    require_2d(p.value(), "concat_cols");
    if (p.value().rows() != r) throw ShapeError("concat_cols: row counts differ");
    c += p.value().cols();
  }
  Tensor out(Shape{r, c});
  std::size_t off = 0;
  std::vector<std::pair<std::size_t, std::size_t>> layout;  // (node id, column offset)
  for (const Var& p : parts) {
    const std::size_t pc = p.value().cols();
    for (std::size_t i = 0; i < r; ++i) std::copy_n(p.value().data() + i * pc, pc, out.data() + i * c + off);
    layout.emplace_back(p.id, off);
    off += pc;
  }
  return parts[0].tape->record(std::move(out), parts, [layout, r, c](Tape& t, const Tensor& g) {
    for (const auto& [id, o] : layout) {
      Tensor* gp = t.grad_buffer(id);
      if (!gp) continue;
      const std::size_t pc = gp->cols();
      for (std::size_t i = 0; i < r; ++i) kernels::axpy(pc, 1.0, g.data() + i * c + o, gp->data() + i * pc);
    }
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return x.tape->record(Tensor::scalar(s), {x}, [x](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_buffer(x.id))
      for (double& v : gx->values()) v += g[0];
  });
}

Var sum_squares(Var x) {
  const Tensor& xv = x.value();
  const double s = kernels::dot(xv.size(), xv.data(), xv.data());
  return x.tape->record(Tensor::scalar(s), {x}, [x](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_buffer(x.id)) kernels::axpy(gx->size(), 2.0 * g[0], t.value(x.id).data(), gx->data());
  });
}

Var sqrt(Var x) {
  const double v = x.value().item();
  const double r = std::sqrt(v);
  return x.tape->record(Tensor::scalar(r), {x}, [x, r](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_buffer(x.id)) (*gx)[0] += g[0] * 0.5 / r;
  });
}

Var grid_gradient(Var x, std::size_t h, std::size_t w, double hx, double hy) {
  Tensor out = grid_gradient(x.value(), h, w, hx, hy);
  const std::size_t rows = x.value().rows();
  return x.tape->record(std::move(out), {x}, [x, h, w, hx, hy, rows](Tape& t, const Tensor& g) {
    Tensor* gx = t.grad_buffer(x.id);
    if (!gx) return;
    for (std::size_t r = 0; r < rows; ++r)
      grid_gradient_adjoint(g.data() + r * 2 * h * w, gx->data() + r * h * w, h, w, hx, hy);
  });
}

// ---------------------------------------------------------------------------

GradCheckReport grad_check(const ScalarFn& f, std::vector<Tensor> params, double h, std::size_t stride,
                           double floor) {
  if (!(h >= 1e-7 && h <= 1e-4)) throw std::invalid_argument("grad_check: step h must lie in [1e-7, 1e-4]");
  if (stride == 0) stride = 1;

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& p : params) vars.push_back(tape.leaf(p));
    Var loss = f(tape, vars);
    tape.backward(loss);
    for (const Var& v : vars) analytic.push_back(v.grad());
  }

  auto eval = [&](const std::vector<Tensor>& ps) {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& p : ps) vars.push_back(tape.constant(p));
    return f(tape, vars).value().item();
  };

  GradCheckReport report;
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t i = 0; i < params[t].size(); i += stride) {
      const double orig = params[t][i];
      params[t][i] = orig + h;
      const double fp = eval(params);
      params[t][i] = orig - h;
      const double fm = eval(params);
      params[t][i] = orig;
      ++report.components_checked;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        report.nonfinite.emplace_back(t, i);
        continue;
      }
      const double fd = (fp - fm) / (2.0 * h);
      const double g = analytic[t][i];
      const double rel = std::abs(g - fd) / std::max(std::abs(g), floor);
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_tensor = t;
        report.worst_index = i;
        report.worst_analytic = g;
        report.worst_numeric = fd;
      }
    }
  }
  return report;
}

GradCheckReport grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& theta, double h) {
  return grad_check([&](Tape& t, std::span<const Var> v) { return f(t, v[0]); }, std::vector<Tensor>{theta}, h);
}

}  // namespace supra::ad
