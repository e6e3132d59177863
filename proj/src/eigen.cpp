#include "supra/eigen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace supra::eig {

namespace {

// Reduces the symmetric matrix held in v (n x n, row-major) to tridiagonal
// form. On exit d is the diagonal, e[1..n) the subdiagonal and v the
// accumulated orthogonal transform (columns are the basis).
void tridiagonalize(std::size_t n, std::vector<double>& v, std::vector<double>& d, std::vector<double>& e) {
  auto V = [&](std::size_t i, std::size_t j) -> double& { return v[i * n + j]; };
  for (std::size_t j = 0; j < n; ++j) d[j] = V(n - 1, j);

  for (std::size_t i = n - 1; i > 0; --i) {
    double scale = 0.0, h = 0.0;
    for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (std::size_t j = 0; j < i; ++j) {
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
        V(j, i) = 0.0;
      }
    } else {
      for (std::size_t k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;

      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        V(j, i) = f;
        g = e[j] + V(j, j) * f;
        for (std::size_t k = j + 1; k < i; ++k) {
          g += V(k, j) * d[k];
          e[k] += V(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (std::size_t k = j; k < i; ++k) V(k, j) -= (f * e[k] + g * d[k]);
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
      }
    }
    d[i] = h;
  }

  for (std::size_t i = 0; i + 1 < n; ++i) {
    V(n - 1, i) = V(i, i);
    V(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (std::size_t k = 0; k <= i; ++k) d[k] = V(k, i + 1) / h;
      for (std::size_t j = 0; j <= i; ++j) {
        double g = 0.0;
        for (std::size_t k = 0; k <= i; ++k) g += V(k, i + 1) * V(k, j);
        for (std::size_t k = 0; k <= i; ++k) V(k, j) -= g * d[k];
      }
    }
    for (std::size_t k = 0; k <= i; ++k) V(k, i + 1) = 0.0;
  }
  for (std::size_t j = 0; j < n; ++j) {
    d[j] = V(n - 1, j);
    V(n - 1, j) = 0.0;
  }
  V(n - 1, n - 1) = 1.0;
  e[0] = 0.0;
}

// Implicit QL on the tridiagonal (d, e). w holds the transform transposed
// (row k = basis vector k) so each rotation touches two contiguous rows.
void tridiagonal_ql(std::size_t n, std::vector<double>& w, std::vector<double>& d, std::vector<double>& e) {
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  constexpr double eps = 0x1p-52;
  constexpr int max_sweeps = 60;
  double f = 0.0, tst1 = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n && std::abs(e[m]) > eps * tst1) ++m;

    if (m > l) {
      int sweeps = 0;
      do {
        if (++sweeps > max_sweeps) throw std::runtime_error("symmetric_eig: QL iteration did not converge");
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (std::size_t ii = m; ii-- > l;) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[ii];
          h = c * p;
          r = std::hypot(p, e[ii]);
          e[ii + 1] = s * r;
          s = e[ii] / r;
          c = p / r;
          p = c * d[ii] - s * g;
          d[ii + 1] = h + s * (c * g + s * d[ii]);
          double* wi = &w[ii * n];
          double* wj = &w[(ii + 1) * n];
          for (std::size_t k = 0; k < n; ++k) {
            const double t = wj[k];
            wj[k] = s * wi[k] + c * t;
            wi[k] = c * wi[k] - s * t;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

}  // namespace

SymEig symmetric_eig(const Tensor& a) {
  require_matrix(a, "symmetric_eig");
  const std::size_t n = a.rows();
  if (a.cols() != n) throw ShapeError("symmetric_eig: matrix must be square, got " + shape_to_string(a.shape()));
  if (!a.all_finite()) throw std::invalid_argument("symmetric_eig: non-finite entry");
  SymEig out;
  if (n == 0) return out;

  std::vector<double> v(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) v[i * n + j] = v[j * n + i] = a(i, j);
  std::vector<double> d(n), e(n);
  tridiagonalize(n, v, d, e);

  std::vector<double> w(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) w[j * n + i] = v[i * n + j];
  v.clear();
  v.shrink_to_fit();
  tridiagonal_ql(n, w, d, e);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return d[x] < d[y]; });
  out.values.resize(n);
  out.vectors = Tensor({n, n});
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = d[order[k]];
    std::copy_n(&w[order[k] * n], n, &out.vectors(k, 0));
  }
  return out;
}

Eigenpairs smallest_eigenpairs(const fem::SparseSym& k, const Tensor& mass, std::size_t n, Boundary bc,
                               const std::vector<bool>& boundary) {
  const std::size_t nv = k.n;
  if (mass.size() != nv) throw ShapeError("smallest_eigenpairs: mass has " + std::to_string(mass.size()) +
                                          " entries for a " + std::to_string(nv) + "-vertex matrix");
  if (nv > kMaxDenseVertices)
    throw std::invalid_argument("smallest_eigenpairs: " + std::to_string(nv) + " vertices exceeds the dense limit of " +
                                std::to_string(kMaxDenseVertices));
  for (std::size_t i = 0; i < nv; ++i)
    if (!(mass[i] > 0.0)) throw std::invalid_argument("smallest_eigenpairs: mass entry " + std::to_string(i) + " not positive");

  std::vector<std::size_t> free;
  if (bc == Boundary::Dirichlet) {
    if (boundary.size() != nv) throw std::invalid_argument("smallest_eigenpairs: dirichlet needs boundary flags per vertex");
    for (std::size_t i = 0; i < nv; ++i)
      if (!boundary[i]) free.push_back(i);
  } else {
    free.resize(nv);
    std::iota(free.begin(), free.end(), 0);
  }
  const std::size_t nf = free.size();
  if (n == 0 || n > nf)
    throw std::invalid_argument("smallest_eigenpairs: requested " + std::to_string(n) + " eigenpairs but only " +
                                std::to_string(nf) + " degrees of freedom are available");

  std::vector<std::size_t> slot(nv, nf);
  for (std::size_t a = 0; a < nf; ++a) slot[free[a]] = a;
  std::vector<double> rs(nf);
  for (std::size_t a = 0; a < nf; ++a) rs[a] = 1.0 / std::sqrt(mass[free[a]]);

  Tensor s({nf, nf});
  for (std::size_t a = 0; a < nf; ++a) {
    const std::size_t i = free[a];
    for (std::size_t p = k.row_ptr[i]; p < k.row_ptr[i + 1]; ++p) {
      const std::size_t b = slot[k.cols[p]];
      if (b < nf) s(a, b) = rs[a] * k.vals[p] * rs[b];
    }
  }
  const SymEig se = symmetric_eig(s);

  Eigenpairs out{Tensor({n}), Tensor({nv, n})};
  for (std::size_t c = 0; c < n; ++c) {
    out.lambda[c] = se.values[c];
    std::size_t arg = 0;
    double big = -1.0;
    for (std::size_t a = 0; a < nf; ++a) {
      const double val = se.vectors(c, a) * rs[a];
      if (std::abs(val) > big + 1e-12 * std::abs(big)) {
        big = std::abs(val);
        arg = a;
      }
    }
    const double sign = se.vectors(c, arg) < 0 ? -1.0 : 1.0;
    for (std::size_t a = 0; a < nf; ++a) out.phi(free[a], c) = sign * se.vectors(c, a) * rs[a];
  }
  return out;
}

}  // namespace supra::eig
