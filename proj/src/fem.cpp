#include "supra/fem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace supra::fem {

double SparseSym::at(std::size_t i, std::size_t j) const {
  const auto b = cols.begin() + static_cast<std::ptrdiff_t>(row_ptr.at(i));
  const auto e = cols.begin() + static_cast<std::ptrdiff_t>(row_ptr.at(i + 1));
  const auto it = std::lower_bound(b, e, static_cast<std::uint32_t>(j));
  if (it == e || *it != j) return 0.0;
  return vals[static_cast<std::size_t>(it - cols.begin())];
}

std::vector<double> SparseSym::apply(const std::vector<double>& x) const {
  if (x.size() != n) throw ShapeError("SparseSym::apply: vector length mismatch");
  std::vector<double> y(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += vals[k] * x[cols[k]];
    y[i] = s;
  }
  return y;
}

double SparseSym::quadratic_form(const std::vector<double>& x) const {
  const auto y = apply(x);
  return std::inner_product(x.begin(), x.end(), y.begin(), 0.0);
}

double SparseSym::asymmetry() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
      worst = std::max(worst, std::abs(vals[k] - at(cols[k], i)));
  return worst;
}

Tensor SparseSym::to_dense() const {
  Tensor d({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) d(i, cols[k]) = vals[k];
  return d;
}

SparseSym from_triplets(std::size_t n, std::vector<std::uint32_t> ii, std::vector<std::uint32_t> jj,
                        std::vector<double> vv) {
  if (ii.size() != jj.size() || ii.size() != vv.size())
    throw std::invalid_argument("from_triplets: triplet arrays differ in length");
  std::vector<std::size_t> order(ii.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ii[a] != ii[b] ? ii[a] < ii[b] : jj[a] < jj[b];
  });
  SparseSym s;
  s.n = n;
  s.row_ptr.assign(n + 1, 0);
  std::size_t last = order.size();
  for (std::size_t k : order) {
    if (ii[k] >= n || jj[k] >= n) throw std::invalid_argument("from_triplets: index out of range");
    if (last != order.size() && ii[last] == ii[k] && jj[last] == jj[k]) {
      s.vals.back() += vv[k];
    } else {
      s.cols.push_back(jj[k]);
      s.vals.push_back(vv[k]);
      ++s.row_ptr[ii[k] + 1];
    }
    last = k;
  }
  for (std::size_t i = 0; i < n; ++i) s.row_ptr[i + 1] += s.row_ptr[i];
  const double asym = s.asymmetry();
  if (asym > 1e-12) throw std::invalid_argument("from_triplets: matrix asymmetric by " + std::to_string(asym));
  return s;
}

std::array<double, 9> element_stiffness(const std::array<double, 2>& a, const std::array<double, 2>& b,
                                        const std::array<double, 2>& c) {
  const std::array<const std::array<double, 2>*, 3> p{&a, &b, &c};
  const double area2 = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
  if (area2 == 0.0) throw mesh::MeshError(mesh::MeshErrorKind::DegenerateTriangle, "element_stiffness: zero area");
  std::array<double, 9> k{};
  // cot of the angle at vertex o = (u.v) / |u x v| with u, v the edges leaving o.
  for (int o = 0; o < 3; ++o) {
    const int i = (o + 1) % 3, j = (o + 2) % 3;
    const double ux = (*p[i])[0] - (*p[o])[0], uy = (*p[i])[1] - (*p[o])[1];
    const double vx = (*p[j])[0] - (*p[o])[0], vy = (*p[j])[1] - (*p[o])[1];
    const double cot = (ux * vx + uy * vy) / std::abs(area2);
    k[i * 3 + j] -= 0.5 * cot;
    k[j * 3 + i] -= 0.5 * cot;
    k[i * 3 + i] += 0.5 * cot;
    k[j * 3 + j] += 0.5 * cot;
  }
  return k;
}

SparseSym assemble_stiffness(const mesh::TriMesh& mesh) {
  const double min_area = 1e-14 * mesh.bbox_diag2();
  std::vector<std::uint32_t> ii, jj;
  std::vector<double> vv;
  ii.reserve(9 * mesh.num_triangles());
  jj.reserve(9 * mesh.num_triangles());
  vv.reserve(9 * mesh.num_triangles());
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    if (std::abs(mesh.signed_area(t)) < min_area)
      throw mesh::MeshError(mesh::MeshErrorKind::DegenerateTriangle, "triangle " + std::to_string(t) + " is degenerate");
    const auto k = element_stiffness(mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        ii.push_back(tri[a]);
        jj.push_back(tri[b]);
        vv.push_back(k[a * 3 + b]);
      }
  }
  return from_triplets(mesh.num_vertices(), std::move(ii), std::move(jj), std::move(vv));
}

Tensor assemble_lumped_mass(const mesh::TriMesh& mesh) {
  const double min_area = 1e-14 * mesh.bbox_diag2();
  Tensor m({mesh.num_vertices()});
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const double a = std::abs(mesh.signed_area(t));
    if (a < min_area)
      throw mesh::MeshError(mesh::MeshErrorKind::DegenerateTriangle, "triangle " + std::to_string(t) + " is degenerate");
    for (auto v : mesh.triangles[t]) m[v] += a / 3.0;
  }
  return m;
}

}  // namespace supra::fem
