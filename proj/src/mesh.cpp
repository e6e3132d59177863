#include "supra/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "supra/hash.hpp"

namespace supra::mesh {

namespace {

using Edge = std::pair<std::uint32_t, std::uint32_t>;

Edge edge_key(std::uint32_t a, std::uint32_t b) { return a < b ? Edge{a, b} : Edge{b, a}; }

std::map<Edge, int> edge_counts(const std::vector<std::array<std::uint32_t, 3>>& tris) {
  std::map<Edge, int> counts;
  for (const auto& t : tris)
    for (int e = 0; e < 3; ++e) ++counts[edge_key(t[e], t[(e + 1) % 3])];
  return counts;
}

double tri_signed_area(const std::vector<std::array<double, 2>>& v, const std::array<std::uint32_t, 3>& t) {
  const auto& a = v[t[0]];
  const auto& b = v[t[1]];
  const auto& c = v[t[2]];
  return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
}

double bbox_diag2_of(const std::vector<std::array<double, 2>>& v) {
  if (v.empty()) return 0.0;
  double x0 = v[0][0], x1 = x0, y0 = v[0][1], y1 = y0;
  for (const auto& p : v) {
    x0 = std::min(x0, p[0]);
    x1 = std::max(x1, p[0]);
    y0 = std::min(y0, p[1]);
    y1 = std::max(y1, p[1]);
  }
  return (x1 - x0) * (x1 - x0) + (y1 - y0) * (y1 - y0);
}

struct UnionFind {
  std::vector<std::uint32_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0u); }
  std::uint32_t find(std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::uint32_t a, std::uint32_t b) { parent[find(a)] = find(b); }
};

}  // namespace

double TriMesh::signed_area(std::size_t t) const { return tri_signed_area(vertices, triangles.at(t)); }

double TriMesh::total_area() const {
  double a = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) a += signed_area(t);
  return a;
}

double TriMesh::bbox_diag2() const { return bbox_diag2_of(vertices); }

std::size_t TriMesh::num_edges() const { return edge_counts(triangles).size(); }

std::string TriMesh::hash() const {
  Fnv1a h;
  h.text("trimesh");
  for (const auto& p : vertices) {
    h.value(p[0]);
    h.value(p[1]);
  }
  for (const auto& t : triangles)
    for (auto i : t) h.value(i);
  return h.hex();
}

TriMesh make_mesh(std::vector<std::array<double, 2>> vertices, std::vector<std::array<std::uint32_t, 3>> triangles) {
  const std::size_t nv = vertices.size();
  if (nv < 3 || triangles.empty()) throw MeshError(MeshErrorKind::BadCounts, "mesh needs at least 3 vertices and 1 triangle");
  for (const auto& p : vertices)
    if (!std::isfinite(p[0]) || !std::isfinite(p[1])) throw MeshError(MeshErrorKind::BadVertex, "non-finite vertex coordinate");

  const double min_area = 1e-14 * bbox_diag2_of(vertices);
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    auto& tri = triangles[t];
    for (auto i : tri)
      if (i >= nv)
        throw MeshError(MeshErrorKind::IndexOutOfRange,
                        "triangle " + std::to_string(t) + " references vertex " + std::to_string(i) + " but V = " +
                            std::to_string(nv));
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
      throw MeshError(MeshErrorKind::DegenerateTriangle, "triangle " + std::to_string(t) + " repeats a vertex");
    const double a = tri_signed_area(vertices, tri);
    if (std::abs(a) <= min_area)
      throw MeshError(MeshErrorKind::DegenerateTriangle,
                      "triangle " + std::to_string(t) + " has (near) zero area " + std::to_string(a));
    if (a < 0) std::swap(tri[1], tri[2]);
  }

  // Every vertex must be used and the mesh must be a single component.
  UnionFind uf(nv);
  std::vector<bool> used(nv, false);
  for (const auto& t : triangles) {
    uf.unite(t[0], t[1]);
    uf.unite(t[1], t[2]);
    for (auto i : t) used[i] = true;
  }
  for (std::size_t i = 0; i < nv; ++i) {
    if (!used[i])
      throw MeshError(MeshErrorKind::Disconnected, "vertex " + std::to_string(i) + " belongs to no triangle");
    if (uf.find(static_cast<std::uint32_t>(i)) != uf.find(0))
      throw MeshError(MeshErrorKind::Disconnected, "mesh has more than one connected component");
  }

  TriMesh m;
  m.vertices = std::move(vertices);
  m.triangles = std::move(triangles);
  m.boundary.assign(nv, false);
  for (const auto& [e, count] : edge_counts(m.triangles))
    if (count == 1) m.boundary[e.first] = m.boundary[e.second] = true;
  return m;
}

TriMesh parse_off(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto next_line = [&](std::string& out) {
    while (std::getline(in, out)) {
      const auto hash = out.find('#');
      if (hash != std::string::npos) out.erase(hash);
      if (out.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };

  if (!next_line(line)) throw MeshError(MeshErrorKind::BadHeader, "empty OFF file");
  {
    std::istringstream hs(line);
    std::string tag;
    hs >> tag;
    if (tag != "OFF") throw MeshError(MeshErrorKind::BadHeader, "OFF header expected, got '" + tag + "'");
    std::string rest;
    if (hs >> rest) throw MeshError(MeshErrorKind::BadHeader, "unexpected tokens after OFF header");
  }
  long long nv = -1, nf = -1, ne = 0;
  if (!next_line(line)) throw MeshError(MeshErrorKind::BadCounts, "missing counts line");
  {
    std::istringstream cs(line);
    if (!(cs >> nv >> nf) || nv < 0 || nf < 0)
      throw MeshError(MeshErrorKind::BadCounts, "malformed counts line '" + line + "'");
    cs >> ne;
  }
  std::vector<std::array<double, 2>> verts;
  verts.reserve(static_cast<std::size_t>(nv));
  for (long long i = 0; i < nv; ++i) {
    if (!next_line(line)) throw MeshError(MeshErrorKind::BadVertex, "file ends before vertex " + std::to_string(i));
    std::istringstream vs(line);
    double x, y;
    if (!(vs >> x >> y)) throw MeshError(MeshErrorKind::BadVertex, "malformed vertex line " + std::to_string(i));
    verts.push_back({x, y});
  }
  std::vector<std::array<std::uint32_t, 3>> tris;
  tris.reserve(static_cast<std::size_t>(nf));
  for (long long f = 0; f < nf; ++f) {
    if (!next_line(line)) throw MeshError(MeshErrorKind::BadCounts, "file ends before face " + std::to_string(f));
    std::istringstream fs(line);
    long long k;
    if (!(fs >> k)) throw MeshError(MeshErrorKind::NonTriangleFace, "malformed face line " + std::to_string(f));
    if (k != 3)
      throw MeshError(MeshErrorKind::NonTriangleFace,
                      "face " + std::to_string(f) + " has " + std::to_string(k) + " vertices; only triangles are supported");
    long long idx[3];
    if (!(fs >> idx[0] >> idx[1] >> idx[2]))
      throw MeshError(MeshErrorKind::NonTriangleFace, "face " + std::to_string(f) + " lists fewer than 3 indices");
    std::array<std::uint32_t, 3> t{};
    for (int j = 0; j < 3; ++j) {
      if (idx[j] < 0 || idx[j] >= nv)
        throw MeshError(MeshErrorKind::IndexOutOfRange,
                        "face " + std::to_string(f) + " index " + std::to_string(idx[j]) + " out of range [0, " +
                            std::to_string(nv) + ")");
      t[j] = static_cast<std::uint32_t>(idx[j]);
    }
    tris.push_back(t);
  }
  return make_mesh(std::move(verts), std::move(tris));
}

TriMesh load_off(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MeshError(MeshErrorKind::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_off(ss.str());
}

void save_off(const TriMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw MeshError(MeshErrorKind::Io, "cannot write " + path.string());
  out << "OFF\n" << mesh.num_vertices() << ' ' << mesh.num_triangles() << ' ' << mesh.num_edges() << '\n';
  out << std::setprecision(17);
  for (const auto& p : mesh.vertices) out << p[0] << ' ' << p[1] << " 0\n";
  for (const auto& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  if (!out) throw MeshError(MeshErrorKind::Io, "write failed for " + path.string());
}

TriMesh generate_rect_mesh(std::size_t nx, std::size_t ny, double x0, double x1, double y0, double y1) {
  if (nx == 0 || ny == 0 || !(x1 > x0) || !(y1 > y0))
    throw MeshError(MeshErrorKind::InvalidArgument, "rectangle mesh needs nx, ny >= 1 and a non-empty box");
  std::vector<std::array<double, 2>> v;
  v.reserve((nx + 1) * (ny + 1));
  for (std::size_t j = 0; j <= ny; ++j)
    for (std::size_t i = 0; i <= nx; ++i)
      v.push_back({x0 + (x1 - x0) * static_cast<double>(i) / static_cast<double>(nx),
                   y0 + (y1 - y0) * static_cast<double>(j) / static_cast<double>(ny)});
  std::vector<std::array<std::uint32_t, 3>> t;
  auto id = [nx](std::size_t i, std::size_t j) { return static_cast<std::uint32_t>(j * (nx + 1) + i); };
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      t.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      t.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  return make_mesh(std::move(v), std::move(t));
}

TriMesh generate_annulus_mesh(double r_inner, double r_outer, std::size_t radial, std::size_t angular) {
  if (!(r_inner > 0.0) || !(r_outer > r_inner))
    throw MeshError(MeshErrorKind::InvalidArgument, "annulus radii must satisfy 0 < r_inner < r_outer");
  if (radial < 2 || angular < 3)
    throw MeshError(MeshErrorKind::InvalidArgument, "annulus needs at least 2 rings and 3 angular vertices");
  std::vector<std::array<double, 2>> v;
  v.reserve(radial * angular);
  for (std::size_t i = 0; i < radial; ++i) {
    const double r = r_inner + (r_outer - r_inner) * static_cast<double>(i) / static_cast<double>(radial - 1);
    for (std::size_t j = 0; j < angular; ++j) {
      const double th = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(angular);
      v.push_back({r * std::cos(th), r * std::sin(th)});
    }
  }
  auto id = [angular](std::size_t i, std::size_t j) { return static_cast<std::uint32_t>(i * angular + j % angular); };
  std::vector<std::array<std::uint32_t, 3>> t;
  t.reserve(2 * (radial - 1) * angular);
  for (std::size_t i = 0; i + 1 < radial; ++i)
    for (std::size_t j = 0; j < angular; ++j) {
      t.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      t.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  return make_mesh(std::move(v), std::move(t));
}

}  // namespace supra::mesh
