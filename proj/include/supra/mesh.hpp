#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace supra::mesh {

enum class MeshErrorKind {
  BadHeader,
  BadCounts,
  BadVertex,
  NonTriangleFace,
  IndexOutOfRange,
  DegenerateTriangle,
  Disconnected,
  Io,
  InvalidArgument,
};

class MeshError : public std::runtime_error {
 public:
  MeshError(MeshErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  MeshErrorKind kind() const noexcept { return kind_; }

 private:
  MeshErrorKind kind_;
};

/// Planar triangle mesh. Triangles are stored counter-clockwise; a vertex is
/// on the boundary when it touches an edge used by exactly one triangle.
struct TriMesh {
  std::vector<std::array<double, 2>> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
  std::vector<bool> boundary;

  std::size_t num_vertices() const noexcept { return vertices.size(); }
  std::size_t num_triangles() const noexcept { return triangles.size(); }
  double signed_area(std::size_t t) const;
  double total_area() const;
  /// Squared diagonal of the bounding box.
  double bbox_diag2() const;
  std::size_t num_edges() const;
  /// FNV-1a hash over coordinates and connectivity, as 16 hex digits.
  std::string hash() const;
};

/// Validates and canonicalizes: orientation fixed to CCW, zero-area faces,
/// bad indices and multiple components rejected, boundary flags computed.
TriMesh make_mesh(std::vector<std::array<double, 2>> vertices, std::vector<std::array<std::uint32_t, 3>> triangles);

TriMesh load_off(const std::filesystem::path& path);
TriMesh parse_off(const std::string& text);
void save_off(const TriMesh& mesh, const std::filesystem::path& path);

/// (nx+1) x (ny+1) vertices on [x0,x1] x [y0,y1], each cell split along one diagonal.
TriMesh generate_rect_mesh(std::size_t nx, std::size_t ny, double x0 = 0.0, double x1 = 1.0, double y0 = 0.0,
                           double y1 = 1.0);

/// Structured polar triangulation with `radial` rings and `angular` vertices
/// per ring; the angular seam is welded so V = radial * angular.
TriMesh generate_annulus_mesh(double r_inner, double r_outer, std::size_t radial, std::size_t angular);

}  // namespace supra::mesh
