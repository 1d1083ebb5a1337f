#ifndef SURFMATCH_SURFACE_H_
#define SURFMATCH_SURFACE_H_

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Geometry>

#include "surfmatch/geometry.h"

namespace surfmatch {

using TriangleIndices = std::array<std::uint32_t, 3>;

inline constexpr double kMinTriangleArea = 1e-12;
inline constexpr double kBoundaryTolerance = 1e-9;
inline constexpr double kDefaultMaxDistance = 10.0;

// Triangulated reference surface. Triangle winding is normalized on
// construction so every facet normal points up (positive z).
class SurfaceMesh {
 public:
  SurfaceMesh() = default;
  // Throws kInvalidArgument for out-of-range indices, facets with area below
  // kMinTriangleArea, or vertical facets (no upward orientation exists).
  SurfaceMesh(std::vector<Point3> vertices,
              std::vector<TriangleIndices> triangles);

  const std::vector<Point3>& vertices() const { return vertices_; }
  const std::vector<TriangleIndices>& triangles() const { return triangles_; }
  const Vec3& normal(std::size_t triangle) const { return normals_[triangle]; }
  std::size_t num_triangles() const { return triangles_.size(); }
  bool empty() const { return triangles_.empty(); }

  // Edges used by exactly one triangle, as (min, max) vertex pairs, sorted.
  const std::vector<std::pair<std::uint32_t, std::uint32_t>>& boundary_edges()
      const {
    return boundary_edges_;
  }
  bool IsBoundaryEdge(std::uint32_t a, std::uint32_t b) const;
  bool IsBoundaryVertex(std::uint32_t v) const { return boundary_vertex_[v]; }

 private:
  std::vector<Point3> vertices_;
  std::vector<TriangleIndices> triangles_;
  std::vector<Vec3> normals_;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> boundary_edges_;
  std::vector<bool> boundary_vertex_;
};

struct FootPoint {
  Point3 point;
  Vec3 normal;
  std::size_t triangle_id = 0;
  bool on_boundary = false;
  // Weights of the triangle's three vertices, in winding order.
  std::array<double, 3> barycentric{};
  double distance = 0.0;
};

struct TriangleClosestPoint {
  Point3 point;
  std::array<double, 3> barycentric;
};

// Exact closest point on the closed triangle (a, b, c) by Voronoi-region
// classification.
TriangleClosestPoint ClosestPointOnTriangle(const Point3& q, const Point3& a,
                                            const Point3& b, const Point3& c);

// Magnitude |q - foot|, signed by the side of the owning facet (positive
// above the surface).
double SignedDistance(const Point3& q, const FootPoint& foot);

// Fills the FootPoint for triangle `id` of `mesh`, including the boundary
// flag. Shared by the index and by callers that already know the facet.
FootPoint MakeFootPoint(const SurfaceMesh& mesh, std::size_t id,
                        const Point3& q, const TriangleClosestPoint& closest);

// Bounding-volume hierarchy over the mesh facets. Queries are exact and the
// structure is immutable, so concurrent queries are safe.
class SpatialIndex {
 public:
  // Throws kDegenerateGrid if the mesh has no triangles.
  explicit SpatialIndex(SurfaceMesh mesh);

  const SurfaceMesh& mesh() const { return *mesh_; }

  // Globally nearest point on the mesh if it lies within max_dist. Equal
  // distances resolve to the lowest triangle id.
  std::optional<FootPoint> ClosestPoint(const Point3& q,
                                        double max_dist) const;

 private:
  struct Node {
    Eigen::AlignedBox3d box;
    // Leaves: [first, first + count) in order_. Inner nodes: count == 0 and
    // children at first and first + 1.
    std::uint32_t first = 0;
    std::uint32_t count = 0;
  };

  void Build(std::uint32_t node, std::uint32_t begin, std::uint32_t end,
             const std::vector<Point3>& centroids);

  std::shared_ptr<const SurfaceMesh> mesh_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

SpatialIndex BuildIndex(SurfaceMesh mesh);

}  // namespace surfmatch

#endif  // SURFMATCH_SURFACE_H_
