#include "surfmatch/surface.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "surfmatch/error.h"

namespace surfmatch {

namespace {

constexpr std::uint32_t kLeafSize = 4;

std::pair<std::uint32_t, std::uint32_t> EdgeKey(std::uint32_t a,
                                                std::uint32_t b) {
  return a < b ? std::pair{a, b} : std::pair{b, a};
}

}  // namespace

SurfaceMesh::SurfaceMesh(std::vector<Point3> vertices,
                         std::vector<TriangleIndices> triangles)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
  for (const Point3& v : vertices_) {
    if (!IsFinite(v)) {
      throw Error(ErrorCode::kInvalidArgument, "non-finite mesh vertex");
    }
  }
  normals_.reserve(triangles_.size());
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  edges.reserve(3 * triangles_.size());
  for (std::size_t i = 0; i < triangles_.size(); ++i) {
    TriangleIndices& tri = triangles_[i];
    for (const std::uint32_t v : tri) {
      if (v >= vertices_.size()) {
        throw Error(ErrorCode::kInvalidArgument,
                    "triangle " + std::to_string(i) + " has invalid index");
      }
    }
    const Vec3 cross = (vertices_[tri[1]] - vertices_[tri[0]])
                           .cross(vertices_[tri[2]] - vertices_[tri[0]]);
    const double norm = cross.norm();
    if (0.5 * norm <= kMinTriangleArea) {
      throw Error(ErrorCode::kInvalidArgument,
                  "triangle " + std::to_string(i) + " has zero area");
    }
    Vec3 n = cross / norm;
    if (n.z() < 0.0) {
      std::swap(tri[1], tri[2]);
      n = -n;
    }
    if (!(n.z() > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "triangle " + std::to_string(i) + " is vertical");
    }
    normals_.push_back(n);
    edges.push_back(EdgeKey(tri[0], tri[1]));
    edges.push_back(EdgeKey(tri[1], tri[2]));
    edges.push_back(EdgeKey(tri[2], tri[0]));
  }

  std::sort(edges.begin(), edges.end());
  boundary_vertex_.assign(vertices_.size(), false);
  for (std::size_t i = 0; i < edges.size();) {
    std::size_t j = i + 1;
    while (j < edges.size() && edges[j] == edges[i]) {
      ++j;
    }
    if (j - i == 1) {
      boundary_edges_.push_back(edges[i]);
      boundary_vertex_[edges[i].first] = true;
      boundary_vertex_[edges[i].second] = true;
    }
    i = j;
  }
}

bool SurfaceMesh::IsBoundaryEdge(std::uint32_t a, std::uint32_t b) const {
  return std::binary_search(boundary_edges_.begin(), boundary_edges_.end(),
                            EdgeKey(a, b));
}

TriangleClosestPoint ClosestPointOnTriangle(const Point3& q, const Point3& a,
                                            const Point3& b, const Point3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = q - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) {
    return {a, {1.0, 0.0, 0.0}};
  }

  const Vec3 bp = q - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) {
    return {b, {0.0, 1.0, 0.0}};
  }

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return {a + v * ab, {1.0 - v, v, 0.0}};
  }

  const Vec3 cp = q - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) {
    return {c, {0.0, 0.0, 1.0}};
  }

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return {a + w * ac, {1.0 - w, 0.0, w}};
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return {b + w * (c - b), {0.0, 1.0 - w, w}};
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom;
  const double w = vc * denom;
  return {a + v * ab + w * ac, {1.0 - v - w, v, w}};
}

double SignedDistance(const Point3& q, const FootPoint& foot) {
  const Vec3 d = q - foot.point;
  const double magnitude = d.norm();
  return d.dot(foot.normal) < 0.0 ? -magnitude : magnitude;
}

FootPoint MakeFootPoint(const SurfaceMesh& mesh, std::size_t id,
                        const Point3& q, const TriangleClosestPoint& closest) {
  const TriangleIndices& tri = mesh.triangles()[id];
  FootPoint foot;
  foot.point = closest.point;
  foot.normal = mesh.normal(id);
  foot.triangle_id = id;
  foot.barycentric = closest.barycentric;
  foot.distance = (q - closest.point).norm();

  const auto& w = closest.barycentric;
  bool on_boundary = false;
  for (int k = 0; k < 3 && !on_boundary; ++k) {
    if (w[k] >= 1.0 - kBoundaryTolerance) {
      on_boundary = mesh.IsBoundaryVertex(tri[k]);
    } else if (w[k] <= kBoundaryTolerance) {
      on_boundary = mesh.IsBoundaryEdge(tri[(k + 1) % 3], tri[(k + 2) % 3]);
    }
  }
  foot.on_boundary = on_boundary;
  return foot;
}

SpatialIndex::SpatialIndex(SurfaceMesh mesh)
    : mesh_(std::make_shared<const SurfaceMesh>(std::move(mesh))) {
  const std::size_t n = mesh_->num_triangles();
  if (n == 0) {
    throw Error(ErrorCode::kDegenerateGrid, "mesh has no triangles");
  }
  std::vector<Point3> centroids(n);
  for (std::size_t i = 0; i < n; ++i) {
    const TriangleIndices& tri = mesh_->triangles()[i];
    centroids[i] = (mesh_->vertices()[tri[0]] + mesh_->vertices()[tri[1]] +
                    mesh_->vertices()[tri[2]]) /
                   3.0;
  }
  order_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    order_[i] = static_cast<std::uint32_t>(i);
  }
  nodes_.reserve(2 * (n / kLeafSize + 1));
  nodes_.emplace_back();
  Build(0, 0, static_cast<std::uint32_t>(n), centroids);
}

void SpatialIndex::Build(std::uint32_t node, std::uint32_t begin,
                         std::uint32_t end,
                         const std::vector<Point3>& centroids) {
  Eigen::AlignedBox3d box;
  Eigen::AlignedBox3d centroid_box;
  for (std::uint32_t i = begin; i < end; ++i) {
    const TriangleIndices& tri = mesh_->triangles()[order_[i]];
    for (const std::uint32_t v : tri) {
      box.extend(mesh_->vertices()[v]);
    }
    centroid_box.extend(centroids[order_[i]]);
  }
  nodes_[node].box = box;

  if (end - begin <= kLeafSize) {
    nodes_[node].first = begin;
    nodes_[node].count = end - begin;
    return;
  }

  int axis = 0;
  centroid_box.sizes().maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double ca = centroids[a][axis];
                     const double cb = centroids[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });

  const auto children = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  nodes_.emplace_back();
  nodes_[node].first = children;
  nodes_[node].count = 0;
  Build(children, begin, mid, centroids);
  Build(children + 1, mid, end, centroids);
}

std::optional<FootPoint> SpatialIndex::ClosestPoint(const Point3& q,
                                                    double max_dist) const {
  double best_d2 = max_dist * max_dist;
  std::size_t best_id = std::numeric_limits<std::size_t>::max();
  TriangleClosestPoint best{};

  std::uint32_t stack[64];
  int top = 0;
  stack[top++] = 0;
  const auto& vertices = mesh_->vertices();
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (node.box.squaredExteriorDistance(q) > best_d2) {
      continue;
    }
    if (node.count > 0) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const std::uint32_t id = order_[i];
        const TriangleIndices& tri = mesh_->triangles()[id];
        const TriangleClosestPoint cp = ClosestPointOnTriangle(
            q, vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
        const double d2 = (q - cp.point).squaredNorm();
        if (d2 < best_d2 || (d2 == best_d2 && id < best_id)) {
          best_d2 = d2;
          best_id = id;
          best = cp;
        }
      }
      continue;
    }
    const double d_left = nodes_[node.first].box.squaredExteriorDistance(q);
    const double d_right =
        nodes_[node.first + 1].box.squaredExteriorDistance(q);
    // Nearer child is popped first.
    if (d_left <= d_right) {
      stack[top++] = node.first + 1;
      stack[top++] = node.first;
    } else {
      stack[top++] = node.first;
      stack[top++] = node.first + 1;
    }
  }

  if (best_id == std::numeric_limits<std::size_t>::max()) {
    return std::nullopt;
  }
  return MakeFootPoint(*mesh_, best_id, q, best);
}

SpatialIndex BuildIndex(SurfaceMesh mesh) {
  return SpatialIndex(std::move(mesh));
}

}  // namespace surfmatch
