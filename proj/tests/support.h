#ifndef SURFMATCH_TESTS_SUPPORT_H_
#define SURFMATCH_TESTS_SUPPORT_H_

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Core>

#include "surfmatch/geometry.h"
#include "surfmatch/registration.h"
#include "surfmatch/surface.h"
#include "surfmatch/synth.h"

namespace surfmatch {
namespace testing {

inline double Deg(double degrees) { return degrees * std::numbers::pi / 180; }

// Translations under 1 m, rotations under 2 degrees.
inline SimilarityTransform ExampleTransform() {
  return SimilarityTransform(Vec3(0.8, -0.6, 0.5), Deg(1.2), Deg(-0.9),
                             Deg(1.8));
}

inline SceneSpec BuildingScene(double gsd = 0.5) {
  SceneSpec spec;
  spec.kind = SceneKind::kBuildingBlocks;
  spec.extent_x = 100.0;
  spec.extent_y = 100.0;
  spec.gsd = gsd;
  spec.amplitude = 6.0;
  spec.seed = 1;
  return spec;
}

inline std::array<double, 7> Parameters(const SimilarityTransform& t) {
  return {t.tx(), t.ty(), t.tz(), t.omega(), t.phi(), t.kappa(), t.scale()};
}

inline SimilarityTransform FromParameters(const std::array<double, 7>& p) {
  return SimilarityTransform(Vec3(p[0], p[1], p[2]), p[3], p[4], p[5], p[6]);
}

// A USED correspondence on a random non-vertical facet. With edge_foot the
// query sits beyond an edge so the foot lies on it.
struct JacobianCase {
  Correspondence c;
  SimilarityTransform t;
  bool edge_foot = false;
};

inline JacobianCase RandomJacobianCase(std::mt19937_64& rng, bool edge_foot) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> pos(-50.0, 50.0);
  const Point3 center(pos(rng), pos(rng), 0.2 * pos(rng));
  std::vector<Point3> v;
  for (int k = 0; k < 3; ++k) {
    const double a = 2.0 * std::numbers::pi * (k + 0.3 * u(rng)) / 3.0;
    const double r = 2.0 + u(rng);
    v.push_back(center + Point3(r * std::cos(a), r * std::sin(a), 1.5 * u(rng)));
  }
  const SurfaceMesh mesh(v, {{0, 1, 2}});
  const auto& tri = mesh.triangles()[0];
  const Point3 a = mesh.vertices()[tri[0]];
  const Point3 b = mesh.vertices()[tri[1]];
  const Point3 c = mesh.vertices()[tri[2]];
  const Vec3 n = mesh.normal(0);

  Point3 q;
  if (edge_foot) {
    const Point3 mid = 0.5 * (a + b) + 0.2 * u(rng) * (b - a);
    Vec3 out = (b - a).cross(n).normalized();
    if (out.dot(c - mid) > 0) out = -out;
    q = mid + (0.3 + std::abs(u(rng))) * out + 1.5 * u(rng) * n;
  } else {
    std::uniform_real_distribution<double> w(0.1, 1.0);
    double wa = w(rng), wb = w(rng), wc = w(rng);
    const double s = wa + wb + wc;
    q = (wa * a + wb * b + wc * c) / s + 2.0 * u(rng) * n;
  }

  JacobianCase jc;
  jc.edge_foot = edge_foot;
  jc.t = SimilarityTransform(Vec3(u(rng), u(rng), u(rng)), 0.5 * u(rng),
                             0.5 * u(rng), std::numbers::pi * u(rng),
                             1.0 + 0.1 * u(rng));
  jc.c.source_point = Apply(Invert(jc.t), q);
  jc.c.transformed_point = Apply(jc.t, jc.c.source_point);
  const TriangleClosestPoint cp =
      ClosestPointOnTriangle(jc.c.transformed_point, a, b, c);
  jc.c.foot = MakeFootPoint(mesh, 0, jc.c.transformed_point, cp);
  jc.c.residual = SignedDistance(jc.c.transformed_point, *jc.c.foot);
  jc.c.status = CorrespondenceStatus::kUsed;
  return jc;
}

// The residual as a function of the parameters with the foot held fixed:
// point-to-plane for interior feet, signed distance to the foot otherwise.
inline double FixedFootResidual(const JacobianCase& jc,
                                const SimilarityTransform& t) {
  const Vec3 offset = Apply(t, jc.c.source_point) - jc.c.foot->point;
  if (!jc.edge_foot) return jc.c.foot->normal.dot(offset);
  return (jc.c.residual < 0 ? -1.0 : 1.0) * offset.norm();
}

inline Eigen::VectorXd FiniteDifferenceRow(const JacobianCase& jc,
                                           bool estimate_scale,
                                           double h = 1e-6) {
  const int u = estimate_scale ? 7 : 6;
  Eigen::VectorXd row(u);
  const auto base = Parameters(jc.t);
  for (int i = 0; i < u; ++i) {
    auto plus = base, minus = base;
    plus[i] += h;
    minus[i] -= h;
    row[i] = (FixedFootResidual(jc, FromParameters(plus)) -
              FixedFootResidual(jc, FromParameters(minus))) /
             (2 * h);
  }
  return row;
}

// Max component error relative to the largest partial of the row.
inline double RelativeError(const Eigen::VectorXd& analytic,
                            const Eigen::VectorXd& numeric) {
  const double scale = std::max(analytic.cwiseAbs().maxCoeff(), 1e-300);
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

}  // namespace testing
}  // namespace surfmatch

#endif  // SURFMATCH_TESTS_SUPPORT_H_
