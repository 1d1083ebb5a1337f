#ifndef SURFMATCH_GEOMETRY_H_
#define SURFMATCH_GEOMETRY_H_

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace surfmatch {

// Map-frame coordinates in meters.
using Point3 = Eigen::Vector3d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

bool IsFinite(const Point3& p);

// Ordered point set. Order is the identity of a measurement and is preserved
// by every operation in the library. Non-finite points are rejected.
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(std::vector<Point3> points);

  void Add(const Point3& p);
  void Reserve(std::size_t n) { points_.reserve(n); }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Point3& operator[](std::size_t i) const { return points_[i]; }
  std::span<const Point3> points() const { return points_; }
  auto begin() const { return points_.begin(); }
  auto end() const { return points_.end(); }

  bool operator==(const PointCloud& other) const;

 private:
  std::vector<Point3> points_;
};

// Wraps an angle into (-pi, pi].
double NormalizeAngle(double angle);

// R = Rz(kappa) * Ry(phi) * Rx(omega): a point is rotated about X by omega
// first, then about Y by phi, then about Z by kappa. This is the only
// rotation convention used anywhere in the library.
Mat3 RotationMatrix(double omega, double phi, double kappa);

// Partial derivatives of RotationMatrix with respect to omega, phi, kappa.
std::array<Mat3, 3> RotationMatrixPartials(double omega, double phi,
                                           double kappa);

// Recovers (omega, phi, kappa) from a rotation matrix built with the
// convention above. At |phi| = pi/2 the split between omega and kappa is
// arbitrary; omega is set to zero there.
std::array<double, 3> RotationAngles(const Mat3& rotation);

// 7-parameter similarity transform mapping the search frame into the
// reference frame: q = scale * R(omega, phi, kappa) * p + (tx, ty, tz).
class SimilarityTransform {
 public:
  // Identity.
  SimilarityTransform();
  // Angles are normalized to (-pi, pi]. Throws kInvalidArgument for a
  // non-positive or non-finite scale, or any non-finite component.
  SimilarityTransform(const Vec3& translation, double omega, double phi,
                      double kappa, double scale = 1.0);

  static SimilarityTransform Identity() { return {}; }
  static SimilarityTransform FromRotation(const Mat3& rotation,
                                          const Vec3& translation,
                                          double scale = 1.0);

  const Vec3& translation() const { return translation_; }
  double tx() const { return translation_.x(); }
  double ty() const { return translation_.y(); }
  double tz() const { return translation_.z(); }
  double omega() const { return omega_; }
  double phi() const { return phi_; }
  double kappa() const { return kappa_; }
  double scale() const { return scale_; }
  const Mat3& rotation() const { return rotation_; }

  bool operator==(const SimilarityTransform& other) const;

 private:
  Vec3 translation_;
  double omega_;
  double phi_;
  double kappa_;
  double scale_;
  Mat3 rotation_;
};

Point3 Apply(const SimilarityTransform& t, const Point3& p);
PointCloud Apply(const SimilarityTransform& t, const PointCloud& cloud);

SimilarityTransform Invert(const SimilarityTransform& t);

// (a o b)(p) = a(b(p)).
SimilarityTransform Compose(const SimilarityTransform& a,
                            const SimilarityTransform& b);

}  // namespace surfmatch

#endif  // SURFMATCH_GEOMETRY_H_
