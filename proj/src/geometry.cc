#include "surfmatch/geometry.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "surfmatch/error.h"

namespace surfmatch {

bool IsFinite(const Point3& p) {
  return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
}

PointCloud::PointCloud(std::vector<Point3> points) : points_(std::move(points)) {
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!IsFinite(points_[i])) {
      throw Error(ErrorCode::kInvalidArgument,
                  "non-finite point at index " + std::to_string(i));
    }
  }
}

void PointCloud::Add(const Point3& p) {
  if (!IsFinite(p)) {
    throw Error(ErrorCode::kInvalidArgument, "non-finite point");
  }
  points_.push_back(p);
}

bool PointCloud::operator==(const PointCloud& other) const {
  return points_ == other.points_;
}

double NormalizeAngle(double angle) {
  double a = std::remainder(angle, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) {
    a += 2.0 * std::numbers::pi;
  }
  return a;
}

namespace {

Mat3 RotX(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

Mat3 RotY(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

Mat3 RotZ(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

Mat3 DRotX(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << 0, 0, 0, 0, -s, -c, 0, c, -s;
  return r;
}

Mat3 DRotY(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << -s, 0, c, 0, 0, 0, -c, 0, -s;
  return r;
}

Mat3 DRotZ(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << -s, -c, 0, c, -s, 0, 0, 0, 0;
  return r;
}

}  // namespace

Mat3 RotationMatrix(double omega, double phi, double kappa) {
  return RotZ(kappa) * RotY(phi) * RotX(omega);
}

std::array<Mat3, 3> RotationMatrixPartials(double omega, double phi,
                                           double kappa) {
  const Mat3 rx = RotX(omega), ry = RotY(phi), rz = RotZ(kappa);
  return {rz * ry * DRotX(omega), rz * DRotY(phi) * rx,
          DRotZ(kappa) * ry * rx};
}

std::array<double, 3> RotationAngles(const Mat3& r) {
  const double sin_phi = std::clamp(-r(2, 0), -1.0, 1.0);
  const double phi = std::asin(sin_phi);
  if (std::abs(sin_phi) > 1.0 - 1e-15) {
    // Gimbal lock: only kappa -/+ omega is observable.
    return {0.0, phi, std::atan2(-r(0, 1), r(1, 1))};
  }
  return {std::atan2(r(2, 1), r(2, 2)), phi, std::atan2(r(1, 0), r(0, 0))};
}

SimilarityTransform::SimilarityTransform()
    : translation_(Vec3::Zero()),
      omega_(0.0),
      phi_(0.0),
      kappa_(0.0),
      scale_(1.0),
      rotation_(Mat3::Identity()) {}

SimilarityTransform::SimilarityTransform(const Vec3& translation, double omega,
                                         double phi, double kappa,
                                         double scale)
    : translation_(translation), scale_(scale) {
  if (!IsFinite(translation) || !std::isfinite(omega) ||
      !std::isfinite(phi) || !std::isfinite(kappa)) {
    throw Error(ErrorCode::kInvalidArgument,
                "transform parameters must be finite");
  }
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw Error(ErrorCode::kInvalidArgument,
                "transform scale must be positive");
  }
  omega_ = NormalizeAngle(omega);
  phi_ = NormalizeAngle(phi);
  kappa_ = NormalizeAngle(kappa);
  rotation_ = RotationMatrix(omega_, phi_, kappa_);
}

SimilarityTransform SimilarityTransform::FromRotation(const Mat3& rotation,
                                                      const Vec3& translation,
                                                      double scale) {
  const auto angles = RotationAngles(rotation);
  SimilarityTransform t(translation, angles[0], angles[1], angles[2], scale);
  // Keep the exact matrix; rebuilding it from the angles costs a few ulps.
  t.rotation_ = rotation;
  return t;
}

bool SimilarityTransform::operator==(const SimilarityTransform& other) const {
  return translation_ == other.translation_ && omega_ == other.omega_ &&
         phi_ == other.phi_ && kappa_ == other.kappa_ &&
         scale_ == other.scale_;
}

Point3 Apply(const SimilarityTransform& t, const Point3& p) {
  return t.scale() * (t.rotation() * p) + t.translation();
}

PointCloud Apply(const SimilarityTransform& t, const PointCloud& cloud) {
  std::vector<Point3> out;
  out.reserve(cloud.size());
  for (const Point3& p : cloud) {
    out.push_back(Apply(t, p));
  }
  return PointCloud(std::move(out));
}

SimilarityTransform Invert(const SimilarityTransform& t) {
  const Mat3 rt = t.rotation().transpose();
  const double inv_scale = 1.0 / t.scale();
  return SimilarityTransform::FromRotation(
      rt, -inv_scale * (rt * t.translation()), inv_scale);
}

SimilarityTransform Compose(const SimilarityTransform& a,
                            const SimilarityTransform& b) {
  return SimilarityTransform::FromRotation(
      a.rotation() * b.rotation(),
      a.scale() * (a.rotation() * b.translation()) + a.translation(),
      a.scale() * b.scale());
}

}  // namespace surfmatch
