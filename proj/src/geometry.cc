#include "v2vssc/geometry.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace v2vssc {

double NormalizeAngle(double a) {
  double r = std::remainder(a, 2.0 * kPi);  // [-pi, pi]
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

Pose6D Normalized(const Pose6D& p) {
  return {p.x, p.y, p.z, NormalizeAngle(p.yaw), NormalizeAngle(p.pitch),
          NormalizeAngle(p.roll)};
}

Eigen::Isometry3d ToIsometry(const Pose6D& p) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.linear() = (Eigen::AngleAxisd(p.yaw, Eigen::Vector3d::UnitZ()) *
                Eigen::AngleAxisd(p.pitch, Eigen::Vector3d::UnitY()) *
                Eigen::AngleAxisd(p.roll, Eigen::Vector3d::UnitX()))
                   .toRotationMatrix();
  t.translation() = Eigen::Vector3d(p.x, p.y, p.z);
  return t;
}

Pose6D FromIsometry(const Eigen::Isometry3d& t) {
  const Eigen::Matrix3d& r = t.linear();
  Pose6D p;
  p.x = t.translation().x();
  p.y = t.translation().y();
  p.z = t.translation().z();
  p.yaw = std::atan2(r(1, 0), r(0, 0));
  p.pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  p.roll = std::atan2(r(2, 1), r(2, 2));
  return Normalized(p);
}

Pose6D Compose(const Pose6D& a, const Pose6D& b) {
  return FromIsometry(ToIsometry(a) * ToIsometry(b));
}

Pose6D Inverse(const Pose6D& p) { return FromIsometry(ToIsometry(p).inverse()); }

Eigen::Isometry3d RelativeTransform(const Pose6D& src, const Pose6D& dst) {
  return ToIsometry(dst).inverse() * ToIsometry(src);
}

Point3 Apply(const Eigen::Isometry3d& t, const Point3& p) {
  Eigen::Vector3d v = t * Eigen::Vector3d(p.x, p.y, p.z);
  return {v.x(), v.y(), v.z()};
}

LabeledPointCloud TransformPoints(const LabeledPointCloud& cloud,
                                  const Pose6D& src, const Pose6D& dst) {
  if (src == dst) return cloud;
  const Eigen::Isometry3d t = RelativeTransform(src, dst);
  LabeledPointCloud out;
  out.stamp = cloud.stamp;
  out.points.reserve(cloud.points.size());
  for (const LabeledPoint& p : cloud.points) {
    Eigen::Vector3d v = t * Eigen::Vector3d(p.x, p.y, p.z);
    out.points.push_back({v.x(), v.y(), v.z(), p.label});
  }
  return out;
}

double PlanarDistance(const Pose6D& a, const Pose6D& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

Pose6D PerturbPose(const Pose6D& p, double pos_std, double heading_std,
                   Rng& rng) {
  if (!(pos_std >= 0.0) || !(heading_std >= 0.0)) {
    throw std::invalid_argument("PerturbPose: standard deviations must be >= 0");
  }
  std::normal_distribution<double> unit(0.0, 1.0);
  // Always draw three samples so the stream position does not depend on
  // which knobs are enabled.
  const double nx = unit(rng);
  const double ny = unit(rng);
  const double nyaw = unit(rng);
  Pose6D out = p;
  if (pos_std > 0.0) {
    out.x += pos_std * nx;
    out.y += pos_std * ny;
  }
  if (heading_std > 0.0) out.yaw = NormalizeAngle(p.yaw + heading_std * nyaw);
  return out;
}

}  // namespace v2vssc
