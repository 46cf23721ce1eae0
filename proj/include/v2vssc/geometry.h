#ifndef V2VSSC_GEOMETRY_H_
#define V2VSSC_GEOMETRY_H_

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Geometry>

#include "v2vssc/semantic.h"

namespace v2vssc {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Point3&, const Point3&) = default;
};

// Rigid pose. Angles in radians, applied Z-Y-X intrinsic (yaw, then pitch,
// then roll). Operations in this header always return normalized angles.
struct Pose6D {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;

  static Pose6D Identity() { return {}; }
  Point3 position() const { return {x, y, z}; }

  friend bool operator==(const Pose6D&, const Pose6D&) = default;
};

using Rng = std::mt19937_64;

// Wraps an angle into (-pi, pi].
double NormalizeAngle(double a);
Pose6D Normalized(const Pose6D& p);

Eigen::Isometry3d ToIsometry(const Pose6D& p);
Pose6D FromIsometry(const Eigen::Isometry3d& t);

// a * b: applies b first, then a.
Pose6D Compose(const Pose6D& a, const Pose6D& b);
Pose6D Inverse(const Pose6D& p);

// Transform taking coordinates expressed in `src` into coordinates expressed
// in `dst` (both world poses).
Eigen::Isometry3d RelativeTransform(const Pose6D& src, const Pose6D& dst);

Point3 Apply(const Eigen::Isometry3d& t, const Point3& p);

// Re-expresses every point from the `src` frame into the `dst` frame.
LabeledPointCloud TransformPoints(const LabeledPointCloud& cloud,
                                  const Pose6D& src, const Pose6D& dst);

double PlanarDistance(const Pose6D& a, const Pose6D& b);

// Gaussian planar position noise on x, y and heading noise on yaw.
// Throws std::invalid_argument on negative standard deviations.
Pose6D PerturbPose(const Pose6D& p, double pos_std, double heading_std,
                   Rng& rng);

constexpr double kPi = 3.14159265358979323846;
inline double DegToRad(double deg) { return deg * kPi / 180.0; }
inline double RadToDeg(double rad) { return rad * 180.0 / kPi; }

}  // namespace v2vssc

#endif  // V2VSSC_GEOMETRY_H_
