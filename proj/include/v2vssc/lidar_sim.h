#ifndef V2VSSC_LIDAR_SIM_H_
#define V2VSSC_LIDAR_SIM_H_

#include <optional>
#include <string>
#include <vector>

#include "v2vssc/geometry.h"
#include "v2vssc/semantic.h"
#include "v2vssc/world_sim.h"

namespace v2vssc {

struct LidarSpec {
  int channels = 32;
  double elevation_min_deg = -25.0;
  double elevation_max_deg = 5.0;
  int azimuth_steps = 720;
  double max_range = 120.0;
  double sensor_height = 1.9;  // above the host car centre

  void Validate() const;  // throws std::invalid_argument
  double ElevationDeg(int channel) const;
  double AzimuthDeg(int step) const;
};

// Smallest positive parameter t at which origin + t * dir meets the shape
// surface. `dir` must be unit length.
std::optional<double> RayHit(const Point3& origin, const Point3& dir,
                             const Shape& shape);

struct Ray {
  Point3 dir;  // unit, sensor frame
};

// Nearest hit of a sensor-frame ray against the scene objects. Ties in range
// go to the higher-priority label.
struct RayReturn {
  double range = 0.0;
  SemanticLabel label = SemanticLabel::kEmpty;
  std::size_t object = 0;
};

class SceneRaycaster {
 public:
  // `skip_object` is excluded from intersection (the sensor's own host car).
  SceneRaycaster(const Scene& s, const Pose6D& sensor_pose, double max_range,
                 std::optional<std::size_t> skip_object = std::nullopt);

  std::optional<RayReturn> Cast(const Point3& sensor_dir) const;

 private:
  struct Candidate {
    std::size_t index;
    SemanticLabel kind;
    Shape shape;
    Aabb bounds;
  };
  std::vector<Candidate> candidates_;
  Eigen::Matrix3d rotation_;
  Point3 origin_;
  double max_range_;
};

// Noise-free semantic scan, points in the sensor frame, fixed
// (channel, azimuth) order.
LabeledPointCloud Scan(const Scene& s, const Pose6D& sensor_pose,
                       const LidarSpec& spec,
                       std::optional<std::size_t> skip_object = std::nullopt);

// Scan from an agent's mounted sensor, ignoring the agent's own car.
LabeledPointCloud ScanAgent(const Scene& s, const AgentSpec& agent,
                            const LidarSpec& spec);

// VPCD point-cloud persistence (f32 coordinates on disk).
std::vector<std::uint8_t> EncodePointCloud(const LabeledPointCloud& cloud);
LabeledPointCloud DecodePointCloud(const std::vector<std::uint8_t>& bytes);
void SavePointCloud(const LabeledPointCloud& cloud, const std::string& path);
LabeledPointCloud LoadPointCloud(const std::string& path);

}  // namespace v2vssc

#endif  // V2VSSC_LIDAR_SIM_H_
