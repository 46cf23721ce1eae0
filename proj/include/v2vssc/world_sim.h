#ifndef V2VSSC_WORLD_SIM_H_
#define V2VSSC_WORLD_SIM_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "v2vssc/geometry.h"
#include "v2vssc/voxel_grid.h"

namespace v2vssc {

// Oriented box; yaw about +z.
struct Box {
  Point3 center;
  Point3 dims;  // length (x), width (y), height (z)
  double yaw = 0.0;
  friend bool operator==(const Box&, const Box&) = default;
};

// Vertical cylinder; center is the mid-height point of the axis.
struct Cylinder {
  Point3 center;
  double radius = 0.0;
  double height = 0.0;
  friend bool operator==(const Cylinder&, const Cylinder&) = default;
};

// Axis-aligned ellipsoid.
struct Ellipsoid {
  Point3 center;
  Point3 radii;
  friend bool operator==(const Ellipsoid&, const Ellipsoid&) = default;
};

using Shape = std::variant<Box, Cylinder, Ellipsoid>;

struct Aabb {
  Point3 lo;
  Point3 hi;
};

Point3 ShapeCenter(const Shape& s);
Shape Translated(const Shape& s, double dx, double dy, double dz);
bool ShapeContains(const Shape& s, const Point3& p);
Aabb ShapeBounds(const Shape& s);

struct SceneObject {
  SemanticLabel kind = SemanticLabel::kEmpty;
  Shape shape;            // geometry at clock = 0
  double vx = 0.0;        // m/s, planar
  double vy = 0.0;

  bool is_dynamic() const { return vx != 0.0 || vy != 0.0; }
  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

struct AgentSpec {
  int id = 0;
  Pose6D sensor_offset;   // relative to the host car's box pose
  std::size_t host = 0;   // index into Scene::objects
  friend bool operator==(const AgentSpec&, const AgentSpec&) = default;
};

// Scene time is kept in integer nanoseconds so that stepping composes
// exactly; object shapes are stored at clock = 0 and advanced on demand.
struct Scene {
  std::uint64_t seed = 0;
  std::int64_t clock_ns = 0;
  std::vector<SceneObject> objects;
  std::vector<AgentSpec> agents;

  double clock() const { return static_cast<double>(clock_ns) * 1e-9; }
  friend bool operator==(const Scene&, const Scene&) = default;
};

struct SceneConfig {
  std::uint64_t seed = 0;
  int n_agents = 3;
  int n_background_cars = 12;
  double road_width = 14.0;
  bool cross_road = false;
  double half_extent = 150.0;       // world covers [-half, half] in x and y
  double agent_spread = 28.0;       // agents placed with |x| <= spread
  double building_density = 5.0;    // per 100 m of road, per side
  double pole_density = 4.0;
  double tree_density = 6.0;
  double speed_min = 5.0;           // m/s
  double speed_max = 12.0;
  double parked_fraction = 0.25;

  void Validate() const;  // throws std::invalid_argument
};

class SceneGenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Scene BuildScene(const SceneConfig& cfg);
Scene StepScene(const Scene& s, double dt);

// Object geometry at the scene's current clock.
Shape CurrentShape(const Scene& s, std::size_t object_index);
std::vector<Shape> CurrentShapes(const Scene& s);

const AgentSpec& FindAgent(const Scene& s, int id);  // throws std::out_of_range
Pose6D HostPose(const Scene& s, const AgentSpec& agent);
Pose6D SensorPose(const Scene& s, const AgentSpec& agent);

inline constexpr double kGroundTruthRadius = 70.0;

// Labels every voxel centre of the ego-frame grid by the highest-priority
// object containing it. Objects whose footprint lies entirely beyond
// `radius` metres (planar) from the ego are skipped.
SemanticGrid GroundTruthGrid(const Scene& s, const Pose6D& ego_pose,
                             const GridSpec& spec = GridSpec::Default(),
                             double radius = kGroundTruthRadius);

}  // namespace v2vssc

#endif  // V2VSSC_WORLD_SIM_H_
