#include "v2vssc/world_sim.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace v2vssc {

namespace {

constexpr double kSlabThickness = 0.4;
constexpr double kSensorHeight = 1.9;
constexpr int kPlacementRetries = 200;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double Uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

bool Chance(Rng& rng, double p) { return Uniform(rng, 0.0, 1.0) < p; }

// Planar overlap of two boxes' axis-aligned footprints, grown by `margin`.
bool FootprintsOverlap(const Aabb& a, const Aabb& b, double margin) {
  return a.lo.x - margin < b.hi.x && b.lo.x - margin < a.hi.x &&
         a.lo.y - margin < b.hi.y && b.lo.y - margin < a.hi.y;
}

SceneObject MakeCar(double x, double y, double yaw, double speed, Rng& rng) {
  const double length = Uniform(rng, 4.2, 4.9);
  const double width = Uniform(rng, 1.75, 2.0);
  const double height = Uniform(rng, 1.45, 1.7);
  SceneObject car;
  car.kind = SemanticLabel::kCar;
  car.shape = Box{{x, y, height / 2.0}, {length, width, height}, yaw};
  car.vx = speed * std::cos(yaw);
  car.vy = speed * std::sin(yaw);
  if (std::abs(car.vy) < 1e-12) car.vy = 0.0;
  return car;
}

struct Layout {
  double half_road;
  double lane_offset;
  double edge;  // |y| of the road edge
};

bool CrossesCrossRoad(const SceneConfig& cfg, const Aabb& a) {
  if (!cfg.cross_road) return false;
  const double h = cfg.road_width / 2.0 + 1.0;
  return a.lo.x < h && a.hi.x > -h;
}

}  // namespace

Point3 ShapeCenter(const Shape& s) {
  return std::visit([](const auto& v) { return v.center; }, s);
}

Shape Translated(const Shape& s, double dx, double dy, double dz) {
  Shape out = s;
  std::visit(
      [&](auto& v) {
        v.center.x += dx;
        v.center.y += dy;
        v.center.z += dz;
      },
      out);
  return out;
}

bool ShapeContains(const Shape& s, const Point3& p) {
  return std::visit(
      Overloaded{
          [&](const Box& b) {
            const double c = std::cos(b.yaw), sn = std::sin(b.yaw);
            const double rx = p.x - b.center.x, ry = p.y - b.center.y;
            const double lx = c * rx + sn * ry;
            const double ly = -sn * rx + c * ry;
            const double lz = p.z - b.center.z;
            return std::abs(lx) <= b.dims.x / 2.0 &&
                   std::abs(ly) <= b.dims.y / 2.0 &&
                   std::abs(lz) <= b.dims.z / 2.0;
          },
          [&](const Cylinder& c) {
            const double rx = p.x - c.center.x, ry = p.y - c.center.y;
            return rx * rx + ry * ry <= c.radius * c.radius &&
                   std::abs(p.z - c.center.z) <= c.height / 2.0;
          },
          [&](const Ellipsoid& e) {
            const double u = (p.x - e.center.x) / e.radii.x;
            const double v = (p.y - e.center.y) / e.radii.y;
            const double w = (p.z - e.center.z) / e.radii.z;
            return u * u + v * v + w * w <= 1.0;
          }},
      s);
}

Aabb ShapeBounds(const Shape& s) {
  return std::visit(
      Overloaded{
          [](const Box& b) {
            const double c = std::abs(std::cos(b.yaw));
            const double sn = std::abs(std::sin(b.yaw));
            const double hx = (c * b.dims.x + sn * b.dims.y) / 2.0;
            const double hy = (sn * b.dims.x + c * b.dims.y) / 2.0;
            const double hz = b.dims.z / 2.0;
            return Aabb{{b.center.x - hx, b.center.y - hy, b.center.z - hz},
                        {b.center.x + hx, b.center.y + hy, b.center.z + hz}};
          },
          [](const Cylinder& c) {
            return Aabb{{c.center.x - c.radius, c.center.y - c.radius,
                         c.center.z - c.height / 2.0},
                        {c.center.x + c.radius, c.center.y + c.radius,
                         c.center.z + c.height / 2.0}};
          },
          [](const Ellipsoid& e) {
            return Aabb{{e.center.x - e.radii.x, e.center.y - e.radii.y,
                         e.center.z - e.radii.z},
                        {e.center.x + e.radii.x, e.center.y + e.radii.y,
                         e.center.z + e.radii.z}};
          }},
      s);
}

void SceneConfig::Validate() const {
  if (n_agents < 2 || n_agents > 7) {
    throw std::invalid_argument("SceneConfig: n_agents must be in [2, 7], got " +
                                std::to_string(n_agents));
  }
  if (n_background_cars < 0 || building_density < 0.0 || pole_density < 0.0 ||
      tree_density < 0.0 || parked_fraction < 0.0 || parked_fraction > 1.0) {
    throw std::invalid_argument("SceneConfig: densities must be >= 0");
  }
  if (!(road_width > 0.0) || !(half_extent > 0.0) || !(agent_spread >= 0.0)) {
    throw std::invalid_argument("SceneConfig: road_width, half_extent > 0");
  }
  if (speed_min < 0.0 || speed_max < speed_min) {
    throw std::invalid_argument("SceneConfig: need 0 <= speed_min <= speed_max");
  }
}

Scene BuildScene(const SceneConfig& cfg) {
  cfg.Validate();
  Rng rng(cfg.seed);
  Scene scene;
  scene.seed = cfg.seed;

  const double half = cfg.half_extent;
  const Layout layout{cfg.road_width / 2.0, cfg.road_width / 4.0,
                      cfg.road_width / 2.0};
  auto add = [&](SemanticLabel kind, Shape shape) {
    scene.objects.push_back({kind, std::move(shape), 0.0, 0.0});
  };

  // Road corridor along x, optional crossing along y, terrain either side.
  add(SemanticLabel::kRoad,
      Box{{0.0, 0.0, -kSlabThickness / 2.0},
          {2.0 * half, cfg.road_width, kSlabThickness}, 0.0});
  if (cfg.cross_road) {
    add(SemanticLabel::kRoad,
        Box{{0.0, 0.0, -kSlabThickness / 2.0},
            {cfg.road_width, 2.0 * half, kSlabThickness}, 0.0});
  }
  const double strip = half - layout.edge;
  for (double side : {1.0, -1.0}) {
    add(SemanticLabel::kTerrain,
        Box{{0.0, side * (layout.edge + strip / 2.0), -kSlabThickness / 2.0},
            {2.0 * half, strip, kSlabThickness}, 0.0});
  }

  // Connected vehicles. Lane -y drives +x, lane +y drives -x.
  std::vector<Aabb> car_boxes;
  for (int id = 0; id < cfg.n_agents; ++id) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementRetries && !placed; ++attempt) {
      const bool forward = Chance(rng, 0.5);
      const double x = Uniform(rng, -cfg.agent_spread, cfg.agent_spread);
      const double speed = Uniform(rng, cfg.speed_min, cfg.speed_max);
      SceneObject car = MakeCar(x, forward ? -layout.lane_offset : layout.lane_offset,
                                forward ? 0.0 : kPi, speed, rng);
      const Aabb box = ShapeBounds(car.shape);
      const bool clash = std::any_of(car_boxes.begin(), car_boxes.end(),
                                     [&](const Aabb& o) {
                                       return FootprintsOverlap(box, o, 1.0);
                                     });
      if (clash) continue;
      car_boxes.push_back(box);
      scene.agents.push_back({id, Pose6D{0.0, 0.0, kSensorHeight, 0.0, 0.0, 0.0},
                              scene.objects.size()});
      scene.objects.push_back(std::move(car));
      placed = true;
    }
    if (!placed) {
      throw SceneGenerationError(
          "BuildScene: cannot place " + std::to_string(cfg.n_agents) +
          " agents without overlapping car boxes within |x| <= " +
          std::to_string(cfg.agent_spread) + " m after " +
          std::to_string(kPlacementRetries) + " attempts");
    }
  }

  // Background traffic; a car that cannot be placed is dropped.
  for (int i = 0; i < cfg.n_background_cars; ++i) {
    for (int attempt = 0; attempt < kPlacementRetries; ++attempt) {
      const double x = Uniform(rng, -half + 10.0, half - 10.0);
      const double lane = Uniform(rng, 0.0, 1.0);
      SceneObject car;
      if (lane < cfg.parked_fraction) {
        const double side = Chance(rng, 0.5) ? 1.0 : -1.0;
        car = MakeCar(x, side * (layout.edge - 1.3), side > 0 ? kPi : 0.0, 0.0,
                      rng);
      } else {
        const bool forward = Chance(rng, 0.5);
        const double speed = Uniform(rng, cfg.speed_min, cfg.speed_max);
        car = MakeCar(x, forward ? -layout.lane_offset : layout.lane_offset,
                      forward ? 0.0 : kPi, speed, rng);
      }
      const Aabb box = ShapeBounds(car.shape);
      const bool clash = std::any_of(car_boxes.begin(), car_boxes.end(),
                                     [&](const Aabb& o) {
                                       return FootprintsOverlap(box, o, 1.0);
                                     });
      if (clash) continue;
      car_boxes.push_back(box);
      scene.objects.push_back(std::move(car));
      break;
    }
  }

  // Buildings set back from each road edge.
  std::vector<Aabb> buildings;
  auto add_building = [&](double side, double x_lo, double length,
                          double setback) {
    const double depth = Uniform(rng, 8.0, 16.0);
    const double height = Uniform(rng, 6.0, 20.0);
    const double yc = side * (layout.edge + setback + depth / 2.0);
    Box b{{x_lo + length / 2.0, yc, height / 2.0}, {length, depth, height}, 0.0};
    const Aabb bounds = ShapeBounds(b);
    if (CrossesCrossRoad(cfg, bounds)) return;
    buildings.push_back(bounds);
    add(SemanticLabel::kBuilding, b);
  };
  if (cfg.building_density > 0.0) {
    const double mean_spacing = 100.0 / cfg.building_density;
    for (double side : {1.0, -1.0}) {
      double cursor = -half + Uniform(rng, 0.0, mean_spacing);
      while (true) {
        const double length = Uniform(rng, 8.0, 20.0);
        if (cursor + length > half) break;
        add_building(side, cursor, length, Uniform(rng, 3.0, 8.0));
        cursor += std::max(length + 2.0, Uniform(rng, 0.5, 1.5) * mean_spacing);
      }
    }
    // Guarantee an occluder beside the road near the agents.
    const bool near = std::any_of(buildings.begin(), buildings.end(),
                                  [](const Aabb& b) {
                                    return b.lo.x < 20.0 && b.hi.x > -20.0;
                                  });
    if (!near) {
      const double side = Chance(rng, 0.5) ? 1.0 : -1.0;
      const double length = Uniform(rng, 10.0, 18.0);
      add_building(side, Uniform(rng, -15.0, 15.0) - length / 2.0, length, 3.0);
    }
  }

  auto inside_building = [&](double x, double y, double margin) {
    const Aabb p{{x, y, 0.0}, {x, y, 0.0}};
    return std::any_of(buildings.begin(), buildings.end(), [&](const Aabb& b) {
      return FootprintsOverlap(p, b, margin);
    });
  };

  // Poles along the kerb.
  if (cfg.pole_density > 0.0) {
    const int per_side =
        static_cast<int>(std::lround(cfg.pole_density * 2.0 * half / 100.0));
    for (double side : {1.0, -1.0}) {
      for (int i = 0; i < per_side; ++i) {
        const double x = Uniform(rng, -half + 2.0, half - 2.0);
        const double radius = Uniform(rng, 0.3, 0.45);
        const double height = Uniform(rng, 6.0, 9.0);
        if (cfg.cross_road && std::abs(x) < layout.edge + 1.0) continue;
        add(SemanticLabel::kPole,
            Cylinder{{x, side * (layout.edge + 0.8), height / 2.0}, radius,
                     height});
      }
    }
  }

  // Trees: trunk cylinder with an ellipsoid canopy starting at the trunk top.
  if (cfg.tree_density > 0.0) {
    const int per_side =
        static_cast<int>(std::lround(cfg.tree_density * 2.0 * half / 100.0));
    for (double side : {1.0, -1.0}) {
      for (int i = 0; i < per_side; ++i) {
        const bool kerbside = (i % 2) == 0;
        const double x = Uniform(rng, -half + 3.0, half - 3.0);
        const double y =
            side * (kerbside ? layout.edge + Uniform(rng, 2.5, 3.5)
                             : Uniform(rng, layout.edge + 4.0, 60.0));
        const double canopy_xy = Uniform(rng, 1.5, 3.0);
        const double canopy_z = Uniform(rng, 1.5, 3.0);
        const double trunk_r = Uniform(rng, 0.25, 0.4);
        const double trunk_h = Uniform(rng, 2.0, 3.5);
        if (inside_building(x, y, canopy_xy)) continue;
        if (cfg.cross_road && std::abs(x) < layout.edge + canopy_xy) continue;
        add(SemanticLabel::kVegetation,
            Cylinder{{x, y, trunk_h / 2.0}, trunk_r, trunk_h});
        add(SemanticLabel::kVegetation,
            Ellipsoid{{x, y, trunk_h + canopy_z}, {canopy_xy, canopy_xy, canopy_z}});
      }
    }
  }
  return scene;
}

Scene StepScene(const Scene& s, double dt) {
  if (!(dt >= 0.0)) throw std::invalid_argument("StepScene: dt must be >= 0");
  Scene out = s;
  out.clock_ns += std::llround(dt * 1e9);
  return out;
}

Shape CurrentShape(const Scene& s, std::size_t object_index) {
  const SceneObject& o = s.objects.at(object_index);
  if (!o.is_dynamic() || s.clock_ns == 0) return o.shape;
  const double t = s.clock();
  return Translated(o.shape, o.vx * t, o.vy * t, 0.0);
}

std::vector<Shape> CurrentShapes(const Scene& s) {
  std::vector<Shape> out;
  out.reserve(s.objects.size());
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    out.push_back(CurrentShape(s, i));
  }
  return out;
}

const AgentSpec& FindAgent(const Scene& s, int id) {
  for (const AgentSpec& a : s.agents) {
    if (a.id == id) return a;
  }
  throw std::out_of_range("no agent with id " + std::to_string(id));
}

Pose6D HostPose(const Scene& s, const AgentSpec& agent) {
  const Shape shape = CurrentShape(s, agent.host);
  const Box* box = std::get_if<Box>(&shape);
  if (box == nullptr) throw std::logic_error("agent host is not a box");
  return Normalized({box->center.x, box->center.y, box->center.z, box->yaw, 0.0, 0.0});
}

Pose6D SensorPose(const Scene& s, const AgentSpec& agent) {
  return Compose(HostPose(s, agent), agent.sensor_offset);
}

SemanticGrid GroundTruthGrid(const Scene& s, const Pose6D& ego_pose,
                             const GridSpec& spec, double radius) {
  SemanticGrid grid(spec);
  const Eigen::Isometry3d ego_to_world = ToIsometry(ego_pose);
  const Eigen::Isometry3d world_to_ego = ego_to_world.inverse();

  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    const SemanticLabel kind = s.objects[i].kind;
    const Shape shape = CurrentShape(s, i);
    const Aabb w = ShapeBounds(shape);

    const double nx = std::clamp(ego_pose.x, w.lo.x, w.hi.x);
    const double ny = std::clamp(ego_pose.y, w.lo.y, w.hi.y);
    if (std::hypot(nx - ego_pose.x, ny - ego_pose.y) > radius) continue;

    // Ego-frame bounds of the object's world box.
    Eigen::Vector3d lo = Eigen::Vector3d::Constant(1e300);
    Eigen::Vector3d hi = Eigen::Vector3d::Constant(-1e300);
    for (int c = 0; c < 8; ++c) {
      const Eigen::Vector3d corner((c & 1) ? w.hi.x : w.lo.x,
                                   (c & 2) ? w.hi.y : w.lo.y,
                                   (c & 4) ? w.hi.z : w.lo.z);
      const Eigen::Vector3d e = world_to_ego * corner;
      lo = lo.cwiseMin(e);
      hi = hi.cwiseMax(e);
    }
    auto range = [](double a, double b, double mn, double d, int n) {
      const int i0 = std::max(0, static_cast<int>(std::floor((a - mn) / d)) - 1);
      const int i1 =
          std::min(n - 1, static_cast<int>(std::floor((b - mn) / d)) + 1);
      return std::pair<int, int>{i0, i1};
    };
    if (hi.x() < spec.x_min || lo.x() >= spec.x_max() || hi.y() < spec.y_min ||
        lo.y() >= spec.y_max() || hi.z() < spec.z_min || lo.z() >= spec.z_max()) {
      continue;
    }
    const auto [x0, x1] = range(lo.x(), hi.x(), spec.x_min, spec.dx, spec.nx);
    const auto [y0, y1] = range(lo.y(), hi.y(), spec.y_min, spec.dy, spec.ny);
    const auto [z0, z1] = range(lo.z(), hi.z(), spec.z_min, spec.dz, spec.nz);
    for (int iz = z0; iz <= z1; ++iz) {
      for (int iy = y0; iy <= y1; ++iy) {
        for (int ix = x0; ix <= x1; ++ix) {
          const Point3 c = VoxelCenter({ix, iy, iz}, spec);
          const Eigen::Vector3d pw = ego_to_world * Eigen::Vector3d(c.x, c.y, c.z);
          if (!ShapeContains(shape, {pw.x(), pw.y(), pw.z()})) continue;
          SemanticLabel& cell = grid.at(ix, iy, iz);
          cell = ResolvePriority(cell, kind);
        }
      }
    }
  }
  return grid;
}

}  // namespace v2vssc
