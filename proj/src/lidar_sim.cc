#include "v2vssc/lidar_sim.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "v2vssc/binary_io.h"

namespace v2vssc {

namespace {

constexpr double kEps = 1e-9;
constexpr double kTieTolerance = 1e-9;
constexpr std::uint16_t kPointCloudVersion = 1;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Entry/exit parameters of a ray against an axis-aligned slab box.
bool SlabInterval(const double o[3], const double d[3], const double lo[3],
                  const double hi[3], double* t_near, double* t_far) {
  double tn = -std::numeric_limits<double>::infinity();
  double tf = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (o[a] < lo[a] || o[a] > hi[a]) return false;
      continue;
    }
    double t0 = (lo[a] - o[a]) / d[a];
    double t1 = (hi[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    tn = std::max(tn, t0);
    tf = std::min(tf, t1);
    if (tn > tf) return false;
  }
  *t_near = tn;
  *t_far = tf;
  return true;
}

std::optional<double> SmallestPositive(std::initializer_list<double> ts) {
  std::optional<double> best;
  for (double t : ts) {
    if (std::isfinite(t) && t > kEps && (!best || t < *best)) best = t;
  }
  return best;
}

// Roots of a t^2 + b t + c = 0 (a > 0); returns false when none are real.
bool SolveQuadratic(double a, double b, double c, double* r0, double* r1) {
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0 || a <= 0.0) return false;
  const double sq = std::sqrt(disc);
  // Numerically stable form.
  const double q = -0.5 * (b + std::copysign(sq, b));
  *r0 = q / a;
  *r1 = q != 0.0 ? c / q : *r0;
  if (*r0 > *r1) std::swap(*r0, *r1);
  return true;
}

}  // namespace

void LidarSpec::Validate() const {
  if (channels < 1 || azimuth_steps < 1 || !(max_range > 0.0)) {
    throw std::invalid_argument(
        "LidarSpec: channels >= 1, azimuth_steps >= 1, max_range > 0 required");
  }
}

double LidarSpec::ElevationDeg(int channel) const {
  if (channels == 1) return elevation_min_deg;
  return elevation_min_deg +
         (elevation_max_deg - elevation_min_deg) * channel / (channels - 1);
}

double LidarSpec::AzimuthDeg(int step) const {
  return 360.0 * step / azimuth_steps;
}

std::optional<double> RayHit(const Point3& origin, const Point3& dir,
                             const Shape& shape) {
  return std::visit(
      Overloaded{
          [&](const Box& b) -> std::optional<double> {
            const double c = std::cos(b.yaw), s = std::sin(b.yaw);
            const double rx = origin.x - b.center.x, ry = origin.y - b.center.y;
            const double o[3] = {c * rx + s * ry, -s * rx + c * ry,
                                 origin.z - b.center.z};
            const double d[3] = {c * dir.x + s * dir.y, -s * dir.x + c * dir.y,
                                 dir.z};
            const double hi[3] = {b.dims.x / 2.0, b.dims.y / 2.0, b.dims.z / 2.0};
            const double lo[3] = {-hi[0], -hi[1], -hi[2]};
            double tn, tf;
            if (!SlabInterval(o, d, lo, hi, &tn, &tf)) return std::nullopt;
            return SmallestPositive({tn, tf});
          },
          [&](const Cylinder& cy) -> std::optional<double> {
            const double ox = origin.x - cy.center.x;
            const double oy = origin.y - cy.center.y;
            const double oz = origin.z - cy.center.z;
            const double hh = cy.height / 2.0;
            const double r2 = cy.radius * cy.radius;
            double side0 = NAN, side1 = NAN, cap0 = NAN, cap1 = NAN;
            const double a = dir.x * dir.x + dir.y * dir.y;
            double t0, t1;
            if (a > 1e-15 &&
                SolveQuadratic(a, 2.0 * (ox * dir.x + oy * dir.y),
                               ox * ox + oy * oy - r2, &t0, &t1)) {
              if (std::abs(oz + t0 * dir.z) <= hh) side0 = t0;
              if (std::abs(oz + t1 * dir.z) <= hh) side1 = t1;
            }
            if (std::abs(dir.z) > 1e-15) {
              for (double zc : {-hh, hh}) {
                const double t = (zc - oz) / dir.z;
                const double px = ox + t * dir.x, py = oy + t * dir.y;
                if (px * px + py * py <= r2) (zc < 0 ? cap0 : cap1) = t;
              }
            }
            return SmallestPositive({side0, side1, cap0, cap1});
          },
          [&](const Ellipsoid& e) -> std::optional<double> {
            const double o[3] = {(origin.x - e.center.x) / e.radii.x,
                                 (origin.y - e.center.y) / e.radii.y,
                                 (origin.z - e.center.z) / e.radii.z};
            const double d[3] = {dir.x / e.radii.x, dir.y / e.radii.y,
                                 dir.z / e.radii.z};
            const double a = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            const double b = 2.0 * (o[0] * d[0] + o[1] * d[1] + o[2] * d[2]);
            const double c = o[0] * o[0] + o[1] * o[1] + o[2] * o[2] - 1.0;
            double t0, t1;
            if (!SolveQuadratic(a, b, c, &t0, &t1)) return std::nullopt;
            return SmallestPositive({t0, t1});
          }},
      shape);
}

SceneRaycaster::SceneRaycaster(const Scene& s, const Pose6D& sensor_pose,
                               double max_range,
                               std::optional<std::size_t> skip_object)
    : rotation_(ToIsometry(sensor_pose).linear()),
      origin_(sensor_pose.position()),
      max_range_(max_range) {
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    if (skip_object && *skip_object == i) continue;
    Shape shape = CurrentShape(s, i);
    const Aabb b = ShapeBounds(shape);
    const double dx = std::max({b.lo.x - origin_.x, 0.0, origin_.x - b.hi.x});
    const double dy = std::max({b.lo.y - origin_.y, 0.0, origin_.y - b.hi.y});
    const double dz = std::max({b.lo.z - origin_.z, 0.0, origin_.z - b.hi.z});
    if (std::sqrt(dx * dx + dy * dy + dz * dz) > max_range_) continue;
    candidates_.push_back({i, s.objects[i].kind, std::move(shape), b});
  }
}

std::optional<RayReturn> SceneRaycaster::Cast(const Point3& sensor_dir) const {
  const Eigen::Vector3d w =
      rotation_ * Eigen::Vector3d(sensor_dir.x, sensor_dir.y, sensor_dir.z);
  const Point3 dir{w.x(), w.y(), w.z()};
  const double o[3] = {origin_.x, origin_.y, origin_.z};
  const double d[3] = {dir.x, dir.y, dir.z};

  std::optional<RayReturn> best;
  for (const Candidate& c : candidates_) {
    const double limit = best ? best->range : max_range_;
    const double lo[3] = {c.bounds.lo.x, c.bounds.lo.y, c.bounds.lo.z};
    const double hi[3] = {c.bounds.hi.x, c.bounds.hi.y, c.bounds.hi.z};
    double tn, tf;
    if (!SlabInterval(o, d, lo, hi, &tn, &tf)) continue;
    if (tf < 0.0 || tn > limit + kTieTolerance) continue;
    const auto t = RayHit(origin_, dir, c.shape);
    if (!t || *t > max_range_) continue;
    const bool closer = !best || *t < best->range - kTieTolerance;
    const bool tie_wins = best && std::abs(*t - best->range) <= kTieTolerance &&
                          PriorityRank(c.kind) > PriorityRank(best->label);
    if (closer || tie_wins) best = RayReturn{*t, c.kind, c.index};
  }
  return best;
}

LabeledPointCloud Scan(const Scene& s, const Pose6D& sensor_pose,
                       const LidarSpec& spec,
                       std::optional<std::size_t> skip_object) {
  spec.Validate();
  SceneRaycaster caster(s, sensor_pose, spec.max_range, skip_object);
  LabeledPointCloud cloud;
  cloud.stamp = s.clock();
  cloud.points.reserve(static_cast<std::size_t>(spec.channels) *
                       spec.azimuth_steps / 2);
  for (int ch = 0; ch < spec.channels; ++ch) {
    const double el = DegToRad(spec.ElevationDeg(ch));
    const double ce = std::cos(el), se = std::sin(el);
    for (int step = 0; step < spec.azimuth_steps; ++step) {
      const double az = DegToRad(spec.AzimuthDeg(step));
      const Point3 dir{ce * std::cos(az), ce * std::sin(az), se};
      const auto hit = caster.Cast(dir);
      if (!hit) continue;
      cloud.points.push_back({dir.x * hit->range, dir.y * hit->range,
                              dir.z * hit->range, hit->label});
    }
  }
  return cloud;
}

LabeledPointCloud ScanAgent(const Scene& s, const AgentSpec& agent,
                            const LidarSpec& spec) {
  return Scan(s, SensorPose(s, agent), spec, agent.host);
}

std::vector<std::uint8_t> EncodePointCloud(const LabeledPointCloud& cloud) {
  std::vector<std::uint8_t> out;
  out.reserve(14 + 13 * cloud.points.size());
  ByteWriter w(&out);
  w.PutBytes("VPCD");
  w.Put<std::uint16_t>(kPointCloudVersion);
  w.Put<std::uint64_t>(cloud.points.size());
  for (const LabeledPoint& p : cloud.points) {
    w.Put<float>(static_cast<float>(p.x));
    w.Put<float>(static_cast<float>(p.y));
    w.Put<float>(static_cast<float>(p.z));
    w.Put<std::uint8_t>(static_cast<std::uint8_t>(p.label));
  }
  return out;
}

LabeledPointCloud DecodePointCloud(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  r.ExpectMagic("VPCD");
  r.ExpectVersion(kPointCloudVersion);
  const auto n = r.Get<std::uint64_t>("point count");
  if (n > r.remaining() / 13) {
    throw ParseError(ParseError::Kind::kTruncated, r.pos(),
                     "truncated point payload");
  }
  LabeledPointCloud cloud;
  cloud.points.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    LabeledPoint p;
    p.x = r.Get<float>("x");
    p.y = r.Get<float>("y");
    p.z = r.Get<float>("z");
    const std::size_t at = r.pos();
    const auto label = r.Get<std::uint8_t>("label");
    if (!IsValidLabel(label)) {
      throw ParseError(ParseError::Kind::kInvalidValue, at,
                       "invalid label " + std::to_string(label));
    }
    p.label = static_cast<SemanticLabel>(label);
    cloud.points.push_back(p);
  }
  return cloud;
}

void SavePointCloud(const LabeledPointCloud& cloud, const std::string& path) {
  WriteFileBytes(path, EncodePointCloud(cloud));
}

LabeledPointCloud LoadPointCloud(const std::string& path) {
  return DecodePointCloud(ReadFileBytes(path));
}

}  // namespace v2vssc
