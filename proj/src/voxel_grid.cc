#include "v2vssc/voxel_grid.h"

#include <cmath>

namespace v2vssc {

namespace {

constexpr std::array<std::string_view, kNumLabels> kLabelNames = {
    "empty", "road", "car", "terrain", "building", "vegetation", "pole"};

bool SameF32(double a, double b) {
  return static_cast<float>(a) == static_cast<float>(b);
}

}  // namespace

std::string_view LabelName(SemanticLabel l) {
  return kLabelNames[static_cast<std::size_t>(l)];
}

std::optional<SemanticLabel> LabelFromName(std::string_view name) {
  for (std::size_t i = 0; i < kLabelNames.size(); ++i) {
    if (kLabelNames[i] == name) return static_cast<SemanticLabel>(i);
  }
  return std::nullopt;
}

bool operator==(const GridSpec& a, const GridSpec& b) {
  return a.nx == b.nx && a.ny == b.ny && a.nz == b.nz &&
         SameF32(a.x_min, b.x_min) && SameF32(a.y_min, b.y_min) &&
         SameF32(a.z_min, b.z_min) && SameF32(a.dx, b.dx) &&
         SameF32(a.dy, b.dy) && SameF32(a.dz, b.dz);
}

std::optional<VoxelIndex> WorldToVoxel(const Point3& p, const GridSpec& spec) {
  const double fx = std::floor((p.x - spec.x_min) / spec.dx);
  const double fy = std::floor((p.y - spec.y_min) / spec.dy);
  const double fz = std::floor((p.z - spec.z_min) / spec.dz);
  if (!(fx >= 0.0 && fx < spec.nx && fy >= 0.0 && fy < spec.ny && fz >= 0.0 &&
        fz < spec.nz)) {
    return std::nullopt;
  }
  return VoxelIndex{static_cast<int>(fx), static_cast<int>(fy),
                    static_cast<int>(fz)};
}

Point3 VoxelCenter(const VoxelIndex& v, const GridSpec& spec) {
  return {spec.x_min + (v.ix + 0.5) * spec.dx,
          spec.y_min + (v.iy + 0.5) * spec.dy,
          spec.z_min + (v.iz + 0.5) * spec.dz};
}

VoxelIndex Unflatten(std::size_t index, const GridSpec& spec) {
  const auto nx = static_cast<std::size_t>(spec.nx);
  const auto ny = static_cast<std::size_t>(spec.ny);
  return {static_cast<int>(index % nx), static_cast<int>((index / nx) % ny),
          static_cast<int>(index / (nx * ny))};
}

SemanticGrid VoxelizeLabeledPoints(const LabeledPointCloud& points,
                                   const GridSpec& spec) {
  SemanticGrid grid(spec);
  for (const LabeledPoint& p : points.points) {
    auto v = WorldToVoxel({p.x, p.y, p.z}, spec);
    if (!v) continue;
    SemanticLabel& cell = grid.at(v->ix, v->iy, v->iz);
    cell = ResolvePriority(cell, p.label);
  }
  return grid;
}

std::size_t OccupiedCount(const SemanticGrid& g) {
  std::size_t n = 0;
  for (SemanticLabel l : g.labels) n += (l != SemanticLabel::kEmpty);
  return n;
}

std::array<std::size_t, kNumLabels> LabelHistogram(const SemanticGrid& g) {
  std::array<std::size_t, kNumLabels> h{};
  for (SemanticLabel l : g.labels) ++h[static_cast<std::size_t>(l)];
  return h;
}

}  // namespace v2vssc
