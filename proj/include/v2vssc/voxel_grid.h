#ifndef V2VSSC_VOXEL_GRID_H_
#define V2VSSC_VOXEL_GRID_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "v2vssc/geometry.h"
#include "v2vssc/semantic.h"

namespace v2vssc {

// Axis-aligned voxel lattice in a sensor-centred frame. Each axis covers the
// half-open interval [min, min + n * size).
struct GridSpec {
  int nx = 128;
  int ny = 128;
  int nz = 20;
  double x_min = -50.0;
  double y_min = -50.0;
  double z_min = -3.0;
  double dx = 100.0 / 128.0;
  double dy = 100.0 / 128.0;
  double dz = 0.4;

  static GridSpec Default() { return {}; }

  std::size_t num_voxels() const {
    return static_cast<std::size_t>(nx) * ny * nz;
  }
  double x_max() const { return x_min + nx * dx; }
  double y_max() const { return y_min + ny * dy; }
  double z_max() const { return z_min + nz * dz; }

  // x-fastest, then y, then z.
  std::size_t Index(int ix, int iy, int iz) const {
    return static_cast<std::size_t>(ix) +
           static_cast<std::size_t>(nx) *
               (static_cast<std::size_t>(iy) +
                static_cast<std::size_t>(ny) * static_cast<std::size_t>(iz));
  }
  bool Contains(int ix, int iy, int iz) const {
    return ix >= 0 && ix < nx && iy >= 0 && iy < ny && iz >= 0 && iz < nz;
  }
};

// Specs compare equal when dimensions match and extents agree at f32
// precision, which is what the on-disk grid format stores.
bool operator==(const GridSpec& a, const GridSpec& b);

struct VoxelIndex {
  int ix = 0;
  int iy = 0;
  int iz = 0;
  friend bool operator==(const VoxelIndex&, const VoxelIndex&) = default;
};

std::optional<VoxelIndex> WorldToVoxel(const Point3& p, const GridSpec& spec);
Point3 VoxelCenter(const VoxelIndex& v, const GridSpec& spec);
VoxelIndex Unflatten(std::size_t index, const GridSpec& spec);

struct SemanticGrid {
  GridSpec spec;
  std::vector<SemanticLabel> labels;

  SemanticGrid() = default;
  explicit SemanticGrid(const GridSpec& s)
      : spec(s), labels(s.num_voxels(), SemanticLabel::kEmpty) {}

  SemanticLabel at(int ix, int iy, int iz) const {
    return labels[spec.Index(ix, iy, iz)];
  }
  SemanticLabel& at(int ix, int iy, int iz) {
    return labels[spec.Index(ix, iy, iz)];
  }
  friend bool operator==(const SemanticGrid&, const SemanticGrid&) = default;
};

// Per-voxel scores in [0, 1].
struct ConfidenceGrid {
  GridSpec spec;
  std::vector<float> conf;

  ConfidenceGrid() = default;
  explicit ConfidenceGrid(const GridSpec& s)
      : spec(s), conf(s.num_voxels(), 0.0f) {}
  friend bool operator==(const ConfidenceGrid&,
                         const ConfidenceGrid&) = default;
};

// Each voxel takes the highest-priority label among the points it contains.
// Out-of-bounds points are dropped.
SemanticGrid VoxelizeLabeledPoints(const LabeledPointCloud& points,
                                   const GridSpec& spec);

std::size_t OccupiedCount(const SemanticGrid& g);
std::array<std::size_t, kNumLabels> LabelHistogram(const SemanticGrid& g);

}  // namespace v2vssc

#endif  // V2VSSC_VOXEL_GRID_H_
