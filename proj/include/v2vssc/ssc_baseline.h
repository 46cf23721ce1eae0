#ifndef V2VSSC_SSC_BASELINE_H_
#define V2VSSC_SSC_BASELINE_H_

#include <cstdint>
#include <string>
#include <vector>

#include "v2vssc/geometry.h"
#include "v2vssc/voxel_grid.h"

namespace v2vssc {

// Evidence channels per voxel.
enum FeatureChannel : int {
  kLogHits = 0,
  kLogPasses = 1,
  kRoadHits = 2,
  kCarHits = 3,
  kTerrainHits = 4,
  kBuildingHits = 5,
  kVegetationHits = 6,
  kPoleHits = 7,
  kMeanHeight = 8,
};
inline constexpr int kNumFeatureChannels = 9;

// Channel for the hit count of a semantic class (Road..Pole).
constexpr int ClassChannel(SemanticLabel l) {
  return kRoadHits + static_cast<int>(l) - 1;
}

// Channel-major dense feature volume.
struct FeatureGrid {
  GridSpec spec;
  int channels = kNumFeatureChannels;
  std::vector<float> data;

  FeatureGrid() = default;
  explicit FeatureGrid(const GridSpec& s, int n_channels = kNumFeatureChannels)
      : spec(s), channels(n_channels),
        data(s.num_voxels() * static_cast<std::size_t>(n_channels), 0.0f) {}

  std::size_t voxels() const { return spec.num_voxels(); }
  float at(int channel, std::size_t voxel) const {
    return data[static_cast<std::size_t>(channel) * voxels() + voxel];
  }
  float& at(int channel, std::size_t voxel) {
    return data[static_cast<std::size_t>(channel) * voxels() + voxel];
  }
  // Total class hits at a voxel (sum of channels 2..7).
  double Hits(std::size_t voxel) const;
  double Passes(std::size_t voxel) const;

  friend bool operator==(const FeatureGrid&, const FeatureGrid&) = default;
};

// Voxels strictly crossed by the segment origin -> end before reaching the
// voxel that contains `end`. Indices are flat grid indices in visit order.
std::vector<std::size_t> TraverseSegment(const Point3& origin, const Point3& end,
                                         const GridSpec& spec);

FeatureGrid ExtractFeatures(const LabeledPointCloud& cloud,
                            const Point3& sensor_origin, const GridSpec& spec);

struct CompletionConfig {
  int ground_fill_radius = 3;  // voxels, Chebyshev in x/y
  bool vertical_fill = true;
  double hit_threshold = 1.0;

  void Validate() const;  // throws std::invalid_argument
};

struct Prediction {
  SemanticGrid labels;
  ConfidenceGrid confidence;
};

Prediction Predict(const FeatureGrid& f, const CompletionConfig& cfg = {});

// VFTG persistence.
std::vector<std::uint8_t> EncodeFeatureGrid(const FeatureGrid& f);
FeatureGrid DecodeFeatureGrid(const std::vector<std::uint8_t>& bytes,
                              const GridSpec& extents = GridSpec::Default());
void SaveFeatureGrid(const FeatureGrid& f, const std::string& path);
FeatureGrid LoadFeatureGrid(const std::string& path);

}  // namespace v2vssc

#endif  // V2VSSC_SSC_BASELINE_H_
