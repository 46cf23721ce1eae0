#ifndef V2VSSC_SEMANTIC_H_
#define V2VSSC_SEMANTIC_H_

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace v2vssc {

enum class SemanticLabel : std::uint8_t {
  kEmpty = 0,
  kRoad = 1,
  kCar = 2,
  kTerrain = 3,
  kBuilding = 4,
  kVegetation = 5,
  kPole = 6,
};

inline constexpr int kNumLabels = 7;

// The six semantic classes in storage order (Road..Pole).
inline constexpr std::array<SemanticLabel, 6> kSemanticClasses = {
    SemanticLabel::kRoad,     SemanticLabel::kCar,
    SemanticLabel::kTerrain,  SemanticLabel::kBuilding,
    SemanticLabel::kVegetation, SemanticLabel::kPole};

// Overlap priority: Car > Road > Pole > Vegetation > Building > Terrain.
// Higher rank wins; Empty ranks lowest.
constexpr int PriorityRank(SemanticLabel l) {
  switch (l) {
    case SemanticLabel::kCar: return 6;
    case SemanticLabel::kRoad: return 5;
    case SemanticLabel::kPole: return 4;
    case SemanticLabel::kVegetation: return 3;
    case SemanticLabel::kBuilding: return 2;
    case SemanticLabel::kTerrain: return 1;
    case SemanticLabel::kEmpty: return 0;
  }
  return 0;
}

constexpr SemanticLabel ResolvePriority(SemanticLabel a, SemanticLabel b) {
  return PriorityRank(a) >= PriorityRank(b) ? a : b;
}

constexpr bool IsValidLabel(std::uint8_t v) { return v < kNumLabels; }

std::string_view LabelName(SemanticLabel l);
std::optional<SemanticLabel> LabelFromName(std::string_view name);

struct LabeledPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  SemanticLabel label = SemanticLabel::kEmpty;

  friend bool operator==(const LabeledPoint&, const LabeledPoint&) = default;
};

// Semantic LiDAR returns. Coordinates are in whatever frame the producer
// states (sensor frame for raw scans). Held in double; the wire format is f32.
struct LabeledPointCloud {
  std::vector<LabeledPoint> points;
  double stamp = 0.0;

  std::size_t size() const { return points.size(); }
  friend bool operator==(const LabeledPointCloud&,
                         const LabeledPointCloud&) = default;
};

}  // namespace v2vssc

#endif  // V2VSSC_SEMANTIC_H_
