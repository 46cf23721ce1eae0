#ifndef V2VSSC_METRICS_H_
#define V2VSSC_METRICS_H_

#include <array>
#include <optional>

#include "v2vssc/voxel_grid.h"

namespace v2vssc {

// How classes absent from both grids enter the mIoU mean.
enum class ZeroUnionPolicy { kExclude, kScoreZero };

// Per-class values are indexed in kSemanticClasses order; nullopt marks a
// class whose union is empty.
using ClassIous = std::array<std::optional<double>, 6>;

struct MetricsReport {
  double iou = 0.0;
  ClassIous per_class_iou;
  std::optional<double> miou;
  std::optional<double> ciou;
};

// Occupied-vs-empty IoU; 1.0 when both grids are entirely Empty.
double GeometricIou(const SemanticGrid& pred, const SemanticGrid& gt);

std::optional<double> ClassIou(const SemanticGrid& pred, const SemanticGrid& gt,
                               SemanticLabel c);

struct Aggregate {
  std::optional<double> miou;
  std::optional<double> ciou;  // mean of Road and Car
};

Aggregate AggregateClassIous(const ClassIous& per_class,
                             ZeroUnionPolicy policy = ZeroUnionPolicy::kExclude);

MetricsReport Evaluate(const SemanticGrid& pred, const SemanticGrid& gt,
                       ZeroUnionPolicy policy = ZeroUnionPolicy::kExclude);

}  // namespace v2vssc

#endif  // V2VSSC_METRICS_H_
