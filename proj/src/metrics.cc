#include "v2vssc/metrics.h"

#include <stdexcept>

namespace v2vssc {

namespace {

void RequireSameSpec(const SemanticGrid& a, const SemanticGrid& b) {
  if (!(a.spec == b.spec) || a.labels.size() != b.labels.size()) {
    throw std::invalid_argument("metrics: prediction and ground truth specs differ");
  }
}

}  // namespace

double GeometricIou(const SemanticGrid& pred, const SemanticGrid& gt) {
  RequireSameSpec(pred, gt);
  std::size_t inter = 0, uni = 0;
  for (std::size_t v = 0; v < pred.labels.size(); ++v) {
    const bool p = pred.labels[v] != SemanticLabel::kEmpty;
    const bool g = gt.labels[v] != SemanticLabel::kEmpty;
    inter += p && g;
    uni += p || g;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::optional<double> ClassIou(const SemanticGrid& pred, const SemanticGrid& gt,
                               SemanticLabel c) {
  if (c == SemanticLabel::kEmpty) {
    throw std::invalid_argument("ClassIou: Empty is not a semantic class");
  }
  RequireSameSpec(pred, gt);
  std::size_t inter = 0, uni = 0;
  for (std::size_t v = 0; v < pred.labels.size(); ++v) {
    const bool p = pred.labels[v] == c;
    const bool g = gt.labels[v] == c;
    inter += p && g;
    uni += p || g;
  }
  if (uni == 0) return std::nullopt;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

Aggregate AggregateClassIous(const ClassIous& per_class, ZeroUnionPolicy policy) {
  Aggregate out;
  double sum = 0.0;
  int count = 0;
  for (const auto& v : per_class) {
    if (v) {
      sum += *v;
      ++count;
    } else if (policy == ZeroUnionPolicy::kScoreZero) {
      ++count;
    }
  }
  if (count > 0) out.miou = sum / count;
  const auto& road = per_class[0];
  const auto& car = per_class[1];
  if (road && car) out.ciou = (*road + *car) / 2.0;
  return out;
}

MetricsReport Evaluate(const SemanticGrid& pred, const SemanticGrid& gt,
                       ZeroUnionPolicy policy) {
  RequireSameSpec(pred, gt);
  // Single pass: confusion counts per class.
  std::array<std::size_t, kNumLabels> inter{}, in_pred{}, in_gt{};
  std::size_t g_inter = 0, g_union = 0;
  for (std::size_t v = 0; v < pred.labels.size(); ++v) {
    const auto p = static_cast<std::size_t>(pred.labels[v]);
    const auto g = static_cast<std::size_t>(gt.labels[v]);
    ++in_pred[p];
    ++in_gt[g];
    if (p == g) ++inter[p];
    g_inter += (p != 0 && g != 0);
    g_union += (p != 0 || g != 0);
  }
  MetricsReport r;
  r.iou = g_union == 0 ? 1.0 : static_cast<double>(g_inter) / g_union;
  for (std::size_t i = 0; i < kSemanticClasses.size(); ++i) {
    const auto c = static_cast<std::size_t>(kSemanticClasses[i]);
    const std::size_t uni = in_pred[c] + in_gt[c] - inter[c];
    if (uni > 0) r.per_class_iou[i] = static_cast<double>(inter[c]) / uni;
  }
  const Aggregate agg = AggregateClassIous(r.per_class_iou, policy);
  r.miou = agg.miou;
  r.ciou = agg.ciou;
  return r;
}

}  // namespace v2vssc
