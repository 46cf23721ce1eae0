#include "v2vssc/metrics.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "test_util.h"

namespace v2vssc {
namespace {

struct Counts {
  std::size_t inter = 0, uni = 0;
};

Counts CountClass(const SemanticGrid& p, const SemanticGrid& g, SemanticLabel c) {
  Counts k;
  for (std::size_t i = 0; i < p.labels.size(); ++i) {
    const bool a = p.labels[i] == c, b = g.labels[i] == c;
    k.inter += a && b;
    k.uni += a || b;
  }
  return k;
}

Counts CountOccupied(const SemanticGrid& p, const SemanticGrid& g) {
  Counts k;
  for (std::size_t i = 0; i < p.labels.size(); ++i) {
    const bool a = p.labels[i] != SemanticLabel::kEmpty;
    const bool b = g.labels[i] != SemanticLabel::kEmpty;
    k.inter += a && b;
    k.uni += a || b;
  }
  return k;
}

TEST(Metrics, MatchesCountingOracle) {
  Rng rng(1);
  const GridSpec s = testing::SmallSpec();
  for (int trial = 0; trial < 200; ++trial) {
    const double density = testing::Uniform(rng, 0, 1);
    const SemanticGrid p = testing::RandomGrid(rng, s, density);
    const SemanticGrid g = testing::RandomGrid(rng, s, testing::Uniform(rng, 0, 1));
    const MetricsReport r = Evaluate(p, g);
    const Counts occ = CountOccupied(p, g);
    EXPECT_DOUBLE_EQ(r.iou, occ.uni == 0 ? 1.0 : double(occ.inter) / occ.uni);
    double sum = 0;
    int n = 0;
    for (std::size_t k = 0; k < kSemanticClasses.size(); ++k) {
      const Counts c = CountClass(p, g, kSemanticClasses[k]);
      if (c.uni == 0) {
        EXPECT_FALSE(r.per_class_iou[k].has_value());
        continue;
      }
      ASSERT_TRUE(r.per_class_iou[k].has_value());
      EXPECT_DOUBLE_EQ(*r.per_class_iou[k], double(c.inter) / c.uni);
      sum += *r.per_class_iou[k];
      ++n;
    }
    if (n == 0) {
      EXPECT_FALSE(r.miou.has_value());
    } else {
      EXPECT_NEAR(*r.miou, sum / n, 1e-12);
    }
    for (const auto& v : r.per_class_iou) {
      if (v) {
        EXPECT_GE(*v, 0.0);
        EXPECT_LE(*v, 1.0);
      }
    }
  }
}

TEST(Metrics, OneThirdExample) {
  const GridSpec s = testing::SmallSpec();
  SemanticGrid p(s), g(s);
  p.labels[0] = p.labels[1] = SemanticLabel::kCar;  // {A, B}
  g.labels[1] = g.labels[2] = SemanticLabel::kCar;  // {B, C}
  EXPECT_DOUBLE_EQ(*ClassIou(p, g, SemanticLabel::kCar), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(GeometricIou(p, g), 1.0 / 3.0);
}

TEST(Metrics, EmptyCases) {
  const GridSpec s = testing::SmallSpec();
  const SemanticGrid e(s);
  EXPECT_DOUBLE_EQ(GeometricIou(e, e), 1.0);
  const MetricsReport r = Evaluate(e, e);
  EXPECT_FALSE(r.miou.has_value());
  EXPECT_FALSE(r.ciou.has_value());
  const MetricsReport z = Evaluate(e, e, ZeroUnionPolicy::kScoreZero);
  ASSERT_TRUE(z.miou.has_value());
  EXPECT_DOUBLE_EQ(*z.miou, 0.0);

  SemanticGrid g(s);
  g.labels[5] = SemanticLabel::kRoad;
  EXPECT_DOUBLE_EQ(GeometricIou(e, g), 0.0);
  EXPECT_THROW(ClassIou(e, g, SemanticLabel::kEmpty), std::invalid_argument);
}

TEST(Metrics, SpecMismatchThrows) {
  const SemanticGrid a(testing::SmallSpec()), b(GridSpec{});
  EXPECT_THROW(Evaluate(a, b), std::invalid_argument);
}

TEST(Metrics, PolicyOnlyChangesAbsentClasses) {
  const GridSpec s = testing::SmallSpec();
  SemanticGrid p(s), g(s);
  p.labels[0] = g.labels[0] = SemanticLabel::kRoad;
  p.labels[1] = SemanticLabel::kCar;
  g.labels[2] = SemanticLabel::kCar;
  const MetricsReport ex = Evaluate(p, g, ZeroUnionPolicy::kExclude);
  const MetricsReport z = Evaluate(p, g, ZeroUnionPolicy::kScoreZero);
  EXPECT_DOUBLE_EQ(*ex.miou, 0.5);
  EXPECT_DOUBLE_EQ(*z.miou, 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(*ex.ciou, 0.5);
  EXPECT_DOUBLE_EQ(*z.ciou, 0.5);
}

TEST(Metrics, InvariantUnderVoxelPermutation) {
  Rng rng(2);
  const GridSpec s = testing::SmallSpec();
  for (int trial = 0; trial < 20; ++trial) {
    SemanticGrid p = testing::RandomGrid(rng, s, 0.4);
    SemanticGrid g = testing::RandomGrid(rng, s, 0.4);
    const MetricsReport a = Evaluate(p, g);
    std::vector<std::size_t> perm(p.labels.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    SemanticGrid pp(s), gg(s);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      pp.labels[i] = p.labels[perm[i]];
      gg.labels[i] = g.labels[perm[i]];
    }
    const MetricsReport b = Evaluate(pp, gg);
    EXPECT_DOUBLE_EQ(a.iou, b.iou);
    EXPECT_EQ(a.per_class_iou, b.per_class_iou);
  }
}

TEST(Metrics, PerfectPrediction) {
  Rng rng(3);
  const SemanticGrid g = testing::RandomGrid(rng, GridSpec{}, 0.3);
  const MetricsReport r = Evaluate(g, g);
  EXPECT_DOUBLE_EQ(r.iou, 1.0);
  EXPECT_DOUBLE_EQ(*r.miou, 1.0);
  EXPECT_DOUBLE_EQ(*r.ciou, 1.0);
}

// Published per-class cells (road, car, terrain, building, vegetation, pole),
// in percent, with the reported mean and road/car mean.
struct PublishedRow {
  const char* name;
  std::array<double, 6> cells;
  double miou, ciou;
};

TEST(Metrics, AggregatesReproducePublishedRows) {
  const PublishedRow rows[] = {
      {"none", {65.6, 54.4, 48.3, 31.8, 41.2, 12.0}, 42.2, 60.0},
      {"early", {68.8, 64.8, 48.1, 33.1, 42.9, 16.4}, 45.7, 66.8},
      {"intermediate", {66.8, 62.4, 48.3, 33.1, 43.3, 16.7}, 45.1, 64.6},
      {"late", {71.4, 55.8, 55.6, 40.5, 49.0, 16.9}, 48.2, 63.6},
  };
  for (const auto& row : rows) {
    ClassIous c;
    for (int k = 0; k < 6; ++k) c[k] = row.cells[k] / 100.0;
    const Aggregate a = AggregateClassIous(c);
    EXPECT_NEAR(*a.miou * 100.0, row.miou, 0.05) << row.name;
    EXPECT_NEAR(*a.ciou * 100.0, row.ciou, 0.05) << row.name;
  }
}

}  // namespace
}  // namespace v2vssc
