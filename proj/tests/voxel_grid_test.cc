#include "v2vssc/voxel_grid.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "test_util.h"

namespace v2vssc {
namespace {

using testing::Uniform;

// Independent priority table: earlier entries win.
constexpr SemanticLabel kPriorityOrder[] = {
    SemanticLabel::kCar,        SemanticLabel::kRoad,     SemanticLabel::kPole,
    SemanticLabel::kVegetation, SemanticLabel::kBuilding, SemanticLabel::kTerrain,
    SemanticLabel::kEmpty};

int OracleRank(SemanticLabel l) {
  return static_cast<int>(std::find(std::begin(kPriorityOrder), std::end(kPriorityOrder), l) -
                          std::begin(kPriorityOrder));
}

SemanticGrid OracleVoxelize(const LabeledPointCloud& c, const GridSpec& s) {
  SemanticGrid g(s);
  for (const auto& p : c.points) {
    const double fx = std::floor((p.x - s.x_min) / s.dx);
    const double fy = std::floor((p.y - s.y_min) / s.dy);
    const double fz = std::floor((p.z - s.z_min) / s.dz);
    if (fx < 0 || fy < 0 || fz < 0 || fx >= s.nx || fy >= s.ny || fz >= s.nz) continue;
    auto& cell = g.labels[static_cast<std::size_t>(fx) +
                          static_cast<std::size_t>(s.nx) *
                              (static_cast<std::size_t>(fy) +
                               static_cast<std::size_t>(s.ny) * static_cast<std::size_t>(fz))];
    if (OracleRank(p.label) < OracleRank(cell)) cell = p.label;
  }
  return g;
}

TEST(GridSpec, DefaultsTileExtentExactly) {
  const GridSpec s = GridSpec::Default();
  EXPECT_EQ(s.nx, 128);
  EXPECT_EQ(s.ny, 128);
  EXPECT_EQ(s.nz, 20);
  EXPECT_EQ(s.dx, 0.78125);
  EXPECT_EQ(s.x_max(), 50.0);
  EXPECT_EQ(s.y_max(), 50.0);
  EXPECT_EQ(s.z_max(), 5.0);
  EXPECT_EQ(s.num_voxels(), 327680u);
}

TEST(WorldToVoxel, Examples) {
  const GridSpec s;
  EXPECT_EQ(WorldToVoxel({0, 0, 0}, s), (VoxelIndex{64, 64, 7}));
  EXPECT_EQ(WorldToVoxel({-50, -50, -3}, s), (VoxelIndex{0, 0, 0}));
  EXPECT_FALSE(WorldToVoxel({50, 0, 0}, s));
  EXPECT_FALSE(WorldToVoxel({0, 50, 0}, s));
  EXPECT_FALSE(WorldToVoxel({0, 0, 5}, s));
  EXPECT_FALSE(WorldToVoxel({-50.0001, 0, 0}, s));
  EXPECT_EQ(WorldToVoxel({49.9999, 49.9999, 4.9999}, s), (VoxelIndex{127, 127, 19}));
}

TEST(WorldToVoxel, CenterWithinHalfDiagonal) {
  const GridSpec s;
  Rng rng(1);
  const double half_diag = 0.5 * std::sqrt(s.dx * s.dx + s.dy * s.dy + s.dz * s.dz);
  for (int i = 0; i < 10000; ++i) {
    const Point3 p{Uniform(rng, -50, 50), Uniform(rng, -50, 50), Uniform(rng, -3, 5)};
    const auto v = WorldToVoxel(p, s);
    ASSERT_TRUE(v);
    const Point3 c = VoxelCenter(*v, s);
    EXPECT_LE(std::hypot(c.x - p.x, c.y - p.y, c.z - p.z), half_diag + 1e-12);
    EXPECT_EQ(Unflatten(s.Index(v->ix, v->iy, v->iz), s), *v);
  }
}

TEST(Priority, TotalSymmetricAndOrdered) {
  for (int a = 0; a < kNumLabels; ++a) {
    for (int b = 0; b < kNumLabels; ++b) {
      const auto la = static_cast<SemanticLabel>(a), lb = static_cast<SemanticLabel>(b);
      EXPECT_EQ(ResolvePriority(la, lb), ResolvePriority(lb, la));
      const SemanticLabel expected = OracleRank(la) <= OracleRank(lb) ? la : lb;
      EXPECT_EQ(ResolvePriority(la, lb), expected);
    }
  }
}

TEST(Voxelize, EmptyCloudGivesEmptyGrid) {
  const SemanticGrid g = VoxelizeLabeledPoints({}, GridSpec{});
  EXPECT_EQ(g.labels.size(), GridSpec{}.num_voxels());
  EXPECT_EQ(OccupiedCount(g), 0u);
}

TEST(Voxelize, CarBeatsRoadInSharedVoxel) {
  LabeledPointCloud c;
  c.points.push_back({0.1, 0.1, 0.05, SemanticLabel::kRoad});
  c.points.push_back({0.2, 0.2, 0.15, SemanticLabel::kCar});
  const SemanticGrid g = VoxelizeLabeledPoints(c, GridSpec{});
  EXPECT_EQ(g.at(64, 64, 7), SemanticLabel::kCar);
  EXPECT_EQ(OccupiedCount(g), 1u);
}

TEST(Voxelize, MatchesPerPointOracle) {
  Rng rng(2);
  const GridSpec s = testing::SmallSpec();
  for (int trial = 0; trial < 150; ++trial) {
    LabeledPointCloud c;
    for (int i = 0; i < 1000; ++i) {
      // Slightly wider than the grid so boundary filtering is exercised.
      c.points.push_back({Uniform(rng, s.x_min - 1, s.x_max() + 1),
                          Uniform(rng, s.y_min - 1, s.y_max() + 1),
                          Uniform(rng, s.z_min - 1, s.z_max() + 1),
                          testing::RandomLabel(rng, false)});
    }
    ASSERT_EQ(VoxelizeLabeledPoints(c, s), OracleVoxelize(c, s)) << "trial " << trial;
  }
}

TEST(Voxelize, MatchesOracleOnDefaultGrid) {
  Rng rng(3);
  const GridSpec s;
  for (int trial = 0; trial < 5; ++trial) {
    LabeledPointCloud c;
    for (int i = 0; i < 20000; ++i) {
      c.points.push_back({Uniform(rng, -55, 55), Uniform(rng, -55, 55),
                          Uniform(rng, -4, 6), testing::RandomLabel(rng, false)});
    }
    ASSERT_EQ(VoxelizeLabeledPoints(c, s), OracleVoxelize(c, s));
  }
}

TEST(Voxelize, PermutationInvariant) {
  Rng rng(4);
  const GridSpec s = testing::SmallSpec();
  for (int trial = 0; trial < 20; ++trial) {
    LabeledPointCloud c;
    for (int i = 0; i < 2000; ++i) {
      c.points.push_back({Uniform(rng, s.x_min, s.x_max()), Uniform(rng, s.y_min, s.y_max()),
                          Uniform(rng, s.z_min, s.z_max()),
                          testing::RandomLabel(rng, false)});
    }
    LabeledPointCloud shuffled = c;
    std::shuffle(shuffled.points.begin(), shuffled.points.end(), rng);
    EXPECT_EQ(VoxelizeLabeledPoints(c, s), VoxelizeLabeledPoints(shuffled, s));
  }
}

TEST(Histogram, CountsConstructedGrid) {
  SemanticGrid g{GridSpec{}};
  g.at(0, 0, 0) = g.at(5, 6, 7) = g.at(127, 127, 19) = SemanticLabel::kCar;
  EXPECT_EQ(OccupiedCount(g), 3u);
  const auto h = LabelHistogram(g);
  EXPECT_EQ(h[static_cast<int>(SemanticLabel::kCar)], 3u);
  for (SemanticLabel l : kSemanticClasses) {
    if (l != SemanticLabel::kCar) EXPECT_EQ(h[static_cast<int>(l)], 0u);
  }
}

TEST(Histogram, MatchesLinearScan) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const SemanticGrid g = testing::RandomGrid(rng, testing::SmallSpec(), 0.4);
    std::array<std::size_t, kNumLabels> expected{};
    std::size_t occupied = 0;
    for (std::size_t i = 0; i < g.labels.size(); ++i) {
      ++expected[static_cast<int>(g.labels[i])];
      if (g.labels[i] != SemanticLabel::kEmpty) ++occupied;
    }
    EXPECT_EQ(LabelHistogram(g), expected);
    EXPECT_EQ(OccupiedCount(g), occupied);
  }
}

TEST(Labels, NamesRoundTrip) {
  for (int l = 0; l < kNumLabels; ++l) {
    const auto label = static_cast<SemanticLabel>(l);
    EXPECT_EQ(LabelFromName(LabelName(label)), label);
  }
  EXPECT_FALSE(LabelFromName("sky"));
}

}  // namespace
}  // namespace v2vssc
