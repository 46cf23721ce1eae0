#include "v2vssc/fusion.h"

#include <gtest/gtest.h>

#include <cmath>

#include "test_util.h"
#include "v2vssc/metrics.h"

namespace v2vssc {
namespace {

using testing::Uniform;

LabeledPointCloud PointsAt(std::initializer_list<Point3> pts, SemanticLabel l) {
  LabeledPointCloud c;
  for (const auto& p : pts) c.points.push_back({p.x, p.y, p.z, l});
  return c;
}

TEST(FuseEarly, NoDeliveriesKeepsEgoCloud) {
  const auto ego = PointsAt({{1, 2, 3}, {4, 5, 6}}, SemanticLabel::kRoad);
  EXPECT_EQ(FuseEarly(ego, {}, Pose6D{3, 1, 0, 0.2, 0, 0}), ego);
}

TEST(FuseEarly, SamePoseConcatenates) {
  const auto ego = PointsAt({{1, 2, 3}}, SemanticLabel::kRoad);
  const auto nb = PointsAt({{7, 8, 9}}, SemanticLabel::kCar);
  const Pose6D p{3, 1, 2, 0.2, 0.1, 0.3};
  const auto fused = FuseEarly(ego, {{1, &nb, p}}, p);
  ASSERT_EQ(fused.size(), 2u);
  EXPECT_EQ(fused.points[0], ego.points[0]);
  EXPECT_EQ(fused.points[1], nb.points[0]);
}

TEST(FuseEarly, OffsetNeighbourAndOrdering) {
  const auto ego = PointsAt({{0, 0, 0}}, SemanticLabel::kRoad);
  const auto nb1 = PointsAt({{1, 0, 0}}, SemanticLabel::kCar);
  const auto nb2 = PointsAt({{2, 0, 0}}, SemanticLabel::kPole);
  const Pose6D ego_pose{10, 10, 0, 0, 0, 0};
  const Pose6D p1{15, 10, 0, 0, 0, 0};
  const auto fused = FuseEarly(ego, {{5, &nb2, ego_pose}, {1, &nb1, p1}}, ego_pose);
  ASSERT_EQ(fused.size(), 3u);
  EXPECT_NEAR(fused.points[1].x, 6.0, 1e-12);
  EXPECT_NEAR(fused.points[1].y, 0.0, 1e-12);
  EXPECT_EQ(fused.points[1].label, SemanticLabel::kCar);
  EXPECT_EQ(fused.points[2].label, SemanticLabel::kPole);
}

TEST(FuseIntermediate, NoNeighboursReturnsEgo) {
  Rng rng(1);
  const FeatureGrid ego = testing::RandomFeatures(rng, testing::SmallSpec());
  EXPECT_EQ(FuseIntermediate(ego, {}), ego);
}

TEST(FuseIntermediate, IdenticalGridsAreFixedPoint) {
  Rng rng(2);
  const FeatureGrid ego = testing::RandomFeatures(rng, testing::SmallSpec());
  const std::vector<FeatureGrid> nbs{ego, ego};
  const FeatureGrid out = FuseIntermediate(ego, nbs, 1.7);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    EXPECT_NEAR(out.data[i], ego.data[i], 1e-5 * (1 + std::abs(ego.data[i])));
  }
}

TEST(FuseIntermediate, ScalarSoftmaxWeight) {
  const GridSpec s = testing::SmallSpec();
  FeatureGrid ego(s), nb(s);
  const std::size_t v = 17;
  nb.at(kLogHits, v) = static_cast<float>(std::log(4.0));
  nb.at(kCarHits, v) = 3.0f;
  const std::vector<FeatureGrid> nbs{nb};
  const FeatureGrid out = FuseIntermediate(ego, nbs, 1.0);
  EXPECT_NEAR(out.at(kCarHits, v), 0.8 * 3.0, 1e-6);
  EXPECT_NEAR(out.at(kLogHits, v), 0.8 * std::log(4.0), 1e-6);
}

TEST(FuseIntermediate, ConvexCombinationPerVoxel) {
  Rng rng(3);
  const GridSpec s = testing::SmallSpec();
  for (int trial = 0; trial < 100; ++trial) {
    const FeatureGrid ego = testing::RandomFeatures(rng, s, 0, 5);
    std::vector<FeatureGrid> nbs;
    const int k = testing::UniformInt(rng, 1, 4);
    for (int i = 0; i < k; ++i) nbs.push_back(testing::RandomFeatures(rng, s, 0, 5));
    const double beta = Uniform(rng, 0.1, 5);
    const FeatureGrid out = FuseIntermediate(ego, nbs, beta);
    for (std::size_t v = 0; v < ego.voxels(); v += 7) {
      // Weights recomputed independently; they sum to one.
      std::vector<double> w{std::exp(beta * ego.at(kLogHits, v))};
      for (const auto& nb : nbs) w.push_back(std::exp(beta * nb.at(kLogHits, v)));
      double total = 0;
      for (double x : w) total += x;
      double wsum = 0;
      for (double& x : w) wsum += (x /= total);
      EXPECT_NEAR(wsum, 1.0, 1e-6);
      for (int c = 0; c < ego.channels; ++c) {
        double lo = ego.at(c, v), hi = ego.at(c, v), expect = w[0] * ego.at(c, v);
        for (std::size_t i = 0; i < nbs.size(); ++i) {
          lo = std::min<double>(lo, nbs[i].at(c, v));
          hi = std::max<double>(hi, nbs[i].at(c, v));
          expect += w[i + 1] * nbs[i].at(c, v);
        }
        EXPECT_GE(out.at(c, v), lo - 1e-5);
        EXPECT_LE(out.at(c, v), hi + 1e-5);
        EXPECT_NEAR(out.at(c, v), expect, 1e-4);
      }
    }
  }
}

TEST(FuseIntermediate, MismatchedSpecThrows) {
  FeatureGrid a(testing::SmallSpec()), b(GridSpec{});
  const std::vector<FeatureGrid> nbs{b};
  EXPECT_THROW(FuseIntermediate(a, nbs), std::invalid_argument);
}

TEST(Warp, SamePoseIsIdentity) {
  Rng rng(4);
  const FeatureGrid f = testing::RandomFeatures(rng, GridSpec{});
  const Pose6D p{4, 5, 6, 0.1, 0.2, 0.3};
  EXPECT_EQ(WarpFeatureGrid(f, p, p), f);
}

TEST(Warp, IntegerVoxelShift) {
  const GridSpec s;
  FeatureGrid f(s);
  f.at(kCarHits, s.Index(70, 40, 5)) = 7.0f;
  f.at(kCarHits, s.Index(1, 40, 5)) = 9.0f;
  const int k = 3;
  const Pose6D src{0, 0, 0, 0, 0, 0};
  const Pose6D dst{k * s.dx, 0, 0, 0, 0, 0};
  const FeatureGrid out = WarpFeatureGrid(f, src, dst);
  EXPECT_EQ(out.at(kCarHits, s.Index(70 - k, 40, 5)), 7.0f);
  EXPECT_EQ(out.at(kCarHits, s.Index(70, 40, 5)), 0.0f);
  // The voxel at ix = 1 falls outside; the last k columns are zero filled.
  for (int iy = 0; iy < s.ny; ++iy)
    for (int ix = s.nx - k; ix < s.nx; ++ix)
      for (int c = 0; c < f.channels; ++c) EXPECT_EQ(out.at(c, s.Index(ix, iy, 5)), 0.0f);
  double total = 0;
  for (float v : out.data) total += v;
  EXPECT_EQ(total, 7.0);
}

TEST(Warp, MatchesBackProjectionOracle) {
  Rng rng(5);
  const GridSpec s;
  for (int trial = 0; trial < 4; ++trial) {
    const FeatureGrid f = testing::RandomEvidence(rng, s, 0.2);
    const Pose6D src{Uniform(rng, -5, 5), Uniform(rng, -5, 5), Uniform(rng, -0.2, 0.2),
                     Uniform(rng, -kPi, kPi), Uniform(rng, -0.05, 0.05), Uniform(rng, -0.05, 0.05)};
    const Pose6D dst{Uniform(rng, -5, 5), Uniform(rng, -5, 5), Uniform(rng, -0.2, 0.2),
                     Uniform(rng, -kPi, kPi), 0, 0};
    const FeatureGrid out = WarpFeatureGrid(f, src, dst);
    std::size_t checked = 0;
    for (std::size_t v = 0; v < s.num_voxels(); v += 5) {
      const VoxelIndex d = Unflatten(v, s);
      // Centre in world through dst, then into src by the transposed rotation.
      const Point3 c = VoxelCenter(d, s);
      auto rot = [](const Pose6D& p) {
        const double cy = std::cos(p.yaw), sy = std::sin(p.yaw), cp = std::cos(p.pitch),
                     sp = std::sin(p.pitch), cr = std::cos(p.roll), sr = std::sin(p.roll);
        return std::array<double, 9>{cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
                                     sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
                                     -sp,     cp * sr,                cp * cr};
      };
      const auto rd = rot(dst), rs = rot(src);
      const double w[3] = {rd[0] * c.x + rd[1] * c.y + rd[2] * c.z + dst.x - src.x,
                           rd[3] * c.x + rd[4] * c.y + rd[5] * c.z + dst.y - src.y,
                           rd[6] * c.x + rd[7] * c.y + rd[8] * c.z + dst.z - src.z};
      const double q[3] = {rs[0] * w[0] + rs[3] * w[1] + rs[6] * w[2],
                           rs[1] * w[0] + rs[4] * w[1] + rs[7] * w[2],
                           rs[2] * w[0] + rs[5] * w[1] + rs[8] * w[2]};
      const double g[3] = {(q[0] - s.x_min) / s.dx, (q[1] - s.y_min) / s.dy,
                           (q[2] - s.z_min) / s.dz};
      bool near_edge = false;
      for (double x : g) near_edge |= std::abs(x - std::round(x)) < 1e-6;
      if (near_edge) continue;
      const auto src_v = WorldToVoxel(Point3{q[0], q[1], q[2]}, s);
      for (int ch = 0; ch < f.channels; ++ch) {
        const float expected = src_v ? f.at(ch, s.Index(src_v->ix, src_v->iy, src_v->iz)) : 0.0f;
        ASSERT_EQ(out.at(ch, v), expected);
      }
      ++checked;
    }
    EXPECT_GT(checked, s.num_voxels() / 6);
  }
}

Prediction Claim(const GridSpec& s) { return {SemanticGrid(s), ConfidenceGrid(s)}; }

TEST(FuseLate, SingleClaimUnchanged) {
  Rng rng(6);
  Prediction p{testing::RandomGrid(rng, testing::SmallSpec(), 0.5),
               ConfidenceGrid(testing::SmallSpec())};
  for (auto& c : p.confidence.conf) c = static_cast<float>(Uniform(rng, 0, 1));
  const std::vector<Prediction> claims{p};
  const Prediction out = FuseLate(claims);
  EXPECT_EQ(out.labels, p.labels);
  EXPECT_EQ(out.confidence, p.confidence);
}

TEST(FuseLate, MaxConfidenceAndEgoTieBreak) {
  const GridSpec s = testing::SmallSpec();
  Prediction ego = Claim(s), nb = Claim(s);
  ego.labels.labels[0] = SemanticLabel::kCar;
  ego.confidence.conf[0] = 0.6f;
  nb.labels.labels[0] = SemanticLabel::kRoad;
  nb.confidence.conf[0] = 0.9f;
  ego.labels.labels[1] = SemanticLabel::kCar;
  ego.confidence.conf[1] = 0.7f;
  nb.labels.labels[1] = SemanticLabel::kRoad;
  nb.confidence.conf[1] = 0.7f;
  const std::vector<Prediction> claims{ego, nb};
  const Prediction out = FuseLate(claims);
  EXPECT_EQ(out.labels.labels[0], SemanticLabel::kRoad);
  EXPECT_EQ(out.confidence.conf[0], 0.9f);
  EXPECT_EQ(out.labels.labels[1], SemanticLabel::kCar);
  EXPECT_EQ(out.confidence.conf[1], 0.7f);
}

TEST(FuseLate, EmptyClaimsFlag) {
  const GridSpec s = testing::SmallSpec();
  Prediction ego = Claim(s), nb = Claim(s);
  ego.confidence.conf[3] = 0.9f;  // confident free space
  nb.labels.labels[3] = SemanticLabel::kBuilding;
  nb.confidence.conf[3] = 0.4f;
  const std::vector<Prediction> claims{ego, nb};
  EXPECT_EQ(FuseLate(claims, true).labels.labels[3], SemanticLabel::kEmpty);
  const Prediction off = FuseLate(claims, false);
  EXPECT_EQ(off.labels.labels[3], SemanticLabel::kBuilding);
  EXPECT_EQ(off.confidence.conf[3], 0.4f);
}

TEST(FuseLate, MatchesBruteForceMax) {
  Rng rng(7);
  const GridSpec s = testing::SmallSpec();
  for (int trial = 0; trial < 150; ++trial) {
    std::vector<Prediction> claims;
    const int k = testing::UniformInt(rng, 1, 5);
    for (int i = 0; i < k; ++i) {
      Prediction p{testing::RandomGrid(rng, s, 0.5), ConfidenceGrid(s)};
      // Coarse values so ties are common.
      for (auto& c : p.confidence.conf) c = testing::UniformInt(rng, 0, 4) / 4.0f;
      claims.push_back(std::move(p));
    }
    for (bool empty_claims : {true, false}) {
      const Prediction out = FuseLate(claims, empty_claims);
      for (std::size_t v = 0; v < s.num_voxels(); ++v) {
        int winner = 0;
        if (empty_claims) {
          for (int i = 1; i < k; ++i) {
            if (claims[i].confidence.conf[v] > claims[winner].confidence.conf[v]) winner = i;
          }
        } else {
          int occ = -1;
          for (int i = 0; i < k; ++i) {
            if (claims[i].labels.labels[v] == SemanticLabel::kEmpty) continue;
            if (occ < 0 || claims[i].confidence.conf[v] > claims[occ].confidence.conf[v]) occ = i;
          }
          winner = occ < 0 ? 0 : occ;
        }
        ASSERT_EQ(out.labels.labels[v], claims[winner].labels.labels[v]);
        ASSERT_EQ(out.confidence.conf[v], claims[winner].confidence.conf[v]);
      }
    }
  }
}

TEST(FuseLate, EmptyListThrows) {
  EXPECT_THROW(FuseLate(std::span<const Prediction>{}), std::invalid_argument);
}

class RunFrameTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    SceneConfig c;
    c.seed = 11;
    scene_ = new Scene(BuildScene(c));
    buffer_ = new SnapshotBuffer(SimulateAgents(*scene_, 0.5));
  }
  static void TearDownTestSuite() {
    delete scene_;
    delete buffer_;
  }
  static Scene* scene_;
  static SnapshotBuffer* buffer_;
};
Scene* RunFrameTest::scene_ = nullptr;
SnapshotBuffer* RunFrameTest::buffer_ = nullptr;

TEST_F(RunFrameTest, NoFusionUsesNoBytes) {
  const FrameResult r =
      RunFrame(*buffer_, 0, FusionMode::kNoFusion, ChannelConfig{}, {}, 0.5);
  EXPECT_EQ(r.bytes_received, 0u);
  EXPECT_EQ(r.neighbors_used, 0);
  EXPECT_EQ(r.prediction.labels, buffer_->Select(0, 0.5)->prediction->labels);
}

TEST_F(RunFrameTest, EarlyEqualsNoFusionOnUnionCloud) {
  const Scene now = StepScene(*scene_, 0.5);
  const Pose6D ego_pose = SensorPose(now, now.agents[0]);
  LabeledPointCloud uni = ScanAgent(now, now.agents[0], LidarSpec{});
  for (std::size_t i = 1; i < now.agents.size(); ++i) {
    const auto c = TransformPoints(ScanAgent(now, now.agents[i], LidarSpec{}),
                                   SensorPose(now, now.agents[i]), ego_pose);
    uni.points.insert(uni.points.end(), c.points.begin(), c.points.end());
  }
  const Prediction expected = Predict(ExtractFeatures(uni, {}, GridSpec{}));
  const FrameResult r = RunFrame(*buffer_, 0, FusionMode::kEarly, ChannelConfig{}, {}, 0.5);
  EXPECT_EQ(r.prediction.labels, expected.labels);
  EXPECT_EQ(r.neighbors_used, 2);
}

TEST_F(RunFrameTest, BytesAreSumOfDeliveredPayloads) {
  const std::size_t n = GridSpec{}.num_voxels();
  for (int rate : {1, 4, 16}) {
    ChannelConfig ch;
    ch.compression.rate = rate;
    const FrameResult r = RunFrame(*buffer_, 0, FusionMode::kIntermediate, ch, {}, 0.5);
    const std::size_t body = rate == 1 ? 8 + 36 * n : rate == 4 ? 8 + 54 + 9 * n : 8 + 6 + 2 * n;
    EXPECT_EQ(r.bytes_received, 2 * 64 + 2 * (64 + body)) << rate;
  }
  const FrameResult late = RunFrame(*buffer_, 0, FusionMode::kLate, ChannelConfig{}, {}, 0.5);
  EXPECT_EQ(late.bytes_received, 2 * 64 + 2 * (64 + 6 + 5 * n));
  const FrameResult early = RunFrame(*buffer_, 0, FusionMode::kEarly, ChannelConfig{}, {}, 0.5);
  std::size_t expected = 2 * 64;
  for (int id : {1, 2}) expected += 64 + 8 + 13 * buffer_->Select(id, 0.5)->cloud->size();
  EXPECT_EQ(early.bytes_received, expected);
}

TEST_F(RunFrameTest, DelayBeyondHistoryLeavesNeighboursSilent) {
  ChannelConfig ch;
  ch.delay_s = 2.0;
  const FrameResult r = RunFrame(*buffer_, 0, FusionMode::kLate, ch, {}, 0.5);
  EXPECT_EQ(r.neighbors_used, 0);
  EXPECT_EQ(r.bytes_received, 0u);
  EXPECT_EQ(r.prediction.labels, buffer_->Select(0, 0.5)->prediction->labels);
}

TEST_F(RunFrameTest, Deterministic) {
  ChannelConfig ch;
  ch.pos_std_m = 0.3;
  ch.heading_std_rad = 0.01;
  ch.delay_s = 0.2;
  ch.seed = 5;
  for (FusionMode m : {FusionMode::kEarly, FusionMode::kIntermediate, FusionMode::kLate}) {
    const FrameResult a = RunFrame(*buffer_, 1, m, ch, {}, 0.5);
    const FrameResult b = RunFrame(*buffer_, 1, m, ch, {}, 0.5);
    EXPECT_EQ(a.prediction.labels, b.prediction.labels);
    EXPECT_EQ(a.prediction.confidence, b.prediction.confidence);
    EXPECT_EQ(a.bytes_received, b.bytes_received);
  }
}

TEST(RunFrame, SingleAgentAllModesAgree) {
  SceneConfig c;
  c.seed = 4;
  Scene s = BuildScene(c);
  s.agents.resize(1);
  const SnapshotBuffer b = SimulateAgents(s, 0.2);
  const Prediction base = RunFrame(b, s.agents[0].id, FusionMode::kNoFusion, {}, {}, 0.2).prediction;
  for (FusionMode m : {FusionMode::kEarly, FusionMode::kIntermediate, FusionMode::kLate}) {
    const Prediction p = RunFrame(b, s.agents[0].id, m, {}, {}, 0.2).prediction;
    EXPECT_EQ(p.labels, base.labels) << FusionModeName(m);
  }
}

// Ego looks down the road at a car hidden behind a building-sized block;
// a neighbour beyond the block sees it directly.
Scene OccludedCarScene() {
  Scene s;
  s.objects.push_back({SemanticLabel::kRoad, Box{{0, 0, -0.2}, {200, 14, 0.4}, 0}, 0, 0});
  s.objects.push_back({SemanticLabel::kTerrain, Box{{0, 40, -0.2}, {200, 66, 0.4}, 0}, 0, 0});
  s.objects.push_back({SemanticLabel::kTerrain, Box{{0, -40, -0.2}, {200, 66, 0.4}, 0}, 0, 0});
  s.objects.push_back({SemanticLabel::kBuilding, Box{{0, -2, 4}, {6, 12, 8}, 0}, 0, 0});
  s.objects.push_back({SemanticLabel::kCar, Box{{14, -3.5, 0.8}, {4.5, 1.8, 1.6}, 0}, 0, 0});
  s.objects.push_back({SemanticLabel::kCar, Box{{-20, -3.5, 0.8}, {4.5, 1.8, 1.6}, 0}, 0, 0});
  s.objects.push_back({SemanticLabel::kCar, Box{{25, 3.5, 0.8}, {4.5, 1.8, 1.6}, kPi}, 0, 0});
  s.agents.push_back({0, Pose6D{0, 0, 1.9, 0, 0, 0}, 5});
  s.agents.push_back({1, Pose6D{0, 0, 1.9, 0, 0, 0}, 6});
  return s;
}

TEST(RunFrame, OccludedCarSceneEarlyBeatsNoFusion) {
  const Scene s = OccludedCarScene();
  // The hidden car is invisible to the ego.
  const auto ego_scan = ScanAgent(s, s.agents[0], LidarSpec{});
  const Pose6D ego_pose = SensorPose(s, s.agents[0]);
  for (const auto& p : ego_scan.points) {
    if (p.label == SemanticLabel::kCar) EXPECT_LT(p.x, 5.0);
  }
  const SnapshotBuffer b = SimulateAgents(s, 0.0);
  const SemanticGrid gt = GroundTruthGrid(s, ego_pose);
  const double none =
      GeometricIou(RunFrame(b, 0, FusionMode::kNoFusion, {}, {}, 0.0).prediction.labels, gt);
  const double early =
      GeometricIou(RunFrame(b, 0, FusionMode::kEarly, {}, {}, 0.0).prediction.labels, gt);
  EXPECT_GT(early, none);
}

}  // namespace
}  // namespace v2vssc
