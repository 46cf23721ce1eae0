#ifndef V2VSSC_FUSION_H_
#define V2VSSC_FUSION_H_

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "v2vssc/comm_sim.h"
#include "v2vssc/lidar_sim.h"
#include "v2vssc/ssc_baseline.h"
#include "v2vssc/world_sim.h"

namespace v2vssc {

enum class FusionMode { kNoFusion, kEarly, kIntermediate, kLate };

std::string_view FusionModeName(FusionMode m);  // "none", "early", ...
std::optional<FusionMode> FusionModeFromName(std::string_view name);

struct CloudDelivery {
  int sender = 0;
  const LabeledPointCloud* cloud = nullptr;  // sender sensor frame
  Pose6D sender_pose;
};

// Ego cloud followed by each neighbour cloud (ascending sender id) mapped
// into the ego sensor frame through the delivered sender pose.
LabeledPointCloud FuseEarly(const LabeledPointCloud& ego_cloud,
                            std::vector<CloudDelivery> deliveries,
                            const Pose6D& ego_pose);

// For every voxel of the destination grid, the flat index of the source voxel
// containing its back-projected centre, or -1 when that falls outside.
std::vector<std::int32_t> WarpIndexMap(const GridSpec& spec, const Pose6D& src_pose,
                                       const Pose6D& dst_pose);

// Nearest-neighbour inverse warp; out-of-bounds samples are zero / Empty.
FeatureGrid WarpFeatureGrid(const FeatureGrid& f, const Pose6D& src_pose,
                            const Pose6D& dst_pose);
Prediction WarpPrediction(const Prediction& p, const Pose6D& src_pose,
                          const Pose6D& dst_pose);

// Per-voxel softmax over agents of beta * log hit count; output is the
// weighted sum of all channels. Throws std::invalid_argument on spec mismatch.
FeatureGrid FuseIntermediate(const FeatureGrid& ego,
                             std::span<const FeatureGrid> neighbors,
                             double beta = 1.0);

// Per-voxel maximum-confidence selection; ties go to the earliest claim (ego
// first). With `empty_claims` off, Empty claims only win when no agent
// claims the voxel as occupied. Throws std::invalid_argument on empty input.
Prediction FuseLate(std::span<const Prediction> claims, bool empty_claims = true);

struct FusionOptions {
  double beta = 1.0;
  bool late_empty_claims = true;
};

struct FrameResult {
  Prediction prediction;
  std::size_t bytes_received = 0;
  int neighbors_used = 0;
};

// Runs one ego frame against the snapshot buffer. Neighbours whose delivery
// fails are treated as silent.
FrameResult RunFrame(const SnapshotBuffer& buffer, int ego, FusionMode mode,
                     const ChannelConfig& channel,
                     const CompletionConfig& completion, double now,
                     const FusionOptions& options = {});

// Steps the scene from its current clock in ticks of SnapshotBuffer::kTick
// up to `duration` seconds, recording every agent's scan, features and
// prediction.
SnapshotBuffer SimulateAgents(const Scene& scene, double duration,
                              const LidarSpec& lidar = {},
                              const GridSpec& grid = GridSpec::Default(),
                              const CompletionConfig& completion = {});

Snapshot MakeSnapshot(const Scene& scene, const AgentSpec& agent,
                      const LidarSpec& lidar, const GridSpec& grid,
                      const CompletionConfig& completion);

}  // namespace v2vssc

#endif  // V2VSSC_FUSION_H_
