#include "v2vssc/fusion.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

namespace v2vssc {

std::string_view FusionModeName(FusionMode m) {
  switch (m) {
    case FusionMode::kNoFusion: return "none";
    case FusionMode::kEarly: return "early";
    case FusionMode::kIntermediate: return "intermediate";
    case FusionMode::kLate: return "late";
  }
  return "none";
}

std::optional<FusionMode> FusionModeFromName(std::string_view name) {
  for (FusionMode m : {FusionMode::kNoFusion, FusionMode::kEarly,
                       FusionMode::kIntermediate, FusionMode::kLate}) {
    if (FusionModeName(m) == name) return m;
  }
  return std::nullopt;
}

LabeledPointCloud FuseEarly(const LabeledPointCloud& ego_cloud,
                            std::vector<CloudDelivery> deliveries,
                            const Pose6D& ego_pose) {
  std::stable_sort(deliveries.begin(), deliveries.end(),
                   [](const CloudDelivery& a, const CloudDelivery& b) {
                     return a.sender < b.sender;
                   });
  LabeledPointCloud out = ego_cloud;
  for (const CloudDelivery& d : deliveries) {
    const LabeledPointCloud moved = TransformPoints(*d.cloud, d.sender_pose, ego_pose);
    out.points.insert(out.points.end(), moved.points.begin(), moved.points.end());
  }
  return out;
}

std::vector<std::int32_t> WarpIndexMap(const GridSpec& spec, const Pose6D& src_pose,
                                       const Pose6D& dst_pose) {
  const std::size_t n = spec.num_voxels();
  std::vector<std::int32_t> map(n);
  if (src_pose == dst_pose) {
    for (std::size_t v = 0; v < n; ++v) map[v] = static_cast<std::int32_t>(v);
    return map;
  }
  const Eigen::Isometry3d dst_to_src = RelativeTransform(dst_pose, src_pose);
  for (int iz = 0; iz < spec.nz; ++iz) {
    for (int iy = 0; iy < spec.ny; ++iy) {
      for (int ix = 0; ix < spec.nx; ++ix) {
        const Point3 c = VoxelCenter({ix, iy, iz}, spec);
        const auto src = WorldToVoxel(Apply(dst_to_src, c), spec);
        map[spec.Index(ix, iy, iz)] =
            src ? static_cast<std::int32_t>(spec.Index(src->ix, src->iy, src->iz)) : -1;
      }
    }
  }
  return map;
}

FeatureGrid WarpFeatureGrid(const FeatureGrid& f, const Pose6D& src_pose,
                            const Pose6D& dst_pose) {
  if (src_pose == dst_pose) return f;
  const std::vector<std::int32_t> map = WarpIndexMap(f.spec, src_pose, dst_pose);
  FeatureGrid out(f.spec, f.channels);
  for (int c = 0; c < f.channels; ++c) {
    for (std::size_t v = 0; v < map.size(); ++v) {
      if (map[v] >= 0) out.at(c, v) = f.at(c, static_cast<std::size_t>(map[v]));
    }
  }
  return out;
}

Prediction WarpPrediction(const Prediction& p, const Pose6D& src_pose,
                          const Pose6D& dst_pose) {
  if (src_pose == dst_pose) return p;
  const GridSpec& spec = p.labels.spec;
  const std::vector<std::int32_t> map = WarpIndexMap(spec, src_pose, dst_pose);
  Prediction out{SemanticGrid(spec), ConfidenceGrid(spec)};
  for (std::size_t v = 0; v < map.size(); ++v) {
    if (map[v] < 0) continue;
    out.labels.labels[v] = p.labels.labels[static_cast<std::size_t>(map[v])];
    out.confidence.conf[v] = p.confidence.conf[static_cast<std::size_t>(map[v])];
  }
  return out;
}

FeatureGrid FuseIntermediate(const FeatureGrid& ego,
                             std::span<const FeatureGrid> neighbors,
                             double beta) {
  for (const FeatureGrid& nb : neighbors) {
    if (!(nb.spec == ego.spec) || nb.channels != ego.channels) {
      throw std::invalid_argument("FuseIntermediate: feature grids do not share a spec");
    }
  }
  if (neighbors.empty()) return ego;

  const std::size_t n = ego.voxels();
  const std::size_t agents = neighbors.size() + 1;
  auto grid = [&](std::size_t i) -> const FeatureGrid& {
    return i == 0 ? ego : neighbors[i - 1];
  };
  FeatureGrid out(ego.spec, ego.channels);
  std::vector<double> w(agents);
  for (std::size_t v = 0; v < n; ++v) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < agents; ++i) {
      peak = std::max(peak, beta * grid(i).at(kLogHits, v));
    }
    double total = 0.0;
    for (std::size_t i = 0; i < agents; ++i) {
      w[i] = std::exp(beta * grid(i).at(kLogHits, v) - peak);
      total += w[i];
    }
    for (std::size_t i = 0; i < agents; ++i) w[i] /= total;
    for (int c = 0; c < ego.channels; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < agents; ++i) acc += w[i] * grid(i).at(c, v);
      out.at(c, v) = static_cast<float>(acc);
    }
  }
  return out;
}

Prediction FuseLate(std::span<const Prediction> claims, bool empty_claims) {
  if (claims.empty()) throw std::invalid_argument("FuseLate: no claims");
  const GridSpec& spec = claims[0].labels.spec;
  for (const Prediction& c : claims) {
    if (!(c.labels.spec == spec) || !(c.confidence.spec == spec)) {
      throw std::invalid_argument("FuseLate: claims do not share a spec");
    }
  }
  Prediction out = claims[0];
  const std::size_t n = spec.num_voxels();
  for (std::size_t v = 0; v < n; ++v) {
    std::size_t best = 0;
    bool best_occupied = claims[0].labels.labels[v] != SemanticLabel::kEmpty;
    for (std::size_t i = 1; i < claims.size(); ++i) {
      const bool occupied = claims[i].labels.labels[v] != SemanticLabel::kEmpty;
      if (!empty_claims) {
        if (!occupied) continue;
        if (!best_occupied ||
            claims[i].confidence.conf[v] > claims[best].confidence.conf[v]) {
          best = i;
          best_occupied = true;
        }
        continue;
      }
      if (claims[i].confidence.conf[v] > claims[best].confidence.conf[v]) best = i;
    }
    out.labels.labels[v] = claims[best].labels.labels[v];
    out.confidence.conf[v] = claims[best].confidence.conf[v];
  }
  return out;
}

Snapshot MakeSnapshot(const Scene& scene, const AgentSpec& agent,
                      const LidarSpec& lidar, const GridSpec& grid,
                      const CompletionConfig& completion) {
  Snapshot s;
  s.stamp = scene.clock();
  s.pose = SensorPose(scene, agent);
  auto cloud = std::make_shared<LabeledPointCloud>(ScanAgent(scene, agent, lidar));
  auto features = std::make_shared<FeatureGrid>(ExtractFeatures(*cloud, {}, grid));
  s.prediction = std::make_shared<const Prediction>(Predict(*features, completion));
  s.cloud = std::move(cloud);
  s.features = std::move(features);
  return s;
}

SnapshotBuffer SimulateAgents(const Scene& scene, double duration,
                              const LidarSpec& lidar, const GridSpec& grid,
                              const CompletionConfig& completion) {
  SnapshotBuffer buffer;
  const std::int64_t ticks = std::llround(duration / SnapshotBuffer::kTick);
  for (std::int64_t k = 0; k <= ticks; ++k) {
    const Scene at = StepScene(scene, static_cast<double>(k) * SnapshotBuffer::kTick);
    for (const AgentSpec& agent : at.agents) {
      buffer.Push(agent.id, MakeSnapshot(at, agent, lidar, grid, completion));
    }
  }
  return buffer;
}

FrameResult RunFrame(const SnapshotBuffer& buffer, int ego, FusionMode mode,
                     const ChannelConfig& channel,
                     const CompletionConfig& completion, double now,
                     const FusionOptions& options) {
  channel.Validate();
  const Snapshot* own = buffer.Select(ego, now);
  if (own == nullptr) {
    throw std::invalid_argument("RunFrame: no ego snapshot for agent " +
                                std::to_string(ego));
  }
  FrameResult result;
  if (mode == FusionMode::kNoFusion) {
    result.prediction = Predict(*own->features, completion);
    return result;
  }

  const std::int64_t frame = std::llround(now / SnapshotBuffer::kTick);
  std::map<int, Pose6D> poses{{ego, own->pose}};
  for (int id : buffer.Agents()) {
    if (id == ego) continue;
    Rng rng = ChannelRng(channel.seed, id, frame);
    try {
      const DeliveredMessage meta =
          Transmit(buffer, id, MessageKind::kMetadata, channel, now, rng);
      poses[id] = meta.sender_pose;
      result.bytes_received += meta.payload_bytes;
    } catch (const DeliveryError&) {
    }
  }
  const SpatialGraph graph = UpdateSpatialGraph(SpatialGraph{ego, {}, {}}, poses,
                                                channel.range_m);

  const MessageKind kind = mode == FusionMode::kEarly ? MessageKind::kEarly
                           : mode == FusionMode::kIntermediate
                               ? MessageKind::kIntermediate
                               : MessageKind::kLate;
  std::vector<DeliveredMessage> delivered;
  for (int id : graph.Neighbors()) {
    Rng rng = ChannelRng(channel.seed, id, frame);
    try {
      delivered.push_back(Transmit(buffer, id, kind, channel, now, rng));
      result.bytes_received += delivered.back().payload_bytes;
    } catch (const DeliveryError&) {
    }
  }
  result.neighbors_used = static_cast<int>(delivered.size());
  const GridSpec& spec = own->features->spec;

  switch (mode) {
    case FusionMode::kEarly: {
      std::vector<CloudDelivery> clouds;
      for (const DeliveredMessage& d : delivered) {
        clouds.push_back({d.sender, d.cloud.get(), d.sender_pose});
      }
      const LabeledPointCloud fused = FuseEarly(*own->cloud, clouds, own->pose);
      result.prediction = Predict(ExtractFeatures(fused, {}, spec), completion);
      break;
    }
    case FusionMode::kIntermediate: {
      std::vector<FeatureGrid> warped;
      for (const DeliveredMessage& d : delivered) {
        warped.push_back(WarpFeatureGrid(*d.features, d.sender_pose, own->pose));
      }
      result.prediction =
          Predict(FuseIntermediate(*own->features, warped, options.beta), completion);
      break;
    }
    case FusionMode::kLate: {
      std::vector<Prediction> claims{Predict(*own->features, completion)};
      for (const DeliveredMessage& d : delivered) {
        claims.push_back(WarpPrediction(*d.prediction, d.sender_pose, own->pose));
      }
      result.prediction = FuseLate(claims, options.late_empty_claims);
      break;
    }
    case FusionMode::kNoFusion: break;
  }
  return result;
}

}  // namespace v2vssc
