#ifndef V2VSSC_COMM_SIM_H_
#define V2VSSC_COMM_SIM_H_

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "v2vssc/geometry.h"
#include "v2vssc/ssc_baseline.h"
#include "v2vssc/voxel_grid.h"

namespace v2vssc {

// ---------------------------------------------------------------------------
// Spatial graph

struct SpatialGraph {
  int ego = 0;
  std::map<int, Pose6D> nodes;  // includes the ego
  std::vector<std::pair<int, int>> edges;  // (ego, neighbor), ascending

  std::vector<int> Neighbors() const;
};

// Keeps the ego plus every agent within `range_m` (planar) of it.
// Throws std::invalid_argument when the ego pose is missing.
SpatialGraph UpdateSpatialGraph(const SpatialGraph& g,
                                const std::map<int, Pose6D>& poses,
                                double range_m);

// ---------------------------------------------------------------------------
// Feature compression

struct CompressionSpec {
  int rate = 1;  // one of 1, 4, 16, 64

  static bool IsSupportedRate(int rate) {
    return rate == 1 || rate == 4 || rate == 16 || rate == 64;
  }
  void Validate() const;  // throws std::invalid_argument
};

// Intermediate payload body as it travels on the wire.
struct CompressedFeatures {
  GridSpec spec;
  int rate = 1;
  std::vector<std::uint8_t> body;

  // Uncompressed channel data size: channels * voxels * 4.
  static std::size_t RawBytes(const GridSpec& spec,
                              int channels = kNumFeatureChannels) {
    return spec.num_voxels() * static_cast<std::size_t>(channels) * 4;
  }
};

// Rates:
//   1  -> all channels, f32.
//   4  -> all channels, 8-bit codes over per-channel [min, min + range].
//   16 -> log hit count (8-bit) plus argmax class code (u8).
//   64 -> occupancy bit plane plus a 3-bit class per occupied voxel.
CompressedFeatures Compress(const FeatureGrid& f, const CompressionSpec& spec);
FeatureGrid Decompress(const CompressedFeatures& c);

// ---------------------------------------------------------------------------
// Messages

enum class MessageKind : std::uint8_t {
  kMetadata = 0,
  kEarly = 1,
  kIntermediate = 2,
  kLate = 3,
};

inline constexpr std::size_t kMessageHeaderBytes = 64;

using MessagePayload =
    std::variant<std::monostate, std::shared_ptr<const LabeledPointCloud>,
                 CompressedFeatures, std::shared_ptr<const Prediction>>;

struct V2VMessage {
  int sender = 0;
  MessageKind kind = MessageKind::kMetadata;
  Pose6D sender_pose;
  double stamp = 0.0;
  MessagePayload payload;
};

// Exact wire size: 64-byte header plus the payload body.
std::size_t PayloadSize(const V2VMessage& m);

std::vector<std::uint8_t> EncodeMessage(const V2VMessage& m);
V2VMessage DecodeMessage(const std::vector<std::uint8_t>& bytes,
                         const GridSpec& extents = GridSpec::Default());

// ---------------------------------------------------------------------------
// Snapshot buffer

struct Snapshot {
  double stamp = 0.0;
  Pose6D pose;  // sensor pose in the world
  std::shared_ptr<const LabeledPointCloud> cloud;
  std::shared_ptr<const FeatureGrid> features;
  std::shared_ptr<const Prediction> prediction;
};

class SnapshotBuffer {
 public:
  static constexpr double kTick = 0.1;
  static constexpr double kStampTolerance = 1e-9;

  explicit SnapshotBuffer(double retention_s = 0.5);

  // Stamps per agent must be strictly increasing; history older than the
  // retention window behind the newest stamp is dropped.
  void Push(int agent, Snapshot snapshot);

  // Newest snapshot with stamp <= t, or nullptr.
  const Snapshot* Select(int agent, double t) const;

  std::vector<int> Agents() const;
  const std::vector<Snapshot>& History(int agent) const;
  double retention() const { return retention_s_; }

 private:
  double retention_s_;
  std::map<int, std::vector<Snapshot>> history_;
};

// ---------------------------------------------------------------------------
// Channel

struct ChannelConfig {
  double range_m = 70.0;
  double delay_s = 0.0;
  double pos_std_m = 0.0;
  double heading_std_rad = 0.0;
  CompressionSpec compression;
  std::uint64_t seed = 0;

  bool IsTransparent() const {
    return delay_s == 0.0 && pos_std_m == 0.0 && heading_std_rad == 0.0 &&
           compression.rate == 1;
  }
  void Validate() const;  // throws std::invalid_argument
};

class DeliveryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DeliveredMessage {
  int sender = 0;
  MessageKind kind = MessageKind::kMetadata;
  Pose6D sender_pose;  // as received (stale and/or noisy)
  double stamp = 0.0;
  std::size_t payload_bytes = 0;
  std::shared_ptr<const LabeledPointCloud> cloud;
  std::shared_ptr<const FeatureGrid> features;  // decompressed
  std::shared_ptr<const Prediction> prediction;
};

// Generator for one sender's transmissions in one frame.
Rng ChannelRng(std::uint64_t seed, int sender, std::int64_t frame);

// Serves the sender's newest snapshot no newer than now - delay, with the
// shared pose perturbed and intermediate features passed through the codec.
// Throws DeliveryError on buffer underrun.
DeliveredMessage Transmit(const SnapshotBuffer& buffer, int sender,
                          MessageKind kind, const ChannelConfig& cfg,
                          double now, Rng& rng);

}  // namespace v2vssc

#endif  // V2VSSC_COMM_SIM_H_
