#ifndef V2VSSC_EVAL_HARNESS_H_
#define V2VSSC_EVAL_HARNESS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "v2vssc/fusion.h"
#include "v2vssc/metrics.h"
#include "v2vssc/world_sim.h"

namespace v2vssc {

// One channel setting of a sweep. Heading noise is in degrees here.
struct ImpairmentPoint {
  double delay_ms = 0.0;
  double pos_std = 0.0;
  double heading_std = 0.0;
  int compression = 1;

  ChannelConfig ToChannel(std::uint64_t seed) const;
  friend auto operator<=>(const ImpairmentPoint&, const ImpairmentPoint&) = default;
};

struct ExperimentConfig {
  std::vector<std::uint64_t> seeds;
  int n_agents = 3;
  std::vector<FusionMode> modes = {FusionMode::kNoFusion, FusionMode::kEarly,
                                   FusionMode::kIntermediate, FusionMode::kLate};
  std::vector<double> delay_grid_ms = {0, 100, 200, 300, 400};
  std::vector<double> pos_std_grid = {0, 0.1, 0.2, 0.3, 0.4};
  std::vector<double> heading_std_grid = {0, 0.2, 0.4, 0.6, 0.8};
  std::vector<int> compression_grid = {1, 4, 16, 64};
  std::string output_dir = ".";

  // Seconds of ticks recorded before the evaluated frame.
  double warmup_s = 0.5;
  int frames = 1;   // dataset export only
  int workers = 1;
  FusionOptions fusion;
  ZeroUnionPolicy zero_union = ZeroUnionPolicy::kExclude;
  SceneConfig scene;  // seed and n_agents are overwritten per run

  ExperimentConfig();  // seeds 0..19
  void Validate() const;  // throws std::invalid_argument
};

// Parses a JSON document whose keys mirror the ExperimentConfig fields.
// Unknown keys are rejected. Throws ParseError or std::invalid_argument.
ExperimentConfig ExperimentConfigFromJson(const std::string& text);
ExperimentConfig LoadExperimentConfig(const std::string& path);

// The baseline (no impairment, rate 1) followed by every other grid value
// along one axis at a time, duplicates removed.
std::vector<ImpairmentPoint> SweepPoints(const ExperimentConfig& cfg);

struct RunRecord {
  FusionMode mode = FusionMode::kNoFusion;
  std::uint64_t seed = 0;
  ImpairmentPoint point;
  MetricsReport metrics;
  std::size_t bytes_tx = 0;
};

struct ExperimentResult {
  std::vector<RunRecord> records;  // sorted by (seed, mode, point)
  std::string metrics_csv;
  std::string summary_csv;
};

// Evaluates every (seed, mode, point) and writes metrics.csv and
// summary.csv into cfg.output_dir. Throws IoError before any simulation if
// the directory cannot be written.
ExperimentResult RunExperiment(const ExperimentConfig& cfg);

// Same evaluation for a single seed without touching the filesystem.
std::vector<RunRecord> EvaluateSeed(const ExperimentConfig& cfg, std::uint64_t seed);

// Evaluates one scene (already built) from its current clock.
std::vector<RunRecord> EvaluateScene(const Scene& scene, int ego,
                                     const std::vector<FusionMode>& modes,
                                     const std::vector<ImpairmentPoint>& points,
                                     const ExperimentConfig& cfg);

inline constexpr const char* kMetricsCsvHeader =
    "mode,seed,delay_ms,pos_std,heading_std,compression,iou,miou,ciou,"
    "iou_road,iou_car,iou_terrain,iou_building,iou_vegetation,iou_poles,"
    "bytes_tx";

std::string FormatMetricsCsv(const std::vector<RunRecord>& records);
std::string FormatSummaryCsv(const std::vector<RunRecord>& records);

// scene_<seed>/scene.json, and for each frame k:
// scene_<seed>/frame_<k>/agent_<id>.vpcd (sensor-frame scan),
// scene_<seed>/frame_<k>/agent_<id>.vssc (ground truth in that agent's frame),
// scene_<seed>/frame_<k>/ego_gt.vssc (ground truth of the first agent).
void ExportDataset(const ExperimentConfig& cfg, const std::string& out_dir);

SceneConfig SceneConfigFor(const ExperimentConfig& cfg, std::uint64_t seed);

// Creates the directory if needed and checks a file can be written there.
void EnsureWritableDir(const std::string& dir);

}  // namespace v2vssc

#endif  // V2VSSC_EVAL_HARNESS_H_
