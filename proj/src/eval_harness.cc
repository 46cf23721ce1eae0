#include "v2vssc/eval_harness.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "v2vssc/binary_io.h"
#include "v2vssc/lidar_sim.h"
#include "v2vssc/persistence.h"

namespace v2vssc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string Fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::string FmtMetric(const std::optional<double>& v) {
  return v ? Fmt("%.6f", *v) : "nan";
}

std::string FmtAxis(double v) { return Fmt("%g", v); }

template <class T>
std::vector<T> ReadList(const json& j, const char* key) {
  if (!j.is_array()) {
    throw std::invalid_argument(std::string(key) + " must be a list");
  }
  return j.get<std::vector<T>>();
}

void ApplySceneOverrides(const json& j, SceneConfig* s) {
  for (const auto& [key, v] : j.items()) {
    if (key == "n_background_cars") s->n_background_cars = v.get<int>();
    else if (key == "road_width") s->road_width = v.get<double>();
    else if (key == "cross_road") s->cross_road = v.get<bool>();
    else if (key == "half_extent") s->half_extent = v.get<double>();
    else if (key == "agent_spread") s->agent_spread = v.get<double>();
    else if (key == "building_density") s->building_density = v.get<double>();
    else if (key == "pole_density") s->pole_density = v.get<double>();
    else if (key == "tree_density") s->tree_density = v.get<double>();
    else if (key == "speed_min") s->speed_min = v.get<double>();
    else if (key == "speed_max") s->speed_max = v.get<double>();
    else if (key == "parked_fraction") s->parked_fraction = v.get<double>();
    else throw std::invalid_argument("unknown scene key \"" + key + "\"");
  }
}

// Mean of the defined values; nullopt if none.
std::optional<double> MeanOf(const std::vector<std::optional<double>>& vals) {
  double sum = 0.0;
  int n = 0;
  for (const auto& v : vals) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

std::string PointColumns(const ImpairmentPoint& p) {
  return FmtAxis(p.delay_ms) + "," + FmtAxis(p.pos_std) + "," +
         FmtAxis(p.heading_std) + "," + std::to_string(p.compression);
}

void WriteText(const fs::path& path, const std::string& text) {
  WriteFileBytes(path.string(), std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace

ChannelConfig ImpairmentPoint::ToChannel(std::uint64_t seed) const {
  ChannelConfig c;
  c.delay_s = delay_ms / 1000.0;
  c.pos_std_m = pos_std;
  c.heading_std_rad = DegToRad(heading_std);
  c.compression.rate = compression;
  c.seed = seed;
  return c;
}

ExperimentConfig::ExperimentConfig() {
  for (std::uint64_t s = 0; s < 20; ++s) seeds.push_back(s);
}

void ExperimentConfig::Validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument(m); };
  if (seeds.empty()) fail("seeds must be non-empty");
  if (modes.empty()) fail("modes must be non-empty");
  if (delay_grid_ms.empty() || pos_std_grid.empty() || heading_std_grid.empty() ||
      compression_grid.empty()) {
    fail("impairment grids must be non-empty");
  }
  for (double d : delay_grid_ms) {
    if (!(d >= 0.0)) fail("delays must be >= 0");
  }
  for (double p : pos_std_grid) {
    if (!(p >= 0.0)) fail("pos_std values must be >= 0");
  }
  for (double h : heading_std_grid) {
    if (!(h >= 0.0)) fail("heading_std values must be >= 0");
  }
  for (int r : compression_grid) {
    if (r != 1 && r != 4 && r != 16 && r != 64) {
      fail("compression rate " + std::to_string(r) + " not in {1, 4, 16, 64}");
    }
  }
  if (n_agents < 2 || n_agents > 7) fail("n_agents must be in [2, 7]");
  if (!(warmup_s >= SnapshotBuffer::kTick * 4 - 1e-9)) {
    fail("warmup_s must cover the largest delay tick");
  }
  for (double d : delay_grid_ms) {
    if (d / 1000.0 > warmup_s + 1e-9) fail("delay exceeds the warm-up window");
  }
  if (frames < 1) fail("frames must be >= 1");
  if (workers < 1) fail("workers must be >= 1");
  if (!std::isfinite(fusion.beta) || fusion.beta <= 0.0) fail("beta must be > 0");
  SceneConfig s = scene;
  s.n_agents = n_agents;
  s.Validate();
}

ExperimentConfig ExperimentConfigFromJson(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(ParseError::Kind::kInvalidValue, e.byte, e.what());
  }
  if (!j.is_object()) {
    throw ParseError(ParseError::Kind::kInvalidValue, 0, "config must be an object");
  }
  ExperimentConfig cfg;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "seeds") {
        cfg.seeds = ReadList<std::uint64_t>(v, "seeds");
      } else if (key == "n_agents") {
        cfg.n_agents = v.get<int>();
      } else if (key == "modes") {
        cfg.modes.clear();
        for (const auto& name : ReadList<std::string>(v, "modes")) {
          const auto m = FusionModeFromName(name);
          if (!m) throw std::invalid_argument("unknown fusion mode \"" + name + "\"");
          cfg.modes.push_back(*m);
        }
      } else if (key == "delay_grid_ms") {
        cfg.delay_grid_ms = ReadList<double>(v, "delay_grid_ms");
      } else if (key == "pos_std_grid") {
        cfg.pos_std_grid = ReadList<double>(v, "pos_std_grid");
      } else if (key == "heading_std_grid") {
        cfg.heading_std_grid = ReadList<double>(v, "heading_std_grid");
      } else if (key == "compression_grid") {
        cfg.compression_grid = ReadList<int>(v, "compression_grid");
      } else if (key == "output_dir") {
        cfg.output_dir = v.get<std::string>();
      } else if (key == "warmup_s") {
        cfg.warmup_s = v.get<double>();
      } else if (key == "frames") {
        cfg.frames = v.get<int>();
      } else if (key == "workers") {
        cfg.workers = v.get<int>();
      } else if (key == "beta") {
        cfg.fusion.beta = v.get<double>();
      } else if (key == "late_empty_claims") {
        cfg.fusion.late_empty_claims = v.get<bool>();
      } else if (key == "miou_zero_union") {
        const auto s = v.get<std::string>();
        if (s == "exclude") cfg.zero_union = ZeroUnionPolicy::kExclude;
        else if (s == "score0") cfg.zero_union = ZeroUnionPolicy::kScoreZero;
        else throw std::invalid_argument("miou_zero_union must be exclude or score0");
      } else if (key == "scene") {
        ApplySceneOverrides(v, &cfg.scene);
      } else {
        throw std::invalid_argument("unknown config key \"" + key + "\"");
      }
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  cfg.Validate();
  return cfg;
}

ExperimentConfig LoadExperimentConfig(const std::string& path) {
  const auto bytes = ReadFileBytes(path);
  return ExperimentConfigFromJson(std::string(bytes.begin(), bytes.end()));
}

std::vector<ImpairmentPoint> SweepPoints(const ExperimentConfig& cfg) {
  std::vector<ImpairmentPoint> points{ImpairmentPoint{}};
  auto add = [&](const ImpairmentPoint& p) {
    if (std::find(points.begin(), points.end(), p) == points.end()) points.push_back(p);
  };
  for (double d : cfg.delay_grid_ms) add({d, 0.0, 0.0, 1});
  for (double p : cfg.pos_std_grid) add({0.0, p, 0.0, 1});
  for (double h : cfg.heading_std_grid) add({0.0, 0.0, h, 1});
  for (int r : cfg.compression_grid) add({0.0, 0.0, 0.0, r});
  return points;
}

SceneConfig SceneConfigFor(const ExperimentConfig& cfg, std::uint64_t seed) {
  SceneConfig s = cfg.scene;
  s.seed = seed;
  s.n_agents = cfg.n_agents;
  return s;
}

std::vector<RunRecord> EvaluateScene(const Scene& scene, int ego,
                                     const std::vector<FusionMode>& modes,
                                     const std::vector<ImpairmentPoint>& points,
                                     const ExperimentConfig& cfg) {
  FindAgent(scene, ego);  // throws for an unknown ego
  const CompletionConfig completion;
  const SnapshotBuffer buffer =
      SimulateAgents(scene, cfg.warmup_s, LidarSpec{}, GridSpec::Default(), completion);
  const Scene at_now = StepScene(scene, cfg.warmup_s);
  const double now = at_now.clock();
  const SemanticGrid gt =
      GroundTruthGrid(at_now, SensorPose(at_now, FindAgent(at_now, ego)));

  std::vector<RunRecord> records;
  for (FusionMode mode : modes) {
    for (const ImpairmentPoint& p : points) {
      const FrameResult fr = RunFrame(buffer, ego, mode, p.ToChannel(scene.seed),
                                      completion, now, cfg.fusion);
      RunRecord r;
      r.mode = mode;
      r.seed = scene.seed;
      r.point = p;
      r.metrics = Evaluate(fr.prediction.labels, gt, cfg.zero_union);
      r.bytes_tx = fr.bytes_received;
      records.push_back(std::move(r));
    }
  }
  return records;
}

std::vector<RunRecord> EvaluateSeed(const ExperimentConfig& cfg, std::uint64_t seed) {
  const Scene scene = BuildScene(SceneConfigFor(cfg, seed));
  return EvaluateScene(scene, scene.agents.front().id, cfg.modes, SweepPoints(cfg), cfg);
}

void EnsureWritableDir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir);
  }
  const fs::path probe = fs::path(dir) / ".write_probe";
  try {
    WriteFileBytes(probe.string(), {});
  } catch (const IoError&) {
    throw IoError("output directory " + dir + " is not writable");
  }
  fs::remove(probe, ec);
}

std::string FormatMetricsCsv(const std::vector<RunRecord>& records) {
  std::string out = std::string(kMetricsCsvHeader) + "\n";
  for (const RunRecord& r : records) {
    out += std::string(FusionModeName(r.mode)) + "," + std::to_string(r.seed) + "," +
           PointColumns(r.point) + "," + Fmt("%.6f", r.metrics.iou) + "," +
           FmtMetric(r.metrics.miou) + "," + FmtMetric(r.metrics.ciou);
    for (const auto& c : r.metrics.per_class_iou) out += "," + FmtMetric(c);
    out += "," + std::to_string(r.bytes_tx) + "\n";
  }
  return out;
}

std::string FormatSummaryCsv(const std::vector<RunRecord>& records) {
  using Key = std::pair<FusionMode, ImpairmentPoint>;
  std::map<Key, std::vector<const RunRecord*>> groups;
  for (const RunRecord& r : records) groups[{r.mode, r.point}].push_back(&r);

  std::string out =
      "mode,delay_ms,pos_std,heading_std,compression,n_seeds,iou,miou,ciou,"
      "iou_road,iou_car,iou_terrain,iou_building,iou_vegetation,iou_poles,"
      "bytes_tx\n";
  for (const auto& [key, rs] : groups) {
    std::vector<std::optional<double>> iou, miou, ciou;
    std::array<std::vector<std::optional<double>>, 6> cls;
    double bytes = 0.0;
    for (const RunRecord* r : rs) {
      iou.push_back(r->metrics.iou);
      miou.push_back(r->metrics.miou);
      ciou.push_back(r->metrics.ciou);
      for (int c = 0; c < 6; ++c) cls[c].push_back(r->metrics.per_class_iou[c]);
      bytes += static_cast<double>(r->bytes_tx);
    }
    out += std::string(FusionModeName(key.first)) + "," + PointColumns(key.second) +
           "," + std::to_string(rs.size()) + "," + FmtMetric(MeanOf(iou)) + "," +
           FmtMetric(MeanOf(miou)) + "," + FmtMetric(MeanOf(ciou));
    for (const auto& c : cls) out += "," + FmtMetric(MeanOf(c));
    out += "," + Fmt("%.1f", bytes / static_cast<double>(rs.size())) + "\n";
  }
  return out;
}

ExperimentResult RunExperiment(const ExperimentConfig& cfg) {
  cfg.Validate();
  EnsureWritableDir(cfg.output_dir);

  std::vector<std::vector<RunRecord>> per_seed(cfg.seeds.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cfg.seeds.size()) return;
      try {
        per_seed[i] = EvaluateSeed(cfg, cfg.seeds[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        next = cfg.seeds.size();
      }
    }
  };
  const int n_threads =
      std::min<int>(cfg.workers, static_cast<int>(cfg.seeds.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  ExperimentResult result;
  for (auto& rs : per_seed) {
    for (auto& r : rs) result.records.push_back(std::move(r));
  }
  std::stable_sort(result.records.begin(), result.records.end(),
                   [](const RunRecord& a, const RunRecord& b) {
                     return std::tie(a.seed, a.mode, a.point) <
                            std::tie(b.seed, b.mode, b.point);
                   });
  result.metrics_csv = FormatMetricsCsv(result.records);
  result.summary_csv = FormatSummaryCsv(result.records);
  WriteText(fs::path(cfg.output_dir) / "metrics.csv", result.metrics_csv);
  WriteText(fs::path(cfg.output_dir) / "summary.csv", result.summary_csv);
  return result;
}

void ExportDataset(const ExperimentConfig& cfg, const std::string& out_dir) {
  cfg.Validate();
  EnsureWritableDir(out_dir);
  const LidarSpec lidar;
  for (std::uint64_t seed : cfg.seeds) {
    const Scene scene = BuildScene(SceneConfigFor(cfg, seed));
    const fs::path scene_dir = fs::path(out_dir) / ("scene_" + std::to_string(seed));
    EnsureWritableDir(scene_dir.string());
    SaveScene(scene, (scene_dir / "scene.json").string());
    for (int k = 0; k < cfg.frames; ++k) {
      const Scene at = StepScene(scene, k * SnapshotBuffer::kTick);
      const fs::path frame_dir = scene_dir / ("frame_" + std::to_string(k));
      EnsureWritableDir(frame_dir.string());
      for (const AgentSpec& agent : at.agents) {
        const std::string stem = "agent_" + std::to_string(agent.id);
        SavePointCloud(ScanAgent(at, agent, lidar), (frame_dir / (stem + ".vpcd")).string());
        SaveGrid(GroundTruthGrid(at, SensorPose(at, agent)),
                 (frame_dir / (stem + ".vssc")).string());
      }
      const AgentSpec& ego = at.agents.front();
      SaveGrid(GroundTruthGrid(at, SensorPose(at, ego)),
               (frame_dir / "ego_gt.vssc").string());
    }
  }
}

}  // namespace v2vssc
