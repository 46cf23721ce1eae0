// Command-line front end: scene generation, single runs, sweeps, grid
// evaluation and dataset export.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "v2vssc/binary_io.h"
#include "v2vssc/eval_harness.h"
#include "v2vssc/metrics.h"
#include "v2vssc/persistence.h"

namespace {

using namespace v2vssc;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

// Raised for argument values CLI11 accepts syntactically but we reject.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

void WriteText(const std::string& path, const std::string& text) {
  WriteFileBytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

struct GenSceneArgs {
  std::uint64_t seed = 0;
  int agents = 3;
  std::string out;
};

struct RunArgs {
  std::string scene;
  int ego = 0;
  std::string fusion = "none";
  double delay_ms = 0.0;
  double pos_noise = 0.0;
  double heading_noise = 0.0;
  int compression = 1;
  std::string out;
  bool late_empty_claims = true;
  std::string zero_union = "exclude";
  double beta = 1.0;
};

ZeroUnionPolicy ParsePolicy(const std::string& s) {
  if (s == "exclude") return ZeroUnionPolicy::kExclude;
  if (s == "score0") return ZeroUnionPolicy::kScoreZero;
  throw UsageError("--miou-zero-union must be exclude or score0");
}

void GenScene(const GenSceneArgs& a) {
  SceneConfig cfg;
  cfg.seed = a.seed;
  cfg.n_agents = a.agents;
  try {
    cfg.Validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  SaveScene(BuildScene(cfg), a.out);
}

void Run(const RunArgs& a) {
  const auto mode = FusionModeFromName(a.fusion);
  if (!mode) throw UsageError("unknown fusion mode " + a.fusion);
  ExperimentConfig cfg;
  cfg.fusion.beta = a.beta;
  cfg.fusion.late_empty_claims = a.late_empty_claims;
  cfg.zero_union = ParsePolicy(a.zero_union);
  const ImpairmentPoint point{a.delay_ms, a.pos_noise, a.heading_noise, a.compression};
  try {
    point.ToChannel(0).Validate();
    if (a.delay_ms / 1000.0 > cfg.warmup_s + 1e-9) {
      throw std::invalid_argument("--delay-ms exceeds the buffered history");
    }
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  EnsureWritableDir(a.out);
  const Scene scene = LoadScene(a.scene);
  try {
    FindAgent(scene, a.ego);
  } catch (const std::out_of_range&) {
    throw UsageError("scene has no agent " + std::to_string(a.ego));
  }
  const CompletionConfig completion;
  const SnapshotBuffer buffer = SimulateAgents(scene, cfg.warmup_s);
  const Scene at_now = StepScene(scene, cfg.warmup_s);
  const FrameResult fr = RunFrame(buffer, a.ego, *mode, point.ToChannel(scene.seed),
                                  completion, at_now.clock(), cfg.fusion);
  const SemanticGrid gt =
      GroundTruthGrid(at_now, SensorPose(at_now, FindAgent(at_now, a.ego)));
  RunRecord r;
  r.mode = *mode;
  r.seed = scene.seed;
  r.point = point;
  r.metrics = Evaluate(fr.prediction.labels, gt, cfg.zero_union);
  r.bytes_tx = fr.bytes_received;

  const fs::path out(a.out);
  SaveGrid(fr.prediction.labels, (out / "prediction.vssc").string());
  SaveGrid(gt, (out / "gt.vssc").string());
  const std::string csv = FormatMetricsCsv({r});
  WriteText((out / "metrics.csv").string(), csv);
  std::cout << csv;
}

void Sweep(const std::string& config_path) {
  ExperimentConfig cfg;
  try {
    cfg = LoadExperimentConfig(config_path);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const ExperimentResult res = RunExperiment(cfg);
  std::cout << res.summary_csv;
}

void Eval(const std::string& pred_path, const std::string& gt_path,
          const std::string& policy) {
  const ZeroUnionPolicy p = ParsePolicy(policy);
  const SemanticGrid pred = LoadGrid(pred_path);
  const SemanticGrid gt = LoadGrid(gt_path);
  if (!(pred.spec == gt.spec)) throw UsageError("grid specs differ");
  const MetricsReport m = Evaluate(pred, gt, p);
  auto show = [](const std::optional<double>& v) {
    char buf[32];
    if (!v) return std::string("nan");
    std::snprintf(buf, sizeof(buf), "%.6f", *v);
    return std::string(buf);
  };
  std::cout << "iou," << show(m.iou) << "\n"
            << "miou," << show(m.miou) << "\n"
            << "ciou," << show(m.ciou) << "\n";
  for (std::size_t c = 0; c < kSemanticClasses.size(); ++c) {
    std::cout << "iou_" << LabelName(kSemanticClasses[c]) << ","
              << show(m.per_class_iou[c]) << "\n";
  }
}

void Dataset(const std::string& config_path, const std::string& out) {
  ExperimentConfig cfg;
  try {
    cfg = LoadExperimentConfig(config_path);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  ExportDataset(cfg, out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative semantic scene completion simulator"};
  app.require_subcommand(1);

  GenSceneArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-scene", "Generate a scene document");
  gen_cmd->add_option("--seed", gen.seed, "Scene seed")->required();
  gen_cmd->add_option("--agents", gen.agents, "Connected vehicles (2-7)");
  gen_cmd->add_option("--out", gen.out, "Output scene.json")->required();

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Evaluate one ego frame");
  run_cmd->add_option("--scene", run.scene, "Scene document")->required();
  run_cmd->add_option("--ego", run.ego, "Ego agent id");
  run_cmd->add_option("--fusion", run.fusion, "Fusion mode")
      ->check(CLI::IsMember({"none", "early", "intermediate", "late"}));
  run_cmd->add_option("--delay-ms", run.delay_ms, "Channel delay (ms)");
  run_cmd->add_option("--pos-noise", run.pos_noise, "Position noise std (m)");
  run_cmd->add_option("--heading-noise", run.heading_noise, "Heading noise std (deg)");
  run_cmd->add_option("--compression", run.compression, "Feature compression rate")
      ->check(CLI::IsMember({1, 4, 16, 64}));
  run_cmd->add_option("--out", run.out, "Output directory")->required();
  run_cmd->add_option("--late-empty-claims", run.late_empty_claims,
                      "Let Empty claims compete in late fusion");
  run_cmd->add_option("--miou-zero-union", run.zero_union,
                      "Classes absent from both grids: exclude or score0");
  run_cmd->add_option("--beta", run.beta, "Intermediate fusion temperature");

  std::string sweep_config;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run an impairment sweep");
  sweep_cmd->add_option("--config", sweep_config, "Experiment config JSON")->required();

  std::string pred_path, gt_path, eval_policy = "exclude";
  auto* eval_cmd = app.add_subcommand("eval", "Score a predicted grid");
  eval_cmd->add_option("--pred", pred_path, "Predicted grid")->required();
  eval_cmd->add_option("--gt", gt_path, "Ground-truth grid")->required();
  eval_cmd->add_option("--miou-zero-union", eval_policy,
                       "Classes absent from both grids: exclude or score0");

  std::string dataset_config, dataset_out;
  auto* dataset_cmd = app.add_subcommand("dataset", "Export clouds and grids");
  dataset_cmd->add_option("--config", dataset_config, "Experiment config JSON")
      ->required();
  dataset_cmd->add_option("--out", dataset_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen_cmd) GenScene(gen);
    if (*run_cmd) Run(run);
    if (*sweep_cmd) Sweep(sweep_config);
    if (*eval_cmd) Eval(pred_path, gt_path, eval_policy);
    if (*dataset_cmd) Dataset(dataset_config, dataset_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
