#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "clue/attacks.hpp"
#include "clue/checkpoint.hpp"
#include "clue/config.hpp"
#include "clue/forgegen.hpp"
#include "clue/metrics.hpp"
#include "clue/model.hpp"

namespace clue {

struct DataSplits {
  std::vector<ForgerySample> train;
  std::vector<ForgerySample> val;
  std::vector<ForgerySample> test;
};

// Reads `data_dir` when given, otherwise generates cfg.data in memory. The
// validation set is a seeded val_fraction share of the train split; every
// split other than train lands in `test`.
DataSplits prepare_data(const ExperimentConfig& cfg,
                        const std::optional<std::filesystem::path>& data_dir);

// Seed of the per-sample evaluation noise stream.
std::uint64_t eval_noise_seed(const ExperimentConfig& cfg, const std::string& id);

using ImageTransform = std::function<ImageTensor(const ForgerySample&)>;

struct SampleScore {
  std::string id;
  F1IoU score;
};

// Scores every sample at cfg.threshold. `transform` replaces the input image
// (masks are never touched); `dump_dir` receives <id>_prob.png and
// <id>_mask.png when non-empty.
std::vector<SampleScore> score_samples(const ExperimentConfig& cfg, const ClueModel& model,
                                       const std::vector<ForgerySample>& samples,
                                       const ImageTransform& transform = nullptr,
                                       const std::filesystem::path& dump_dir = {});

DatasetMetrics evaluate_samples(const ExperimentConfig& cfg, const ClueModel& model,
                                const std::string& name,
                                const std::vector<ForgerySample>& samples,
                                const std::filesystem::path& dump_dir = {});

struct EpochLog {
  int epoch = 0;
  double train_loss = 0;
  double val_f1 = 0;
  double val_iou = 0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
  double best_val_f1 = -1;
};

// Trains the non-frozen parameters on `data.train`, selects on `data.val`,
// and writes config.json, train_log.csv, best.ckpt and last.ckpt under
// `out_dir`. Throws NumericError naming the first non-finite tensor.
TrainResult train(const ExperimentConfig& cfg, const DataSplits& data,
                  const std::filesystem::path& out_dir,
                  const std::optional<std::filesystem::path>& resume = std::nullopt,
                  std::ostream* progress = nullptr);

std::string train_log_csv(const std::vector<EpochLog>& log);

// Builds a model and fills it from a checkpoint. When `expected` is given
// its hash must match the checkpoint's.
struct LoadedModel {
  ExperimentConfig config;
  std::unique_ptr<ClueModel> model;
};
LoadedModel load_model(const std::filesystem::path& checkpoint,
                       const ExperimentConfig* expected = nullptr);

// One report row per named split.
MetricReport evaluate(const ExperimentConfig& cfg, const ClueModel& model,
                      const std::vector<std::pair<std::string, std::vector<ForgerySample>>>& splits,
                      const std::filesystem::path& dump_dir = {});

struct RobustnessRow {
  std::string attack;
  std::string intensity;  // "clean" for the baseline row
  double f1 = 0;
  double iou = 0;
};

// Clean baseline followed by one row per grid point.
std::vector<RobustnessRow> robustness_curve(const ExperimentConfig& cfg, const ClueModel& model,
                                            const std::vector<ForgerySample>& samples,
                                            const AttackSpec& spec,
                                            const std::filesystem::path& dump_dir = {});
std::string robustness_csv(const std::vector<RobustnessRow>& rows);

enum class AblationTable { kComponents, kNoise, kShift };
std::string to_string(AblationTable t);
AblationTable ablation_table_from_string(const std::string& s);

struct AblationCell {
  std::vector<std::string> labels;  // one per key column
  ExperimentConfig config;
};

struct AblationResult {
  AblationTable table = AblationTable::kComponents;
  std::vector<std::string> key_columns;
  std::vector<std::vector<std::string>> labels;
  std::vector<MetricReport> reports;

  std::string to_csv() const;
};

// Components: (SD3, SAM) ∈ (tuned, frozen), (tuned, removed),
// (removed, tuned), (frozen, tuned), (tuned, tuned). Noise: zero, ddpm, rf.
// Shift: 0.5, 1, 3, 4, 6.
std::vector<AblationCell> ablation_grid(const ExperimentConfig& base, AblationTable table);

// Trains every cell on the same data and evaluates its best checkpoint on
// the test splits. Cell outputs go to out_dir/<table>/<index>.
AblationResult run_ablation(const ExperimentConfig& base, AblationTable table,
                            const DataSplits& data, const std::filesystem::path& out_dir,
                            std::ostream* progress = nullptr);

// Markdown rendering of every CSV table found in `dir` (recursively).
std::string render_report(const std::filesystem::path& dir);
std::string csv_to_markdown(const std::string& csv);

}  // namespace clue
