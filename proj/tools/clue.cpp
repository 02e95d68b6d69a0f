// clue: dataset generation, training, evaluation, robustness sweeps,
// ablations and report rendering.

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "clue/harness.hpp"

namespace fs = std::filesystem;
using namespace clue;

namespace {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kConfig = 3,
  kFormat = 4,
  kDomain = 5,
  kNumeric = 6,
};

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  std::optional<std::string> data;
};

// Output directory of the current command, for the error record.
fs::path g_error_dir;

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config, "JSON config file");
  cmd->add_option("-s,--set", o.overrides, "override a config key, e.g. model.noise.shift=4")
      ->take_all();
  cmd->add_option("--epochs", o.epochs, "train.epochs");
  cmd->add_option("--seed", o.seed, "seed");
  cmd->add_option("-o,--output", o.output, "output_dir");
  cmd->add_option("-d,--data", o.data, "dataset directory (generated in memory when absent)");
}

ExperimentConfig build_config(const CommonOptions& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  for (const auto& s : o.overrides) apply_override(cfg, s);
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (o.seed) cfg.seed = *o.seed;
  if (o.output) cfg.output_dir = *o.output;
  cfg.validate();
  return cfg;
}

std::optional<fs::path> data_dir(const CommonOptions& o) {
  if (!o.data) return std::nullopt;
  return fs::path(*o.data);
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

std::vector<std::pair<std::string, std::vector<ForgerySample>>> by_split(
    const std::vector<ForgerySample>& samples) {
  std::vector<std::pair<std::string, std::vector<ForgerySample>>> out;
  for (const auto& s : samples) {
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& p) { return p.first == s.split; });
    if (it == out.end()) {
      out.push_back({s.split, {}});
      it = out.end() - 1;
    }
    it->second.push_back(s);
  }
  return out;
}

void write_report(const MetricReport& report, const fs::path& dir) {
  write_file(dir / "metrics.csv", report.to_csv());
  write_file(dir / "metrics.json", report.to_json().dump(2) + "\n");
  std::cout << report.to_csv();
}

int run_forgegen(const CommonOptions& o) {
  const ExperimentConfig cfg = build_config(o);
  const fs::path dir = resolve_output(o.output ? *o.output : "data");
  g_error_dir = dir;
  write_dataset(cfg.data, dir);
  std::cout << "wrote dataset to " << dir.string() << "\n";
  return kOk;
}

int run_train(const CommonOptions& o, const std::optional<std::string>& resume) {
  const ExperimentConfig cfg = build_config(o);
  const fs::path dir = resolve_output(cfg.output_dir);
  g_error_dir = dir;
  const DataSplits data = prepare_data(cfg, data_dir(o));
  std::optional<fs::path> resume_path;
  if (resume) resume_path = *resume;
  const TrainResult tr = train(cfg, data, dir, resume_path, &std::cerr);
  const LoadedModel best = load_model(tr.best_checkpoint, &cfg);
  write_report(evaluate(cfg, *best.model, by_split(data.test)), dir);
  return kOk;
}

// Model settings come from the checkpoint. --config replaces the stored
// config and --set edits it; either way the result must hash to the
// checkpoint's, apart from the binarization threshold.
LoadedModel load_for_eval(const CommonOptions& o, const std::string& checkpoint,
                          std::optional<double> threshold) {
  const CheckpointInfo info = read_checkpoint_info(checkpoint);
  ExperimentConfig cfg = o.config.empty() ? info.config : load_config(o.config);
  for (const auto& s : o.overrides) apply_override(cfg, s);
  if (o.seed) cfg.seed = *o.seed;
  if (threshold) cfg.threshold = *threshold;
  ExperimentConfig check = cfg;
  check.threshold = info.config.threshold;
  LoadedModel lm = load_model(checkpoint, &check);
  lm.config = cfg;
  if (o.output) lm.config.output_dir = *o.output;
  lm.config.validate();
  return lm;
}

std::vector<ForgerySample> eval_samples(const ExperimentConfig& cfg, const CommonOptions& o) {
  return prepare_data(cfg, data_dir(o)).test;
}

int run_eval(const CommonOptions& o, const std::string& checkpoint,
             std::optional<double> threshold, bool dump) {
  const LoadedModel lm = load_for_eval(o, checkpoint, threshold);
  const fs::path dir = resolve_output(lm.config.output_dir);
  g_error_dir = dir;
  const auto samples = eval_samples(lm.config, o);
  write_report(evaluate(lm.config, *lm.model, by_split(samples), dump ? dir / "masks" : fs::path{}),
               dir);
  return kOk;
}

int run_attack(const CommonOptions& o, const std::string& checkpoint,
               const std::vector<std::string>& attacks, const std::vector<double>& grid,
               bool dump) {
  const LoadedModel lm = load_for_eval(o, checkpoint, std::nullopt);
  const fs::path dir = resolve_output(lm.config.output_dir);
  g_error_dir = dir;
  std::vector<AttackKind> kinds;
  if (attacks.empty() || (attacks.size() == 1 && attacks[0] == "all")) {
    kinds.assign(std::begin(kAllAttacks), std::end(kAllAttacks));
  } else {
    for (const auto& a : attacks) kinds.push_back(attack_kind_from_string(a));
  }
  if (!grid.empty() && kinds.size() != 1)
    throw ConfigError("--grid needs exactly one --attack");

  const auto samples = eval_samples(lm.config, o);
  std::vector<RobustnessRow> rows;
  for (AttackKind k : kinds) {
    AttackSpec spec = AttackSpec::defaults(k);
    if (!grid.empty()) spec.grid = grid;
    auto part = robustness_curve(lm.config, *lm.model, samples, spec,
                                 dump ? dir / "attack_masks" : fs::path{});
    rows.insert(rows.end(), part.begin(), part.end());
  }
  const std::string csv = robustness_csv(rows);
  write_file(dir / "robustness.csv", csv);
  std::cout << csv;
  return kOk;
}

int run_ablate(const CommonOptions& o, const std::string& table) {
  const ExperimentConfig cfg = build_config(o);
  const fs::path dir = resolve_output(cfg.output_dir);
  g_error_dir = dir;
  std::vector<AblationTable> tables;
  if (table == "all")
    tables = {AblationTable::kComponents, AblationTable::kNoise, AblationTable::kShift};
  else
    tables = {ablation_table_from_string(table)};
  const DataSplits data = prepare_data(cfg, data_dir(o));
  for (AblationTable t : tables) {
    const AblationResult r = run_ablation(cfg, t, data, dir, &std::cerr);
    std::cout << "# " << to_string(t) << "\n" << r.to_csv();
  }
  return kOk;
}

int run_report(const std::string& input, const std::optional<std::string>& output) {
  const fs::path dir = resolve_output(input);
  const std::string md = render_report(dir);
  if (output)
    write_file(resolve_output(*output), md);
  else
    std::cout << md;
  return kOk;
}

nlohmann::json error_record(const std::string& type, const std::string& message, int code) {
  return {{"status", "error"}, {"type", type}, {"message", message}, {"exit_code", code}};
}

int fail(const std::string& type, const std::string& message, int code) {
  const nlohmann::json rec = error_record(type, message, code);
  std::cerr << rec.dump() << "\n";
  if (!g_error_dir.empty()) {
    std::error_code ec;
    fs::create_directories(g_error_dir, ec);
    std::ofstream(g_error_dir / "error.json") << rec.dump(2) << "\n";
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CLUE forgery localization toolkit"};
  app.require_subcommand(1);

  CommonOptions opts;
  std::string checkpoint;
  std::optional<std::string> resume;
  std::optional<double> threshold;
  bool dump = false;
  std::vector<std::string> attacks;
  std::vector<double> grid;
  std::string table = "all";
  std::string report_input = "runs";
  std::optional<std::string> report_output;

  auto* forgegen = app.add_subcommand("forgegen", "write a synthetic forgery dataset");
  add_common(forgegen, opts);

  auto* train_cmd = app.add_subcommand("train", "train, then evaluate the best checkpoint");
  add_common(train_cmd, opts);
  train_cmd->add_option("--resume", resume, "checkpoint to resume from");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test splits");
  add_common(eval_cmd, opts);
  eval_cmd->add_option("--checkpoint", checkpoint)->required();
  eval_cmd->add_option("--threshold", threshold, "binarization threshold");
  eval_cmd->add_flag("--dump-masks", dump, "write per-sample probability and binary masks");

  auto* attack_cmd = app.add_subcommand("attack", "robustness curves under image attacks");
  add_common(attack_cmd, opts);
  attack_cmd->add_option("--checkpoint", checkpoint)->required();
  attack_cmd->add_option("--attack", attacks, "jpeg, gauss_noise, gauss_blur, resize or all");
  attack_cmd->add_option("--grid", grid, "intensities for a single attack")->delimiter(',');
  attack_cmd->add_flag("--dump-masks", dump, "write per-sample masks for every grid point");

  auto* ablate_cmd = app.add_subcommand("ablate", "train and compare ablation cells");
  add_common(ablate_cmd, opts);
  ablate_cmd->add_option("--table", table, "components, noise, shift or all");

  auto* report_cmd = app.add_subcommand("report", "render CSV results as markdown");
  report_cmd->add_option("input", report_input, "results directory");
  report_cmd->add_option("-o,--output", report_output, "markdown file (stdout when absent)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("UsageError", e.what(), kUsage);
  }

  if (opts.output) g_error_dir = resolve_output(*opts.output);
  try {
    if (*forgegen) return run_forgegen(opts);
    if (*train_cmd) return run_train(opts, resume);
    if (*eval_cmd) return run_eval(opts, checkpoint, threshold, dump);
    if (*attack_cmd) return run_attack(opts, checkpoint, attacks, grid, dump);
    if (*ablate_cmd) return run_ablate(opts, table);
    if (*report_cmd) return run_report(report_input, report_output);
  } catch (const ConfigError& e) {
    return fail("ConfigError", e.what(), kConfig);
  } catch (const FormatError& e) {
    return fail("FormatError", e.what(), kFormat);
  } catch (const DimensionError& e) {
    return fail("DimensionError", e.what(), kDomain);
  } catch (const DomainError& e) {
    return fail("DomainError", e.what(), kDomain);
  } catch (const NumericError& e) {
    return fail("NumericError", e.what(), kNumeric);
  } catch (const std::exception& e) {
    return fail("InternalError", e.what(), kInternal);
  }
  return kUsage;
}
