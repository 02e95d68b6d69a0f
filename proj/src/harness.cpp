#include "clue/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "clue/image_io.hpp"
#include "clue/image_ops.hpp"
#include "clue/losses.hpp"
#include "clue/optim.hpp"

namespace clue {
namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

const Tensor* first_non_finite(const Tensor& t) {
  for (float v : t.values())
    if (!std::isfinite(v)) return &t;
  return nullptr;
}

void check_finite(const Tensor& t, const std::string& what) {
  if (first_non_finite(t)) throw NumericError("non-finite values in " + what);
}

std::vector<F1IoU> scores_of(const std::vector<SampleScore>& s) {
  std::vector<F1IoU> out;
  out.reserve(s.size());
  for (const auto& x : s) out.push_back(x.score);
  return out;
}

std::vector<EpochLog> parse_train_log(const fs::path& path, int max_epoch) {
  std::vector<EpochLog> log;
  if (!fs::exists(path)) return log;
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    EpochLog e;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf", &e.epoch, &e.train_loss, &e.val_f1,
                    &e.val_iou) == 4 &&
        e.epoch <= max_epoch)
      log.push_back(e);
  }
  return log;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

DataSplits prepare_data(const ExperimentConfig& cfg, const std::optional<fs::path>& data_dir) {
  std::vector<ForgerySample> all = data_dir ? read_dataset(*data_dir) : generate_dataset(cfg.data);
  DataSplits out;
  std::vector<ForgerySample> train_all;
  for (auto& s : all) {
    if (s.split == "train")
      train_all.push_back(std::move(s));
    else
      out.test.push_back(std::move(s));
  }
  const auto n_val = static_cast<std::size_t>(
      std::lround(cfg.train.val_fraction * static_cast<double>(train_all.size())));
  std::vector<std::size_t> idx(train_all.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(sample_seed(cfg.data.seed, "val-split"));
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<bool> is_val(train_all.size(), false);
  for (std::size_t i = 0; i < n_val && i < idx.size(); ++i) is_val[idx[i]] = true;
  for (std::size_t i = 0; i < train_all.size(); ++i) {
    if (is_val[i]) {
      train_all[i].split = "val";
      out.val.push_back(std::move(train_all[i]));
    } else {
      out.train.push_back(std::move(train_all[i]));
    }
  }
  return out;
}

std::uint64_t eval_noise_seed(const ExperimentConfig& cfg, const std::string& id) {
  return sample_seed(cfg.model.noise.seed, "eval:" + id);
}

std::vector<SampleScore> score_samples(const ExperimentConfig& cfg, const ClueModel& model,
                                       const std::vector<ForgerySample>& samples,
                                       const ImageTransform& transform,
                                       const fs::path& dump_dir) {
  if (!dump_dir.empty()) fs::create_directories(dump_dir);
  std::vector<SampleScore> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    std::mt19937_64 rng(eval_noise_seed(cfg, s.id));
    const ImageTensor input = transform ? transform(s) : s.image;
    const MaskTensor prob = model.predict(input, rng);
    check_finite(prob, "prediction for sample " + s.id);
    const MaskTensor bin = binarize(prob, static_cast<float>(cfg.threshold));
    out.push_back({s.id, f1_iou(bin, s.mask)});
    if (!dump_dir.empty()) {
      write_png(dump_dir / (s.id + "_prob.png"), prob);
      write_png(dump_dir / (s.id + "_mask.png"), bin);
    }
  }
  return out;
}

DatasetMetrics evaluate_samples(const ExperimentConfig& cfg, const ClueModel& model,
                                const std::string& name,
                                const std::vector<ForgerySample>& samples,
                                const fs::path& dump_dir) {
  return summarize(name, scores_of(score_samples(cfg, model, samples, nullptr, dump_dir)),
                   cfg.threshold);
}

std::string train_log_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,train_loss,val_f1,val_iou\n";
  for (const auto& e : log)
    out += std::to_string(e.epoch) + "," + format_metric(e.train_loss) + "," +
           format_metric(e.val_f1) + "," + format_metric(e.val_iou) + "\n";
  return out;
}

TrainResult train(const ExperimentConfig& cfg, const DataSplits& data, const fs::path& out_dir,
                  const std::optional<fs::path>& resume, std::ostream* progress) {
  cfg.validate();
  if (data.train.empty()) throw ConfigError("training split is empty");
  fs::create_directories(out_dir);
  save_config(cfg, out_dir / "config.json");

  ClueModel model(cfg.model);
  Adam opt(cfg.optimizer, model.store());
  TrainState state;
  state.order_rng.seed(sample_seed(cfg.seed, "order"));

  TrainResult result;
  result.best_checkpoint = out_dir / "best.ckpt";
  result.last_checkpoint = out_dir / "last.ckpt";
  if (resume) {
    load_checkpoint(*resume, cfg, model, &opt, &state);
    result.log = parse_train_log(out_dir / "train_log.csv", state.epoch);
    if (progress) *progress << "resumed at epoch " << state.epoch << "\n";
  }
  result.best_val_f1 = state.best_val_f1;

  ParamStore& store = model.store();
  const int batch = cfg.train.batch_size;
  std::vector<std::size_t> order(data.train.size());

  for (int epoch = state.epoch + 1; epoch <= cfg.train.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), state.order_rng);

    double loss_sum = 0;
    std::size_t n_batches = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(batch)) {
      const std::size_t end = std::min(order.size(), b + static_cast<std::size_t>(batch));
      const float inv = 1.0f / static_cast<float>(end - b);
      GradBuffer grads(static_cast<std::size_t>(store.size()));
      double batch_loss = 0;
      for (std::size_t i = b; i < end; ++i) {
        const ForgerySample& s = data.train[order[i]];
        std::mt19937_64 rng(
            sample_seed(cfg.seed, "train:" + std::to_string(epoch) + ":" + s.id));
        ImageTensor image = s.image;
        MaskTensor mask = s.mask;
        if (cfg.train.augment) {
          const int op = static_cast<int>(rng() % 8);
          image = dihedral(image, op);
          mask = dihedral(mask, op);
        }
        ag::Tape tape;
        ag::Var prob = model.forward(tape, image, rng);
        check_finite(prob.value(), "prediction for sample " + s.id);
        ag::Var loss = ag::scale(ag::total_loss(prob, mask, cfg.loss), inv);
        batch_loss += loss.value()[0];
        tape.backward(loss);
        tape.accumulate_param_grads(grads);
      }
      for (ParamId id = 0; id < store.size(); ++id)
        if (!grads[static_cast<std::size_t>(id)].empty())
          check_finite(grads[static_cast<std::size_t>(id)], "gradient of " + store[id].name);
      opt.step(store, grads);
      for (ParamId id = 0; id < store.size(); ++id)
        if (store[id].trainable) check_finite(store[id].value, "parameter " + store[id].name);
      loss_sum += batch_loss;
      ++n_batches;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(n_batches);
    if (!data.val.empty()) {
      const DatasetMetrics v = evaluate_samples(cfg, model, "val", data.val);
      entry.val_f1 = v.f1;
      entry.val_iou = v.iou;
    }
    result.log.push_back(entry);

    state.epoch = epoch;
    const bool improved = data.val.empty() || entry.val_f1 > state.best_val_f1;
    if (improved) state.best_val_f1 = entry.val_f1;
    if (improved) save_checkpoint(result.best_checkpoint, cfg, model, &opt, state);
    save_checkpoint(result.last_checkpoint, cfg, model, &opt, state);
    write_text(out_dir / "train_log.csv", train_log_csv(result.log));

    if (progress) {
      char line[160];
      std::snprintf(line, sizeof line, "epoch %d/%d loss %.4f val_f1 %.4f val_iou %.4f%s\n",
                    epoch, cfg.train.epochs, entry.train_loss, entry.val_f1, entry.val_iou,
                    improved ? " *" : "");
      *progress << line << std::flush;
    }
  }
  result.best_val_f1 = state.best_val_f1;
  if (!fs::exists(result.best_checkpoint))
    save_checkpoint(result.best_checkpoint, cfg, model, &opt, state);
  write_text(out_dir / "train_log.csv", train_log_csv(result.log));
  return result;
}

LoadedModel load_model(const fs::path& checkpoint, const ExperimentConfig* expected) {
  CheckpointInfo info = read_checkpoint_info(checkpoint);
  if (expected && expected->hash() != info.config_hash)
    throw FormatError("checkpoint " + checkpoint.string() + " was trained with config " +
                      hex64(info.config_hash) + ", expected " + hex64(expected->hash()));
  LoadedModel out;
  out.config = info.config;
  out.model = std::make_unique<ClueModel>(out.config.model);
  load_checkpoint(checkpoint, out.config, *out.model, nullptr, nullptr);
  return out;
}

MetricReport evaluate(const ExperimentConfig& cfg, const ClueModel& model,
                      const std::vector<std::pair<std::string, std::vector<ForgerySample>>>& splits,
                      const fs::path& dump_dir) {
  std::vector<DatasetMetrics> rows;
  for (const auto& [name, samples] : splits) {
    if (samples.empty()) throw ConfigError("split '" + name + "' has no samples");
    rows.push_back(
        evaluate_samples(cfg, model, name, samples, dump_dir.empty() ? dump_dir : dump_dir / name));
  }
  return aggregate(rows);
}

std::vector<RobustnessRow> robustness_curve(const ExperimentConfig& cfg, const ClueModel& model,
                                            const std::vector<ForgerySample>& samples,
                                            const AttackSpec& spec, const fs::path& dump_dir) {
  spec.validate();
  if (samples.empty()) throw ConfigError("robustness evaluation needs samples");
  const std::string name = to_string(spec.kind);
  auto sub = [&](const std::string& leaf) {
    return dump_dir.empty() ? dump_dir : dump_dir / name / leaf;
  };

  std::vector<RobustnessRow> rows;
  const auto clean = summarize(name, scores_of(score_samples(cfg, model, samples, nullptr,
                                                              sub("clean"))),
                               cfg.threshold);
  rows.push_back({name, "clean", clean.f1, clean.iou});
  for (double intensity : spec.grid) {
    const AttackPoint point{spec.kind, intensity};
    auto attack = [&](const ForgerySample& s) {
      return apply_attack(s.image, point, sample_seed(cfg.seed, "attack:" + s.id));
    };
    const auto m = summarize(
        name, scores_of(score_samples(cfg, model, samples, attack, sub(format_number(intensity)))),
        cfg.threshold);
    rows.push_back({name, format_number(intensity), m.f1, m.iou});
  }
  return rows;
}

std::string robustness_csv(const std::vector<RobustnessRow>& rows) {
  std::string out = "attack,intensity,f1,iou\n";
  for (const auto& r : rows)
    out += r.attack + "," + r.intensity + "," + format_metric(r.f1) + "," + format_metric(r.iou) +
           "\n";
  return out;
}

std::string to_string(AblationTable t) {
  switch (t) {
    case AblationTable::kComponents: return "components";
    case AblationTable::kNoise: return "noise";
    case AblationTable::kShift: return "shift";
  }
  return "?";
}

AblationTable ablation_table_from_string(const std::string& s) {
  if (s == "components") return AblationTable::kComponents;
  if (s == "noise") return AblationTable::kNoise;
  if (s == "shift") return AblationTable::kShift;
  throw ConfigError("unknown ablation table '" + s + "' (expected components, noise or shift)");
}

std::vector<AblationCell> ablation_grid(const ExperimentConfig& base, AblationTable table) {
  std::vector<AblationCell> cells;
  switch (table) {
    case AblationTable::kComponents: {
      using M = BranchMode;
      const std::pair<M, M> rows[] = {{M::kTuned, M::kFrozen},
                                      {M::kTuned, M::kRemoved},
                                      {M::kRemoved, M::kTuned},
                                      {M::kFrozen, M::kTuned},
                                      {M::kTuned, M::kTuned}};
      for (const auto& [sd, sam] : rows) {
        ExperimentConfig c = base;
        c.model.denoiser_mode = sd;
        c.model.semantic_mode = sam;
        cells.push_back({{to_string(sd), to_string(sam)}, c});
      }
      break;
    }
    case AblationTable::kNoise:
      for (auto m : {NoiseMechanism::kZero, NoiseMechanism::kDdpm, NoiseMechanism::kRectifiedFlow}) {
        ExperimentConfig c = base;
        c.model.noise.mechanism = m;
        cells.push_back({{to_string(m)}, c});
      }
      break;
    case AblationTable::kShift:
      for (double s : {0.5, 1.0, 3.0, 4.0, 6.0}) {
        ExperimentConfig c = base;
        c.model.noise.mechanism = NoiseMechanism::kRectifiedFlow;
        c.model.noise.shift = s;
        cells.push_back({{format_number(s)}, c});
      }
      break;
  }
  return cells;
}

std::string AblationResult::to_csv() const {
  std::string out;
  for (const auto& k : key_columns) out += k + ",";
  out += "n_images,f1,iou\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    for (const auto& l : labels[i]) out += l + ",";
    int n = 0;
    for (const auto& d : reports[i].datasets) n += d.n_images;
    out += std::to_string(n) + "," + format_metric(reports[i].weighted_f1) + "," +
           format_metric(reports[i].weighted_iou) + "\n";
  }
  return out;
}

AblationResult run_ablation(const ExperimentConfig& base, AblationTable table,
                            const DataSplits& data, const fs::path& out_dir,
                            std::ostream* progress) {
  if (data.test.empty()) throw ConfigError("ablation needs a non-empty test split");
  std::map<std::string, std::vector<ForgerySample>> by_split;
  for (const auto& s : data.test) by_split[s.split].push_back(s);
  std::vector<std::pair<std::string, std::vector<ForgerySample>>> splits(by_split.begin(),
                                                                         by_split.end());

  AblationResult result;
  result.table = table;
  switch (table) {
    case AblationTable::kComponents: result.key_columns = {"sd3", "sam"}; break;
    case AblationTable::kNoise: result.key_columns = {"noise"}; break;
    case AblationTable::kShift: result.key_columns = {"shift"}; break;
  }
  const fs::path table_dir = out_dir / to_string(table);
  const auto cells = ablation_grid(base, table);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const fs::path cell_dir = table_dir / std::to_string(i);
    if (progress) {
      *progress << to_string(table) << " cell " << i + 1 << "/" << cells.size() << ":";
      for (const auto& l : cells[i].labels) *progress << " " << l;
      *progress << "\n";
    }
    const TrainResult tr = train(cells[i].config, data, cell_dir, std::nullopt, progress);
    const LoadedModel best = load_model(tr.best_checkpoint, &cells[i].config);
    const MetricReport report = evaluate(cells[i].config, *best.model, splits);
    write_text(cell_dir / "metrics.csv", report.to_csv());
    result.labels.push_back(cells[i].labels);
    result.reports.push_back(report);
  }
  write_text(table_dir / "table.csv", result.to_csv());
  return result;
}

std::string csv_to_markdown(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    out += "|";
    for (const auto& c : cells) out += " " + c + " |";
    out += "\n";
    if (header) {
      out += "|";
      for (std::size_t i = 0; i < cells.size(); ++i) out += " --- |";
      out += "\n";
      header = false;
    }
  }
  return out;
}

std::string render_report(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("report directory " + dir.string() + " not found");
  std::vector<fs::path> csvs;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") csvs.push_back(e.path());
  std::sort(csvs.begin(), csvs.end());
  std::string out = "# Results\n";
  for (const auto& p : csvs) {
    out += "\n## " + fs::relative(p, dir).generic_string() + "\n\n";
    out += csv_to_markdown(read_text(p));
  }
  return out;
}

}  // namespace clue
