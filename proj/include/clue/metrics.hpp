#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "clue/tensor.hpp"

namespace clue {

inline constexpr float kDefaultThreshold = 0.5f;

struct PixelCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::uint64_t total() const { return tp + fp + fn + tn; }
};

struct F1IoU {
  double f1 = 0;
  double iou = 0;
};

// 1 where pred > threshold, else 0 (ties map to 0).
MaskTensor binarize(const MaskTensor& pred, float threshold = kDefaultThreshold);

PixelCounts count_pixels(const MaskTensor& pred_bin, const MaskTensor& gt);

// Both masks empty → (1, 1); exactly one empty → (0, 0).
F1IoU f1_iou(const PixelCounts& counts);
F1IoU f1_iou(const MaskTensor& pred_bin, const MaskTensor& gt);

struct DatasetMetrics {
  std::string name;
  int n_images = 0;
  double f1 = 0;
  double iou = 0;
  double threshold = kDefaultThreshold;
};

// Macro average of per-sample scores.
DatasetMetrics summarize(std::string name, const std::vector<F1IoU>& per_sample,
                         double threshold = kDefaultThreshold);

struct MetricReport {
  std::vector<DatasetMetrics> datasets;
  double weighted_f1 = 0;
  double weighted_iou = 0;
  double threshold = kDefaultThreshold;

  // dataset,n_images,f1,iou rows followed by a weighted_avg row.
  std::string to_csv() const;
  nlohmann::json to_json() const;
};

// Image-count-weighted mean over datasets. Throws ConfigError for an empty
// list or mixed thresholds.
MetricReport aggregate(const std::vector<DatasetMetrics>& reports);

std::string format_metric(double v);

}  // namespace clue
