#include "clue/metrics.hpp"

#include <cstdio>
#include <sstream>

namespace clue {

MaskTensor binarize(const MaskTensor& pred, float threshold) {
  MaskTensor out = Tensor::zeros_like(pred);
  for (std::size_t i = 0; i < pred.size(); ++i) out[i] = pred[i] > threshold ? 1.0f : 0.0f;
  return out;
}

PixelCounts count_pixels(const MaskTensor& pred_bin, const MaskTensor& gt) {
  require_same_shape(pred_bin, gt, "f1_iou");
  PixelCounts c;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const bool p = pred_bin[i] > 0.5f;
    const bool g = gt[i] > 0.5f;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

F1IoU f1_iou(const PixelCounts& c) {
  const bool pred_empty = c.tp + c.fp == 0;
  const bool gt_empty = c.tp + c.fn == 0;
  if (pred_empty && gt_empty) return {1.0, 1.0};
  if (pred_empty || gt_empty) return {0.0, 0.0};
  const auto tp = static_cast<double>(c.tp);
  const auto fp = static_cast<double>(c.fp);
  const auto fn = static_cast<double>(c.fn);
  return {2.0 * tp / (2.0 * tp + fp + fn), tp / (tp + fp + fn)};
}

F1IoU f1_iou(const MaskTensor& pred_bin, const MaskTensor& gt) {
  return f1_iou(count_pixels(pred_bin, gt));
}

DatasetMetrics summarize(std::string name, const std::vector<F1IoU>& per_sample,
                         double threshold) {
  DatasetMetrics d;
  d.name = std::move(name);
  d.n_images = static_cast<int>(per_sample.size());
  d.threshold = threshold;
  if (per_sample.empty()) return d;
  for (const auto& s : per_sample) {
    d.f1 += s.f1;
    d.iou += s.iou;
  }
  d.f1 /= static_cast<double>(per_sample.size());
  d.iou /= static_cast<double>(per_sample.size());
  return d;
}

MetricReport aggregate(const std::vector<DatasetMetrics>& reports) {
  if (reports.empty()) throw ConfigError("aggregate: no dataset reports");
  MetricReport r;
  r.datasets = reports;
  r.threshold = reports.front().threshold;
  double n = 0;
  for (const auto& d : reports) {
    if (d.threshold != r.threshold) throw ConfigError("aggregate: reports use different thresholds");
    r.weighted_f1 += d.n_images * d.f1;
    r.weighted_iou += d.n_images * d.iou;
    n += d.n_images;
  }
  if (n > 0) {
    r.weighted_f1 /= n;
    r.weighted_iou /= n;
  }
  return r;
}

std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string MetricReport::to_csv() const {
  std::ostringstream os;
  os << "dataset,n_images,f1,iou\n";
  int n = 0;
  for (const auto& d : datasets) {
    os << d.name << ',' << d.n_images << ',' << format_metric(d.f1) << ',' << format_metric(d.iou)
       << '\n';
    n += d.n_images;
  }
  os << "weighted_avg," << n << ',' << format_metric(weighted_f1) << ','
     << format_metric(weighted_iou) << '\n';
  return os.str();
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j;
  j["threshold"] = threshold;
  j["datasets"] = nlohmann::json::array();
  for (const auto& d : datasets)
    j["datasets"].push_back({{"name", d.name}, {"n_images", d.n_images}, {"f1", d.f1}, {"iou", d.iou}});
  j["weighted_avg"] = {{"f1", weighted_f1}, {"iou", weighted_iou}};
  return j;
}

}  // namespace clue
