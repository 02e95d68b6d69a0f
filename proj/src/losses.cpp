#include "clue/losses.hpp"

#include <algorithm>
#include <cmath>

namespace clue {

void LossWeights::validate() const {
  if (lambda_bce < 0 || lambda_dice < 0) throw ConfigError("loss weights must be non-negative");
  if (lambda_bce + lambda_dice <= 0) throw ConfigError("loss weights must not both be zero");
  if (!(epsilon_smooth > 0)) throw ConfigError("dice smoothing epsilon must be positive");
}

double bce_loss(const MaskTensor& pred, const MaskTensor& gt) {
  require_same_shape(pred, gt, "bce_loss");
  if (pred.size() == 0) return 0.0;
  double acc = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(static_cast<double>(pred[i]), double{kProbClamp},
                                1.0 - double{kProbClamp});
    const double g = gt[i];
    acc -= g * std::log(p) + (1.0 - g) * std::log(1.0 - p);
  }
  return acc / static_cast<double>(pred.size());
}

namespace {

struct DiceSums {
  double inter = 0, sp = 0, sg = 0;
};

DiceSums dice_sums(const MaskTensor& pred, const MaskTensor& gt) {
  DiceSums s;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    s.inter += static_cast<double>(pred[i]) * gt[i];
    s.sp += pred[i];
    s.sg += gt[i];
  }
  return s;
}

}  // namespace

double dice_loss(const MaskTensor& pred, const MaskTensor& gt, float eps) {
  require_same_shape(pred, gt, "dice_loss");
  const DiceSums s = dice_sums(pred, gt);
  return 1.0 - (2.0 * s.inter + eps) / (s.sp + s.sg + eps);
}

double total_loss(const MaskTensor& pred, const MaskTensor& gt, const LossWeights& w) {
  return loss_parts(pred, gt, w).total;
}

LossParts loss_parts(const MaskTensor& pred, const MaskTensor& gt, const LossWeights& w) {
  LossParts parts;
  parts.bce = bce_loss(pred, gt);
  parts.dice = dice_loss(pred, gt, w.epsilon_smooth);
  parts.total = w.lambda_bce * parts.bce + w.lambda_dice * parts.dice;
  return parts;
}

Tensor total_loss_grad(const MaskTensor& pred, const MaskTensor& gt, const LossWeights& w) {
  require_same_shape(pred, gt, "total_loss_grad");
  Tensor g = Tensor::zeros_like(pred);
  const auto n = static_cast<double>(pred.size());
  const DiceSums s = dice_sums(pred, gt);
  const double num = 2.0 * s.inter + w.epsilon_smooth;
  const double den = s.sp + s.sg + w.epsilon_smooth;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = pred[i];
    const double y = gt[i];
    double d_bce = 0;
    if (p > kProbClamp && p < 1.0 - kProbClamp) d_bce = (-y / p + (1.0 - y) / (1.0 - p)) / n;
    // d/dp of −num/den
    const double d_dice = -(2.0 * y * den - num) / (den * den);
    g[i] = static_cast<float>(w.lambda_bce * d_bce + w.lambda_dice * d_dice);
  }
  return g;
}

namespace ag {

Var total_loss(Var pred, const MaskTensor& gt, const LossWeights& w) {
  const double value = clue::total_loss(pred.value(), gt, w);
  const int pid = pred.id();
  return pred.tape().record(Tensor({1}, static_cast<float>(value)), {pred},
                            [pid, gt, w](Tape& t, const Tensor& g) {
    Tensor d = total_loss_grad(t.value(pid), gt, w);
    d *= g[0];
    t.grad(pid) += d;
  });
}

}  // namespace ag
}  // namespace clue
