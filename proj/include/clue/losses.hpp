#pragma once

#include "clue/autograd.hpp"
#include "clue/tensor.hpp"

namespace clue {

struct LossWeights {
  float lambda_bce = 0.5f;
  float lambda_dice = 0.5f;
  float epsilon_smooth = 1e-6f;

  void validate() const;
};

// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] inside BCE.
inline constexpr float kProbClamp = 1e-7f;

// Mean per-pixel binary cross-entropy.
double bce_loss(const MaskTensor& pred, const MaskTensor& gt);
// 1 − (2Σpg + ε)/(Σp + Σg + ε).
double dice_loss(const MaskTensor& pred, const MaskTensor& gt, float eps = 1e-6f);
double total_loss(const MaskTensor& pred, const MaskTensor& gt, const LossWeights& w);

// d total_loss / d pred. Zero where BCE clamping is active.
Tensor total_loss_grad(const MaskTensor& pred, const MaskTensor& gt, const LossWeights& w);

struct LossParts {
  double bce = 0;
  double dice = 0;
  double total = 0;
};
LossParts loss_parts(const MaskTensor& pred, const MaskTensor& gt, const LossWeights& w);

namespace ag {
// Weighted BCE + Dice on a probability map recorded on a tape.
Var total_loss(Var pred, const MaskTensor& gt, const LossWeights& w);
}  // namespace ag

}  // namespace clue
