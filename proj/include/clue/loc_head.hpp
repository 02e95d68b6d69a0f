#pragma once

#include <random>

#include "clue/autograd.hpp"
#include "clue/params.hpp"

namespace clue {

struct HeadConfig {
  int mid_channels = 32;
  // Fixed ratio between output mask size and the fused feature grid.
  int upsample_scale = 8;

  void validate() const;
};

// 3×3 conv → ReLU → 1×1 conv to one channel → bilinear ×S_up → sigmoid.
class LocalizationHead {
 public:
  LocalizationHead(const HeadConfig& cfg, int in_channels, ParamStore& store,
                   std::mt19937_64& rng);

  // Low-resolution logits, 1×H×W.
  ag::Var logits(ag::Tape& tape, const ParamStore& store, ag::Var f_fuse) const;
  // Upsampled probability mask, 1×(H·S_up)×(W·S_up).
  ag::Var forward(ag::Tape& tape, const ParamStore& store, ag::Var f_fuse) const;
  // Upsample + sigmoid applied to given logits.
  ag::Var probabilities(ag::Var logits) const;

  const HeadConfig& config() const { return cfg_; }
  int in_channels() const { return in_channels_; }

 private:
  HeadConfig cfg_;
  int in_channels_;
  ParamId conv1_w_, conv1_b_, conv2_w_, conv2_b_;
};

MaskTensor predict_mask(const FeatureMap& f_fuse, const LocalizationHead& head,
                        const ParamStore& store);

}  // namespace clue
