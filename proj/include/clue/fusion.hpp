#pragma once

#include <random>

#include "clue/autograd.hpp"
#include "clue/params.hpp"

namespace clue {

struct FusionConfig {
  int proj_channels = 48;
  int fuse_channels = 64;
  int groupnorm_groups = 8;

  void validate() const;
};

// Feature fusion: per-branch 1×1 projection + GroupNorm, channel concat,
// 3×3 conv → GroupNorm → SiLU → 1×1 conv. f_S is bilinearly resized to
// f_D's grid first when the grids differ.
class Fusion {
 public:
  Fusion(const FusionConfig& cfg, int semantic_channels, int forensic_channels, ParamStore& store,
         std::mt19937_64& rng);

  // Output: fuse_channels × H_D × W_D.
  ag::Var forward(ag::Tape& tape, const ParamStore& store, ag::Var f_s, ag::Var f_d) const;

  const FusionConfig& config() const { return cfg_; }
  int semantic_channels() const { return c_s_; }
  int forensic_channels() const { return c_d_; }

 private:
  FusionConfig cfg_;
  int c_s_, c_d_;
  ParamId proj_s_w_, proj_s_b_, gn_s_g_, gn_s_b_;
  ParamId proj_d_w_, proj_d_b_, gn_d_g_, gn_d_b_;
  ParamId conv_w_, conv_b_, gn_g_, gn_b_;
  ParamId out_w_, out_b_;
};

FeatureMap fuse(const FeatureMap& f_s, const FeatureMap& f_d, const Fusion& fusion,
                const ParamStore& store);

}  // namespace clue
