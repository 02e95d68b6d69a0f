#pragma once

#include <cstdint>
#include <vector>

#include "clue/autograd.hpp"
#include "clue/lora.hpp"
#include "clue/noise_schedule.hpp"
#include "clue/params.hpp"
#include "clue/tensor.hpp"

namespace clue {

struct LatentEncoderConfig {
  int in_channels = 3;
  int latent_channels = 4;
  int downsample_factor = 8;
  std::uint64_t weights_seed = 17;

  void validate() const;
};

struct DenoiserConfig {
  int width = 64;
  int depth = 3;
  int time_embed_dim = 64;
  int out_channels = 64;
  // Block whose output is tapped per level; -1 selects depth − 2.
  int tap_layer = -1;
  int mlp_ratio = 4;
  std::uint64_t weights_seed = 29;

  int resolved_tap() const { return tap_layer >= 0 ? tap_layer : depth - 2; }
  void validate() const;
};

struct SemanticEncoderConfig {
  int patch_size = 8;
  int embed_dim = 64;
  int depth = 4;
  int out_channels = 32;
  int mlp_ratio = 4;
  std::uint64_t weights_seed = 43;

  void validate() const;
};

// Pre-norm single-head transformer block. Q/K/V are exposed for adapters.
struct TransformerBlock {
  ParamId ln1_gamma = -1, ln1_beta = -1, ln2_gamma = -1, ln2_beta = -1;
  AttentionProjections qkv;
  LinearRef out, fc1, fc2;

  static TransformerBlock create(ParamStore& store, const std::string& prefix, int dim,
                                 int mlp_ratio, std::mt19937_64& rng);
  ag::Var forward(ag::Tape& tape, const ParamStore& store, const AdapterRegistry* reg,
                  ag::Var tokens) const;
  std::vector<ParamId> parameters() const;
};

// 2-D sinusoidal position code, (h·w)×dim, row-major over the grid.
Tensor position_encoding(int h, int w, int dim);
// Sinusoidal embedding of a scalar timestep (t scaled to the 0–1000 range).
Tensor timestep_embedding(double t, int dim);

// Frozen image → latent map: log2(factor) stride-2 3×3 convs with tanh.
class LatentEncoder {
 public:
  LatentEncoder(const LatentEncoderConfig& cfg, ParamStore& store);

  LatentTensor encode(const ImageTensor& image, const ParamStore& store) const;
  const LatentEncoderConfig& config() const { return cfg_; }
  std::vector<ParamId> parameters() const;

 private:
  LatentEncoderConfig cfg_;
  std::vector<ParamId> weights_, biases_;
};

// Stand-alone E_V with weights derived from cfg.weights_seed.
LatentTensor encode_latent(const ImageTensor& image, const LatentEncoderConfig& cfg);

// DiT-like stand-in: 1×1 stem over the latent grid, additive timestep
// embedding, attention blocks; the tapped block output of every noise level
// is channel-concatenated and projected to out_channels by a 1×1 conv.
class Denoiser : public AttentionNetwork {
 public:
  Denoiser(const DenoiserConfig& cfg, int latent_channels, int num_levels, ParamStore& store);

  // Output: out_channels×H×W feature map f_D.
  ag::Var forward(ag::Tape& tape, const ParamStore& store, const NoisedLatentSet& noised,
                  const AdapterRegistry* reg) const;
  // Tapped tokens (H·W)×width for one (z_t, t) pair.
  ag::Var level_features(ag::Tape& tape, const ParamStore& store, const LatentTensor& z_t,
                         double t_effective, const AdapterRegistry* reg) const;

  std::vector<AttentionProjections> attention_blocks() const override;
  std::vector<ParamId> base_parameters() const override;
  std::vector<ParamId> consolidation_parameters() const { return {consolidate_w_, consolidate_b_}; }
  const DenoiserConfig& config() const { return cfg_; }
  int num_levels() const { return num_levels_; }

 private:
  DenoiserConfig cfg_;
  int latent_channels_;
  int num_levels_;
  LinearRef stem_, time1_, time2_;
  std::vector<TransformerBlock> blocks_;
  ParamId consolidate_w_ = -1, consolidate_b_ = -1;
};

FeatureMap denoiser_features(const NoisedLatentSet& noised, const Denoiser& net,
                             const ParamStore& store, const AdapterRegistry* reg);

// ViT-like stand-in: patch embedding, attention blocks, LN + linear neck.
class SemanticEncoder : public AttentionNetwork {
 public:
  SemanticEncoder(const SemanticEncoderConfig& cfg, int in_channels, ParamStore& store);

  // Output: out_channels×(H/patch)×(W/patch) feature map f_S.
  ag::Var forward(ag::Tape& tape, const ParamStore& store, ag::Var image,
                  const AdapterRegistry* reg) const;

  std::vector<AttentionProjections> attention_blocks() const override;
  std::vector<ParamId> base_parameters() const override;
  const SemanticEncoderConfig& config() const { return cfg_; }

 private:
  SemanticEncoderConfig cfg_;
  ParamId patch_w_ = -1, patch_b_ = -1;
  std::vector<TransformerBlock> blocks_;
  ParamId neck_gamma_ = -1, neck_beta_ = -1;
  LinearRef neck_;
};

FeatureMap semantic_features(const ImageTensor& image, const SemanticEncoder& net,
                             const ParamStore& store, const AdapterRegistry* reg);

}  // namespace clue
