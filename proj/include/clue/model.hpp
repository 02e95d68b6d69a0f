#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "clue/autograd.hpp"
#include "clue/backbones.hpp"
#include "clue/fusion.hpp"
#include "clue/loc_head.hpp"
#include "clue/lora.hpp"
#include "clue/noise_schedule.hpp"
#include "clue/params.hpp"

namespace clue {

// How a branch takes part in training: LoRA-tuned, frozen as initialized, or
// removed (its feature map replaced by zeros of the same shape).
enum class BranchMode { kTuned, kFrozen, kRemoved };

std::string to_string(BranchMode m);
BranchMode branch_mode_from_string(const std::string& s);

struct LoraConfig {
  int rank = 4;
  float alpha = 4.0f;
};

struct ModelConfig {
  LatentEncoderConfig latent;
  DenoiserConfig denoiser;
  SemanticEncoderConfig semantic;
  FusionConfig fusion;
  HeadConfig head;
  NoiseConfig noise;
  LoraConfig lora_denoiser;
  LoraConfig lora_semantic;
  BranchMode denoiser_mode = BranchMode::kTuned;
  BranchMode semantic_mode = BranchMode::kTuned;
  // Seeds fusion, head and adapter initialization.
  std::uint64_t init_seed = 1;

  // Also requires head.upsample_scale == latent.downsample_factor and at
  // least one active branch.
  void validate() const;
};

// Full localization pipeline over one ParamStore.
class ClueModel {
 public:
  explicit ClueModel(const ModelConfig& cfg);
  ClueModel(const ClueModel&) = delete;
  ClueModel& operator=(const ClueModel&) = delete;

  // Probability mask 1×H×W for a 3×H×W image. `noise_rng` supplies the
  // perturbation noise of the denoiser branch.
  ag::Var forward(ag::Tape& tape, const ImageTensor& image, std::mt19937_64& noise_rng) const;
  MaskTensor predict(const ImageTensor& image, std::mt19937_64& noise_rng) const;

  // Branch features with removal applied; exposed for tests.
  ag::Var semantic_branch(ag::Tape& tape, const ImageTensor& image) const;
  ag::Var denoiser_branch(ag::Tape& tape, const ImageTensor& image,
                          std::mt19937_64& noise_rng) const;

  const ModelConfig& config() const { return cfg_; }
  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }
  const LatentEncoder& latent_encoder() const { return latent_; }
  const Denoiser& denoiser() const { return denoiser_; }
  const SemanticEncoder& semantic_encoder() const { return semantic_; }
  const Fusion& fusion() const { return fusion_; }
  const LocalizationHead& head() const { return head_; }
  const AdapterRegistry& denoiser_adapters() const { return sd_lora_; }
  const AdapterRegistry& semantic_adapters() const { return sam_lora_; }

  // Drops the adapters, restoring the adapter-free pipeline.
  void detach_adapters();

 private:
  ModelConfig cfg_;
  ParamStore store_;
  std::mt19937_64 init_rng_;
  LatentEncoder latent_;
  Denoiser denoiser_;
  SemanticEncoder semantic_;
  Fusion fusion_;
  LocalizationHead head_;
  AdapterRegistry sd_lora_;
  AdapterRegistry sam_lora_;
};

}  // namespace clue
