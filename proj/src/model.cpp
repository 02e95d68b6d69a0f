#include "clue/model.hpp"

namespace clue {

std::string to_string(BranchMode m) {
  switch (m) {
    case BranchMode::kTuned: return "tuned";
    case BranchMode::kFrozen: return "frozen";
    case BranchMode::kRemoved: return "removed";
  }
  return "?";
}

BranchMode branch_mode_from_string(const std::string& s) {
  for (BranchMode m : {BranchMode::kTuned, BranchMode::kFrozen, BranchMode::kRemoved})
    if (to_string(m) == s) return m;
  throw ConfigError("unknown branch mode '" + s + "' (tuned, frozen, removed)");
}

void ModelConfig::validate() const {
  latent.validate();
  denoiser.validate();
  semantic.validate();
  fusion.validate();
  head.validate();
  noise.validate();
  if (lora_denoiser.rank <= 0 || lora_semantic.rank <= 0)
    throw ConfigError("LoRA rank must be positive");
  if (lora_denoiser.alpha <= 0 || lora_semantic.alpha <= 0)
    throw ConfigError("LoRA alpha must be positive");
  if (head.upsample_scale != latent.downsample_factor)
    throw ConfigError("head upsample_scale " + std::to_string(head.upsample_scale) +
                      " must equal latent downsample_factor " +
                      std::to_string(latent.downsample_factor));
  if (denoiser_mode == BranchMode::kRemoved && semantic_mode == BranchMode::kRemoved)
    throw ConfigError("at least one branch must be present");
}

ClueModel::ClueModel(const ModelConfig& cfg)
    : cfg_((cfg.validate(), cfg)),
      init_rng_(cfg.init_seed),
      latent_(cfg.latent, store_),
      denoiser_(cfg.denoiser, cfg.latent.latent_channels,
                static_cast<int>(cfg.noise.levels.size()), store_),
      semantic_(cfg.semantic, cfg.latent.in_channels, store_),
      fusion_(cfg.fusion, cfg.semantic.out_channels, cfg.denoiser.out_channels, store_,
              init_rng_),
      head_(cfg.head, cfg.fusion.fuse_channels, store_, init_rng_) {
  if (cfg_.denoiser_mode == BranchMode::kTuned)
    sd_lora_ = attach_qkv_adapters(denoiser_, store_, cfg_.lora_denoiser.rank,
                                   cfg_.lora_denoiser.alpha, init_rng_);
  else
    store_.set_trainable_prefix("sd.", false);
  if (cfg_.semantic_mode == BranchMode::kTuned)
    sam_lora_ = attach_qkv_adapters(semantic_, store_, cfg_.lora_semantic.rank,
                                    cfg_.lora_semantic.alpha, init_rng_);
}

void ClueModel::detach_adapters() {
  sd_lora_ = AdapterRegistry{};
  sam_lora_ = AdapterRegistry{};
}

ag::Var ClueModel::semantic_branch(ag::Tape& tape, const ImageTensor& image) const {
  if (cfg_.semantic_mode == BranchMode::kRemoved) {
    const int p = cfg_.semantic.patch_size;
    return tape.constant(Tensor({cfg_.semantic.out_channels, image.dim(1) / p, image.dim(2) / p}));
  }
  return semantic_.forward(tape, store_, tape.constant(image),
                           sam_lora_.empty() ? nullptr : &sam_lora_);
}

ag::Var ClueModel::denoiser_branch(ag::Tape& tape, const ImageTensor& image,
                                   std::mt19937_64& noise_rng) const {
  const int f = cfg_.latent.downsample_factor;
  if (cfg_.denoiser_mode == BranchMode::kRemoved)
    return tape.constant(Tensor({cfg_.denoiser.out_channels, image.dim(1) / f, image.dim(2) / f}));
  const LatentTensor z0 = latent_.encode(image, store_);
  const NoisedLatentSet noised = make_noised_set(z0, cfg_.noise, noise_rng);
  return denoiser_.forward(tape, store_, noised, sd_lora_.empty() ? nullptr : &sd_lora_);
}

ag::Var ClueModel::forward(ag::Tape& tape, const ImageTensor& image,
                           std::mt19937_64& noise_rng) const {
  if (image.rank() != 3 || image.dim(0) != cfg_.latent.in_channels)
    throw DimensionError("pipeline: expected 3×H×W image, got " + shape_str(image.shape()));
  ag::Var f_d = denoiser_branch(tape, image, noise_rng);
  ag::Var f_s = semantic_branch(tape, image);
  ag::Var f_fuse = fusion_.forward(tape, store_, f_s, f_d);
  return head_.forward(tape, store_, f_fuse);
}

MaskTensor ClueModel::predict(const ImageTensor& image, std::mt19937_64& noise_rng) const {
  ag::Tape tape;
  return forward(tape, image, noise_rng).value();
}

}  // namespace clue
