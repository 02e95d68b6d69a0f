#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "clue/config.hpp"
#include "clue/model.hpp"
#include "clue/optim.hpp"

namespace clue {

// Training state restored on resume.
struct TrainState {
  int epoch = 0;  // completed epochs
  double best_val_f1 = -1.0;
  std::mt19937_64 order_rng;
};

// Binary layout: "CLUECKPT", u32 version, u64 header size, JSON header
// (config, config hash, epoch, optimizer step, RNG state, tensor table),
// then little-endian float32 payloads in table order. Every parameter of
// the store is written, frozen ones included, together with Adam moments
// of trainable ones.
void save_checkpoint(const std::filesystem::path& path, const ExperimentConfig& cfg,
                     const ClueModel& model, const Adam* optimizer, const TrainState& state);

struct CheckpointInfo {
  ExperimentConfig config;
  std::uint64_t config_hash = 0;
  int epoch = 0;
  double best_val_f1 = -1.0;
};

// Header only: config and training position.
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

// Loads tensors into a model built from the same config. Throws FormatError
// when the stored hash differs from `cfg.hash()` or any tensor is missing
// or mis-shaped. `optimizer` and `state` may be null.
void load_checkpoint(const std::filesystem::path& path, const ExperimentConfig& cfg,
                     ClueModel& model, Adam* optimizer, TrainState* state);

}  // namespace clue
