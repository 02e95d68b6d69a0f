#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "clue/tensor.hpp"

namespace clue {

enum class NoiseMechanism { kRectifiedFlow, kDdpm, kZero };

std::string to_string(NoiseMechanism m);
NoiseMechanism noise_mechanism_from_string(const std::string& s);

struct NoiseConfig {
  NoiseMechanism mechanism = NoiseMechanism::kRectifiedFlow;
  double shift = 3.0;
  std::vector<double> levels = {0.25, 0.5, 0.75};
  std::uint64_t seed = 0;

  // Throws ConfigError on non-increasing levels, levels outside (0,1), or
  // shift <= 0.
  void validate() const;
};

struct NoisedLatent {
  double t_effective = 0;
  LatentTensor z_t;
};

struct NoisedLatentSet {
  std::vector<NoisedLatent> entries;
  LatentTensor source;
};

// (1 − t)·z0 + t·eps, elementwise.
LatentTensor rf_interpolate(const LatentTensor& z0, double t, const LatentTensor& eps);

// Timestep shift t' = s·t / (1 + (s − 1)·t). Monotone bijection of [0,1].
double shift_warp(double t, double s);

// Linear-β DDPM schedule, β from 1e-4 to 0.02 over 1000 steps.
inline constexpr int kDdpmSteps = 1000;
double ddpm_alpha_bar(int step);
// Continuous t maps to step floor(t·(T − 1)).
int ddpm_step(double t);
LatentTensor ddpm_perturb(const LatentTensor& z0, double t, const LatentTensor& eps);

// Builds one perturbed latent per configured level. RF levels are
// shift-warped; DDPM levels are used as-is; zero copies z0. One fresh
// standard-normal eps per level is drawn from `rng` (none for zero).
NoisedLatentSet make_noised_set(const LatentTensor& z0, const NoiseConfig& cfg,
                                std::mt19937_64& rng);

LatentTensor standard_normal_like(const LatentTensor& like, std::mt19937_64& rng);

}  // namespace clue
