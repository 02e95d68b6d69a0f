#include "clue/noise_schedule.hpp"

#include <array>
#include <cmath>

namespace clue {

std::string to_string(NoiseMechanism m) {
  switch (m) {
    case NoiseMechanism::kRectifiedFlow: return "rf";
    case NoiseMechanism::kDdpm: return "ddpm";
    case NoiseMechanism::kZero: return "zero";
  }
  return "?";
}

NoiseMechanism noise_mechanism_from_string(const std::string& s) {
  if (s == "rf") return NoiseMechanism::kRectifiedFlow;
  if (s == "ddpm") return NoiseMechanism::kDdpm;
  if (s == "zero") return NoiseMechanism::kZero;
  throw ConfigError("unknown noise mechanism '" + s + "' (expected rf, ddpm or zero)");
}

void NoiseConfig::validate() const {
  if (!(shift > 0)) throw ConfigError("noise shift must be positive");
  if (levels.empty()) throw ConfigError("noise config needs at least one level");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!(levels[i] > 0 && levels[i] < 1))
      throw ConfigError("noise level " + std::to_string(levels[i]) + " outside (0,1)");
    if (i > 0 && !(levels[i] > levels[i - 1]))
      throw ConfigError("noise levels must be strictly increasing");
  }
}

LatentTensor rf_interpolate(const LatentTensor& z0, double t, const LatentTensor& eps) {
  require_same_shape(z0, eps, "rf_interpolate");
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("rf_interpolate: t outside [0,1]");
  LatentTensor out = Tensor::zeros_like(z0);
  // Endpoints are returned verbatim so that t = 0 / t = 1 are exact.
  if (t == 0.0) return z0;
  if (t == 1.0) return eps;
  const auto tf = static_cast<float>(t);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = z0[i] + tf * (eps[i] - z0[i]);
  return out;
}

double shift_warp(double t, double s) {
  if (!(s > 0)) throw DomainError("shift_warp: shift must be positive");
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("shift_warp: t outside [0,1]");
  return s * t / (1.0 + (s - 1.0) * t);
}

namespace {

const std::array<double, kDdpmSteps>& alpha_bar_table() {
  static const auto table = [] {
    std::array<double, kDdpmSteps> ab{};
    double prod = 1.0;
    for (int i = 0; i < kDdpmSteps; ++i) {
      const double beta = 1e-4 + (0.02 - 1e-4) * i / (kDdpmSteps - 1);
      prod *= 1.0 - beta;
      ab[static_cast<std::size_t>(i)] = prod;
    }
    return ab;
  }();
  return table;
}

}  // namespace

double ddpm_alpha_bar(int step) {
  if (step < 0 || step >= kDdpmSteps) throw DomainError("ddpm step out of range");
  return alpha_bar_table()[static_cast<std::size_t>(step)];
}

int ddpm_step(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("ddpm: t outside [0,1]");
  return static_cast<int>(std::floor(t * (kDdpmSteps - 1)));
}

LatentTensor ddpm_perturb(const LatentTensor& z0, double t, const LatentTensor& eps) {
  require_same_shape(z0, eps, "ddpm_perturb");
  const double ab = ddpm_alpha_bar(ddpm_step(t));
  const auto a = static_cast<float>(std::sqrt(ab));
  const auto b = static_cast<float>(std::sqrt(1.0 - ab));
  LatentTensor out = Tensor::zeros_like(z0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * z0[i] + b * eps[i];
  return out;
}

LatentTensor standard_normal_like(const LatentTensor& like, std::mt19937_64& rng) {
  LatentTensor eps = Tensor::zeros_like(like);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  for (float& v : eps.values()) v = dist(rng);
  return eps;
}

NoisedLatentSet make_noised_set(const LatentTensor& z0, const NoiseConfig& cfg,
                                std::mt19937_64& rng) {
  cfg.validate();
  NoisedLatentSet set;
  set.source = z0;
  set.entries.reserve(cfg.levels.size());
  for (double t : cfg.levels) {
    switch (cfg.mechanism) {
      case NoiseMechanism::kZero:
        set.entries.push_back({t, z0});
        break;
      case NoiseMechanism::kRectifiedFlow: {
        const double te = shift_warp(t, cfg.shift);
        set.entries.push_back({te, rf_interpolate(z0, te, standard_normal_like(z0, rng))});
        break;
      }
      case NoiseMechanism::kDdpm:
        set.entries.push_back({t, ddpm_perturb(z0, t, standard_normal_like(z0, rng))});
        break;
    }
  }
  return set;
}

}  // namespace clue
