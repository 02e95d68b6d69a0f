#include "clue/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "clue/image_io.hpp"
#include "clue/image_ops.hpp"

namespace clue {

std::string to_string(AttackKind k) {
  switch (k) {
    case AttackKind::kJpeg: return "jpeg";
    case AttackKind::kGaussNoise: return "gauss_noise";
    case AttackKind::kGaussBlur: return "gauss_blur";
    case AttackKind::kResize: return "resize";
  }
  return "?";
}

AttackKind attack_kind_from_string(const std::string& s) {
  for (AttackKind k : kAllAttacks)
    if (to_string(k) == s) return k;
  throw ConfigError("unknown attack '" + s + "' (jpeg, gauss_noise, gauss_blur, resize)");
}

void validate_point(const AttackPoint& p) {
  const double v = p.intensity;
  switch (p.kind) {
    case AttackKind::kJpeg:
      if (!(v >= 1 && v <= 100) || v != std::floor(v))
        throw DomainError("JPEG quality must be an integer in [1, 100]");
      break;
    case AttackKind::kGaussNoise:
      if (!(v >= 0 && v <= 1)) throw DomainError("noise sigma must lie in [0, 1]");
      break;
    case AttackKind::kGaussBlur:
      if (!(v >= 0 && v <= 10)) throw DomainError("blur sigma must lie in [0, 10] pixels");
      break;
    case AttackKind::kResize:
      if (!(v > 0 && v <= 4)) throw DomainError("resize factor must lie in (0, 4]");
      break;
  }
}

void AttackSpec::validate() const {
  if (grid.empty()) throw ConfigError("attack '" + to_string(kind) + "' has an empty intensity grid");
  for (double v : grid) validate_point({kind, v});
}

AttackSpec AttackSpec::defaults(AttackKind kind) {
  switch (kind) {
    case AttackKind::kJpeg: return {kind, {90, 70, 50, 30}};
    case AttackKind::kGaussNoise: return {kind, {0.02, 0.05, 0.1}};
    case AttackKind::kGaussBlur: return {kind, {0.5, 1.0, 2.0}};
    case AttackKind::kResize: return {kind, {0.5, 0.75, 1.25}};
  }
  return {kind, {}};
}

ImageTensor apply_attack(const ImageTensor& image, const AttackPoint& p, std::uint64_t seed) {
  validate_point(p);
  if (image.rank() != 3) throw DimensionError("attack expects a C×H×W image");
  switch (p.kind) {
    case AttackKind::kJpeg:
      return jpeg_roundtrip(image, static_cast<int>(p.intensity));
    case AttackKind::kGaussNoise: {
      ImageTensor out = image;
      if (p.intensity == 0) return out;
      std::mt19937_64 rng(seed);
      std::normal_distribution<float> noise(0.0f, static_cast<float>(p.intensity));
      for (float& v : out.values()) v = std::clamp(v + noise(rng), 0.0f, 1.0f);
      return out;
    }
    case AttackKind::kGaussBlur: {
      ImageTensor out = gaussian_blur(image, static_cast<float>(p.intensity));
      for (float& v : out.values()) v = std::clamp(v, 0.0f, 1.0f);
      return out;
    }
    case AttackKind::kResize: {
      const int h = image.dim(1), w = image.dim(2);
      const int sh = std::max(1, static_cast<int>(std::lround(h * p.intensity)));
      const int sw = std::max(1, static_cast<int>(std::lround(w * p.intensity)));
      ImageTensor out = resize_bilinear(resize_bilinear(image, sh, sw), h, w);
      for (float& v : out.values()) v = std::clamp(v, 0.0f, 1.0f);
      return out;
    }
  }
  return image;
}

}  // namespace clue
