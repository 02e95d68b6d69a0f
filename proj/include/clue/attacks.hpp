#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clue/tensor.hpp"

namespace clue {

enum class AttackKind { kJpeg, kGaussNoise, kGaussBlur, kResize };
inline constexpr AttackKind kAllAttacks[] = {AttackKind::kJpeg, AttackKind::kGaussNoise,
                                             AttackKind::kGaussBlur, AttackKind::kResize};

std::string to_string(AttackKind k);
AttackKind attack_kind_from_string(const std::string& s);

struct AttackPoint {
  AttackKind kind = AttackKind::kJpeg;
  // JPEG quality, noise σ, blur σ in pixels, or resize factor.
  double intensity = 0;
};

// Throws DomainError outside: quality integer 1–100, noise σ in [0, 1],
// blur σ in [0, 10], resize factor in (0, 4].
void validate_point(const AttackPoint& p);

struct AttackSpec {
  AttackKind kind = AttackKind::kJpeg;
  std::vector<double> grid;

  // Throws ConfigError for an empty grid, DomainError for a bad point.
  void validate() const;
  // jpeg {90,70,50,30}; noise {0.02,0.05,0.1}; blur {0.5,1,2}; resize {0.5,0.75,1.25}.
  static AttackSpec defaults(AttackKind kind);
};

// Shape- and range-preserving attack; noise draws from `seed`.
ImageTensor apply_attack(const ImageTensor& image, const AttackPoint& p, std::uint64_t seed);

}  // namespace clue
