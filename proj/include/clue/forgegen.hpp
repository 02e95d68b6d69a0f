#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "clue/tensor.hpp"

namespace clue {

enum class ForgeryKind { kSplice, kCopyMove, kRemoval, kAuthentic };
inline constexpr std::array<ForgeryKind, 4> kAllKinds = {
    ForgeryKind::kSplice, ForgeryKind::kCopyMove, ForgeryKind::kRemoval, ForgeryKind::kAuthentic};

std::string to_string(ForgeryKind k);
ForgeryKind forgery_kind_from_string(const std::string& s);

struct ForgerySample {
  ImageTensor image;  // 3×H×W in [0,1]
  MaskTensor mask;    // 1×H×W in {0,1}
  ForgeryKind kind = ForgeryKind::kAuthentic;
  std::string id;
  std::string split;
  std::uint64_t seed = 0;
};

inline constexpr double kMinForgedFraction = 0.02;
inline constexpr double kMaxForgedFraction = 0.5;

struct SplitSpec {
  std::string name;
  int count = 0;
};

struct DatasetSpec {
  std::vector<SplitSpec> splits = {{"train", 512}, {"test", 64}};
  int height = 64;
  int width = 64;
  // Proportions in kAllKinds order: splice, copymove, removal, authentic.
  std::array<double, 4> mix = {0.4, 0.3, 0.2, 0.1};
  std::uint64_t seed = 7;

  void validate() const;
};

// Procedural natural-ish image: low-frequency colour gradient, band-limited
// texture, 1–4 soft shapes and per-image sensor noise.
ImageTensor gen_base_image(std::mt19937_64& rng, int height = 64, int width = 64);

// Applies one forgery of `kind` to `base` (donor supplies spliced content).
// The mask marks exactly the pasted or filled region. Throws DomainError if
// no admissible region is found in 16 attempts.
ForgerySample apply_forgery(const ImageTensor& base, const ImageTensor& donor, ForgeryKind kind,
                            std::mt19937_64& rng);

// Kind counts per split via largest remainder over `mix`.
std::array<int, 4> allocate_kinds(int count, const std::array<double, 4>& mix);

std::uint64_t sample_seed(std::uint64_t dataset_seed, const std::string& id);

// Deterministic generation of every split of `spec`.
std::vector<ForgerySample> generate_dataset(const DatasetSpec& spec);
ForgerySample generate_sample(const std::string& id, const std::string& split, ForgeryKind kind,
                              std::uint64_t seed, int height, int width);

// Layout: images/<id>.png, masks/<id>.png (0/255), manifest.json.
void write_dataset(const DatasetSpec& spec, const std::filesystem::path& dir);
void write_samples(const std::vector<ForgerySample>& samples, const DatasetSpec& spec,
                   const std::filesystem::path& dir);
// Throws FormatError naming the offending id on a missing or mismatched file.
std::vector<ForgerySample> read_dataset(const std::filesystem::path& dir);

std::vector<ForgerySample> filter_split(const std::vector<ForgerySample>& samples,
                                        const std::string& split);

double forged_fraction(const MaskTensor& mask);

}  // namespace clue
