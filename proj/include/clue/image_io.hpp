#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "clue/tensor.hpp"

namespace clue {

// 8-bit PNG I/O for C×H×W tensors in [0,1] (C = 1 or 3, RGB order).
// Values are rounded to the nearest of 256 levels.
void write_png(const std::filesystem::path& path, const Tensor& image);
Tensor read_png(const std::filesystem::path& path, int channels);

std::vector<std::uint8_t> encode_png(const Tensor& image);

// Baseline JPEG encode/decode at quality 1–100 (libjpeg scale), 4:4:4 sampling.
Tensor jpeg_roundtrip(const Tensor& image, int quality);

// Rounds every value to the nearest k/255.
Tensor quantize8(const Tensor& image);

double psnr(const Tensor& a, const Tensor& b);

}  // namespace clue
