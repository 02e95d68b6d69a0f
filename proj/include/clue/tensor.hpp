#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace clue {

// Error taxonomy shared by every module.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense row-major float32 array. Rank-2 tensors are (rows, cols); rank-3
// tensors are (C, H, W).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, float fill = 0.0f);
  Tensor(std::vector<int> shape, std::vector<float> data);

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }
  std::vector<float>& storage() { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  float& at(int c, int h, int w) {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + h) * shape_[2] + w];
  }
  float at(int c, int h, int w) const {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + h) * shape_[2] + w];
  }
  float& at(int r, int c) { return data_[static_cast<std::size_t>(r) * shape_[1] + c]; }
  float at(int r, int c) const { return data_[static_cast<std::size_t>(r) * shape_[1] + c]; }

  // Same data, new shape; element count must match.
  Tensor reshaped(std::vector<int> shape) const;

  void fill(float v);
  Tensor& operator+=(const Tensor& o);
  Tensor& operator*=(float s);

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool operator==(const Tensor& o) const = default;

 private:
  std::vector<int> shape_;
  std::vector<float> data_;
};

// Domain aliases. All are C×H×W except MaskTensor, which is 1×H×W.
using ImageTensor = Tensor;
using LatentTensor = Tensor;
using FeatureMap = Tensor;
using MaskTensor = Tensor;

std::string shape_str(const std::vector<int>& shape);
std::size_t element_count(const std::vector<int>& shape);

// Throws DimensionError naming `what` unless the shapes match.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

// 64-bit FNV-1a over the raw bytes; used for parameter checksums and
// config hashing.
std::uint64_t fnv1a(std::span<const std::byte> bytes,
                    std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t checksum(const Tensor& t);

float max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace clue
