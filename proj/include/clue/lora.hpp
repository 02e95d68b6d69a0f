#pragma once

#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "clue/autograd.hpp"
#include "clue/params.hpp"
#include "clue/tensor.hpp"

namespace clue {

// Low-rank delta (alpha / rank)·B·A on top of a frozen linear map.
// A is rank×d_in, B is d_out×rank.
struct LoRAAdapter {
  Tensor A;
  Tensor B;
  int rank = 0;
  float alpha = 0;
  std::string target_name;

  // A ~ N(0, 0.02²), B = 0. Throws ConfigError unless
  // 0 < rank <= min(d_in, d_out) and alpha > 0.
  static LoRAAdapter create(std::string target_name, int d_in, int d_out, int rank, float alpha,
                            std::mt19937_64& rng);

  int d_in() const { return A.dim(1); }
  int d_out() const { return B.dim(0); }
  float scale() const { return alpha / static_cast<float>(rank); }
  std::size_t parameter_count() const { return A.size() + B.size(); }
};

inline constexpr float kLoraInitStd = 0.02f;

// x[n×d_in]·Wᵀ + bias + (alpha/rank)·x·Aᵀ·Bᵀ.
Tensor lora_forward(const Tensor& x, const Tensor& base_weight, const Tensor& base_bias,
                    const LoRAAdapter& adapter);

// A named linear map inside a network, stored as weight[d_out×d_in] and
// bias[d_out] in a ParamStore.
struct LinearRef {
  std::string name;
  ParamId weight = -1;
  ParamId bias = -1;
  int d_in = 0;
  int d_out = 0;
};

struct AttentionProjections {
  LinearRef q, k, v;
};

// Contract a network must satisfy to receive QKV adapters.
class AttentionNetwork {
 public:
  virtual ~AttentionNetwork() = default;
  virtual std::vector<AttentionProjections> attention_blocks() const = 0;
  // Parameters frozen by adapter attachment and counted as "base" in
  // trainable_fraction.
  virtual std::vector<ParamId> base_parameters() const = 0;
};

struct AdapterSlot {
  ParamId a = -1;
  ParamId b = -1;
  int rank = 0;
  float alpha = 0;
  float scale() const { return alpha / static_cast<float>(rank); }
};

// target_name -> adapter parameters (stored as `lora.<target>.A` / `.B`).
struct AdapterRegistry {
  std::map<std::string, AdapterSlot> adapters;
  bool frozen_base = false;

  const AdapterSlot* find(const std::string& target) const;
  bool empty() const { return adapters.empty(); }
  std::size_t parameter_count(const ParamStore& store) const;
};

// One adapter per Q, K and V projection of every attention block; base
// parameters of the network are frozen. Throws ConfigError for networks
// without attention blocks or rank > min(d_in, d_out).
AdapterRegistry attach_qkv_adapters(const AttentionNetwork& network, ParamStore& store, int rank,
                                    float alpha, std::mt19937_64& rng);

// adapter params / (adapter params + base params); 0 for an empty registry.
double trainable_fraction(const AdapterRegistry& registry, const AttentionNetwork& network,
                          const ParamStore& store);

namespace ag {
// Tape-level projection through `ref`, adding the adapter delta when the
// registry holds one for ref.name. `registry` may be null.
Var adapted_linear(Tape& tape, const ParamStore& store, const LinearRef& ref,
                   const AdapterRegistry* registry, Var x);
}  // namespace ag

}  // namespace clue
