#include "clue/lora.hpp"

#include <algorithm>

namespace clue {

LoRAAdapter LoRAAdapter::create(std::string target_name, int d_in, int d_out, int rank,
                                float alpha, std::mt19937_64& rng) {
  if (rank <= 0) throw ConfigError("LoRA rank must be positive");
  if (rank > std::min(d_in, d_out)) {
    throw ConfigError("LoRA rank " + std::to_string(rank) + " exceeds min(d_in, d_out) = " +
                      std::to_string(std::min(d_in, d_out)) + " for '" + target_name + "'");
  }
  if (!(alpha > 0)) throw ConfigError("LoRA alpha must be positive");
  LoRAAdapter ad;
  ad.A = normal_tensor({rank, d_in}, kLoraInitStd, rng);
  ad.B = Tensor({d_out, rank});
  ad.rank = rank;
  ad.alpha = alpha;
  ad.target_name = std::move(target_name);
  return ad;
}

Tensor lora_forward(const Tensor& x, const Tensor& base_weight, const Tensor& base_bias,
                    const LoRAAdapter& adapter) {
  if (x.rank() != 2 || base_weight.rank() != 2)
    throw DimensionError("lora_forward: x and weight must be matrices");
  const int d_in = base_weight.dim(1), d_out = base_weight.dim(0);
  if (x.dim(1) != d_in || adapter.d_in() != d_in || adapter.d_out() != d_out ||
      base_bias.size() != static_cast<std::size_t>(d_out) || adapter.A.dim(0) != adapter.rank ||
      adapter.B.dim(1) != adapter.rank) {
    throw DimensionError("lora_forward: inconsistent shapes for x " + shape_str(x.shape()) +
                         ", W " + shape_str(base_weight.shape()) + ", A " +
                         shape_str(adapter.A.shape()) + ", B " + shape_str(adapter.B.shape()));
  }
  ag::Tape tape;
  ag::Var y = ag::linear(tape.constant(x), tape.constant(base_weight), tape.constant(base_bias));
  ag::Var low = ag::matmul(tape.constant(x), tape.constant(adapter.A), false, true);
  ag::Var delta = ag::matmul(low, tape.constant(adapter.B), false, true);
  return ag::add(y, ag::scale(delta, adapter.scale())).value();
}

const AdapterSlot* AdapterRegistry::find(const std::string& target) const {
  auto it = adapters.find(target);
  return it == adapters.end() ? nullptr : &it->second;
}

std::size_t AdapterRegistry::parameter_count(const ParamStore& store) const {
  std::size_t n = 0;
  for (const auto& [name, slot] : adapters) n += store[slot.a].value.size() + store[slot.b].value.size();
  return n;
}

AdapterRegistry attach_qkv_adapters(const AttentionNetwork& network, ParamStore& store, int rank,
                                    float alpha, std::mt19937_64& rng) {
  const auto blocks = network.attention_blocks();
  if (blocks.empty()) throw ConfigError("attach_qkv_adapters: network has no attention blocks");
  AdapterRegistry reg;
  for (const auto& blk : blocks) {
    for (const LinearRef* ref : {&blk.q, &blk.k, &blk.v}) {
      auto ad = LoRAAdapter::create(ref->name, ref->d_in, ref->d_out, rank, alpha, rng);
      AdapterSlot slot;
      slot.a = store.add("lora." + ref->name + ".A", std::move(ad.A), true);
      slot.b = store.add("lora." + ref->name + ".B", std::move(ad.B), true);
      slot.rank = rank;
      slot.alpha = alpha;
      reg.adapters.emplace(ref->name, slot);
    }
  }
  for (ParamId id : network.base_parameters()) store[id].trainable = false;
  reg.frozen_base = true;
  return reg;
}

double trainable_fraction(const AdapterRegistry& registry, const AttentionNetwork& network,
                          const ParamStore& store) {
  const auto adapter = static_cast<double>(registry.parameter_count(store));
  if (adapter == 0) return 0.0;
  double base = 0;
  for (ParamId id : network.base_parameters()) base += static_cast<double>(store[id].value.size());
  return adapter / (adapter + base);
}

namespace ag {

Var adapted_linear(Tape& tape, const ParamStore& store, const LinearRef& ref,
                   const AdapterRegistry* registry, Var x) {
  Var bias = ref.bias >= 0 ? tape.param(store, ref.bias) : Var();
  Var y = linear(x, tape.param(store, ref.weight), bias);
  const AdapterSlot* slot = registry ? registry->find(ref.name) : nullptr;
  if (!slot) return y;
  Var low = matmul(x, tape.param(store, slot->a), false, true);
  Var delta = matmul(low, tape.param(store, slot->b), false, true);
  return add(y, scale(delta, slot->scale()));
}

}  // namespace ag
}  // namespace clue
