#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "clue/tensor.hpp"

namespace clue {

struct Parameter {
  std::string name;
  Tensor value;
  bool trainable = false;
};

using ParamId = int;

// Owns every named tensor of a model. Names are namespaced by component
// (`ev.`, `sd.`, `sam.`, `fuse.`, `head.`, `lora.`); ids are insertion order
// and stable for the lifetime of the store.
class ParamStore {
 public:
  ParamId add(std::string name, Tensor value, bool trainable);

  Parameter& operator[](ParamId id) { return params_.at(static_cast<std::size_t>(id)); }
  const Parameter& operator[](ParamId id) const {
    return params_.at(static_cast<std::size_t>(id));
  }
  int size() const { return static_cast<int>(params_.size()); }

  bool contains(std::string_view name) const;
  ParamId id(std::string_view name) const;

  void set_trainable_prefix(std::string_view prefix, bool trainable);

  std::size_t count(std::string_view prefix, bool trainable_only = false) const;
  std::uint64_t checksum(std::string_view prefix) const;

  std::vector<Parameter>::const_iterator begin() const { return params_.begin(); }
  std::vector<Parameter>::const_iterator end() const { return params_.end(); }

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, ParamId> index_;
};

// Per-parameter gradient buffers aligned with a ParamStore's ids. Entries
// for frozen parameters stay empty.
using GradBuffer = std::vector<Tensor>;

// Seeded initializers. Each draws from the passed engine so that component
// construction order fully determines the weights.
Tensor normal_tensor(std::vector<int> shape, float stddev, std::mt19937_64& rng);
Tensor uniform_tensor(std::vector<int> shape, float bound, std::mt19937_64& rng);

}  // namespace clue
