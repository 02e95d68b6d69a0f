#pragma once

#include <vector>

#include "clue/params.hpp"

namespace clue {

struct AdamConfig {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float weight_decay = 0.0f;  // decoupled

  void validate() const;
};

// Adam with bias correction over the trainable entries of a ParamStore.
class Adam {
 public:
  Adam(const AdamConfig& cfg, const ParamStore& store);

  // Applies one update from `grads` (indexed by ParamId; empty entries are
  // skipped) and advances the step counter.
  void step(ParamStore& store, const GradBuffer& grads);

  long long steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

  // Moment buffers, indexed by ParamId; empty for frozen parameters.
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }
  void set_steps(long long t) { t_ = t; }

 private:
  AdamConfig cfg_;
  long long t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace clue
