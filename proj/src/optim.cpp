#include "clue/optim.hpp"

#include <cmath>

namespace clue {

void AdamConfig::validate() const {
  if (!(lr > 0)) throw ConfigError("optimizer lr must be positive");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
    throw ConfigError("optimizer betas must lie in [0, 1)");
  if (!(eps > 0)) throw ConfigError("optimizer eps must be positive");
  if (weight_decay < 0) throw ConfigError("optimizer weight_decay must be non-negative");
}

Adam::Adam(const AdamConfig& cfg, const ParamStore& store) : cfg_(cfg) {
  cfg_.validate();
  m_.resize(static_cast<std::size_t>(store.size()));
  v_.resize(static_cast<std::size_t>(store.size()));
  for (ParamId id = 0; id < store.size(); ++id) {
    if (!store[id].trainable) continue;
    m_[static_cast<std::size_t>(id)] = Tensor::zeros_like(store[id].value);
    v_[static_cast<std::size_t>(id)] = Tensor::zeros_like(store[id].value);
  }
}

void Adam::step(ParamStore& store, const GradBuffer& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(cfg_.beta1), static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(static_cast<double>(cfg_.beta2), static_cast<double>(t_));
  const auto lr_t = static_cast<float>(cfg_.lr * std::sqrt(bc2) / bc1);
  for (ParamId id = 0; id < store.size() && static_cast<std::size_t>(id) < grads.size(); ++id) {
    const auto i = static_cast<std::size_t>(id);
    if (!store[id].trainable || grads[i].size() == 0) continue;
    Tensor& p = store[id].value;
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    const Tensor& g = grads[i];
    require_same_shape(p, g, store[id].name.c_str());
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = cfg_.beta1 * m[k] + (1 - cfg_.beta1) * g[k];
      v[k] = cfg_.beta2 * v[k] + (1 - cfg_.beta2) * g[k] * g[k];
      if (cfg_.weight_decay > 0) p[k] -= cfg_.lr * cfg_.weight_decay * p[k];
      p[k] -= lr_t * m[k] / (std::sqrt(v[k]) + cfg_.eps);
    }
  }
}

}  // namespace clue
