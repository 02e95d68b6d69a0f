#include "clue/params.hpp"

namespace clue {

ParamId ParamStore::add(std::string name, Tensor value, bool trainable) {
  if (index_.contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  const auto id = static_cast<ParamId>(params_.size());
  index_.emplace(name, id);
  params_.push_back({std::move(name), std::move(value), trainable});
  return id;
}

bool ParamStore::contains(std::string_view name) const {
  return index_.contains(std::string(name));
}

ParamId ParamStore::id(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ConfigError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

void ParamStore::set_trainable_prefix(std::string_view prefix, bool trainable) {
  for (auto& p : params_)
    if (p.name.starts_with(prefix)) p.trainable = trainable;
}

std::size_t ParamStore::count(std::string_view prefix, bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (p.name.starts_with(prefix) && (!trainable_only || p.trainable)) n += p.value.size();
  return n;
}

std::uint64_t ParamStore::checksum(std::string_view prefix) const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params_) {
    if (!p.name.starts_with(prefix)) continue;
    h = fnv1a(std::as_bytes(std::span<const char>(p.name.data(), p.name.size())), h);
    h = fnv1a(std::as_bytes(p.value.values()), h);
  }
  return h;
}

Tensor normal_tensor(std::vector<int> shape, float stddev, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<float> dist(0.0f, stddev);
  for (float& v : t.values()) v = dist(rng);
  return t;
}

Tensor uniform_tensor(std::vector<int> shape, float bound, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<float> dist(-bound, bound);
  for (float& v : t.values()) v = dist(rng);
  return t;
}

}  // namespace clue
