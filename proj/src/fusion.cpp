#include "clue/fusion.hpp"

#include <cmath>

namespace clue {
namespace {

ParamId conv_weight(ParamStore& store, const std::string& name, int cout, int cin, int k,
                    std::mt19937_64& rng) {
  const float stddev = 1.0f / std::sqrt(static_cast<float>(cin * k * k));
  return store.add(name, normal_tensor({cout, cin, k, k}, stddev, rng), true);
}

}  // namespace

void FusionConfig::validate() const {
  if (proj_channels <= 0 || fuse_channels <= 0 || groupnorm_groups <= 0)
    throw ConfigError("fusion channel counts must be positive");
  if (proj_channels % groupnorm_groups != 0 || fuse_channels % groupnorm_groups != 0)
    throw ConfigError("fusion groupnorm_groups must divide proj_channels and fuse_channels");
}

Fusion::Fusion(const FusionConfig& cfg, int semantic_channels, int forensic_channels,
               ParamStore& store, std::mt19937_64& rng)
    : cfg_(cfg), c_s_(semantic_channels), c_d_(forensic_channels) {
  cfg_.validate();
  const int p = cfg_.proj_channels, f = cfg_.fuse_channels;
  proj_s_w_ = conv_weight(store, "fuse.proj_s.weight", p, c_s_, 1, rng);
  proj_s_b_ = store.add("fuse.proj_s.bias", Tensor({p}), true);
  gn_s_g_ = store.add("fuse.gn_s.gamma", Tensor({p}, 1.0f), true);
  gn_s_b_ = store.add("fuse.gn_s.beta", Tensor({p}), true);
  proj_d_w_ = conv_weight(store, "fuse.proj_d.weight", p, c_d_, 1, rng);
  proj_d_b_ = store.add("fuse.proj_d.bias", Tensor({p}), true);
  gn_d_g_ = store.add("fuse.gn_d.gamma", Tensor({p}, 1.0f), true);
  gn_d_b_ = store.add("fuse.gn_d.beta", Tensor({p}), true);
  conv_w_ = conv_weight(store, "fuse.conv.weight", f, 2 * p, 3, rng);
  conv_b_ = store.add("fuse.conv.bias", Tensor({f}), true);
  gn_g_ = store.add("fuse.gn.gamma", Tensor({f}, 1.0f), true);
  gn_b_ = store.add("fuse.gn.beta", Tensor({f}), true);
  out_w_ = conv_weight(store, "fuse.out.weight", f, f, 1, rng);
  out_b_ = store.add("fuse.out.bias", Tensor({f}), true);
}

ag::Var Fusion::forward(ag::Tape& tape, const ParamStore& store, ag::Var f_s,
                        ag::Var f_d) const {
  using namespace ag;
  const auto& ss = f_s.shape();
  const auto& sd = f_d.shape();
  if (ss.size() != 3 || sd.size() != 3 || ss[1] <= 0 || ss[2] <= 0 || sd[1] <= 0 || sd[2] <= 0)
    throw DimensionError("fuse: inputs must be non-empty C×H×W maps");
  if (ss[0] != c_s_ || sd[0] != c_d_)
    throw DimensionError("fuse: expected " + std::to_string(c_s_) + " semantic and " +
                         std::to_string(c_d_) + " forensic channels, got " + shape_str(ss) +
                         " and " + shape_str(sd));
  if (ss[1] != sd[1] || ss[2] != sd[2]) f_s = resize_bilinear(f_s, sd[1], sd[2]);
  const int g = cfg_.groupnorm_groups;
  auto P = [&](ParamId id) { return tape.param(store, id); };
  Var ps = group_norm(conv2d(f_s, P(proj_s_w_), P(proj_s_b_), 1, 0), g, P(gn_s_g_), P(gn_s_b_));
  Var pd = group_norm(conv2d(f_d, P(proj_d_w_), P(proj_d_b_), 1, 0), g, P(gn_d_g_), P(gn_d_b_));
  Var h = conv2d(concat({ps, pd}), P(conv_w_), P(conv_b_), 1, 1);
  h = silu(group_norm(h, g, P(gn_g_), P(gn_b_)));
  return conv2d(h, P(out_w_), P(out_b_), 1, 0);
}

FeatureMap fuse(const FeatureMap& f_s, const FeatureMap& f_d, const Fusion& fusion,
                const ParamStore& store) {
  ag::Tape tape;
  return fusion.forward(tape, store, tape.constant(f_s), tape.constant(f_d)).value();
}

}  // namespace clue
