#include "clue/loc_head.hpp"

#include <cmath>

namespace clue {
namespace {
constexpr float kMinProb = 1e-7f;
constexpr float kMaxProb = 0.99999994f;  // largest float below 1
}  // namespace

void HeadConfig::validate() const {
  if (mid_channels <= 0) throw ConfigError("head mid_channels must be positive");
  if (upsample_scale <= 0) throw ConfigError("head upsample_scale must be a positive integer");
}

LocalizationHead::LocalizationHead(const HeadConfig& cfg, int in_channels, ParamStore& store,
                                   std::mt19937_64& rng)
    : cfg_(cfg), in_channels_(in_channels) {
  cfg_.validate();
  const int m = cfg_.mid_channels;
  conv1_w_ = store.add("head.conv1.weight",
                       normal_tensor({m, in_channels, 3, 3},
                                     std::sqrt(2.0f / static_cast<float>(in_channels * 9)), rng),
                       true);
  conv1_b_ = store.add("head.conv1.bias", Tensor({m}), true);
  conv2_w_ = store.add("head.conv2.weight",
                       normal_tensor({1, m, 1, 1}, 1.0f / std::sqrt(static_cast<float>(m)), rng),
                       true);
  conv2_b_ = store.add("head.conv2.bias", Tensor({1}), true);
}

ag::Var LocalizationHead::logits(ag::Tape& tape, const ParamStore& store, ag::Var f_fuse) const {
  const auto& s = f_fuse.shape();
  if (s.size() != 3 || s[0] != in_channels_)
    throw DimensionError("predict_mask: expected " + std::to_string(in_channels_) +
                         "×H×W features, got " + shape_str(s));
  ag::Var h = ag::relu(ag::conv2d(f_fuse, tape.param(store, conv1_w_),
                                  tape.param(store, conv1_b_), 1, 1));
  return ag::conv2d(h, tape.param(store, conv2_w_), tape.param(store, conv2_b_), 1, 0);
}

ag::Var LocalizationHead::probabilities(ag::Var logits) const {
  const auto& s = logits.shape();
  ag::Var up = ag::resize_bilinear(logits, s[1] * cfg_.upsample_scale, s[2] * cfg_.upsample_scale);
  // Keeps every probability strictly inside (0,1) even for saturated logits.
  return ag::clamp(ag::sigmoid(up), kMinProb, kMaxProb);
}

ag::Var LocalizationHead::forward(ag::Tape& tape, const ParamStore& store, ag::Var f_fuse) const {
  return probabilities(logits(tape, store, f_fuse));
}

MaskTensor predict_mask(const FeatureMap& f_fuse, const LocalizationHead& head,
                        const ParamStore& store) {
  ag::Tape tape;
  return head.forward(tape, store, tape.constant(f_fuse)).value();
}

}  // namespace clue
