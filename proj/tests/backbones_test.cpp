#include <gtest/gtest.h>

#include "clue/backbones.hpp"
#include "test_util.hpp"

using namespace clue;
using clue::testing::random_image;

TEST(LatentEncoder, ShapeAndDeterminism) {
  std::mt19937_64 rng(1);
  const ImageTensor img = random_image(64, 64, rng);
  const LatentEncoderConfig cfg;
  const LatentTensor z = encode_latent(img, cfg);
  EXPECT_EQ(z.shape(), (std::vector<int>{4, 8, 8}));
  EXPECT_EQ(encode_latent(img, cfg), z);
  ImageTensor scaled = img;
  scaled *= 0.999f;
  EXPECT_NE(encode_latent(scaled, cfg), z);
}

TEST(LatentEncoder, RejectsBadGeometry) {
  LatentEncoderConfig cfg;
  cfg.downsample_factor = 6;
  EXPECT_THROW(cfg.validate(), ConfigError);
  std::mt19937_64 rng(2);
  EXPECT_THROW(encode_latent(random_image(60, 64, rng), LatentEncoderConfig{}), DimensionError);
  EXPECT_THROW(encode_latent(Tensor({1, 64, 64}), LatentEncoderConfig{}), DimensionError);
}

TEST(LatentEncoder, ParametersAreFrozen) {
  ParamStore store;
  LatentEncoder enc(LatentEncoderConfig{}, store);
  for (ParamId id : enc.parameters()) EXPECT_FALSE(store[id].trainable);
}

TEST(PositionEncoding, ShapeAndDistinctRows) {
  const Tensor p = position_encoding(4, 4, 16);
  EXPECT_EQ(p.shape(), (std::vector<int>{16, 16}));
  for (int a = 0; a < 16; ++a)
    for (int b = a + 1; b < 16; ++b) {
      float d = 0;
      for (int k = 0; k < 16; ++k) d += std::abs(p.at(a, k) - p.at(b, k));
      EXPECT_GT(d, 1e-3f) << a << " " << b;
    }
}

TEST(TimestepEmbedding, DistinguishesLevels) {
  EXPECT_GT(max_abs_diff(timestep_embedding(0.5, 32), timestep_embedding(0.75, 32)), 1e-3f);
  EXPECT_EQ(timestep_embedding(0.5, 32).size(), 32u);
}

namespace {

NoisedLatentSet make_set(int levels, std::uint64_t seed, NoiseMechanism m = NoiseMechanism::kRectifiedFlow) {
  NoiseConfig nc;
  nc.mechanism = m;
  nc.levels.clear();
  for (int i = 0; i < levels; ++i) nc.levels.push_back(0.2 + 0.2 * i);
  std::mt19937_64 rng(seed);
  const LatentTensor z0 = normal_tensor({4, 8, 8}, 1.0f, rng);
  return make_noised_set(z0, nc, rng);
}

}  // namespace

TEST(Denoiser, ConsolidationShapeTrace) {
  DenoiserConfig cfg;
  cfg.width = 32;
  cfg.out_channels = 64;
  ParamStore store;
  Denoiser net(cfg, 4, 3, store);
  const ParamId w = net.consolidation_parameters()[0];
  EXPECT_EQ(store[w].value.shape(), (std::vector<int>{64, 96, 1, 1}));
  const FeatureMap f = denoiser_features(make_set(3, 1), net, store, nullptr);
  EXPECT_EQ(f.shape(), (std::vector<int>{64, 8, 8}));
}

TEST(Denoiser, SingleLevelAndLevelMismatch) {
  ParamStore store;
  Denoiser net(DenoiserConfig{}, 4, 1, store);
  EXPECT_EQ(denoiser_features(make_set(1, 2), net, store, nullptr).dim(0), 64);
  EXPECT_THROW(denoiser_features(make_set(2, 2), net, store, nullptr), ConfigError);
}

TEST(Denoiser, ZeroNoiseLevelsDifferOnlyByTime) {
  ParamStore store;
  Denoiser net(DenoiserConfig{}, 4, 3, store);
  const auto set = make_set(3, 3, NoiseMechanism::kZero);
  ag::Tape tape;
  const ag::Var a = net.level_features(tape, store, set.entries[0].z_t, set.entries[0].t_effective, nullptr);
  const ag::Var b = net.level_features(tape, store, set.entries[1].z_t, set.entries[1].t_effective, nullptr);
  const ag::Var c = net.level_features(tape, store, set.entries[1].z_t, set.entries[0].t_effective, nullptr);
  EXPECT_EQ(set.entries[0].z_t, set.entries[1].z_t);
  EXPECT_GT(max_abs_diff(a.value(), b.value()), 0.0f);
  EXPECT_EQ(a.value(), c.value());
}

TEST(Denoiser, BaseIsFrozenAndConsolidationTrainable) {
  ParamStore store;
  Denoiser net(DenoiserConfig{}, 4, 3, store);
  for (ParamId id : net.base_parameters()) EXPECT_FALSE(store[id].trainable);
  for (ParamId id : net.consolidation_parameters()) EXPECT_TRUE(store[id].trainable);
  EXPECT_EQ(net.attention_blocks().size(), 3u);
}

TEST(SemanticEncoder, ShapeAndSensitivity) {
  ParamStore store;
  SemanticEncoder net(SemanticEncoderConfig{}, 3, store);
  std::mt19937_64 rng(4);
  const ImageTensor img = random_image(64, 64, rng);
  const FeatureMap f = semantic_features(img, net, store, nullptr);
  EXPECT_EQ(f.shape(), (std::vector<int>{32, 8, 8}));
  ImageTensor perm = img;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) std::swap(perm.at(0, y, x), perm.at(2, y, x));
  EXPECT_GT(max_abs_diff(semantic_features(perm, net, store, nullptr), f), 1e-4f);
  EXPECT_THROW(semantic_features(random_image(60, 64, rng), net, store, nullptr), DimensionError);
}

TEST(SemanticEncoder, ZeroInitAdaptersAreIdentity) {
  ParamStore store;
  SemanticEncoder net(SemanticEncoderConfig{}, 3, store);
  std::mt19937_64 rng(5);
  const ImageTensor img = random_image(64, 64, rng);
  const FeatureMap plain = semantic_features(img, net, store, nullptr);
  const auto reg = attach_qkv_adapters(net, store, 4, 4.0f, rng);
  EXPECT_LT(max_abs_diff(semantic_features(img, net, store, &reg), plain), 1e-6f);
}

TEST(BackboneConfigs, Validation) {
  DenoiserConfig d;
  d.depth = 1;
  EXPECT_THROW(d.validate(), ConfigError);
  d = {};
  d.tap_layer = 5;
  EXPECT_THROW(d.validate(), ConfigError);
  SemanticEncoderConfig s;
  s.patch_size = 0;
  EXPECT_THROW(s.validate(), ConfigError);
}
