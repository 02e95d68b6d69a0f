#include <gtest/gtest.h>

#include "clue/fusion.hpp"
#include "clue/loc_head.hpp"
#include "clue/losses.hpp"
#include "clue/model.hpp"
#include "clue/optim.hpp"
#include "test_util.hpp"

using namespace clue;
using clue::testing::random_image;
using clue::testing::random_tensor;

TEST(Fusion, ShapeTrace) {
  ParamStore store;
  std::mt19937_64 rng(1);
  Fusion fusion(FusionConfig{}, 32, 64, store, rng);
  const FeatureMap out =
      fuse(random_tensor({32, 8, 8}, rng), random_tensor({64, 8, 8}, rng), fusion, store);
  EXPECT_EQ(out.shape(), (std::vector<int>{64, 8, 8}));
}

TEST(Fusion, SemanticResizedToForensicGrid) {
  ParamStore store;
  std::mt19937_64 rng(2);
  Fusion fusion(FusionConfig{}, 32, 64, store, rng);
  const FeatureMap out =
      fuse(random_tensor({32, 4, 4}, rng), random_tensor({64, 8, 8}, rng), fusion, store);
  EXPECT_EQ(out.shape(), (std::vector<int>{64, 8, 8}));
}

TEST(Fusion, ZeroInputsGiveConstantMap) {
  ParamStore store;
  std::mt19937_64 rng(3);
  Fusion fusion(FusionConfig{}, 32, 64, store, rng);
  const FeatureMap out = fuse(Tensor({32, 8, 8}), Tensor({64, 8, 8}), fusion, store);
  for (int c = 0; c < out.dim(0); ++c)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) EXPECT_NEAR(out.at(c, y, x), out.at(c, 0, 0), 1e-5f);
}

TEST(Fusion, ChannelMismatchAndConfig) {
  ParamStore store;
  std::mt19937_64 rng(4);
  Fusion fusion(FusionConfig{}, 32, 64, store, rng);
  EXPECT_THROW(fuse(Tensor({16, 8, 8}), Tensor({64, 8, 8}), fusion, store), DimensionError);
  FusionConfig bad;
  bad.groupnorm_groups = 5;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(LocalizationHead, ShapeRangeAndConstants) {
  ParamStore store;
  std::mt19937_64 rng(5);
  LocalizationHead head(HeadConfig{}, 64, store, rng);
  const MaskTensor m = predict_mask(random_tensor({64, 8, 8}, rng), head, store);
  EXPECT_EQ(m.shape(), (std::vector<int>{1, 64, 64}));
  for (float v : m.values()) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
  // Zero padding only reaches the outer feature ring; the centre stays constant.
  const MaskTensor c = predict_mask(Tensor({64, 8, 8}, 0.3f), head, store);
  for (int y = 20; y < 44; ++y)
    for (int x = 20; x < 44; ++x) EXPECT_NEAR(c.at(0, y, x), c.at(0, 32, 32), 1e-6f);
  ag::Tape tape;
  const ag::Var p = head.probabilities(tape.constant(Tensor({1, 8, 8})));
  for (float v : p.value().values()) EXPECT_EQ(v, 0.5f);
}

TEST(BranchMode, RoundTrip) {
  for (auto m : {BranchMode::kTuned, BranchMode::kFrozen, BranchMode::kRemoved})
    EXPECT_EQ(branch_mode_from_string(to_string(m)), m);
  EXPECT_THROW(branch_mode_from_string("half"), ConfigError);
}

TEST(ModelConfig, Validation) {
  ModelConfig c;
  c.head.upsample_scale = 4;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.denoiser_mode = BranchMode::kRemoved;
  c.semantic_mode = BranchMode::kRemoved;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ClueModel, ForwardShapeAndRange) {
  ClueModel model(ModelConfig{});
  std::mt19937_64 rng(6);
  const MaskTensor m = model.predict(random_image(64, 64, rng), rng);
  EXPECT_EQ(m.shape(), (std::vector<int>{1, 64, 64}));
  for (float v : m.values()) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
  EXPECT_THROW(model.predict(Tensor({1, 64, 64}), rng), DimensionError);
}

TEST(ClueModel, RemovedBranchFeedsZeros) {
  ModelConfig cfg;
  cfg.denoiser_mode = BranchMode::kRemoved;
  ClueModel model(cfg);
  std::mt19937_64 rng(7);
  ag::Tape tape;
  const ag::Var f = model.denoiser_branch(tape, random_image(64, 64, rng), rng);
  EXPECT_EQ(f.value().shape(), (std::vector<int>{64, 8, 8}));
  for (float v : f.value().values()) EXPECT_EQ(v, 0.0f);
  EXPECT_TRUE(model.denoiser_adapters().empty());
}

TEST(ClueModel, FrozenBranchesTrainOnlyFusionAndHead) {
  ModelConfig cfg;
  cfg.denoiser_mode = BranchMode::kFrozen;
  cfg.semantic_mode = BranchMode::kFrozen;
  ClueModel model(cfg);
  const ParamStore& s = model.store();
  EXPECT_EQ(s.count("sd.", true), 0u);
  EXPECT_EQ(s.count("sam.", true), 0u);
  EXPECT_EQ(s.count("lora.", true), 0u);
  EXPECT_GT(s.count("fuse.", true), 0u);
  EXPECT_GT(s.count("head.", true), 0u);
}

TEST(ClueModel, SameSeedSameWeightsAndPrediction) {
  ClueModel a(ModelConfig{}), b(ModelConfig{});
  EXPECT_EQ(a.store().checksum(""), b.store().checksum(""));
  std::mt19937_64 img_rng(8);
  const ImageTensor img = random_image(64, 64, img_rng);
  std::mt19937_64 r1(9), r2(9);
  EXPECT_EQ(a.predict(img, r1), b.predict(img, r2));
}

TEST(ClueModel, OverfitOneBatchProbe) {
  ClueModel model(ModelConfig{});
  Adam opt(AdamConfig{}, model.store());
  std::mt19937_64 rng(10);
  const ImageTensor img = random_image(64, 64, rng);
  MaskTensor gt({1, 64, 64});
  for (int y = 16; y < 40; ++y)
    for (int x = 20; x < 48; ++x) gt.at(0, y, x) = 1.0f;
  auto step = [&]() {
    std::mt19937_64 noise(11);
    ag::Tape tape;
    const ag::Var loss = ag::total_loss(model.forward(tape, img, noise), gt, LossWeights{});
    tape.backward(loss);
    GradBuffer g(static_cast<std::size_t>(model.store().size()));
    tape.accumulate_param_grads(g);
    opt.step(model.store(), g);
    return loss.value()[0];
  };
  const float first = step();
  float last = first;
  for (int i = 0; i < 50; ++i) last = step();
  EXPECT_LT(last, first);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamStore store;
  const ParamId p = store.add("p", Tensor({2}, std::vector<float>{1.0f, -1.0f}), true);
  const ParamId q = store.add("q", Tensor({1}, 5.0f), false);
  Adam opt(AdamConfig{}, store);
  GradBuffer g(2);
  g[0] = Tensor({2}, std::vector<float>{0.3f, -2.0f});
  opt.step(store, g);
  EXPECT_NEAR(store[p].value[0], 1.0f - 1e-3f, 1e-6f);
  EXPECT_NEAR(store[p].value[1], -1.0f + 1e-3f, 1e-6f);
  EXPECT_EQ(store[q].value[0], 5.0f);
  EXPECT_EQ(opt.steps(), 1);
  AdamConfig bad;
  bad.lr = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}
