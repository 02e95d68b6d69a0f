#include <gtest/gtest.h>

#include "clue/attacks.hpp"
#include "clue/image_io.hpp"
#include "clue/image_ops.hpp"
#include "clue/forgegen.hpp"
#include "test_util.hpp"

using namespace clue;
using clue::testing::random_image;

TEST(Attacks, ZeroNoiseIsIdentity) {
  std::mt19937_64 rng(1);
  const ImageTensor img = random_image(16, 16, rng);
  EXPECT_EQ(apply_attack(img, {AttackKind::kGaussNoise, 0.0}, 3), img);
}

TEST(Attacks, NoiseIsSeededAndClamped) {
  std::mt19937_64 rng(2);
  const ImageTensor img = random_image(16, 16, rng);
  const ImageTensor a = apply_attack(img, {AttackKind::kGaussNoise, 0.3}, 4);
  EXPECT_EQ(a, apply_attack(img, {AttackKind::kGaussNoise, 0.3}, 4));
  EXPECT_NE(a, apply_attack(img, {AttackKind::kGaussNoise, 0.3}, 5));
  for (float v : a.values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Attacks, BlurOfConstantIsConstant) {
  const ImageTensor img({3, 16, 16}, 0.6f);
  const Tensor blurred = apply_attack(img, {AttackKind::kGaussBlur, 2.0}, 0);
  for (float v : blurred.values())
    EXPECT_NEAR(v, 0.6f, 1e-6f);
}

TEST(Attacks, ResizePreservesShape) {
  std::mt19937_64 rng(3);
  const ImageTensor img = random_image(64, 64, rng);
  for (double f : {0.5, 0.75, 1.25}) {
    const ImageTensor r = apply_attack(img, {AttackKind::kResize, f}, 0);
    EXPECT_EQ(r.shape(), img.shape());
  }
  const ImageTensor c({3, 16, 16}, 0.2f);
  const Tensor resized = apply_attack(c, {AttackKind::kResize, 0.5}, 0);
  for (float v : resized.values()) EXPECT_NEAR(v, 0.2f, 1e-6f);
}

TEST(Attacks, JpegQ90HighPsnrOnNaturalImages) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    std::mt19937_64 rng(s);
    const ImageTensor img = gen_base_image(rng);
    EXPECT_GT(psnr(img, apply_attack(img, {AttackKind::kJpeg, 90}, 0)), 30.0);
  }
}

TEST(Attacks, JpegQualityDegradesMonotonically) {
  std::mt19937_64 rng(6);
  const ImageTensor img = gen_base_image(rng);
  EXPECT_GT(psnr(img, apply_attack(img, {AttackKind::kJpeg, 90}, 0)),
            psnr(img, apply_attack(img, {AttackKind::kJpeg, 30}, 0)));
}

TEST(Attacks, DomainChecks) {
  const ImageTensor img({3, 8, 8}, 0.5f);
  EXPECT_THROW(apply_attack(img, {AttackKind::kJpeg, 0}, 0), DomainError);
  EXPECT_THROW(apply_attack(img, {AttackKind::kJpeg, 50.5}, 0), DomainError);
  EXPECT_THROW(apply_attack(img, {AttackKind::kGaussNoise, -0.1}, 0), DomainError);
  EXPECT_THROW(apply_attack(img, {AttackKind::kGaussBlur, 11}, 0), DomainError);
  EXPECT_THROW(apply_attack(img, {AttackKind::kResize, 0}, 0), DomainError);
  AttackSpec empty{AttackKind::kJpeg, {}};
  EXPECT_THROW(empty.validate(), ConfigError);
  EXPECT_THROW(attack_kind_from_string("rotate"), ConfigError);
}

TEST(Attacks, DefaultGrids) {
  for (AttackKind k : kAllAttacks) {
    const AttackSpec s = AttackSpec::defaults(k);
    EXPECT_FALSE(s.grid.empty());
    EXPECT_NO_THROW(s.validate());
    EXPECT_EQ(attack_kind_from_string(to_string(k)), k);
  }
}
