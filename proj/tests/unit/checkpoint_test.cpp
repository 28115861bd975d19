#include "dcm/checkpoint.hpp"
#include "dcm/errors.hpp"
#include "dcm/optimizer.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <fstream>

namespace dcm {
namespace {

TEST(Checkpoint, RoundTripIsBitIdentical) {
  test::TempDir dir;
  const auto toy = test::make_toy();
  const MetricModel m = init_model(toy.model);
  save_checkpoint(m, dir / "a.ckpt", TrainingStage::pretrained);
  const MetricModel back = load_checkpoint(dir / "a.ckpt", &toy.vocab);
  EXPECT_TRUE(test::same_weights(m, back));
  EXPECT_EQ(back.config(), m.config());
  EXPECT_EQ(back.checksum(), m.checksum());
  for (const auto& r : toy.ratings) EXPECT_EQ(forward_score(back, r.pair), forward_score(m, r.pair));

  save_checkpoint(back, dir / "b.ckpt", TrainingStage::pretrained);
  EXPECT_EQ(test::slurp(dir / "a.ckpt"), test::slurp(dir / "b.ckpt"));
  EXPECT_EQ(read_checkpoint(dir / "a.ckpt").stage, TrainingStage::pretrained);
}

TEST(Checkpoint, OptimizerStateRoundTrips) {
  test::TempDir dir;
  const auto toy = test::make_toy();
  MetricModel m = init_model(toy.model);
  Adam adam(AdamConfig{1e-3, 0.9, 0.999, 1e-8, 0.0, 10, 1.0}, m);
  std::vector<Matrix> grads = m.zero_gradients();
  for (auto& g : grads) g.setConstant(0.01);
  adam.step(m, grads);
  save_checkpoint(m, dir / "o.ckpt", TrainingStage::pretrained, &adam.state());
  const Checkpoint ck = read_checkpoint(dir / "o.ckpt");
  ASSERT_TRUE(ck.optimizer);
  EXPECT_EQ(ck.optimizer->step, 1);
  ASSERT_EQ(ck.optimizer->first_moment.size(), adam.state().first_moment.size());
  for (std::size_t i = 0; i < ck.optimizer->first_moment.size(); ++i) {
    EXPECT_EQ(ck.optimizer->first_moment[i], adam.state().first_moment[i]);
    EXPECT_EQ(ck.optimizer->second_moment[i], adam.state().second_moment[i]);
  }
}

TEST(Checkpoint, EveryFlippedByteIsRejected) {
  test::TempDir dir;
  auto toy = test::make_toy();
  toy.model.hidden_dim = 4;
  toy.model.ffn_dim = 4;
  toy.model.num_heads = 1;
  toy.model.mlp_hidden_dims = {2, 2};
  save_checkpoint(init_model(toy.model), dir / "c.ckpt");
  const std::string bytes = test::slurp(dir / "c.ckpt");
  for (std::size_t i = 0; i < bytes.size(); i += 7) {
    std::string bad = bytes;
    bad[i] = static_cast<char>(bad[i] ^ 0x5a);
    std::ofstream(dir / "bad.ckpt", std::ios::binary) << bad;
    EXPECT_THROW(read_checkpoint(dir / "bad.ckpt"), FormatError) << "byte " << i;
  }
}

TEST(Checkpoint, TruncationAndForeignFilesAreRejected) {
  test::TempDir dir;
  const auto toy = test::make_toy();
  save_checkpoint(init_model(toy.model), dir / "c.ckpt");
  const std::string bytes = test::slurp(dir / "c.ckpt");
  for (std::size_t keep : {std::size_t{0}, std::size_t{3}, bytes.size() / 2, bytes.size() - 1}) {
    std::ofstream(dir / "t.ckpt", std::ios::binary) << bytes.substr(0, keep);
    EXPECT_THROW(read_checkpoint(dir / "t.ckpt"), FormatError) << keep;
  }
  std::ofstream(dir / "text.ckpt") << "hello world, this is not a checkpoint at all";
  EXPECT_THROW(read_checkpoint(dir / "text.ckpt"), FormatError);
  EXPECT_THROW(read_checkpoint(dir / "missing.ckpt"), FormatError);
}

TEST(Checkpoint, VocabularySizeMustMatch) {
  test::TempDir dir;
  const auto toy = test::make_toy();
  save_checkpoint(init_model(toy.model), dir / "c.ckpt");
  const Vocabulary small;
  EXPECT_THROW(load_checkpoint(dir / "c.ckpt", &small), FormatError);
}

TEST(Optimizer, ClipGlobalNorm) {
  std::vector<Matrix> g{Matrix::Constant(1, 1, 3.0), Matrix::Constant(1, 1, 4.0)};
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 1.0), 5.0);
  EXPECT_NEAR(g[0](0, 0), 0.6, 1e-15);
  EXPECT_NEAR(g[1](0, 0), 0.8, 1e-15);
  std::vector<Matrix> small{Matrix::Constant(1, 1, 0.1)};
  clip_global_norm(small, 1.0);
  EXPECT_EQ(small[0](0, 0), 0.1);
}

TEST(Optimizer, WarmupRampsLinearly) {
  const auto toy = test::make_toy();
  const MetricModel m = init_model(toy.model);
  const Adam adam(AdamConfig{1e-3, 0.9, 0.999, 1e-8, 0.1, 100, 1.0}, m);
  EXPECT_NEAR(adam.learning_rate_at(5), 0.5e-3, 1e-15);
  EXPECT_NEAR(adam.learning_rate_at(10), 1e-3, 1e-15);
  EXPECT_NEAR(adam.learning_rate_at(50), 1e-3, 1e-15);
}

TEST(Optimizer, FirstStepMovesBySignTimesRate) {
  const auto toy = test::make_toy();
  MetricModel m = init_model(toy.model);
  const MetricModel before = clone_model(m);
  Adam adam(AdamConfig{1e-3, 0.9, 0.999, 1e-12, 0.0, 10, 0.0}, m);
  std::vector<Matrix> grads = m.zero_gradients();
  grads[0].setConstant(-2.0);
  adam.step(m, grads);
  // Bias-corrected first step: m_hat / sqrt(v_hat) = sign(g).
  EXPECT_NEAR((m.parameters()[0].value - before.parameters()[0].value).maxCoeff(), 1e-3, 1e-9);
  EXPECT_NEAR((m.parameters()[0].value - before.parameters()[0].value).minCoeff(), 1e-3, 1e-9);
  for (std::size_t i = 1; i < m.parameters().size(); ++i)
    EXPECT_EQ(m.parameters()[i].value, before.parameters()[i].value);
}

TEST(Optimizer, FrozenParametersAreUntouchedAndExcludedFromTheClip) {
  const auto toy = test::make_toy();
  MetricModel m = init_model(toy.model);
  const MetricModel before = clone_model(m);
  std::vector<bool> frozen(m.parameters().size(), false);
  frozen[0] = true;
  Adam adam(AdamConfig{1e-3, 0.9, 0.999, 1e-8, 0.0, 10, 1.0}, m);
  std::vector<Matrix> grads = m.zero_gradients();
  for (auto& g : grads) g.setConstant(0.5);
  adam.step(m, grads, frozen);
  EXPECT_EQ(m.parameters()[0].value, before.parameters()[0].value);
  EXPECT_NE(m.parameters()[1].value, before.parameters()[1].value);
  EXPECT_TRUE(adam.state().first_moment[0].isZero());
}

}  // namespace
}  // namespace dcm
