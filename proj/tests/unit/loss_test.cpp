#include "dcm/baseline_losses.hpp"
#include "dcm/distill_loss.hpp"
#include "dcm/errors.hpp"
#include "dcm/mlr_loss.hpp"
#include "dcm/oracles.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

namespace dcm {
namespace {

ScoreGrid random_grid(std::mt19937_64& rng, int levels = 3, int per_level = 4) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ScoreGrid g;
  for (int j = 0; j < levels; ++j) {
    auto& level = g.levels.emplace_back();
    for (int k = 0; k < per_level; ++k) level.push_back(u(rng));
  }
  return g;
}

TEST(Mlr, TranslationInvariance) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> shift(-5.0, 5.0);
  const MlrHyper h;
  for (int trial = 0; trial < 200; ++trial) {
    const ScoreGrid g = random_grid(rng);
    ScoreGrid moved = g;
    const double c = shift(rng);
    for (auto& level : moved.levels)
      for (double& s : level) s += c;
    const MlrComponents a = mlr_example_loss(g, h);
    const MlrComponents b = mlr_example_loss(moved, h);
    EXPECT_NEAR(a.separation, b.separation, 1e-9);
    EXPECT_NEAR(a.compactness, b.compactness, 1e-9);
    EXPECT_NEAR(a.ordering, b.ordering, 1e-9);
  }
}

TEST(Mlr, InvariantUnderWithinLevelPermutation) {
  std::mt19937_64 rng(2);
  const MlrHyper h;
  for (int trial = 0; trial < 100; ++trial) {
    const ScoreGrid g = random_grid(rng);
    ScoreGrid p = g;
    for (auto& level : p.levels) std::shuffle(level.begin(), level.end(), rng);
    const MlrComponents a = mlr_example_loss(g, h);
    const MlrComponents b = mlr_example_loss(p, h);
    EXPECT_NEAR(a.separation + a.compactness + a.ordering, b.separation + b.compactness + b.ordering, 1e-12);
  }
}

TEST(Mlr, ComponentsAreNonNegativeAndZeroOnAWellSeparatedGrid) {
  std::mt19937_64 rng(3);
  const MlrHyper h;
  for (int trial = 0; trial < 100; ++trial) {
    const MlrComponents c = mlr_example_loss(random_grid(rng), h);
    EXPECT_GE(c.separation, 0.0);
    EXPECT_GE(c.compactness, 0.0);
    EXPECT_GE(c.ordering, 0.0);
  }
  const ScoreGrid good{{{0.1, 0.12}, {0.5, 0.52}, {0.9, 0.92}}};
  const MlrComponents c = mlr_example_loss(good, h);
  EXPECT_EQ(c.separation + c.compactness + c.ordering, 0.0);
}

TEST(Mlr, OrderingPenalizesInvertedLevels) {
  const ScoreGrid inverted{{{0.9}, {0.5}, {0.1}}};
  EXPECT_NEAR(mlr_example_loss(inverted, MlrHyper{}).ordering, 0.4 + 0.8 + 0.4, 1e-12);
}

TEST(Mlr, DisabledTermsReportZeroAndDropOutOfTheGradient) {
  std::mt19937_64 rng(4);
  const MlrHyper h;
  const std::vector<ScoreGrid> grids{random_grid(rng), random_grid(rng)};
  std::vector<ScoreGrid> full_grad, sep_grad;
  const LossReport full = mlr_loss(grids, h, {}, &full_grad);
  const LossReport only_sep = mlr_loss(grids, h, {true, false, false}, &sep_grad);
  EXPECT_EQ(only_sep.component("com"), 0.0);
  EXPECT_EQ(only_sep.component("ord"), 0.0);
  EXPECT_DOUBLE_EQ(only_sep.component("sep"), full.component("sep"));
  EXPECT_DOUBLE_EQ(only_sep.total, only_sep.component("sep"));
  EXPECT_NEAR(full.total, full.component("sep") + full.component("com") + full.component("ord"), 1e-12);

  std::vector<ScoreGrid> none_grad;
  const LossReport none = mlr_loss(grids, h, {false, false, false}, &none_grad);
  EXPECT_EQ(none.total, 0.0);
  for (const auto& g : none_grad)
    for (const auto& level : g.levels)
      for (double v : level) EXPECT_EQ(v, 0.0);
}

TEST(Mlr, RejectsBadHyperAndEmptyLevels) {
  EXPECT_THROW((MlrHyper{0.0, 0.1}.validate()), ConfigError);
  EXPECT_THROW((MlrHyper{0.3, -0.1}.validate()), ConfigError);
  EXPECT_FALSE((MlrHyper{0.1, 0.2}.is_recommended()));
  const ScoreGrid empty_level{{{0.1}, {}}};
  EXPECT_THROW(compute_centroids(empty_level), ShapeError);
}

ForwardTrace traced(const test::Toy& toy, const MetricModel& m, std::size_t i) {
  return forward_trace(m, toy.ratings[i].pair);
}

TEST(Kd, ZeroForIdenticalTracesAndSymmetricInPerturbation) {
  const auto toy = test::make_toy();
  const MetricModel m = init_model(toy.model);
  const ForwardTrace t = traced(toy, m, 0);
  EXPECT_EQ(kd_loss({&t, &t}), 0.0);
  EXPECT_EQ(kd_loss({&t, &t}, {false, true}), 0.0);

  ModelConfig other = toy.model;
  other.seed = 99;
  const ForwardTrace s = traced(toy, init_model(other), 0);
  EXPECT_GT(kd_loss({&t, &s}), 0.0);
  EXPECT_NEAR(kd_loss({&t, &s}), kd_loss({&s, &t}), 1e-12);
}

TEST(Kd, BetaZeroReducesToWeightedMse) {
  const auto toy = test::make_toy();
  const MetricModel teacher = init_model(toy.model);
  ModelConfig other = toy.model;
  other.seed = 77;
  const MetricModel student = init_model(other);
  std::vector<ForwardTrace> ts, ss;
  for (std::size_t i = 0; i < 4; ++i) {
    ts.push_back(traced(toy, teacher, i));
    ss.push_back(traced(toy, student, i));
  }
  std::vector<KdItem> batch;
  double mse = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    batch.push_back({{&ts[i], &ss[i]}, toy.ratings[i].normalized_score});
    mse += mse_loss(ss[i].score, toy.ratings[i].normalized_score);
  }
  const LossReport r = kd_mse_loss(batch, {2.0, 0.0});
  EXPECT_NEAR(r.total, 2.0 * mse / 4.0, 1e-12);
  EXPECT_EQ(r.component("kd"), 0.0);
  const LossReport with_kd = kd_mse_loss(batch, {2.0, 5.0});
  EXPECT_NEAR(with_kd.total, with_kd.component("mse") + with_kd.component("kd"), 1e-12);
  EXPECT_GT(with_kd.component("kd"), 0.0);
}

TEST(Kd, PaddingDoesNotChangeTheDistance) {
  const auto toy = test::make_toy();
  const MetricModel teacher = init_model(toy.model);
  ModelConfig other = toy.model;
  other.seed = 5;
  const MetricModel student = init_model(other);
  const EncodedPair& p = toy.ratings[1].pair;
  const EncodedPair padded = p.padded_to(p.length + 6);
  const ForwardTrace t0 = forward_trace(teacher, p), s0 = forward_trace(student, p);
  const ForwardTrace t1 = forward_trace(teacher, padded), s1 = forward_trace(student, padded);
  EXPECT_NEAR(kd_loss({&t0, &s0}), kd_loss({&t1, &s1}), 1e-6);
  EXPECT_NEAR(kd_loss({&t0, &s0}, {false, false}), kd_loss({&t1, &s1}, {false, false}), 1e-6);
}

TEST(Kd, ShapeMismatchIsRejected) {
  const auto toy = test::make_toy();
  const MetricModel m = init_model(toy.model);
  const ForwardTrace a = traced(toy, m, 0);
  const ForwardTrace b = forward_trace(m, toy.ratings[0].pair.padded_to(toy.ratings[0].pair.length + 1));
  EXPECT_THROW(kd_loss({&a, &b}), ShapeError);
  EXPECT_THROW((KdHyper{0.0, 0.0}.validate()), ConfigError);
  EXPECT_THROW((KdHyper{-1.0, 1.0}.validate()), ConfigError);
}

TEST(Baselines, TwoLevelViewSplitsTopLevel) {
  const ScoreGrid g{{{0.1, 0.2}, {0.3}, {0.8, 0.9}}};
  const TwoLevelView v = TwoLevelView::from(g);
  EXPECT_EQ(v.positives, (std::vector<double>{0.8, 0.9}));
  EXPECT_EQ(v.negatives, (std::vector<double>{0.1, 0.2, 0.3}));
  TwoLevelView grad{{1.0, 2.0}, {3.0, 4.0, 5.0}};
  const ScoreGrid back = grad.scatter(g);
  EXPECT_EQ(back.levels[0], (std::vector<double>{3.0, 4.0}));
  EXPECT_EQ(back.levels[1], (std::vector<double>{5.0}));
  EXPECT_EQ(back.levels[2], (std::vector<double>{1.0, 2.0}));
}

TEST(Baselines, SupconMatchesLoopOracleAndIsScaleInvariant) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 20; ++trial) {
    FeatureGrid f;
    for (int j = 0; j < 3; ++j) {
      auto& level = f.levels.emplace_back();
      for (int k = 0; k < 3; ++k) level.push_back(Vector::NullaryExpr(5, [&] { return n(rng); }));
    }
    const double v = supcon_loss(f, 0.5);
    EXPECT_NEAR(v, oracle::supcon(f, 0.5), 1e-10);
    FeatureGrid scaled = f;
    for (auto& level : scaled.levels)
      for (auto& x : level) x *= 3.7;
    EXPECT_NEAR(supcon_loss(scaled, 0.5), v, 1e-10);
  }
}

TEST(Baselines, SupconNeedsAPositivePair) {
  FeatureGrid f;
  f.levels = {{Vector::Ones(2)}, {Vector::Ones(2)}};
  EXPECT_THROW(supcon_loss(f, 0.1), ShapeError);
}

TEST(Baselines, RankingAndVanillaAreTranslationInvariant) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const ScoreGrid g = random_grid(rng);
    ScoreGrid moved = g;
    for (auto& level : moved.levels)
      for (double& s : level) s += 0.37;
    EXPECT_NEAR(vanilla_mlr_loss(g, 0.3), vanilla_mlr_loss(moved, 0.3), 1e-12);
    EXPECT_NEAR(margin_ranking_loss(TwoLevelView::from(g), 0.3),
                margin_ranking_loss(TwoLevelView::from(moved), 0.3), 1e-12);
  }
}

TEST(Baselines, FatIsZeroForTightFarClusters) {
  FeatureGrid f;
  for (int j = 0; j < 3; ++j) {
    auto& level = f.levels.emplace_back();
    for (int k = 0; k < 2; ++k) {
      Vector x = Vector::Zero(2);
      x(0) = 10.0 * j + 0.01 * k;
      level.push_back(x);
    }
  }
  EXPECT_EQ(fat_loss(f, 0.5), 0.0);
}

}  // namespace
}  // namespace dcm
