#include "dcm/checkpoint.hpp"
#include "dcm/errors.hpp"
#include "dcm/train_config.hpp"
#include "dcm/trainer.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dcm {
namespace {

TEST(Subsample, SizeIsFloorWithAFloorOfOne) {
  EXPECT_EQ(subsample_indices(270, 0.05, 1).size(), 13u);
  EXPECT_EQ(subsample_indices(10, 0.01, 1).size(), 1u);
  EXPECT_EQ(subsample_indices(10, 1.0, 1).size(), 10u);
  EXPECT_EQ(subsample_indices(7, 0.5, 1).size(), 3u);
}

TEST(Subsample, SortedDistinctDeterministicAndNested) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto a = subsample_indices(100, 0.25, seed);
    const auto b = subsample_indices(100, 0.5, seed);
    const auto c = subsample_indices(100, 1.0, seed);
    EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
    EXPECT_EQ(std::adjacent_find(a.begin(), a.end()), a.end());
    EXPECT_EQ(a, subsample_indices(100, 0.25, seed));
    EXPECT_TRUE(std::includes(b.begin(), b.end(), a.begin(), a.end()));
    EXPECT_TRUE(std::includes(c.begin(), c.end(), b.begin(), b.end()));
  }
  EXPECT_NE(subsample_indices(100, 0.25, 1), subsample_indices(100, 0.25, 2));
}

TEST(TrainConfig, DefaultsAndValidation) {
  const TrainConfig p = TrainConfig::defaults(Stage::pretrain);
  EXPECT_EQ(p.epochs, 5);
  EXPECT_EQ(p.batch_size, 3);
  EXPECT_DOUBLE_EQ(p.learning_rate, 2e-5);
  const TrainConfig f = TrainConfig::defaults(Stage::finetune);
  EXPECT_EQ(f.epochs, 20);
  EXPECT_EQ(f.batch_size, 10);
  EXPECT_DOUBLE_EQ(f.learning_rate, 5e-6);
  EXPECT_DOUBLE_EQ(f.kd.beta, 5.0);

  TrainConfig bad = p;
  bad.epochs = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = p;
  bad.batch_size = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = p;
  bad.learning_rate = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = p;
  bad.finetune_data_fraction = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(TrainConfig, KeyValueRoundTripAndHash) {
  RunConfig rc;
  rc.train = TrainConfig::defaults(Stage::finetune);
  apply_setting(rc, "beta", "2.5");
  apply_setting(rc, "hidden_dim", "32");
  apply_setting(rc, "disable_ord", "true");
  apply_setting(rc, "seed", "9");
  EXPECT_EQ(rc.model.seed, 9u);
  EXPECT_EQ(rc.train.seed, 9u);
  std::stringstream ss(to_key_values(rc));
  const RunConfig back = parse_run_config(ss);
  EXPECT_EQ(to_key_values(back), to_key_values(rc));
  EXPECT_EQ(config_hash(back), config_hash(rc));
  apply_setting(rc, "beta", "2.6");
  EXPECT_NE(config_hash(back), config_hash(rc));
  EXPECT_THROW(apply_setting(rc, "nonsense", "1"), ConfigError);
  EXPECT_THROW(apply_setting(rc, "epochs", "many"), ConfigError);
  EXPECT_THROW(apply_setting(rc, "fix_encoder", "maybe"), ConfigError);
}

TEST(TrainConfig, ParserIgnoresCommentsAndBlankLines) {
  std::stringstream ss("# comment\n\nepochs = 7   # trailing\nlearning_rate=0.001\n");
  const RunConfig rc = parse_run_config(ss);
  EXPECT_EQ(rc.train.epochs, 7);
  EXPECT_DOUBLE_EQ(rc.train.learning_rate, 0.001);
}

TEST(Pretrain, RejectsInvalidConfigBeforeTraining) {
  const auto toy = test::make_toy();
  TrainConfig c = test::quick_config(Stage::pretrain);
  c.epochs = 0;
  EXPECT_THROW(pretrain(init_model(toy.model), toy.pretrain, c), ConfigError);
  EXPECT_THROW(pretrain(init_model(toy.model), {}, test::quick_config(Stage::pretrain)), Error);
}

TEST(Pretrain, DeterministicAcrossReruns) {
  auto toy = test::make_toy();
  toy.model.dropout = 0.1;
  const MetricModel m = init_model(toy.model);
  const TrainConfig c = test::quick_config(Stage::pretrain);
  const TrainResult a = pretrain(m, toy.pretrain, c);
  const TrainResult b = pretrain(m, toy.pretrain, c);
  EXPECT_TRUE(test::same_weights(a.last, b.last));
  std::stringstream la, lb;
  a.log.write_jsonl(la);
  b.log.write_jsonl(lb);
  EXPECT_EQ(la.str(), lb.str());
  EXPECT_EQ(a.log.steps().size(), 6u);  // 2 epochs x ceil(6 / 2)

  TrainConfig other = c;
  other.seed = 12;
  EXPECT_FALSE(test::same_weights(a.last, pretrain(m, toy.pretrain, other).last));
}

TEST(Pretrain, StepsStrictlyIncreaseAndTotalsAddUp) {
  const auto toy = test::make_toy();
  const TrainResult r = pretrain(init_model(toy.model), toy.pretrain, test::quick_config(Stage::pretrain));
  long prev = 0;
  for (const auto& s : r.log.steps()) {
    EXPECT_GT(s.step, prev);
    prev = s.step;
    EXPECT_NEAR(s.report.total, s.report.component("sep") + s.report.component("com") + s.report.component("ord"),
                1e-12);
  }
  TrainLog log;
  log.append(StepRecord{3, {}});
  EXPECT_THROW(log.append(StepRecord{3, {}}), std::logic_error);
}

TEST(Pretrain, ResumeMatchesAnUninterruptedRun) {
  test::TempDir dir;
  auto toy = test::make_toy();
  toy.model.dropout = 0.1;
  const MetricModel m = init_model(toy.model);
  const TrainConfig c = test::quick_config(Stage::pretrain);
  const TrainResult full = pretrain(m, toy.pretrain, c);

  PretrainOptions first;
  first.stop_after_step = 4;
  const TrainResult part = pretrain(m, toy.pretrain, c, first);
  EXPECT_EQ(part.log.steps().size(), 4u);
  save_checkpoint(part.last, dir / "mid.ckpt", TrainingStage::pretrained, &part.optimizer);

  Checkpoint ck = read_checkpoint(dir / "mid.ckpt");
  PretrainOptions second;
  second.resume = std::move(ck.optimizer);
  const TrainResult rest = pretrain(MetricModel(ck.config, std::move(ck.weights)), toy.pretrain, c, second);
  EXPECT_EQ(rest.log.steps().front().step, 5);
  EXPECT_TRUE(test::same_weights(rest.last, full.last));
}

TEST(Pretrain, AllTermsDisabledLeavesWeightsUnchanged) {
  const auto toy = test::make_toy();
  const MetricModel m = init_model(toy.model);
  TrainConfig c = test::quick_config(Stage::pretrain);
  c.ablation.disable_sep = c.ablation.disable_com = c.ablation.disable_ord = true;
  EXPECT_TRUE(test::same_weights(pretrain(m, toy.pretrain, c).last, m));
}

TEST(Pretrain, ValidationSelectsTheBestEpoch) {
  const auto toy = test::make_toy();
  const auto held = test::make_toy(9, 3, 0);
  std::vector<EncodedExample> val = encode_corpus(held.pretrain_raw, toy.vocab, toy.model.max_seq_len);
  PretrainOptions o;
  o.validation = val;
  TrainConfig c = test::quick_config(Stage::pretrain);
  c.epochs = 3;
  const TrainResult r = pretrain(init_model(toy.model), toy.pretrain, c, o);
  ASSERT_TRUE(r.best);
  ASSERT_EQ(r.log.epochs().size(), 3u);
  double lowest = INFINITY;
  int arg = -1;
  for (const auto& e : r.log.epochs()) {
    ASSERT_TRUE(e.validation);
    if (*e.validation < lowest) lowest = *e.validation, arg = e.epoch;
  }
  EXPECT_EQ(r.best_epoch, arg);
  EXPECT_NEAR(pretrain_objective_value(*r.best, val, c), lowest, 1e-12);
}

TEST(Pretrain, EveryComparisonObjectiveTrains) {
  const auto toy = test::make_toy();
  for (PretrainObjective o : {PretrainObjective::bce, PretrainObjective::ranking, PretrainObjective::supcon,
                              PretrainObjective::fat, PretrainObjective::vanilla_mlr}) {
    TrainConfig c = test::quick_config(Stage::pretrain);
    c.objective = o;
    const MetricModel m = init_model(toy.model);
    const TrainResult r = pretrain(m, toy.pretrain, c);
    EXPECT_FALSE(test::same_weights(r.last, m)) << to_string(o);
    EXPECT_NO_THROW(r.log.steps().back().report.component(to_string(o))) << to_string(o);
  }
}

TEST(Pretrain, DivergenceIsReported) {
  const auto toy = test::make_toy();
  MetricModel m = init_model(toy.model);
  m.parameters().back().value(0, 0) = std::nan("");
  EXPECT_THROW(pretrain(m, toy.pretrain, test::quick_config(Stage::pretrain)), DivergenceError);
}

TEST(Finetune, TeacherIsNeverModified) {
  const auto toy = test::make_toy();
  const MetricModel teacher = init_model(toy.model);
  const std::uint64_t before = teacher.checksum();
  const TrainResult r = finetune(teacher, toy.ratings, test::quick_config(Stage::finetune));
  EXPECT_EQ(teacher.checksum(), before);
  EXPECT_NE(r.last.checksum(), before);
}

TEST(Finetune, ReportSplitsWeightedTerms) {
  const auto toy = test::make_toy();
  const TrainResult r = finetune(init_model(toy.model), toy.ratings, test::quick_config(Stage::finetune));
  for (const auto& s : r.log.steps())
    EXPECT_NEAR(s.report.total, s.report.component("mse") + s.report.component("kd"), 1e-12);
  // Step 1 starts from the teacher itself, so the distillation term is zero.
  EXPECT_EQ(r.log.steps().front().report.component("kd"), 0.0);
}

TEST(Finetune, DisableKdZeroesTheDistillationTerm) {
  const auto toy = test::make_toy();
  TrainConfig c = test::quick_config(Stage::finetune);
  c.ablation.disable_kd = true;
  const TrainResult r = finetune(init_model(toy.model), toy.ratings, c);
  for (const auto& s : r.log.steps()) EXPECT_EQ(s.report.component("kd"), 0.0);
}

TEST(Finetune, FixEncoderFreezesEveryEncoderTensor) {
  const auto toy = test::make_toy();
  const MetricModel teacher = init_model(toy.model);
  TrainConfig c = test::quick_config(Stage::finetune);
  c.ablation.fix_encoder = true;
  const TrainResult r = finetune(teacher, toy.ratings, c);
  bool head_moved = false;
  for (std::size_t i = 0; i < teacher.parameters().size(); ++i) {
    if (teacher.is_encoder_parameter(i)) {
      EXPECT_EQ(r.last.parameters()[i].value, teacher.parameters()[i].value) << teacher.parameters()[i].name;
    } else {
      head_moved |= r.last.parameters()[i].value != teacher.parameters()[i].value;
    }
  }
  EXPECT_TRUE(head_moved);
}

TEST(Finetune, DeterministicAndResumable) {
  auto toy = test::make_toy();
  toy.model.dropout = 0.1;
  const MetricModel teacher = init_model(toy.model);
  const TrainConfig c = test::quick_config(Stage::finetune);
  const TrainResult a = finetune(teacher, toy.ratings, c);
  EXPECT_TRUE(test::same_weights(a.last, finetune(teacher, toy.ratings, c).last));

  FinetuneOptions first;
  first.stop_after_step = 3;
  const TrainResult part = finetune(teacher, toy.ratings, c, first);
  FinetuneOptions second;
  second.student = clone_model(part.last);
  second.resume = part.optimizer;
  const TrainResult rest = finetune(teacher, toy.ratings, c, second);
  EXPECT_TRUE(test::same_weights(rest.last, a.last));
}

TEST(Finetune, DataFractionUsesTheSeededSubset) {
  const auto toy = test::make_toy();
  TrainConfig c = test::quick_config(Stage::finetune);
  c.finetune_data_fraction = 0.5;
  c.epochs = 1;
  c.batch_size = 1;
  const TrainResult r = finetune(init_model(toy.model), toy.ratings, c);
  EXPECT_EQ(r.log.steps().size(), 6u);
}

}  // namespace
}  // namespace dcm
