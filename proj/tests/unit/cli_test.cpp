// Drives the dcm executable end to end on tiny synthetic corpora.

#include "support.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <algorithm>
#include <fstream>
#include <sys/wait.h>

namespace dcm {
namespace {

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

CliRun dcm_cli(const test::TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd = "cd '" + dir.path().string() + "' && '" DCM_CLI_PATH "' " + args + " >'" + out.string() +
                          "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, test::slurp(out), test::slurp(err)};
}

const std::string kTiny = "--set hidden_dim=16 --set num_layers=1 --set ffn_dim=32 --set mlp_hidden_1=8 "
                          "--set mlp_hidden_2=4 --set max_seq_len=40 --set dropout=0 ";

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    ASSERT_EQ(dcm_cli(dir, "synth --kind pretrain --n 6 --seed 1 --out pt.jsonl").code, 0);
    ASSERT_EQ(dcm_cli(dir, "synth --kind ratings --n 20 --seed 2 --out ft.jsonl").code, 0);
    ASSERT_EQ(dcm_cli(dir, "synth --kind ratings --n 20 --seed 3 --out ev.jsonl").code, 0);
  }
  test::TempDir dir;
};

TEST_F(Cli, FullPipeline) {
  CliRun r = dcm_cli(dir, "pretrain --data pt.jsonl --vocab-extra ft.jsonl --out t.ckpt --log pt.log " + kTiny +
                           "--set epochs=1 --set learning_rate=1e-3");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "t.ckpt.vocab"));
  EXPECT_NE(test::slurp(dir / "pt.log").find("\"sep\""), std::string::npos);

  r = dcm_cli(dir, "finetune --teacher t.ckpt --data ft.jsonl --out s.ckpt --set epochs=1 --set learning_rate=1e-3");
  ASSERT_EQ(r.code, 0) << r.err;

  r = dcm_cli(dir, "evaluate --model s.ckpt --data ev.jsonl --data ft.jsonl --json report.json");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("Pearson"), std::string::npos);
  EXPECT_NE(test::slurp(dir / "report.json").find("\"ev\""), std::string::npos);

  r = dcm_cli(dir, "visualize --model t.ckpt --data pt.jsonl --scores s.csv --features f.csv");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(dcm_cli(dir, "visualize --check s.csv").code, 0);
  EXPECT_EQ(dcm_cli(dir, "visualize --check f.csv").code, 0);
  EXPECT_EQ(dcm_cli(dir, "visualize --render s.csv").code, 0);

  r = dcm_cli(dir, "sweep --teacher t.ckpt --data ft.jsonl --eval ev.jsonl --out curve.csv --set epochs=1 "
                   "--fractions 0.5,1.0 --objectives kd_mse,mse");
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string kd = test::slurp(dir / "curve.kd_mse.csv");
  EXPECT_EQ(std::count(kd.begin(), kd.end(), '\n'), 3);
  EXPECT_TRUE(std::filesystem::exists(dir / "curve.mse.csv"));
}

TEST_F(Cli, ReproducibleCheckpoints) {
  const std::string args = "pretrain --data pt.jsonl --seed 5 " + kTiny + "--set epochs=1 --set dropout=0.1 --out ";
  ASSERT_EQ(dcm_cli(dir, args + "a.ckpt").code, 0);
  ASSERT_EQ(dcm_cli(dir, args + "b.ckpt").code, 0);
  EXPECT_EQ(test::slurp(dir / "a.ckpt"), test::slurp(dir / "b.ckpt"));
}

TEST_F(Cli, UsageErrorsExitTwoAndNameTheFlag) {
  CliRun r = dcm_cli(dir, "pretrain --data pt.jsonl --out x.ckpt --bogus");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--bogus"), std::string::npos) << r.err;

  r = dcm_cli(dir, "finetune --data ft.jsonl --out x.ckpt");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--teacher"), std::string::npos) << r.err;

  r = dcm_cli(dir, "pretrain --data pt.jsonl --out x.ckpt --set epochs=0");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("epochs"), std::string::npos) << r.err;

  r = dcm_cli(dir, "pretrain --data pt.jsonl --out x.ckpt --set nonsense=1");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nonsense"), std::string::npos) << r.err;

  EXPECT_EQ(dcm_cli(dir, "").code, 2);
  EXPECT_EQ(dcm_cli(dir, "--help").code, 0);
}

TEST_F(Cli, RuntimeErrorsExitOneWithOneLine) {
  std::ofstream(dir / "bad.jsonl") << "{\"context\": [\"c\"], \"responses\": {\"1\": [\"a\"]}}\n";
  CliRun r = dcm_cli(dir, "pretrain --data bad.jsonl --out x.ckpt");
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("dcm: error: line 1", 0), 0u) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);

  std::ofstream(dir / "junk.ckpt") << "junk";
  std::ofstream(dir / "junk.ckpt.vocab") << "[PAD]\n[UNK]\n[CLS]\n[SEP]\n";
  r = dcm_cli(dir, "evaluate --model junk.ckpt --data ev.jsonl");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("dcm: error:"), std::string::npos);
}

TEST_F(Cli, SelftestPasses) {
  const CliRun r = dcm_cli(dir, "selftest");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

}  // namespace
}  // namespace dcm
