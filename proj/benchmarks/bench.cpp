// Microbenchmarks for the hot paths: forward pass, one training step's
// backward pass, the losses and the correlation routines.

#include "dcm/correlation.hpp"
#include "dcm/distill_loss.hpp"
#include "dcm/mlr_loss.hpp"
#include "dcm/model.hpp"
#include "dcm/synthetic.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using namespace dcm;

struct Fixture {
  Vocabulary vocab;
  ModelConfig config;
  std::vector<EncodedScoredPair> pairs;

  Fixture() {
    const SyntheticSpec spec;
    const auto pt = synthesize_pretrain_corpus(20, spec, 1);
    const auto rated = synthesize_ratings(32, spec, 2);
    vocab = build_vocab(pt, rated, 1);
    config.vocab_size = static_cast<int>(vocab.size());
    config.dropout = 0.0;
    pairs = encode_corpus(rated, vocab, config.max_seq_len);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_ForwardScore(benchmark::State& state) {
  const Fixture& f = fixture();
  ModelConfig c = f.config;
  c.num_layers = static_cast<int>(state.range(0));
  const MetricModel m = init_model(c);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(m.score(f.pairs[i++ % f.pairs.size()].pair));
}
BENCHMARK(BM_ForwardScore)->Arg(1)->Arg(2)->Arg(4);

void BM_ForwardBackward(benchmark::State& state) {
  const Fixture& f = fixture();
  const MetricModel m = init_model(f.config);
  std::vector<Matrix> grads = m.zero_gradients();
  std::size_t i = 0;
  for (auto _ : state) {
    Tape tape;
    const ForwardGraph g = m.forward(tape, f.pairs[i++ % f.pairs.size()].pair);
    tape.seed(g.score, 1.0);
    tape.backward(grads);
  }
}
BENCHMARK(BM_ForwardBackward);

void BM_MlrLoss(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u;
  std::vector<ScoreGrid> grids(3);
  for (auto& g : grids) {
    g.levels.resize(static_cast<std::size_t>(state.range(0)));
    for (auto& level : g.levels)
      for (int k = 0; k < 5; ++k) level.push_back(u(rng));
  }
  std::vector<ScoreGrid> grads;
  for (auto _ : state) benchmark::DoNotOptimize(mlr_loss(grids, MlrHyper{}, {}, &grads).total);
}
BENCHMARK(BM_MlrLoss)->Arg(3)->Arg(5);

void BM_KdLoss(benchmark::State& state) {
  const Fixture& f = fixture();
  const MetricModel teacher = init_model(f.config);
  ModelConfig other = f.config;
  other.seed = 9;
  const MetricModel student = init_model(other);
  const ForwardTrace t = forward_trace(teacher, f.pairs[0].pair);
  const ForwardTrace s = forward_trace(student, f.pairs[0].pair);
  TraceGradient grad;
  for (auto _ : state) benchmark::DoNotOptimize(kd_loss({&t, &s}, {}, &grad));
}
BENCHMARK(BM_KdLoss);

void BM_Correlation(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  std::vector<double> x(static_cast<std::size_t>(state.range(0))), y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = n(rng), y[i] = x[i] + n(rng);
  for (auto _ : state) benchmark::DoNotOptimize(correlation_report(x, y).average);
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Correlation)->RangeMultiplier(4)->Range(64, 16384)->Complexity(benchmark::oNLogN);

}  // namespace

BENCHMARK_MAIN();
