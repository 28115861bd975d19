// Criterion 4: pretraining on 200 examples (3 levels x 5 responses) with a
// two-layer, 64-dim encoder for 5 epochs reaches training loss < 0.05 and
// >= 95% held-out ordering accuracy within 5 minutes, and the dumped score
// distribution has strictly increasing per-level medians.

#include "dcm/emitters.hpp"
#include "harness.hpp"

#include <filesystem>

using namespace dcm;

int main() {
  acceptance::Checker checker;
  const SyntheticSpec spec;
  const auto raw = synthesize_pretrain_corpus(240, spec, 1);
  const Vocabulary vocab = build_vocab(raw, 1);
  const ModelConfig mc = acceptance::toy_model(vocab, 3);
  const auto all = encode_corpus(raw, vocab, mc.max_seq_len);
  const std::vector<EncodedExample> train(all.begin(), all.begin() + 200);
  const std::vector<EncodedExample> held(all.begin() + 200, all.end());
  const TrainConfig tc = acceptance::toy_pretrain(3);

  const acceptance::Stopwatch clock;
  const TrainResult r = pretrain(init_model(mc), train, tc);
  const double secs = clock.seconds();
  for (const auto& e : r.log.epochs()) std::printf("  epoch %d train %.6f\n", e.epoch, e.train_mean);

  const double loss = pretrain_objective_value(r.last, train, tc);
  checker.check("final mlr loss < 0.05", loss < 0.05, acceptance::fmt("%.6g", loss));

  // Every pair of responses from different levels of a held-out example.
  long correct = 0, pairs = 0;
  for (const auto& ex : held) {
    for (int lo = 0; lo < ex.num_levels(); ++lo)
      for (int hi = lo + 1; hi < ex.num_levels(); ++hi)
        for (const auto& a : ex.pairs[lo])
          for (const auto& b : ex.pairs[hi]) {
            correct += r.last.score(b) > r.last.score(a);
            ++pairs;
          }
  }
  const double acc = static_cast<double>(correct) / static_cast<double>(pairs);
  checker.check("held-out ordering accuracy >= 0.95", acc >= 0.95,
                acceptance::fmt("%.4f over %.0f cross-level pairs", acc, static_cast<double>(pairs)));
  checker.check("pretraining under 300 s", secs < 300.0, acceptance::fmt("%.1f s", secs));

  const auto dir = std::filesystem::temp_directory_path() / "dcm_acceptance_c4";
  std::filesystem::create_directories(dir);
  emit_score_distribution(r.last, held, dir / "scores.csv");
  const auto dump = read_score_distribution(dir / "scores.csv");
  bool increasing = dump.levels.size() == 3;
  std::string medians;
  for (std::size_t j = 0; j < dump.levels.size(); ++j) {
    medians += acceptance::fmt(j ? ", %.4f" : "%.4f", dump.levels[j].quantiles.median);
    if (j) increasing &= dump.levels[j].quantiles.median > dump.levels[j - 1].quantiles.median;
  }
  checker.check("score distribution medians strictly increase", increasing, medians);
  std::filesystem::remove_all(dir);
  return checker.exit_code();
}
