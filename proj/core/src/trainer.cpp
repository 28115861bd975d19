#include "dcm/trainer.hpp"

#include "dcm/baseline_losses.hpp"
#include "dcm/distill_loss.hpp"
#include "dcm/errors.hpp"
#include "dcm/mlr_loss.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dcm {
namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kShuffleTag = 0x5348554646ULL;
constexpr std::uint64_t kDropoutTag = 0x44524f50ULL;
constexpr std::uint64_t kSubsampleTag = 0x53554253ULL;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t tag) {
  return splitmix(splitmix(seed ^ tag) ^ a);
}

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

std::vector<bool> frozen_mask(const MetricModel& model, bool fix_encoder) {
  std::vector<bool> out(model.parameters().size(), false);
  if (fix_encoder)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = model.is_encoder_parameter(i);
  return out;
}

AdamConfig adam_config(const TrainConfig& c, long total_steps) {
  AdamConfig a;
  a.learning_rate = c.learning_rate;
  a.beta1 = c.beta1;
  a.beta2 = c.beta2;
  a.eps = c.adam_eps;
  a.warmup_fraction = c.warmup_fraction;
  a.total_steps = std::max(1L, total_steps);
  a.clip_norm = c.grad_clip;
  return a;
}

bool needs_features(PretrainObjective o) {
  return o == PretrainObjective::supcon || o == PretrainObjective::fat;
}

struct ObjectiveValue {
  std::vector<std::pair<std::string, double>> components;
  double total = 0.0;
};

/// Per-example objective. Gradients are w.r.t. scores and (for feature
/// objectives) pooled features, unscaled by batch size.
ObjectiveValue example_objective(const ScoreGrid& scores, const FeatureGrid* features, const TrainConfig& c,
                                 ScoreGrid* score_grad, FeatureGrid* feature_grad) {
  // Hinges clamp NaN to zero, so a non-finite score must be caught here.
  for (const auto& level : scores.levels)
    for (double s : level)
      if (!std::isfinite(s)) throw DivergenceError("model produced a non-finite score");
  ObjectiveValue out;
  switch (c.objective) {
    case PretrainObjective::mlr: {
      MlrTerms terms{!c.ablation.disable_sep, !c.ablation.disable_com, !c.ablation.disable_ord};
      const MlrComponents m = mlr_example_loss(scores, c.mlr, terms, score_grad);
      out.components = {{"sep", m.separation}, {"com", m.compactness}, {"ord", m.ordering}};
      out.total = m.separation + m.compactness + m.ordering;
      break;
    }
    case PretrainObjective::bce:
    case PretrainObjective::ranking: {
      const TwoLevelView view = TwoLevelView::from(scores);
      TwoLevelView g;
      const bool bce = c.objective == PretrainObjective::bce;
      const double v = bce ? bce_loss(view, score_grad ? &g : nullptr)
                           : margin_ranking_loss(view, c.baseline.ranking_margin, score_grad ? &g : nullptr);
      if (score_grad) *score_grad = g.scatter(scores);
      out.components = {{bce ? "bce" : "ranking", v}};
      out.total = v;
      break;
    }
    case PretrainObjective::vanilla_mlr: {
      const double v = vanilla_mlr_loss(scores, c.baseline.ranking_margin, score_grad);
      out.components = {{"vanilla_mlr", v}};
      out.total = v;
      break;
    }
    case PretrainObjective::supcon:
    case PretrainObjective::fat: {
      if (!features) throw std::logic_error("feature objective without features");
      const bool supcon = c.objective == PretrainObjective::supcon;
      const double v = supcon ? supcon_loss(*features, c.baseline.supcon_temperature, feature_grad)
                              : fat_loss(*features, c.baseline.fat_margin, feature_grad);
      if (score_grad) *score_grad = scores.zeros_like();
      out.components = {{supcon ? "supcon" : "fat", v}};
      out.total = v;
      break;
    }
  }
  return out;
}

/// Running component-wise batch mean.
struct ReportAccumulator {
  std::vector<std::pair<std::string, double>> components;
  double total = 0.0;
  std::size_t count = 0;

  void add(const ObjectiveValue& v) {
    if (components.empty()) {
      components = v.components;
    } else {
      for (std::size_t i = 0; i < components.size(); ++i) components[i].second += v.components[i].second;
    }
    total += v.total;
    ++count;
  }
  LossReport finish() const {
    LossReport r;
    const double inv = count ? 1.0 / static_cast<double>(count) : 0.0;
    r.components = components;
    for (auto& c : r.components) c.second *= inv;
    r.total = total * inv;
    return r;
  }
};

void check_finite(const LossReport& r, long step) {
  if (!std::isfinite(r.total)) {
    throw DivergenceError("loss became non-finite at step " + std::to_string(step));
  }
}

ForwardTrace trace_from(const Tape& tape, const ForwardGraph& g, const EncodedPair& pair) {
  ForwardTrace out;
  for (Var v : g.layer_outputs) out.layer_outputs.push_back(tape.value(v));
  for (const auto& layer : g.attention) {
    auto& dst = out.attention.emplace_back();
    for (Var v : layer) dst.push_back(tape.value(v));
  }
  out.attention_mask = pair.attention_mask;
  out.logit = tape.value(g.logit)(0, 0);
  out.score = tape.value(g.score)(0, 0);
  return out;
}

void validate_corpus(std::span<const EncodedExample> corpus) {
  for (const auto& ex : corpus) {
    if (ex.pairs.size() < 2) throw CorpusError("pretraining example with fewer than two levels");
    for (const auto& level : ex.pairs)
      if (level.empty()) throw CorpusError("pretraining example with an empty level");
  }
}

KdHyper effective_kd(const TrainConfig& c) {
  KdHyper kd = c.kd;
  if (c.ablation.disable_kd) kd.beta = 0.0;
  kd.validate();
  return kd;
}

std::uint64_t run_hash(const MetricModel& model, const TrainConfig& config) {
  RunConfig rc;
  rc.model = model.config();
  rc.train = config;
  return config_hash(rc);
}

}  // namespace

// ---------------------------------------------------------------------------

void TrainLog::append(StepRecord record) {
  if (!steps_.empty() && record.step <= steps_.back().step) {
    throw std::logic_error("TrainLog: step indices must be strictly increasing");
  }
  steps_.push_back(std::move(record));
}

void TrainLog::write_jsonl(std::ostream& out) const {
  for (const auto& s : steps_) {
    json components = json::object();
    for (const auto& [name, value] : s.report.components) components[name] = value;
    json line{{"step", s.step}, {"components", components}, {"total", s.report.total}};
    out << line.dump() << '\n';
  }
}

std::vector<std::size_t> subsample_indices(std::size_t n, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("fraction must lie in (0, 1]");
  if (n == 0) return {};
  auto perm = permutation(n, mix(seed, 0, kSubsampleTag));
  const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n))));
  perm.resize(std::min(keep, n));
  std::sort(perm.begin(), perm.end());
  return perm;
}

double pretrain_objective_value(const MetricModel& model, std::span<const EncodedExample> data,
                                const TrainConfig& config) {
  if (data.empty()) throw ShapeError("pretrain_objective_value: empty data");
  const bool feats = needs_features(config.objective);
  double sum = 0.0;
  for (const auto& ex : data) {
    ScoreGrid scores;
    FeatureGrid features;
    for (const auto& level : ex.pairs) {
      auto& s = scores.levels.emplace_back();
      auto& f = features.levels.emplace_back();
      for (const auto& pair : level) {
        Tape tape(false);
        ForwardGraph g = model.forward(tape, pair);
        s.push_back(tape.value(g.score)(0, 0));
        if (feats) f.push_back(tape.value(g.pooled).row(0).transpose());
      }
    }
    sum += example_objective(scores, feats ? &features : nullptr, config, nullptr, nullptr).total;
  }
  return sum / static_cast<double>(data.size());
}

double finetune_objective_value(const MetricModel& teacher, const MetricModel& student,
                                std::span<const EncodedScoredPair> data, const TrainConfig& config) {
  if (data.empty()) throw ShapeError("finetune_objective_value: empty data");
  const KdHyper kd = effective_kd(config);
  std::vector<ForwardTrace> t, s;
  t.reserve(data.size());
  s.reserve(data.size());
  std::vector<KdItem> items;
  for (const auto& d : data) {
    if (kd.beta != 0.0) t.push_back(teacher.trace(d.pair));
    s.push_back(student.trace(d.pair));
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    items.push_back({{kd.beta != 0.0 ? &t[i] : nullptr, &s[i]}, data[i].normalized_score});
  }
  return kd_mse_loss(items, kd, config.kd_options).total;
}

// ---------------------------------------------------------------------------

TrainResult pretrain(const MetricModel& initial, std::span<const EncodedExample> corpus, const TrainConfig& config,
                     const PretrainOptions& options) {
  config.validate();
  if (config.stage != Stage::pretrain) throw ConfigError("pretrain requires stage = pretrain");
  if (corpus.empty()) throw CorpusError("pretraining corpus is empty");
  validate_corpus(corpus);
  const auto start_time = Clock::now();

  TrainResult result{initial, std::nullopt, -1, {}, {}};
  MetricModel& model = result.last;
  result.log.config_hash = run_hash(model, config);

  const std::size_t n = corpus.size();
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  const long steps_per_epoch = static_cast<long>((n + bs - 1) / bs);
  const long total_steps = steps_per_epoch * config.epochs;

  Adam adam(adam_config(config, total_steps), model);
  if (options.resume) adam.restore(*options.resume);
  const long start_step = adam.state().step;
  const std::vector<bool> frozen = frozen_mask(model, config.ablation.fix_encoder);
  const bool feats = needs_features(config.objective);
  double best_validation = std::numeric_limits<double>::infinity();

  for (int epoch = static_cast<int>(start_step / steps_per_epoch); epoch < config.epochs; ++epoch) {
    const auto order = permutation(n, mix(config.seed, static_cast<std::uint64_t>(epoch), kShuffleTag));
    double epoch_sum = 0.0;
    long epoch_steps = 0;
    bool stopped = false;
    for (long b = 0; b < steps_per_epoch; ++b) {
      const long step = epoch * steps_per_epoch + b;
      if (step < start_step) continue;
      if (options.stop_after_step >= 0 && step >= options.stop_after_step) {
        stopped = true;
        break;
      }
      std::mt19937_64 dropout_rng(mix(config.seed, static_cast<std::uint64_t>(step), kDropoutTag));
      const std::size_t begin = static_cast<std::size_t>(b) * bs;
      const std::size_t end = std::min(n, begin + bs);
      const double inv_batch = 1.0 / static_cast<double>(end - begin);

      std::vector<Matrix> grads = model.zero_gradients();
      ReportAccumulator acc;
      for (std::size_t i = begin; i < end; ++i) {
        const EncodedExample& ex = corpus[order[i]];
        Tape tape(true);
        std::vector<std::vector<ForwardGraph>> graphs;
        ScoreGrid scores;
        FeatureGrid features;
        for (const auto& level : ex.pairs) {
          auto& gl = graphs.emplace_back();
          auto& sl = scores.levels.emplace_back();
          auto& fl = features.levels.emplace_back();
          for (const auto& pair : level) {
            gl.push_back(model.forward(tape, pair, &dropout_rng));
            sl.push_back(tape.value(gl.back().score)(0, 0));
            if (feats) fl.push_back(tape.value(gl.back().pooled).row(0).transpose());
          }
        }
        ScoreGrid score_grad;
        FeatureGrid feature_grad;
        const ObjectiveValue value =
            example_objective(scores, feats ? &features : nullptr, config, &score_grad, feats ? &feature_grad : nullptr);
        acc.add(value);
        if (!std::isfinite(value.total)) continue;
        bool any = false;
        for (std::size_t j = 0; j < graphs.size(); ++j) {
          for (std::size_t k = 0; k < graphs[j].size(); ++k) {
            const double gs = score_grad.levels[j][k] * inv_batch;
            if (gs != 0.0) {
              tape.seed(graphs[j][k].score, gs);
              any = true;
            }
            if (feats) {
              const Vector& gf = feature_grad.levels[j][k];
              if (gf.squaredNorm() != 0.0) {
                tape.seed(graphs[j][k].pooled, Matrix(gf.transpose() * inv_batch));
                any = true;
              }
            }
          }
        }
        if (any) tape.backward(grads);
      }
      StepRecord record{step + 1, acc.finish()};
      check_finite(record.report, record.step);
      adam.step(model, grads, frozen);
      epoch_sum += record.report.total;
      ++epoch_steps;
      if (options.on_step) options.on_step(record);
      result.log.append(std::move(record));
    }
    if (epoch_steps > 0) {
      EpochSummary summary{epoch + 1, epoch_sum / static_cast<double>(epoch_steps), std::nullopt};
      if (!options.validation.empty() && !stopped) {
        summary.validation = pretrain_objective_value(model, options.validation, config);
        if (*summary.validation < best_validation) {
          best_validation = *summary.validation;
          result.best = model;
          result.best_epoch = epoch + 1;
        }
      }
      result.log.append(summary);
    }
    if (stopped) break;
  }
  result.optimizer = adam.state();
  result.log.wall_seconds = std::chrono::duration<double>(Clock::now() - start_time).count();
  return result;
}

TrainResult finetune(const MetricModel& teacher, std::span<const EncodedScoredPair> corpus, const TrainConfig& config,
                     const FinetuneOptions& options) {
  config.validate();
  if (config.stage != Stage::finetune) throw ConfigError("finetune requires stage = finetune");
  if (corpus.empty()) throw CorpusError("fine-tuning corpus is empty");
  const KdHyper kd = effective_kd(config);
  const auto start_time = Clock::now();

  TrainResult result{options.student ? *options.student : clone_model(teacher), std::nullopt, -1, {}, {}};
  MetricModel& student = result.last;
  if (!(student.config() == teacher.config())) {
    throw ConfigError("student and teacher architectures differ");
  }
  result.log.config_hash = run_hash(student, config);

  std::vector<EncodedScoredPair> data;
  for (std::size_t i : subsample_indices(corpus.size(), config.finetune_data_fraction, config.seed)) {
    data.push_back(corpus[i]);
  }
  std::vector<ForwardTrace> teacher_traces;
  if (kd.beta != 0.0) {
    teacher_traces.reserve(data.size());
    for (const auto& d : data) teacher_traces.push_back(teacher.trace(d.pair));
  }

  const std::size_t n = data.size();
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  const long steps_per_epoch = static_cast<long>((n + bs - 1) / bs);
  const long total_steps = steps_per_epoch * config.epochs;

  Adam adam(adam_config(config, total_steps), student);
  if (options.resume) adam.restore(*options.resume);
  const long start_step = adam.state().step;
  const std::vector<bool> frozen = frozen_mask(student, config.ablation.fix_encoder);
  double best_validation = std::numeric_limits<double>::infinity();

  for (int epoch = static_cast<int>(start_step / steps_per_epoch); epoch < config.epochs; ++epoch) {
    const auto order = permutation(n, mix(config.seed, static_cast<std::uint64_t>(epoch), kShuffleTag));
    double epoch_sum = 0.0;
    long epoch_steps = 0;
    bool stopped = false;
    for (long b = 0; b < steps_per_epoch; ++b) {
      const long step = epoch * steps_per_epoch + b;
      if (step < start_step) continue;
      if (options.stop_after_step >= 0 && step >= options.stop_after_step) {
        stopped = true;
        break;
      }
      std::mt19937_64 dropout_rng(mix(config.seed, static_cast<std::uint64_t>(step), kDropoutTag));
      const std::size_t begin = static_cast<std::size_t>(b) * bs;
      const std::size_t end = std::min(n, begin + bs);

      Tape tape(true);
      std::vector<ForwardGraph> graphs;
      std::vector<ForwardTrace> student_traces;
      graphs.reserve(end - begin);
      student_traces.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        const auto& pair = data[order[i]].pair;
        graphs.push_back(student.forward(tape, pair, &dropout_rng));
        student_traces.push_back(trace_from(tape, graphs.back(), pair));
      }
      std::vector<KdItem> items;
      for (std::size_t i = begin; i < end; ++i) {
        const ForwardTrace* t = kd.beta != 0.0 ? &teacher_traces[order[i]] : nullptr;
        items.push_back({{t, &student_traces[i - begin]}, data[order[i]].normalized_score});
      }
      std::vector<TraceGradient> trace_grads;
      StepRecord record{step + 1, kd_mse_loss(items, kd, config.kd_options, &trace_grads)};
      check_finite(record.report, record.step);

      for (std::size_t i = 0; i < graphs.size(); ++i) {
        const ForwardGraph& g = graphs[i];
        const TraceGradient& tg = trace_grads[i];
        for (std::size_t l = 0; l < tg.layer_outputs.size(); ++l) tape.seed(g.layer_outputs[l], tg.layer_outputs[l]);
        for (std::size_t l = 0; l < tg.attention.size(); ++l)
          for (std::size_t h = 0; h < tg.attention[l].size(); ++h) tape.seed(g.attention[l][h], tg.attention[l][h]);
        tape.seed(g.score, tg.score);
      }
      std::vector<Matrix> grads = student.zero_gradients();
      tape.backward(grads);
      adam.step(student, grads, frozen);

      epoch_sum += record.report.total;
      ++epoch_steps;
      if (options.on_step) options.on_step(record);
      result.log.append(std::move(record));
    }
    if (epoch_steps > 0) {
      EpochSummary summary{epoch + 1, epoch_sum / static_cast<double>(epoch_steps), std::nullopt};
      if (!options.validation.empty() && !stopped) {
        summary.validation = finetune_objective_value(teacher, student, options.validation, config);
        if (*summary.validation < best_validation) {
          best_validation = *summary.validation;
          result.best = student;
          result.best_epoch = epoch + 1;
        }
      }
      result.log.append(summary);
    }
    if (stopped) break;
  }
  result.optimizer = adam.state();
  result.log.wall_seconds = std::chrono::duration<double>(Clock::now() - start_time).count();
  return result;
}

}  // namespace dcm
