// dcm: command-line front end for pretraining, fine-tuning, evaluation,
// ablations, data-fraction sweeps and plot-data export.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include "dcm/checkpoint.hpp"
#include "dcm/emitters.hpp"
#include "dcm/errors.hpp"
#include "dcm/evaluation.hpp"
#include "dcm/oracles.hpp"
#include "dcm/synthetic.hpp"
#include "dcm/trainer.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace dcm;

namespace {

constexpr int kUsageError = 2;

/// Options shared by every training-related subcommand.
struct ConfigFlags {
  std::string config_path;
  std::vector<std::string> settings;
  std::optional<std::uint64_t> seed;

  void add_to(CLI::App& app) {
    app.add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
    app.add_option("--set", settings, "override one setting, key=value (repeatable)");
    app.add_option("--seed", seed, "seed for initialization, shuffling, dropout and subsampling");
  }

  RunConfig resolve(Stage stage) const {
    RunConfig run;
    run.train = TrainConfig::defaults(stage);
    if (!config_path.empty()) run = load_run_config(config_path, run);
    for (const auto& s : settings) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      apply_setting(run, s.substr(0, eq), s.substr(eq + 1));
    }
    if (seed) apply_setting(run, "seed", std::to_string(*seed));
    run.train.stage = stage;
    run.train.validate();
    return run;
  }
};

fs::path vocab_path(const fs::path& checkpoint) { return fs::path(checkpoint.string() + ".vocab"); }

void write_log(const TrainLog& log, const std::string& path) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  log.write_jsonl(out);
}

void print_epochs(const TrainLog& log) {
  for (const auto& e : log.epochs()) {
    std::fprintf(stderr, "epoch %d  train %.6f", e.epoch, e.train_mean);
    if (e.validation) std::fprintf(stderr, "  validation %.6f", *e.validation);
    std::fprintf(stderr, "\n");
  }
}

std::string dataset_name(const fs::path& p) { return p.stem().string(); }

std::vector<double> parse_fractions(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError("invalid fraction '" + item + "'");
    }
  }
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// ---------------------------------------------------------------------------

struct PretrainCmd {
  ConfigFlags config;
  std::string data, out, validation, log, resume, vocab_extra;
  std::string select = "best";

  void add_to(CLI::App& app) {
    config.add_to(app);
    app.add_option("--data", data, "multi-level corpus (JSON lines)")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out, "checkpoint to write")->required();
    app.add_option("--validation", validation, "held-out multi-level corpus")->check(CLI::ExistingFile);
    app.add_option("--log", log, "training log (JSON lines)");
    app.add_option("--resume", resume, "continue from a checkpoint written by this command")->check(CLI::ExistingFile);
    app.add_option("--vocab-extra", vocab_extra, "rated corpus whose tokens join the vocabulary")
        ->check(CLI::ExistingFile);
    app.add_option("--select", select, "model to save when validating")->check(CLI::IsMember({"best", "last"}));
  }

  int run() const {
    const RunConfig rc = config.resolve(Stage::pretrain);
    const auto corpus = load_pretrain_corpus(data);
    std::optional<Vocabulary> vocab;
    std::optional<MetricModel> model;
    PretrainOptions opts;
    if (!resume.empty()) {
      vocab = Vocabulary::load(vocab_path(resume));
      Checkpoint ck = read_checkpoint(resume);
      model.emplace(ck.config, std::move(ck.weights));
      opts.resume = std::move(ck.optimizer);
    } else {
      if (vocab_extra.empty()) {
        vocab = build_vocab(corpus, rc.min_freq);
      } else {
        const auto extra = load_finetune_corpus(vocab_extra, rc.scale);
        vocab = build_vocab(corpus, extra, rc.min_freq);
      }
      ModelConfig mc = rc.model;
      mc.vocab_size = static_cast<int>(vocab->size());
      model = init_model(mc);
    }
    const int max_len = model->config().max_seq_len;
    const auto encoded = encode_corpus(corpus, *vocab, max_len);
    std::vector<EncodedExample> held;
    if (!validation.empty()) {
      const auto v = load_pretrain_corpus(validation);
      held = encode_corpus(v, *vocab, max_len);
      opts.validation = held;
    }
    const TrainResult result = pretrain(*model, encoded, rc.train, opts);
    print_epochs(result.log);
    const bool use_best = select == "best" && result.best;
    save_checkpoint(use_best ? *result.best : result.last, out, TrainingStage::pretrained,
                    use_best ? nullptr : &result.optimizer);
    vocab->save(vocab_path(out));
    write_log(result.log, log);
    std::printf("wrote %s (%s model, %zu steps)\n", out.c_str(), use_best ? "best-epoch" : "last-step",
                result.log.steps().size());
    return 0;
  }
};

struct FinetuneCmd {
  ConfigFlags config;
  std::string teacher, data, out, validation, log, resume;
  std::string select = "last";

  void add_to(CLI::App& app) {
    config.add_to(app);
    app.add_option("--teacher", teacher, "pretrained checkpoint")->required()->check(CLI::ExistingFile);
    app.add_option("--data", data, "rated corpus (JSON lines)")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out, "student checkpoint to write")->required();
    app.add_option("--validation", validation, "held-out rated corpus")->check(CLI::ExistingFile);
    app.add_option("--log", log, "training log (JSON lines)");
    app.add_option("--resume", resume, "student checkpoint to continue from")->check(CLI::ExistingFile);
    app.add_option("--select", select, "model to save when validating")->check(CLI::IsMember({"best", "last"}));
  }

  int run() const {
    const RunConfig rc = config.resolve(Stage::finetune);
    const Vocabulary vocab = Vocabulary::load(vocab_path(teacher));
    const MetricModel t = load_checkpoint(teacher, &vocab);
    const int max_len = t.config().max_seq_len;
    const auto encoded = encode_corpus(load_finetune_corpus(data, rc.scale), vocab, max_len);
    std::vector<EncodedScoredPair> held;
    FinetuneOptions opts;
    if (!validation.empty()) {
      held = encode_corpus(load_finetune_corpus(validation, rc.scale), vocab, max_len);
      opts.validation = held;
    }
    if (!resume.empty()) {
      Checkpoint ck = read_checkpoint(resume);
      opts.student.emplace(ck.config, std::move(ck.weights));
      opts.resume = std::move(ck.optimizer);
    }
    const std::uint64_t before = t.checksum();
    const TrainResult result = finetune(t, encoded, rc.train, opts);
    if (t.checksum() != before) throw std::logic_error("teacher weights changed during fine-tuning");
    print_epochs(result.log);
    const bool use_best = select == "best" && result.best;
    save_checkpoint(use_best ? *result.best : result.last, out, TrainingStage::finetuned,
                    use_best ? nullptr : &result.optimizer);
    vocab.save(vocab_path(out));
    write_log(result.log, log);
    std::printf("wrote %s (%s model, %zu steps)\n", out.c_str(), use_best ? "best-epoch" : "last-epoch",
                result.log.steps().size());
    return 0;
  }
};

struct EvaluateCmd {
  std::string model, json;
  std::vector<std::string> data;
  ScoreScale scale;

  void add_to(CLI::App& app) {
    app.add_option("--model", model, "checkpoint to evaluate")->required()->check(CLI::ExistingFile);
    app.add_option("--data", data, "rated corpus; repeat for several datasets")->required()->check(CLI::ExistingFile);
    app.add_option("--json", json, "also write the report as JSON");
    app.add_option("--score-min", scale.min, "lowest human rating");
    app.add_option("--score-max", scale.max, "highest human rating");
  }

  int run() const {
    const Vocabulary vocab = Vocabulary::load(vocab_path(model));
    const MetricModel m = load_checkpoint(model, &vocab);
    BenchmarkResult result;
    result.model_id = fs::path(model).stem().string();
    result.config_hash = m.checksum();
    for (const auto& path : data) {
      const auto set = encode_corpus(load_finetune_corpus(path, scale), vocab, m.config().max_seq_len);
      result.add(dataset_name(path), evaluate_model(m, set));
    }
    const std::vector<BenchmarkResult> all{result};
    write_report_table(std::cout, all);
    if (!json.empty()) {
      std::ofstream out(json);
      if (!out) throw FormatError("cannot write " + json);
      write_report_json(out, all);
    }
    return 0;
  }
};

struct AblateCmd {
  ConfigFlags pretrain_flags;
  std::string finetune_config;
  std::vector<std::string> finetune_settings;
  std::string pretrain_data, finetune_data, json, variants;
  std::vector<std::string> eval_data;

  void add_to(CLI::App& app) {
    pretrain_flags.add_to(app);
    app.add_option("--finetune-config", finetune_config, "configuration for the fine-tuning stage")
        ->check(CLI::ExistingFile);
    app.add_option("--finetune-set", finetune_settings, "override one fine-tuning setting, key=value (repeatable)");
    app.add_option("--pretrain-data", pretrain_data, "multi-level corpus")->required()->check(CLI::ExistingFile);
    app.add_option("--finetune-data", finetune_data, "rated training corpus")->required()->check(CLI::ExistingFile);
    app.add_option("--eval-data", eval_data, "rated evaluation corpus (repeatable)")->required()->check(CLI::ExistingFile);
    app.add_option("--variants", variants, "comma-separated subset of full,no-pretrain,no-sep,no-com,no-ord,no-kd-finetune");
    app.add_option("--json", json, "also write the table as JSON");
  }

  int run() const {
    const RunConfig pt = pretrain_flags.resolve(Stage::pretrain);
    ConfigFlags ft_flags{finetune_config, finetune_settings, pretrain_flags.seed};
    const RunConfig ft = ft_flags.resolve(Stage::finetune);

    const auto pt_corpus = load_pretrain_corpus(pretrain_data);
    const auto ft_corpus = load_finetune_corpus(finetune_data, pt.scale);
    const Vocabulary vocab = build_vocab(pt_corpus, ft_corpus, pt.min_freq);
    PipelineConfig pc;
    pc.model = pt.model;
    pc.model.vocab_size = static_cast<int>(vocab.size());
    pc.pretrain = pt.train;
    pc.finetune = ft.train;
    const int max_len = pc.model.max_seq_len;

    std::vector<EvalSet> sets;
    for (const auto& path : eval_data) {
      sets.push_back({dataset_name(path), encode_corpus(load_finetune_corpus(path, pt.scale), vocab, max_len)});
    }
    std::vector<AblationVariant> chosen;
    if (variants.empty()) {
      chosen.assign(all_ablation_variants().begin(), all_ablation_variants().end());
    } else {
      for (const auto& v : split_list(variants)) chosen.push_back(parse_ablation_variant(v));
    }
    const auto results = run_ablation_suite(encode_corpus(pt_corpus, vocab, max_len),
                                            encode_corpus(ft_corpus, vocab, max_len), sets, pc, chosen);
    write_report_table(std::cout, results);
    if (!json.empty()) {
      std::ofstream out(json);
      if (!out) throw FormatError("cannot write " + json);
      write_report_json(out, results);
    }
    return 0;
  }
};

struct SweepCmd {
  ConfigFlags config;
  std::string teacher, data, eval, out;
  std::string fractions = "0.25,0.5,1.0";
  std::string objectives = "kd_mse,mse,mse_fix_encoder";

  void add_to(CLI::App& app) {
    config.add_to(app);
    app.add_option("--teacher", teacher, "pretrained checkpoint")->required()->check(CLI::ExistingFile);
    app.add_option("--data", data, "rated training corpus")->required()->check(CLI::ExistingFile);
    app.add_option("--eval", eval, "rated evaluation corpus")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out, "combined curve CSV; per-objective files are written beside it")->required();
    app.add_option("--fractions", fractions, "comma-separated, strictly increasing, in (0, 1]");
    app.add_option("--objectives", objectives, "comma-separated subset of kd_mse,mse,mse_fix_encoder");
  }

  int run() const {
    const RunConfig rc = config.resolve(Stage::finetune);
    const Vocabulary vocab = Vocabulary::load(vocab_path(teacher));
    const MetricModel t = load_checkpoint(teacher, &vocab);
    const int max_len = t.config().max_seq_len;
    const auto train = encode_corpus(load_finetune_corpus(data, rc.scale), vocab, max_len);
    const auto held = encode_corpus(load_finetune_corpus(eval, rc.scale), vocab, max_len);
    std::vector<FinetuneObjective> objs;
    for (const auto& o : split_list(objectives)) objs.push_back(parse_finetune_objective(o));
    const auto fr = parse_fractions(fractions);

    const SweepReport report = run_data_fraction_sweep(t, train, held, rc.train, fr, objs);
    emit_sweep_curves(report, out);
    const fs::path base(out);
    for (FinetuneObjective o : objs) {
      SweepReport single{report.curve(o)};
      fs::path p = base;
      p.replace_filename(base.stem().string() + "." + to_string(o) + base.extension().string());
      emit_sweep_curves(single, p);
    }
    write_sweep_curves(report, std::cout);
    return 0;
  }
};

struct VisualizeCmd {
  std::string model, data, scores, features, render, check;

  void add_to(CLI::App& app) {
    app.add_option("--model", model, "checkpoint to visualize")->check(CLI::ExistingFile);
    app.add_option("--data", data, "multi-level corpus")->check(CLI::ExistingFile);
    app.add_option("--scores", scores, "score-distribution CSV to write");
    app.add_option("--features", features, "feature-projection CSV to write");
    app.add_option("--render", render, "print a text summary of a score-distribution dump")->check(CLI::ExistingFile);
    app.add_option("--check", check, "validate a dump and its sidecar")->check(CLI::ExistingFile);
  }

  int run() const {
    bool did = false;
    if (!model.empty() || !data.empty() || !scores.empty() || !features.empty()) {
      if (model.empty() || data.empty()) throw ConfigError("--model and --data are required to write dumps");
      if (scores.empty() && features.empty()) throw ConfigError("give --scores and/or --features");
      const Vocabulary vocab = Vocabulary::load(vocab_path(model));
      const MetricModel m = load_checkpoint(model, &vocab);
      const auto corpus = encode_corpus(load_pretrain_corpus(data), vocab, m.config().max_seq_len);
      if (!scores.empty()) {
        const auto dump = emit_score_distribution(m, corpus, scores);
        render_score_distribution(dump, std::cout);
      }
      if (!features.empty()) {
        const auto dump = emit_feature_projection(m, corpus, features);
        std::printf("projection: %zu points, explained variance %.4f, %.4f\n", dump.levels.size(),
                    dump.explained_variance[0], dump.explained_variance[1]);
      }
      did = true;
    }
    if (!render.empty()) {
      render_score_distribution(read_score_distribution(render), std::cout);
      did = true;
    }
    if (!check.empty()) {
      const int version = check_dump_schema(sidecar_path(check));
      std::ifstream in(check);
      std::string header;
      std::getline(in, header);
      if (header == "level,score") {
        read_score_distribution(check);
      } else if (header == "level,x,y") {
        read_feature_projection(check);
      } else {
        throw FormatError(check + ": unrecognized dump header '" + header + "'");
      }
      std::printf("%s: valid (schema version %d)\n", check.c_str(), version);
      did = true;
    }
    if (!did) throw ConfigError("nothing to do: give --model/--data with --scores/--features, --render or --check");
    return 0;
  }
};

struct SelftestCmd {
  std::uint64_t seed = 7;
  void add_to(CLI::App& app) { app.add_option("--seed", seed, "seed for the random configurations"); }
  int run() const { return oracle::run_selftest(std::cout, seed) ? 0 : 1; }
};

struct SynthCmd {
  std::string kind, out;
  std::size_t n = 100;
  std::uint64_t seed = 1;
  SyntheticSpec spec;

  void add_to(CLI::App& app) {
    app.add_option("--kind", kind, "pretrain or ratings")->required()->check(CLI::IsMember({"pretrain", "ratings"}));
    app.add_option("--n", n, "number of examples or rated pairs");
    app.add_option("--seed", seed, "generator seed");
    app.add_option("--out", out, "JSON-lines file to write")->required();
    app.add_option("--levels", spec.num_levels, "coherence levels");
    app.add_option("--responses-per-level", spec.responses_per_level, "responses per level");
    app.add_option("--marker-fraction", spec.marker_fraction, "share of each marker pool used by ratings");
    app.add_option("--preferred-fillers", spec.preferred_fillers, "filler tokens raters reward");
    app.add_option("--preference-weight", spec.preference_weight, "Likert points per preferred filler");
    app.add_option("--noise", spec.rating_noise, "rating noise standard deviation");
  }

  int run() const {
    std::ofstream o(out);
    if (!o) throw FormatError("cannot write " + out);
    if (kind == "pretrain") {
      write_pretrain_corpus(o, synthesize_pretrain_corpus(n, spec, seed));
    } else {
      write_finetune_corpus(o, synthesize_ratings(n, spec, seed));
    }
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Train and evaluate a multi-level dialogue coherence metric"};
  app.require_subcommand(1);

  PretrainCmd pretrain_cmd;
  FinetuneCmd finetune_cmd;
  EvaluateCmd evaluate_cmd;
  AblateCmd ablate_cmd;
  SweepCmd sweep_cmd;
  VisualizeCmd visualize_cmd;
  SelftestCmd selftest_cmd;
  SynthCmd synth_cmd;

  auto* pretrain_app = app.add_subcommand("pretrain", "multi-level ranking pretraining");
  auto* finetune_app = app.add_subcommand("finetune", "distillation-regularized fine-tuning");
  auto* evaluate_app = app.add_subcommand("evaluate", "correlate model scores with human ratings");
  auto* ablate_app = app.add_subcommand("ablate", "run the ablation table");
  auto* sweep_app = app.add_subcommand("sweep", "fine-tuning data-fraction sweep");
  auto* visualize_app = app.add_subcommand("visualize", "write or inspect plot data");
  auto* selftest_app = app.add_subcommand("selftest", "run the oracle check suites");
  auto* synth_app = app.add_subcommand("synth", "generate a synthetic corpus");
  pretrain_cmd.add_to(*pretrain_app);
  finetune_cmd.add_to(*finetune_app);
  evaluate_cmd.add_to(*evaluate_app);
  ablate_cmd.add_to(*ablate_app);
  sweep_cmd.add_to(*sweep_app);
  visualize_cmd.add_to(*visualize_app);
  selftest_cmd.add_to(*selftest_app);
  synth_cmd.add_to(*synth_app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "dcm: error: " << e.what() << "\nRun with --help for more information.\n";
    return kUsageError;
  }

  try {
    if (*pretrain_app) return pretrain_cmd.run();
    if (*finetune_app) return finetune_cmd.run();
    if (*evaluate_app) return evaluate_cmd.run();
    if (*ablate_app) return ablate_cmd.run();
    if (*sweep_app) return sweep_cmd.run();
    if (*visualize_app) return visualize_cmd.run();
    if (*selftest_app) return selftest_cmd.run();
    if (*synth_app) return synth_cmd.run();
  } catch (const ConfigError& e) {
    std::cerr << "dcm: error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "dcm: error: " << e.what() << '\n';
    return 1;
  }
  return kUsageError;
}
