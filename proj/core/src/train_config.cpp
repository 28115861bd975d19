#include "dcm/train_config.hpp"

#include "dcm/errors.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dcm {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError("invalid number for " + std::string(key) + ": '" + std::string(v) + "'");
  }
  return out;
}

long long to_int(std::string_view key, std::string_view v) {
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError("invalid integer for " + std::string(key) + ": '" + std::string(v) + "'");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("invalid boolean for " + std::string(key) + ": '" + std::string(v) + "'");
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(Stage stage) { return stage == Stage::pretrain ? "pretrain" : "finetune"; }

std::string to_string(PretrainObjective o) {
  switch (o) {
    case PretrainObjective::mlr: return "mlr";
    case PretrainObjective::bce: return "bce";
    case PretrainObjective::ranking: return "ranking";
    case PretrainObjective::supcon: return "supcon";
    case PretrainObjective::fat: return "fat";
    case PretrainObjective::vanilla_mlr: return "vanilla_mlr";
  }
  return "mlr";
}

Stage parse_stage(std::string_view text) {
  if (text == "pretrain") return Stage::pretrain;
  if (text == "finetune") return Stage::finetune;
  throw ConfigError("unknown stage '" + std::string(text) + "'");
}

PretrainObjective parse_objective(std::string_view text) {
  for (auto o : {PretrainObjective::mlr, PretrainObjective::bce, PretrainObjective::ranking,
                 PretrainObjective::supcon, PretrainObjective::fat, PretrainObjective::vanilla_mlr}) {
    if (text == to_string(o)) return o;
  }
  throw ConfigError("unknown pretrain_objective '" + std::string(text) + "'");
}

TrainConfig TrainConfig::defaults(Stage stage) {
  TrainConfig c;
  c.stage = stage;
  if (stage == Stage::finetune) {
    c.epochs = 20;
    c.batch_size = 10;
    c.learning_rate = 5e-6;
  }
  return c;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("optimizer betas must lie in [0, 1)");
  }
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) throw ConfigError("warmup_fraction must lie in [0, 1]");
  if (!(finetune_data_fraction > 0.0 && finetune_data_fraction <= 1.0)) {
    throw ConfigError("finetune_data_fraction must lie in (0, 1]");
  }
  mlr.validate();
  baseline.validate();
  if (!ablation.disable_kd) kd.validate();
}

void apply_setting(RunConfig& c, std::string_view key, std::string_view value) {
  TrainConfig& t = c.train;
  ModelConfig& m = c.model;
  const std::string k(key);
  auto i = [&] { return static_cast<int>(to_int(key, value)); };
  auto d = [&] { return to_double(key, value); };
  auto b = [&] { return to_bool(key, value); };

  if (k == "stage") t.stage = parse_stage(value);
  else if (k == "epochs") t.epochs = i();
  else if (k == "batch_size") t.batch_size = i();
  else if (k == "learning_rate") t.learning_rate = d();
  else if (k == "beta1") t.beta1 = d();
  else if (k == "beta2") t.beta2 = d();
  else if (k == "adam_eps") t.adam_eps = d();
  else if (k == "warmup_fraction") t.warmup_fraction = d();
  else if (k == "grad_clip") t.grad_clip = d();
  else if (k == "pretrain_objective") t.objective = parse_objective(value);
  else if (k == "lambda") t.mlr.lambda = d();
  else if (k == "mu") t.mlr.mu = d();
  else if (k == "alpha") t.kd.alpha = d();
  else if (k == "beta") t.kd.beta = d();
  else if (k == "kd_normalize") t.kd_options.normalize = b();
  else if (k == "kd_post_sigmoid") t.kd_options.prediction_post_sigmoid = b();
  else if (k == "ranking_margin") t.baseline.ranking_margin = d();
  else if (k == "supcon_temperature") t.baseline.supcon_temperature = d();
  else if (k == "fat_margin") t.baseline.fat_margin = d();
  else if (k == "seed") {
    t.seed = static_cast<std::uint64_t>(to_int(key, value));
    m.seed = t.seed;
  }
  else if (k == "disable_sep") t.ablation.disable_sep = b();
  else if (k == "disable_com") t.ablation.disable_com = b();
  else if (k == "disable_ord") t.ablation.disable_ord = b();
  else if (k == "fix_encoder") t.ablation.fix_encoder = b();
  else if (k == "disable_kd") t.ablation.disable_kd = b();
  else if (k == "finetune_data_fraction") t.finetune_data_fraction = d();
  else if (k == "hidden_dim") m.hidden_dim = i();
  else if (k == "num_layers") m.num_layers = i();
  else if (k == "num_heads") m.num_heads = i();
  else if (k == "ffn_dim") m.ffn_dim = i();
  else if (k == "max_seq_len") m.max_seq_len = i();
  else if (k == "dropout") m.dropout = d();
  else if (k == "mlp_hidden_1") m.mlp_hidden_dims.first = i();
  else if (k == "mlp_hidden_2") m.mlp_hidden_dims.second = i();
  else if (k == "score_min") c.scale.min = d();
  else if (k == "score_max") c.scale.max = d();
  else if (k == "min_freq") c.min_freq = i();
  else throw ConfigError("unknown config key '" + k + "'");
}

RunConfig parse_run_config(std::istream& in, RunConfig base) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view(line);
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    try {
      apply_setting(base, trim(view.substr(0, eq)), trim(view.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_run_config(in, std::move(base));
}

std::string to_key_values(const RunConfig& c) {
  const TrainConfig& t = c.train;
  const ModelConfig& m = c.model;
  auto flag = [](bool v) { return v ? "true" : "false"; };
  std::ostringstream out;
  out << "stage = " << to_string(t.stage) << '\n'
      << "epochs = " << t.epochs << '\n'
      << "batch_size = " << t.batch_size << '\n'
      << "learning_rate = " << num(t.learning_rate) << '\n'
      << "beta1 = " << num(t.beta1) << '\n'
      << "beta2 = " << num(t.beta2) << '\n'
      << "adam_eps = " << num(t.adam_eps) << '\n'
      << "warmup_fraction = " << num(t.warmup_fraction) << '\n'
      << "grad_clip = " << num(t.grad_clip) << '\n'
      << "pretrain_objective = " << to_string(t.objective) << '\n'
      << "lambda = " << num(t.mlr.lambda) << '\n'
      << "mu = " << num(t.mlr.mu) << '\n'
      << "alpha = " << num(t.kd.alpha) << '\n'
      << "beta = " << num(t.kd.beta) << '\n'
      << "kd_normalize = " << flag(t.kd_options.normalize) << '\n'
      << "kd_post_sigmoid = " << flag(t.kd_options.prediction_post_sigmoid) << '\n'
      << "ranking_margin = " << num(t.baseline.ranking_margin) << '\n'
      << "supcon_temperature = " << num(t.baseline.supcon_temperature) << '\n'
      << "fat_margin = " << num(t.baseline.fat_margin) << '\n'
      << "seed = " << t.seed << '\n'
      << "disable_sep = " << flag(t.ablation.disable_sep) << '\n'
      << "disable_com = " << flag(t.ablation.disable_com) << '\n'
      << "disable_ord = " << flag(t.ablation.disable_ord) << '\n'
      << "fix_encoder = " << flag(t.ablation.fix_encoder) << '\n'
      << "disable_kd = " << flag(t.ablation.disable_kd) << '\n'
      << "finetune_data_fraction = " << num(t.finetune_data_fraction) << '\n'
      << "hidden_dim = " << m.hidden_dim << '\n'
      << "num_layers = " << m.num_layers << '\n'
      << "num_heads = " << m.num_heads << '\n'
      << "ffn_dim = " << m.ffn_dim << '\n'
      << "max_seq_len = " << m.max_seq_len << '\n'
      << "dropout = " << num(m.dropout) << '\n'
      << "mlp_hidden_1 = " << m.mlp_hidden_dims.first << '\n'
      << "mlp_hidden_2 = " << m.mlp_hidden_dims.second << '\n'
      << "score_min = " << num(c.scale.min) << '\n'
      << "score_max = " << num(c.scale.max) << '\n'
      << "min_freq = " << c.min_freq << '\n';
  return out.str();
}

std::uint64_t config_hash(const RunConfig& config) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : to_key_values(config)) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace dcm
