#include "dcm/model.hpp"

#include "dcm/errors.hpp"

#include <cmath>
#include <cstring>
#include <unordered_map>

namespace dcm {
namespace {

constexpr double kEmbeddingStd = 0.02;
constexpr double kLayerNormEps = 1e-12;

std::string layer_name(int t, const char* component) {
  return "encoder.layer." + std::to_string(t) + "." + component;
}

Matrix dropout_mask(Index rows, Index cols, double rate, std::mt19937_64& rng) {
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  Matrix m(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = keep(rng) ? scale : 0.0;
  return m;
}

}  // namespace

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw ConfigError(std::string(name) + " must be positive");
  };
  if (vocab_size < Vocabulary::kNumReserved) {
    throw ConfigError("vocab_size must cover the reserved tokens");
  }
  positive(hidden_dim, "hidden_dim");
  positive(num_layers, "num_layers");
  positive(num_heads, "num_heads");
  positive(ffn_dim, "ffn_dim");
  positive(max_seq_len, "max_seq_len");
  positive(mlp_hidden_dims.first, "mlp_hidden_dims[0]");
  positive(mlp_hidden_dims.second, "mlp_hidden_dims[1]");
  if (hidden_dim % num_heads != 0) {
    throw ConfigError("hidden_dim " + std::to_string(hidden_dim) + " is not divisible by num_heads " +
                      std::to_string(num_heads));
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
}

bool operator==(const ModelConfig& a, const ModelConfig& b) {
  return a.vocab_size == b.vocab_size && a.hidden_dim == b.hidden_dim &&
         a.num_layers == b.num_layers && a.num_heads == b.num_heads && a.ffn_dim == b.ffn_dim &&
         a.max_seq_len == b.max_seq_len && a.dropout == b.dropout &&
         a.mlp_hidden_dims == b.mlp_hidden_dims && a.seed == b.seed;
}

std::vector<std::pair<std::string, std::pair<Index, Index>>> MetricModel::layout(const ModelConfig& c) {
  const Index h = c.hidden_dim;
  std::vector<std::pair<std::string, std::pair<Index, Index>>> out = {
      {"encoder.embeddings.token", {c.vocab_size, h}},
      {"encoder.embeddings.position", {c.max_seq_len, h}},
      {"encoder.embeddings.segment", {2, h}},
      {"encoder.embeddings.norm.gamma", {1, h}},
      {"encoder.embeddings.norm.beta", {1, h}},
  };
  for (int t = 0; t < c.num_layers; ++t) {
    for (const char* proj : {"query", "key", "value", "output"}) {
      out.push_back({layer_name(t, (std::string("attention.") + proj + ".weight").c_str()), {h, h}});
      out.push_back({layer_name(t, (std::string("attention.") + proj + ".bias").c_str()), {1, h}});
    }
    out.push_back({layer_name(t, "attention.norm.gamma"), {1, h}});
    out.push_back({layer_name(t, "attention.norm.beta"), {1, h}});
    out.push_back({layer_name(t, "ffn.inner.weight"), {h, c.ffn_dim}});
    out.push_back({layer_name(t, "ffn.inner.bias"), {1, c.ffn_dim}});
    out.push_back({layer_name(t, "ffn.outer.weight"), {c.ffn_dim, h}});
    out.push_back({layer_name(t, "ffn.outer.bias"), {1, h}});
    out.push_back({layer_name(t, "ffn.norm.gamma"), {1, h}});
    out.push_back({layer_name(t, "ffn.norm.beta"), {1, h}});
  }
  const Index dims[4] = {h, c.mlp_hidden_dims.first, c.mlp_hidden_dims.second, 1};
  for (int k = 0; k < 3; ++k) {
    out.push_back({"scorer.layer." + std::to_string(k) + ".weight", {dims[k], dims[k + 1]}});
    out.push_back({"scorer.layer." + std::to_string(k) + ".bias", {1, dims[k + 1]}});
  }
  return out;
}

MetricModel::MetricModel(const ModelConfig& config) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  std::normal_distribution<double> normal(0.0, kEmbeddingStd);
  for (auto& [name, shape] : layout(config_)) {
    Matrix value(shape.first, shape.second);
    const bool is_gamma = name.ends_with(".gamma");
    const bool is_bias = name.ends_with(".bias") || name.ends_with(".beta");
    if (is_gamma) {
      value.setOnes();
    } else if (is_bias) {
      value.setZero();
    } else if (name.starts_with("encoder.embeddings.")) {
      for (Index i = 0; i < value.size(); ++i) value.data()[i] = normal(rng);
    } else {
      const double a = std::sqrt(6.0 / static_cast<double>(shape.first + shape.second));
      std::uniform_real_distribution<double> uniform(-a, a);
      for (Index i = 0; i < value.size(); ++i) value.data()[i] = uniform(rng);
    }
    params_.push_back({name, std::move(value)});
  }
  bind_slots();
}

MetricModel::MetricModel(const ModelConfig& config, std::vector<NamedTensor> weights)
    : config_(config), params_(std::move(weights)) {
  config_.validate();
  const auto expected = layout(config_);
  if (params_.size() != expected.size()) {
    throw FormatError("expected " + std::to_string(expected.size()) + " tensors, got " +
                      std::to_string(params_.size()));
  }
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < params_.size(); ++i) index[params_[i].name] = i;
  std::vector<NamedTensor> ordered;
  ordered.reserve(expected.size());
  for (auto& [name, shape] : expected) {
    auto it = index.find(name);
    if (it == index.end()) throw FormatError("missing tensor " + name);
    NamedTensor& t = params_[it->second];
    if (t.value.rows() != shape.first || t.value.cols() != shape.second) {
      throw FormatError("tensor " + name + " has wrong shape");
    }
    ordered.push_back(std::move(t));
  }
  params_ = std::move(ordered);
  bind_slots();
}

void MetricModel::bind_slots() {
  std::size_t i = 0;
  slots_.token = i++;
  slots_.position = i++;
  slots_.segment = i++;
  slots_.emb_norm_g = i++;
  slots_.emb_norm_b = i++;
  slots_.layers.clear();
  for (int t = 0; t < config_.num_layers; ++t) {
    LayerSlots l{};
    l.q_w = i++;
    l.q_b = i++;
    l.k_w = i++;
    l.k_b = i++;
    l.v_w = i++;
    l.v_b = i++;
    l.o_w = i++;
    l.o_b = i++;
    l.attn_norm_g = i++;
    l.attn_norm_b = i++;
    l.ffn_in_w = i++;
    l.ffn_in_b = i++;
    l.ffn_out_w = i++;
    l.ffn_out_b = i++;
    l.ffn_norm_g = i++;
    l.ffn_norm_b = i++;
    slots_.layers.push_back(l);
  }
  for (int k = 0; k < 3; ++k) {
    slots_.scorer_w[k] = i++;
    slots_.scorer_b[k] = i++;
  }
}

const Matrix& MetricModel::parameter(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return p.value;
  throw ConfigError("no parameter named " + std::string(name));
}

std::size_t MetricModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

bool MetricModel::is_encoder_parameter(std::size_t index) const {
  return params_.at(index).name.starts_with("encoder.");
}

Var MetricModel::param(Tape& tape, std::size_t slot) const { return tape.parameter(params_[slot].value, slot); }

ForwardGraph MetricModel::forward(Tape& tape, const EncodedPair& pair, std::mt19937_64* dropout_rng) const {
  return run(tape, pair, dropout_rng);
}

ForwardGraph MetricModel::run(Tape& tape, const EncodedPair& pair, std::mt19937_64* dropout_rng) const {
  const std::size_t n = pair.token_ids.size();
  if (n == 0) throw ShapeError("empty input sequence");
  if (n > static_cast<std::size_t>(config_.max_seq_len)) {
    throw ShapeError("input length " + std::to_string(n) + " exceeds max_seq_len " +
                     std::to_string(config_.max_seq_len));
  }
  if (pair.segment_ids.size() != n || pair.attention_mask.size() != n) {
    throw ShapeError("segment_ids / attention_mask length differs from token_ids");
  }
  const bool drop = dropout_rng != nullptr && config_.dropout > 0.0;
  auto maybe_dropout = [&](Var v) {
    if (!drop) return v;
    const Matrix& x = tape.value(v);
    return tape.mul_constant(v, dropout_mask(x.rows(), x.cols(), config_.dropout, *dropout_rng));
  };

  const Index seq = static_cast<Index>(n);
  std::vector<int> positions(n);
  for (std::size_t i = 0; i < n; ++i) positions[i] = static_cast<int>(i);

  Matrix mask_fill = Matrix::Zero(seq, seq);
  bool has_pad = false;
  for (Index j = 0; j < seq; ++j) {
    if (pair.attention_mask[static_cast<std::size_t>(j)] == 0) {
      mask_fill.col(j).setConstant(kMaskFill);
      has_pad = true;
    }
  }

  ForwardGraph g;
  Var emb = tape.add(tape.add(tape.gather_rows(param(tape, slots_.token), pair.token_ids),
                              tape.gather_rows(param(tape, slots_.position), positions)),
                     tape.gather_rows(param(tape, slots_.segment), pair.segment_ids));
  Var x = tape.layer_norm(emb, param(tape, slots_.emb_norm_g), param(tape, slots_.emb_norm_b),
                          kLayerNormEps);
  x = maybe_dropout(x);
  g.layer_outputs.push_back(x);

  const int heads = config_.num_heads;
  const Index dh = config_.head_dim();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (const LayerSlots& l : slots_.layers) {
    Var q = tape.add_row(tape.matmul(x, param(tape, l.q_w)), param(tape, l.q_b));
    Var k = tape.add_row(tape.matmul(x, param(tape, l.k_w)), param(tape, l.k_b));
    Var v = tape.add_row(tape.matmul(x, param(tape, l.v_w)), param(tape, l.v_b));
    std::vector<Var> contexts;
    auto& layer_attention = g.attention.emplace_back();
    for (int h = 0; h < heads; ++h) {
      Var qh = tape.cols(q, h * dh, dh);
      Var kh = tape.cols(k, h * dh, dh);
      Var vh = tape.cols(v, h * dh, dh);
      Var scores = tape.scale(tape.matmul_bt(qh, kh), inv_sqrt);
      if (has_pad) scores = tape.add_constant(scores, mask_fill);
      layer_attention.push_back(scores);
      contexts.push_back(tape.matmul(tape.softmax_rows(scores), vh));
    }
    Var ctx = heads == 1 ? contexts.front() : tape.hconcat(contexts);
    Var attn = tape.add_row(tape.matmul(ctx, param(tape, l.o_w)), param(tape, l.o_b));
    attn = maybe_dropout(attn);
    x = tape.layer_norm(tape.add(x, attn), param(tape, l.attn_norm_g), param(tape, l.attn_norm_b),
                        kLayerNormEps);
    Var inner = tape.gelu(tape.add_row(tape.matmul(x, param(tape, l.ffn_in_w)), param(tape, l.ffn_in_b)));
    Var outer = tape.add_row(tape.matmul(inner, param(tape, l.ffn_out_w)), param(tape, l.ffn_out_b));
    outer = maybe_dropout(outer);
    x = tape.layer_norm(tape.add(x, outer), param(tape, l.ffn_norm_g), param(tape, l.ffn_norm_b),
                        kLayerNormEps);
    g.layer_outputs.push_back(x);
  }

  g.pooled = tape.row(x, 0);
  Var h1 = tape.elu(tape.add_row(tape.matmul(g.pooled, param(tape, slots_.scorer_w[0])),
                                 param(tape, slots_.scorer_b[0])));
  Var h2 = tape.elu(tape.add_row(tape.matmul(h1, param(tape, slots_.scorer_w[1])),
                                 param(tape, slots_.scorer_b[1])));
  g.logit = tape.add_row(tape.matmul(h2, param(tape, slots_.scorer_w[2])), param(tape, slots_.scorer_b[2]));
  g.score = tape.sigmoid(g.logit);
  g.layer_outputs.push_back(g.logit);
  return g;
}

double MetricModel::score(const EncodedPair& pair) const {
  Tape tape(false);
  ForwardGraph g = run(tape, pair, nullptr);
  return tape.value(g.score)(0, 0);
}

ForwardTrace MetricModel::trace(const EncodedPair& pair) const {
  Tape tape(false);
  ForwardGraph g = run(tape, pair, nullptr);
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

double MetricModel::score_from_hidden(const Matrix& final_layer) const {
  if (final_layer.rows() < 1 || final_layer.cols() != config_.hidden_dim) {
    throw ShapeError("score_from_hidden: expected rows x hidden_dim input");
  }
  Tape tape(false);
  Var pooled = tape.constant(final_layer.row(0));
  Var h1 = tape.elu(tape.add_row(tape.matmul(pooled, param(tape, slots_.scorer_w[0])),
                                 param(tape, slots_.scorer_b[0])));
  Var h2 = tape.elu(tape.add_row(tape.matmul(h1, param(tape, slots_.scorer_w[1])),
                                 param(tape, slots_.scorer_b[1])));
  Var logit = tape.add_row(tape.matmul(h2, param(tape, slots_.scorer_w[2])), param(tape, slots_.scorer_b[2]));
  return tape.value(tape.sigmoid(logit))(0, 0);
}

std::vector<Matrix> MetricModel::zero_gradients() const {
  std::vector<Matrix> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  return out;
}

std::uint64_t MetricModel::checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : params_) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.value.data());
    const std::size_t count = static_cast<std::size_t>(p.value.size()) * sizeof(double);
    for (std::size_t i = 0; i < count; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

MetricModel init_model(const ModelConfig& config) { return MetricModel(config); }

MetricModel clone_model(const MetricModel& model) { return MetricModel(model); }

double forward_score(const MetricModel& model, const EncodedPair& pair) { return model.score(pair); }

ForwardTrace forward_trace(const MetricModel& model, const EncodedPair& pair) { return model.trace(pair); }

}  // namespace dcm
