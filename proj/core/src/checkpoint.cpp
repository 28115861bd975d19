#include "dcm/checkpoint.hpp"

#include "dcm/errors.hpp"

#include "json.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <iterator>

namespace dcm {
namespace {

using json = nlohmann::json;

constexpr std::array<char, 8> kMagic = {'D', 'C', 'M', 'C', 'K', 'P', 'T', '\0'};
constexpr const char* kMomentPrefix1 = "optimizer.m.";
constexpr const char* kMomentPrefix2 = "optimizer.v.";

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

class Writer {
 public:
  template <class T>
  void pod(const T& v) {
    buf_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void bytes(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    buf_ += s;
  }
  void tensor(const std::string& name, const Matrix& m) {
    bytes(name);
    pod(static_cast<std::uint64_t>(m.rows()));
    pod(static_cast<std::uint64_t>(m.cols()));
    buf_.append(reinterpret_cast<const char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(double));
  }
  std::string& buffer() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  template <class T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes() {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  NamedTensor tensor() {
    NamedTensor t;
    t.name = bytes();
    const auto rows = pod<std::uint64_t>();
    const auto cols = pod<std::uint64_t>();
    if (rows > (1u << 28) || cols > (1u << 28)) throw FormatError("implausible tensor shape for " + t.name);
    const std::size_t count = static_cast<std::size_t>(rows * cols);
    need(count * sizeof(double));
    t.value.resize(static_cast<Index>(rows), static_cast<Index>(cols));
    std::memcpy(t.value.data(), data_.data() + pos_, count * sizeof(double));
    pos_ += count * sizeof(double);
    return t;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw FormatError("checkpoint truncated");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

json config_to_json(const ModelConfig& c) {
  return json{{"vocab_size", c.vocab_size},   {"hidden_dim", c.hidden_dim},
              {"num_layers", c.num_layers},   {"num_heads", c.num_heads},
              {"ffn_dim", c.ffn_dim},         {"max_seq_len", c.max_seq_len},
              {"dropout", c.dropout},         {"mlp_hidden_dims", {c.mlp_hidden_dims.first, c.mlp_hidden_dims.second}},
              {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.num_layers = j.at("num_layers").get<int>();
  c.num_heads = j.at("num_heads").get<int>();
  c.ffn_dim = j.at("ffn_dim").get<int>();
  c.max_seq_len = j.at("max_seq_len").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.mlp_hidden_dims = {j.at("mlp_hidden_dims").at(0).get<int>(), j.at("mlp_hidden_dims").at(1).get<int>()};
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

std::string to_string(TrainingStage stage) {
  switch (stage) {
    case TrainingStage::initialized: return "initialized";
    case TrainingStage::pretrained: return "pretrained";
    case TrainingStage::finetuned: return "finetuned";
  }
  return "initialized";
}

TrainingStage parse_training_stage(const std::string& text) {
  if (text == "initialized") return TrainingStage::initialized;
  if (text == "pretrained") return TrainingStage::pretrained;
  if (text == "finetuned") return TrainingStage::finetuned;
  throw FormatError("unknown training stage '" + text + "'");
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  Writer w;
  w.buffer().append(kMagic.data(), kMagic.size());
  w.pod(Checkpoint::kFormatVersion);
  json header{{"config", config_to_json(ckpt.config)},
              {"stage", to_string(ckpt.stage)},
              {"optimizer_step", ckpt.optimizer ? ckpt.optimizer->step : -1}};
  w.bytes(header.dump());
  std::uint32_t count = static_cast<std::uint32_t>(ckpt.weights.size());
  if (ckpt.optimizer) count += static_cast<std::uint32_t>(2 * ckpt.weights.size());
  w.pod(count);
  for (const auto& t : ckpt.weights) w.tensor(t.name, t.value);
  if (ckpt.optimizer) {
    if (ckpt.optimizer->first_moment.size() != ckpt.weights.size() ||
        ckpt.optimizer->second_moment.size() != ckpt.weights.size()) {
      throw FormatError("optimizer state does not match weights");
    }
    for (std::size_t i = 0; i < ckpt.weights.size(); ++i)
      w.tensor(kMomentPrefix1 + ckpt.weights[i].name, ckpt.optimizer->first_moment[i]);
    for (std::size_t i = 0; i < ckpt.weights.size(); ++i)
      w.tensor(kMomentPrefix2 + ckpt.weights[i].name, ckpt.optimizer->second_moment[i]);
  }
  const std::uint64_t sum = fnv1a(w.buffer());
  w.pod(sum);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw FormatError("failed writing " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < kMagic.size() + sizeof(std::uint32_t) + sizeof(std::uint64_t)) {
    throw FormatError("checkpoint truncated");
  }
  if (std::memcmp(data.data(), kMagic.data(), kMagic.size()) != 0) {
    throw FormatError(path.string() + " is not a checkpoint");
  }
  std::uint32_t version = 0;
  std::memcpy(&version, data.data() + kMagic.size(), sizeof(version));
  if (version != Checkpoint::kFormatVersion) {
    throw FormatError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(Checkpoint::kFormatVersion) + ")");
  }
  const std::string body = data.substr(0, data.size() - sizeof(std::uint64_t));
  std::uint64_t stored = 0;
  std::memcpy(&stored, data.data() + body.size(), sizeof(stored));
  if (fnv1a(body) != stored) throw FormatError("checkpoint checksum mismatch (corrupt or truncated)");

  Reader r(std::string_view(body).substr(kMagic.size() + sizeof(std::uint32_t)));
  Checkpoint ckpt;
  json header;
  try {
    header = json::parse(r.bytes());
    ckpt.config = config_from_json(header.at("config"));
    ckpt.stage = parse_training_stage(header.at("stage").get<std::string>());
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad checkpoint header: ") + e.what());
  }
  const long opt_step = header.value("optimizer_step", -1L);
  const auto count = r.pod<std::uint32_t>();
  std::vector<NamedTensor> moments1, moments2;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t = r.tensor();
    if (t.name.starts_with(kMomentPrefix1)) {
      moments1.push_back(std::move(t));
    } else if (t.name.starts_with(kMomentPrefix2)) {
      moments2.push_back(std::move(t));
    } else {
      ckpt.weights.push_back(std::move(t));
    }
  }
  if (!r.done()) throw FormatError("trailing bytes in checkpoint");
  if (opt_step >= 0) {
    if (moments1.size() != ckpt.weights.size() || moments2.size() != ckpt.weights.size()) {
      throw FormatError("incomplete optimizer state in checkpoint");
    }
    OptimizerState st;
    st.step = opt_step;
    for (auto& t : moments1) st.first_moment.push_back(std::move(t.value));
    for (auto& t : moments2) st.second_moment.push_back(std::move(t.value));
    ckpt.optimizer = std::move(st);
  }
  return ckpt;
}

void save_checkpoint(const MetricModel& model, const std::filesystem::path& path, TrainingStage stage,
                     const OptimizerState* optimizer) {
  Checkpoint ckpt;
  ckpt.config = model.config();
  ckpt.weights.assign(model.parameters().begin(), model.parameters().end());
  ckpt.stage = stage;
  if (optimizer) ckpt.optimizer = *optimizer;
  write_checkpoint(path, ckpt);
}

MetricModel load_checkpoint(const std::filesystem::path& path, const Vocabulary* vocab) {
  Checkpoint ckpt = read_checkpoint(path);
  if (vocab && static_cast<std::size_t>(ckpt.config.vocab_size) != vocab->size()) {
    throw FormatError("vocab_size mismatch: checkpoint has " + std::to_string(ckpt.config.vocab_size) +
                      ", vocabulary has " + std::to_string(vocab->size()));
  }
  return MetricModel(ckpt.config, std::move(ckpt.weights));
}

}  // namespace dcm
