#include "dcm/distill_loss.hpp"

#include "dcm/errors.hpp"

namespace dcm {
namespace {

void check_same(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string("kd_loss: teacher/student shape mismatch in ") + what);
  }
}

/// Indices of unmasked positions; an empty mask means every position counts.
std::vector<Index> valid_positions(const std::vector<int>& mask, Index rows) {
  std::vector<Index> out;
  for (Index i = 0; i < rows; ++i) {
    if (mask.empty() || mask[static_cast<std::size_t>(i)] != 0) out.push_back(i);
  }
  return out;
}

}  // namespace

void KdHyper::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw ConfigError("alpha and beta must be non-negative");
  if (alpha == 0.0 && beta == 0.0) throw ConfigError("alpha and beta cannot both be zero");
}

double mse_loss(double predicted, double target) {
  const double d = target - predicted;
  return d * d;
}

double kd_loss(const TracePair& pair, const KdOptions& options, TraceGradient* grad) {
  if (!pair.teacher || !pair.student) throw ShapeError("kd_loss: missing trace");
  const ForwardTrace& t = *pair.teacher;
  const ForwardTrace& s = *pair.student;
  if (t.layer_outputs.size() != s.layer_outputs.size() || t.attention.size() != s.attention.size() ||
      t.layer_outputs.size() != t.attention.size() + 2) {
    throw ShapeError("kd_loss: teacher/student layer count mismatch");
  }
  if (t.attention_mask != s.attention_mask) throw ShapeError("kd_loss: attention masks differ");
  const std::size_t T = t.attention.size();

  if (grad) {
    grad->layer_outputs.clear();
    grad->attention.clear();
    grad->score = 0.0;
  }

  double total = 0.0;
  // Hidden-state layers 0..T.
  for (std::size_t l = 0; l <= T; ++l) {
    const Matrix& a = t.layer_outputs[l];
    const Matrix& b = s.layer_outputs[l];
    check_same(a, b, "layer outputs");
    const auto rows = valid_positions(s.attention_mask, b.rows());
    const double count = static_cast<double>(rows.size()) * static_cast<double>(b.cols());
    const double w = options.normalize && count > 0 ? 1.0 / count : 1.0;
    Matrix g = Matrix::Zero(b.rows(), b.cols());
    double sq = 0.0;
    for (Index r : rows) {
      const RowVector d = b.row(r) - a.row(r);
      sq += d.squaredNorm();
      g.row(r) = 2.0 * w * d;
    }
    total += w * sq;
    if (grad) grad->layer_outputs.push_back(std::move(g));
  }

  // Prediction layer T + 1.
  {
    const Matrix& a = t.layer_outputs[T + 1];
    const Matrix& b = s.layer_outputs[T + 1];
    check_same(a, b, "prediction output");
    const double d = options.prediction_post_sigmoid ? s.score - t.score : b(0, 0) - a(0, 0);
    total += d * d;
    if (grad) {
      if (options.prediction_post_sigmoid) {
        grad->layer_outputs.push_back(Matrix::Zero(1, 1));
        grad->score += 2.0 * d;
      } else {
        grad->layer_outputs.push_back(Matrix::Constant(1, 1, 2.0 * d));
      }
    }
  }

  // Attention score tensors, one per transformer layer (all heads together).
  for (std::size_t l = 0; l < T; ++l) {
    if (t.attention[l].size() != s.attention[l].size()) throw ShapeError("kd_loss: head count mismatch");
    const std::size_t heads = s.attention[l].size();
    std::vector<Index> pos;
    if (heads > 0) pos = valid_positions(s.attention_mask, s.attention[l][0].rows());
    const double count = static_cast<double>(heads) * static_cast<double>(pos.size() * pos.size());
    const double w = options.normalize && count > 0 ? 1.0 / count : 1.0;
    std::vector<Matrix> layer_grad;
    for (std::size_t h = 0; h < heads; ++h) {
      const Matrix& a = t.attention[l][h];
      const Matrix& b = s.attention[l][h];
      check_same(a, b, "attention");
      Matrix g = Matrix::Zero(b.rows(), b.cols());
      double sq = 0.0;
      for (Index i : pos) {
        for (Index j : pos) {
          const double d = b(i, j) - a(i, j);
          sq += d * d;
          g(i, j) = 2.0 * w * d;
        }
      }
      total += w * sq;
      layer_grad.push_back(std::move(g));
    }
    if (grad) grad->attention.push_back(std::move(layer_grad));
  }
  return total;
}

LossReport kd_mse_loss(std::span<const KdItem> batch, const KdHyper& hyper, const KdOptions& options,
                       std::vector<TraceGradient>* grads) {
  if (batch.empty()) throw ShapeError("kd_mse_loss: empty batch");
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double mse_sum = 0.0;
  double kd_sum = 0.0;
  if (grads) grads->assign(batch.size(), TraceGradient{});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const KdItem& item = batch[i];
    if (!item.traces.student) throw ShapeError("kd_mse_loss: missing student trace");
    const double predicted = item.traces.student->score;
    mse_sum += mse_loss(predicted, item.target);
    TraceGradient* g = grads ? &(*grads)[i] : nullptr;
    if (hyper.beta != 0.0) {
      kd_sum += kd_loss(item.traces, options, g);
      if (g) {
        for (auto& m : g->layer_outputs) m *= hyper.beta * inv_n;
        for (auto& layer : g->attention)
          for (auto& m : layer) m *= hyper.beta * inv_n;
        g->score *= hyper.beta * inv_n;
      }
    }
    if (g) g->score += hyper.alpha * inv_n * 2.0 * (predicted - item.target);
  }
  LossReport report;
  report.components = {{"mse", hyper.alpha * mse_sum * inv_n}, {"kd", hyper.beta * kd_sum * inv_n}};
  report.total = report.components[0].second + report.components[1].second;
  return report;
}

}  // namespace dcm
