#pragma once

#include "dcm/loss_types.hpp"
#include "dcm/model.hpp"

#include <span>
#include <vector>

namespace dcm {

struct KdHyper {
  /// Weight of the squared error against the human score.
  double alpha = 1.0;
  /// Weight of the teacher-matching regularizer.
  double beta = 5.0;

  /// Throws ConfigError on negative weights or alpha = beta = 0.
  void validate() const;
};

struct KdOptions {
  /// Divide each tensor's squared distance by its unmasked element count.
  /// When false the plain squared L2 norms are summed.
  bool normalize = true;
  /// Compare post-sigmoid scores instead of the pre-sigmoid logit for the
  /// prediction layer.
  bool prediction_post_sigmoid = false;
};

/// Gradient of a loss w.r.t. the values of a ForwardTrace. layer_outputs and
/// attention mirror the trace; score collects the gradient w.r.t. the final
/// sigmoid output.
struct TraceGradient {
  std::vector<Matrix> layer_outputs;
  std::vector<std::vector<Matrix>> attention;
  double score = 0.0;
};

struct TracePair {
  const ForwardTrace* teacher = nullptr;
  const ForwardTrace* student = nullptr;
};

/// (target - predicted)^2
double mse_loss(double predicted, double target);

/// Squared distances between every layer output (embedding, transformer
/// layers, prediction) and every attention score tensor. Padded positions are
/// excluded. If grad is non-null it receives d(kd)/d(student trace); the
/// teacher is treated as constant. Throws ShapeError on shape mismatch.
double kd_loss(const TracePair& pair, const KdOptions& options = {}, TraceGradient* grad = nullptr);

struct KdItem {
  TracePair traces;
  double target = 0.0;
};

/// Batch mean of alpha * mse + beta * kd. The report's "mse" and "kd"
/// components are the weighted batch means, so total is their sum. The kd term
/// is skipped entirely when beta is zero. grads receives one TraceGradient per
/// item (already divided by the batch size).
LossReport kd_mse_loss(std::span<const KdItem> batch, const KdHyper& hyper, const KdOptions& options = {},
                       std::vector<TraceGradient>* grads = nullptr);

}  // namespace dcm
