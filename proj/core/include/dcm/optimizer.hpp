#pragma once

#include "dcm/autograd.hpp"
#include "dcm/model.hpp"

#include <span>
#include <vector>

namespace dcm {

struct AdamConfig {
  double learning_rate = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Fraction of total_steps over which the rate ramps linearly from 0.
  double warmup_fraction = 0.1;
  long total_steps = 1;
  /// Global gradient-norm clip; <= 0 disables clipping.
  double clip_norm = 1.0;
};

/// Moment estimates and step count; enough to resume bit-identically.
struct OptimizerState {
  long step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

/// Scales grads in place so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_global_norm(std::vector<Matrix>& grads, double max_norm);

/// Adaptive moment estimation with bias correction and no weight decay.
class Adam {
 public:
  Adam(const AdamConfig& config, const MetricModel& model);

  /// Zeroes gradients of frozen parameters, clips the rest by global norm and
  /// updates every parameter whose frozen flag is false.
  /// Frozen parameters and their moments are left untouched.
  void step(MetricModel& model, std::vector<Matrix>& grads, const std::vector<bool>& frozen = {});

  double learning_rate_at(long step) const;
  const OptimizerState& state() const { return state_; }
  void restore(OptimizerState state);

 private:
  AdamConfig config_;
  OptimizerState state_;
};

}  // namespace dcm
