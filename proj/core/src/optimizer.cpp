#include "dcm/optimizer.hpp"

#include "dcm/errors.hpp"

#include <algorithm>
#include <cmath>

namespace dcm {

double clip_global_norm(std::vector<Matrix>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& g : grads) g *= s;
  }
  return norm;
}

Adam::Adam(const AdamConfig& config, const MetricModel& model) : config_(config) {
  if (!(config_.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (config_.total_steps < 1) throw ConfigError("total_steps must be positive");
  state_.first_moment = model.zero_gradients();
  state_.second_moment = model.zero_gradients();
}

double Adam::learning_rate_at(long step) const {
  const long warmup = static_cast<long>(std::ceil(config_.warmup_fraction * static_cast<double>(config_.total_steps)));
  if (warmup <= 0 || step >= warmup) return config_.learning_rate;
  return config_.learning_rate * static_cast<double>(step) / static_cast<double>(warmup);
}

void Adam::step(MetricModel& model, std::vector<Matrix>& grads, const std::vector<bool>& frozen) {
  auto params = model.parameters();
  if (grads.size() != params.size()) throw ShapeError("Adam::step: gradient count mismatch");
  if (!frozen.empty() && frozen.size() != params.size()) throw ShapeError("Adam::step: frozen mask size mismatch");
  for (std::size_t i = 0; i < frozen.size(); ++i)
    if (frozen[i]) grads[i].setZero();
  clip_global_norm(grads, config_.clip_norm);
  ++state_.step;
  const double lr = learning_rate_at(state_.step);
  const double t = static_cast<double>(state_.step);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!frozen.empty() && frozen[i]) continue;
    Matrix& m = state_.first_moment[i];
    Matrix& v = state_.second_moment[i];
    m = config_.beta1 * m + (1.0 - config_.beta1) * grads[i];
    v = config_.beta2 * v + (1.0 - config_.beta2) * grads[i].cwiseAbs2();
    params[i].value.array() -=
        lr * (m.array() / c1) / ((v.array() / c2).sqrt() + config_.eps);
  }
}

void Adam::restore(OptimizerState state) {
  if (state.first_moment.size() != state_.first_moment.size() ||
      state.second_moment.size() != state_.second_moment.size()) {
    throw FormatError("optimizer state does not match the model");
  }
  for (std::size_t i = 0; i < state.first_moment.size(); ++i) {
    if (state.first_moment[i].rows() != state_.first_moment[i].rows() ||
        state.first_moment[i].cols() != state_.first_moment[i].cols() ||
        state.second_moment[i].rows() != state_.second_moment[i].rows() ||
        state.second_moment[i].cols() != state_.second_moment[i].cols()) {
      throw FormatError("optimizer moment shape mismatch");
    }
  }
  state_ = std::move(state);
}

}  // namespace dcm
