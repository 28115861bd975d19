#include "dcm/mlr_loss.hpp"

#include "dcm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dcm {
namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

ScoreGrid ScoreGrid::zeros_like() const {
  ScoreGrid out;
  out.levels.reserve(levels.size());
  for (const auto& l : levels) out.levels.emplace_back(l.size(), 0.0);
  return out;
}

double LossReport::component(std::string_view name) const {
  for (const auto& [n, v] : components)
    if (n == name) return v;
  throw std::out_of_range("no loss component named " + std::string(name));
}

void MlrHyper::validate() const {
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  if (!(mu >= 0.0)) throw ConfigError("mu must be non-negative");
}

std::vector<double> compute_centroids(const ScoreGrid& grid) {
  std::vector<double> out;
  out.reserve(grid.levels.size());
  for (std::size_t j = 0; j < grid.levels.size(); ++j) {
    const auto& level = grid.levels[j];
    if (level.empty()) throw ShapeError("level " + std::to_string(j + 1) + " has no scores");
    double sum = 0.0;
    for (double s : level) sum += s;
    out.push_back(sum / static_cast<double>(level.size()));
  }
  return out;
}

double separation_loss(std::span<const double> e, const MlrHyper& hyper) {
  double loss = 0.0;
  for (std::size_t j = 0; j < e.size(); ++j)
    for (std::size_t l = j + 1; l < e.size(); ++l)
      loss += std::max(0.0, static_cast<double>(l - j) * hyper.lambda - std::abs(e[j] - e[l]));
  return loss;
}

double compactness_loss(const ScoreGrid& grid, std::span<const double> e, const MlrHyper& hyper) {
  if (e.size() != grid.levels.size()) throw ShapeError("centroid count differs from level count");
  double loss = 0.0;
  for (std::size_t j = 0; j < e.size(); ++j)
    for (double s : grid.levels[j]) loss += std::max(0.0, std::abs(e[j] - s) - hyper.mu);
  return loss;
}

double ordering_loss(std::span<const double> e) {
  double loss = 0.0;
  for (std::size_t j = 0; j < e.size(); ++j)
    for (std::size_t l = j + 1; l < e.size(); ++l) loss += std::max(0.0, e[j] - e[l]);
  return loss;
}

MlrComponents mlr_example_loss(const ScoreGrid& grid, const MlrHyper& hyper, const MlrTerms& terms,
                               ScoreGrid* grad) {
  const std::vector<double> e = compute_centroids(grid);
  MlrComponents out;
  out.separation = terms.separation ? separation_loss(e, hyper) : 0.0;
  out.compactness = terms.compactness ? compactness_loss(grid, e, hyper) : 0.0;
  out.ordering = terms.ordering ? ordering_loss(e) : 0.0;
  if (!grad) return out;

  const std::size_t L = e.size();
  *grad = grid.zeros_like();
  std::vector<double> de(L, 0.0);
  for (std::size_t j = 0; j < L; ++j) {
    for (std::size_t l = j + 1; l < L; ++l) {
      const double diff = e[j] - e[l];
      if (terms.separation && static_cast<double>(l - j) * hyper.lambda - std::abs(diff) > 0.0) {
        de[j] -= sign(diff);
        de[l] += sign(diff);
      }
      if (terms.ordering && diff > 0.0) {
        de[j] += 1.0;
        de[l] -= 1.0;
      }
    }
  }
  if (terms.compactness) {
    for (std::size_t j = 0; j < L; ++j) {
      for (std::size_t k = 0; k < grid.levels[j].size(); ++k) {
        const double diff = e[j] - grid.levels[j][k];
        if (std::abs(diff) - hyper.mu > 0.0) {
          de[j] += sign(diff);
          grad->levels[j][k] -= sign(diff);
        }
      }
    }
  }
  for (std::size_t j = 0; j < L; ++j) {
    const double share = de[j] / static_cast<double>(grid.levels[j].size());
    for (double& g : grad->levels[j]) g += share;
  }
  return out;
}

LossReport mlr_loss(std::span<const ScoreGrid> grids, const MlrHyper& hyper, const MlrTerms& terms,
                    std::vector<ScoreGrid>* grads) {
  if (grids.empty()) throw ShapeError("mlr_loss: empty batch");
  const double inv_n = 1.0 / static_cast<double>(grids.size());
  MlrComponents sum;
  if (grads) grads->assign(grids.size(), ScoreGrid{});
  for (std::size_t i = 0; i < grids.size(); ++i) {
    for (const auto& level : grids[i].levels)
      for (double s : level)
        if (!std::isfinite(s)) throw ShapeError("mlr_loss: non-finite score");
    ScoreGrid* g = grads ? &(*grads)[i] : nullptr;
    const MlrComponents c = mlr_example_loss(grids[i], hyper, terms, g);
    sum.separation += c.separation;
    sum.compactness += c.compactness;
    sum.ordering += c.ordering;
    if (g) {
      for (auto& level : g->levels)
        for (double& v : level) v *= inv_n;
    }
  }
  LossReport report;
  report.components = {{"sep", sum.separation * inv_n},
                       {"com", sum.compactness * inv_n},
                       {"ord", sum.ordering * inv_n}};
  report.total = report.components[0].second + report.components[1].second + report.components[2].second;
  return report;
}

}  // namespace dcm
