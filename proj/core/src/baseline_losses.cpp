#include "dcm/baseline_losses.hpp"

#include "dcm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dcm {

void BaselineHyper::validate() const {
  if (!(ranking_margin > 0.0)) throw ConfigError("ranking_margin must be positive");
  if (!(supcon_temperature > 0.0)) throw ConfigError("supcon_temperature must be positive");
  if (!(fat_margin > 0.0)) throw ConfigError("fat_margin must be positive");
}

TwoLevelView TwoLevelView::from(const ScoreGrid& grid) {
  if (grid.levels.size() < 2) throw ShapeError("two-level view needs at least two levels");
  TwoLevelView v;
  v.positives = grid.levels.back();
  for (std::size_t j = 0; j + 1 < grid.levels.size(); ++j)
    v.negatives.insert(v.negatives.end(), grid.levels[j].begin(), grid.levels[j].end());
  return v;
}

ScoreGrid TwoLevelView::scatter(const ScoreGrid& layout) const {
  ScoreGrid out = layout.zeros_like();
  if (out.levels.size() < 2 || out.levels.back().size() != positives.size()) {
    throw ShapeError("two-level view does not match grid layout");
  }
  out.levels.back() = positives;
  std::size_t i = 0;
  for (std::size_t j = 0; j + 1 < out.levels.size(); ++j) {
    for (double& g : out.levels[j]) {
      if (i >= negatives.size()) throw ShapeError("two-level view does not match grid layout");
      g = negatives[i++];
    }
  }
  if (i != negatives.size()) throw ShapeError("two-level view does not match grid layout");
  return out;
}

FeatureGrid FeatureGrid::zeros_like() const {
  FeatureGrid out;
  for (const auto& level : levels) {
    auto& dst = out.levels.emplace_back();
    for (const auto& f : level) dst.push_back(Vector::Zero(f.size()));
  }
  return out;
}

FeatureGrid FeatureGrid::normalized() const {
  FeatureGrid out = *this;
  for (auto& level : out.levels)
    for (auto& f : level) f /= f.norm();
  return out;
}

double bce_loss(const TwoLevelView& view, TwoLevelView* grad) {
  const double n = static_cast<double>(view.positives.size() + view.negatives.size());
  if (n == 0) throw ShapeError("bce_loss: empty view");
  double loss = 0.0;
  if (grad) {
    grad->positives.assign(view.positives.size(), 0.0);
    grad->negatives.assign(view.negatives.size(), 0.0);
  }
  for (std::size_t i = 0; i < view.positives.size(); ++i) {
    const double s = view.positives[i];
    loss -= std::log(s);
    if (grad) grad->positives[i] = -1.0 / (s * n);
  }
  for (std::size_t i = 0; i < view.negatives.size(); ++i) {
    const double s = view.negatives[i];
    loss -= std::log1p(-s);
    if (grad) grad->negatives[i] = 1.0 / ((1.0 - s) * n);
  }
  return loss / n;
}

double margin_ranking_loss(const TwoLevelView& view, double margin, TwoLevelView* grad) {
  const double pairs = static_cast<double>(view.positives.size() * view.negatives.size());
  if (pairs == 0) throw ShapeError("margin_ranking_loss: no (positive, negative) pairs");
  if (grad) {
    grad->positives.assign(view.positives.size(), 0.0);
    grad->negatives.assign(view.negatives.size(), 0.0);
  }
  double loss = 0.0;
  for (std::size_t p = 0; p < view.positives.size(); ++p) {
    for (std::size_t q = 0; q < view.negatives.size(); ++q) {
      const double h = margin - (view.positives[p] - view.negatives[q]);
      if (h > 0.0) {
        loss += h;
        if (grad) {
          grad->positives[p] -= 1.0 / pairs;
          grad->negatives[q] += 1.0 / pairs;
        }
      }
    }
  }
  return loss / pairs;
}

double supcon_loss(const FeatureGrid& features, double temperature, FeatureGrid* grad) {
  if (!(temperature > 0.0)) throw ShapeError("supcon_loss: temperature must be positive");
  std::vector<Vector> z;
  std::vector<double> norms;
  std::vector<int> label;
  for (std::size_t j = 0; j < features.levels.size(); ++j) {
    for (const auto& f : features.levels[j]) {
      const double nrm = f.norm();
      if (!(nrm > 0.0)) throw ShapeError("supcon_loss: zero feature vector");
      z.push_back(f / nrm);
      norms.push_back(nrm);
      label.push_back(static_cast<int>(j));
    }
  }
  const std::size_t n = z.size();
  std::vector<Vector> dz;
  if (grad) dz.assign(n, Vector::Zero(n ? z[0].size() : 0));

  double loss = 0.0;
  std::size_t anchors = 0;
  std::vector<double> sim(n), prob(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t positives = 0;
    for (std::size_t a = 0; a < n; ++a)
      if (a != i && label[a] == label[i]) ++positives;
    if (positives == 0) continue;
    ++anchors;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < n; ++a) {
      if (a == i) continue;
      sim[a] = z[i].dot(z[a]) / temperature;
      mx = std::max(mx, sim[a]);
    }
    double denom = 0.0;
    for (std::size_t a = 0; a < n; ++a)
      if (a != i) denom += std::exp(sim[a] - mx);
    const double lse = mx + std::log(denom);
    double term = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      if (p != i && label[p] == label[i]) term += lse - sim[p];
    loss += term / static_cast<double>(positives);
    if (grad) {
      for (std::size_t a = 0; a < n; ++a) {
        if (a == i) continue;
        prob[a] = std::exp(sim[a] - lse);
        double c = prob[a];
        if (label[a] == label[i]) c -= 1.0 / static_cast<double>(positives);
        c /= temperature;
        dz[i] += c * z[a];
        dz[a] += c * z[i];
      }
    }
  }
  if (anchors == 0) throw ShapeError("supcon_loss: no valid anchors");
  const double inv = 1.0 / static_cast<double>(anchors);
  if (grad) {
    *grad = features.zeros_like();
    std::size_t idx = 0;
    for (auto& level : grad->levels) {
      for (auto& g : level) {
        const Vector& zi = z[idx];
        const Vector d = dz[idx] * inv;
        g = (d - zi * zi.dot(d)) / norms[idx];
        ++idx;
      }
    }
  }
  return loss * inv;
}

double fat_loss(const FeatureGrid& features, double margin, FeatureGrid* grad) {
  const std::size_t L = features.levels.size();
  if (L < 2) throw ShapeError("fat_loss: at least two levels are required");
  std::vector<Vector> centroid;
  for (std::size_t j = 0; j < L; ++j) {
    const auto& level = features.levels[j];
    if (level.empty()) throw ShapeError("fat_loss: level " + std::to_string(j + 1) + " has no members");
    Vector c = Vector::Zero(level[0].size());
    for (const auto& f : level) c += f;
    centroid.push_back(c / static_cast<double>(level.size()));
  }
  if (grad) *grad = features.zeros_like();
  // Gradient w.r.t. each centroid, distributed to members afterwards.
  std::vector<Vector> dc(L, Vector::Zero(centroid[0].size()));
  double loss = 0.0;
  for (std::size_t j = 0; j < L; ++j) {
    for (std::size_t k = 0; k < features.levels[j].size(); ++k) {
      const Vector& a = features.levels[j][k];
      const double own = (a - centroid[j]).squaredNorm();
      std::size_t nearest = j == 0 ? 1 : 0;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < L; ++l) {
        if (l == j) continue;
        const double d = (a - centroid[l]).squaredNorm();
        if (d < best) {
          best = d;
          nearest = l;
        }
      }
      const double h = margin + own - best;
      if (h <= 0.0) continue;
      loss += h;
      if (grad) {
        const Vector d_own = 2.0 * (a - centroid[j]);
        const Vector d_other = 2.0 * (a - centroid[nearest]);
        grad->levels[j][k] += d_own - d_other;
        dc[j] -= d_own;
        dc[nearest] += d_other;
      }
    }
  }
  if (grad) {
    for (std::size_t j = 0; j < L; ++j) {
      const Vector share = dc[j] / static_cast<double>(features.levels[j].size());
      for (auto& g : grad->levels[j]) g += share;
    }
  }
  return loss;
}

double vanilla_mlr_loss(const ScoreGrid& grid, double margin, ScoreGrid* grad) {
  const std::size_t L = grid.levels.size();
  if (L < 2) throw ShapeError("vanilla_mlr_loss: at least two levels are required");
  double terms = 0.0;
  for (std::size_t j = 0; j < L; ++j)
    for (std::size_t l = j + 1; l < L; ++l)
      terms += static_cast<double>(grid.levels[j].size() * grid.levels[l].size());
  if (terms == 0) throw ShapeError("vanilla_mlr_loss: empty level");
  if (grad) *grad = grid.zeros_like();
  double loss = 0.0;
  for (std::size_t j = 0; j < L; ++j) {
    for (std::size_t l = j + 1; l < L; ++l) {
      for (std::size_t k = 0; k < grid.levels[j].size(); ++k) {
        for (std::size_t kk = 0; kk < grid.levels[l].size(); ++kk) {
          const double h = margin - (grid.levels[l][kk] - grid.levels[j][k]);
          if (h > 0.0) {
            loss += h;
            if (grad) {
              grad->levels[l][kk] -= 1.0 / terms;
              grad->levels[j][k] += 1.0 / terms;
            }
          }
        }
      }
    }
  }
  return loss / terms;
}

}  // namespace dcm
