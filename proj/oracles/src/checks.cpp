#include "dcm/oracles.hpp"

#include "dcm/correlation.hpp"
#include "dcm/distill_loss.hpp"
#include "dcm/mlr_loss.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace dcm::oracle {
namespace {

constexpr double kValueTol = 1e-6;
constexpr double kGradTol = 1e-4;
constexpr double kKinkGap = 1e-3;
constexpr double kCorrTol = 1e-10;

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

CheckResult expect_near(std::string name, double got, double want, double tol = kValueTol) {
  const bool ok = std::isfinite(got) && std::fabs(got - want) <= tol;
  return {std::move(name), ok, fmt("got %.10g, want %.10g", got, want)};
}

ScoreGrid grid(std::vector<std::vector<double>> levels) { return ScoreGrid{std::move(levels)}; }

/// Trace with T layers, seq positions, hidden width and heads; every entry is
/// `fill` unless an rng is given.
ForwardTrace make_trace(int T, int seq, int hidden, int heads, double fill, std::mt19937_64* rng = nullptr) {
  std::normal_distribution<double> g(0.0, 1.0);
  const auto value = [&] { return rng ? g(*rng) : fill; };
  const auto mat = [&](int r, int c) {
    Matrix m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = value();
    return m;
  };
  ForwardTrace t;
  for (int l = 0; l <= T; ++l) t.layer_outputs.push_back(mat(seq, hidden));
  t.layer_outputs.push_back(mat(1, 1));
  for (int l = 0; l < T; ++l) {
    auto& layer = t.attention.emplace_back();
    for (int h = 0; h < heads; ++h) layer.push_back(mat(seq, seq));
  }
  t.attention_mask.assign(static_cast<std::size_t>(seq), 1);
  t.logit = t.layer_outputs.back()(0, 0);
  t.score = 1.0 / (1.0 + std::exp(-t.logit));
  return t;
}

FeatureGrid feature_grid(std::vector<std::vector<std::vector<double>>> levels) {
  FeatureGrid out;
  for (auto& level : levels) {
    auto& dst = out.levels.emplace_back();
    for (auto& f : level) dst.push_back(Eigen::Map<Vector>(f.data(), static_cast<Index>(f.size())));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Flattening helpers for finite differences.

std::vector<double> flatten(const std::vector<ScoreGrid>& grids) {
  std::vector<double> out;
  for (const auto& g : grids)
    for (const auto& level : g.levels) out.insert(out.end(), level.begin(), level.end());
  return out;
}

std::vector<ScoreGrid> unflatten(const std::vector<ScoreGrid>& layout, const std::vector<double>& x) {
  std::vector<ScoreGrid> out = layout;
  std::size_t i = 0;
  for (auto& g : out)
    for (auto& level : g.levels)
      for (double& s : level) s = x[i++];
  return out;
}

std::vector<double> flatten(const FeatureGrid& f) {
  std::vector<double> out;
  for (const auto& level : f.levels)
    for (const auto& v : level) out.insert(out.end(), v.data(), v.data() + v.size());
  return out;
}

FeatureGrid unflatten(const FeatureGrid& layout, const std::vector<double>& x) {
  FeatureGrid out = layout;
  std::size_t i = 0;
  for (auto& level : out.levels)
    for (auto& v : level)
      for (Index d = 0; d < v.size(); ++d) v(d) = x[i++];
  return out;
}

/// Student-side trace entries in a fixed order: layer outputs, attention,
/// score.
std::vector<double> flatten(const ForwardTrace& t) {
  std::vector<double> out;
  for (const auto& m : t.layer_outputs) out.insert(out.end(), m.data(), m.data() + m.size());
  for (const auto& layer : t.attention)
    for (const auto& m : layer) out.insert(out.end(), m.data(), m.data() + m.size());
  out.push_back(t.score);
  return out;
}

std::size_t unflatten_into(ForwardTrace& t, const std::vector<double>& x, std::size_t i) {
  for (auto& m : t.layer_outputs)
    for (Index k = 0; k < m.size(); ++k) m.data()[k] = x[i++];
  for (auto& layer : t.attention)
    for (auto& m : layer)
      for (Index k = 0; k < m.size(); ++k) m.data()[k] = x[i++];
  t.score = x[i++];
  t.logit = t.layer_outputs.back()(0, 0);
  return i;
}

std::vector<double> flatten(const TraceGradient& g) {
  std::vector<double> out;
  for (const auto& m : g.layer_outputs) out.insert(out.end(), m.data(), m.data() + m.size());
  for (const auto& layer : g.attention)
    for (const auto& m : layer) out.insert(out.end(), m.data(), m.data() + m.size());
  out.push_back(g.score);
  return out;
}

// ---------------------------------------------------------------------------
// Kink distances: the smallest |argument| over every non-smooth point.

double mlr_kink_distance(const ScoreGrid& g, const MlrHyper& h) {
  std::vector<double> e;
  for (const auto& level : g.levels) {
    double s = 0.0;
    for (double v : level) s += v;
    e.push_back(s / static_cast<double>(level.size()));
  }
  double d = 1e9;
  for (std::size_t j = 0; j < e.size(); ++j) {
    for (std::size_t l = j + 1; l < e.size(); ++l) {
      d = std::min(d, std::fabs(e[j] - e[l]));
      d = std::min(d, std::fabs(static_cast<double>(l - j) * h.lambda - std::fabs(e[j] - e[l])));
    }
    for (double s : g.levels[j]) {
      d = std::min(d, std::fabs(e[j] - s));
      d = std::min(d, std::fabs(std::fabs(e[j] - s) - h.mu));
    }
  }
  return d;
}

double fat_kink_distance(const FeatureGrid& f, double margin) {
  std::vector<Vector> c;
  for (const auto& level : f.levels) {
    Vector s = Vector::Zero(level[0].size());
    for (const auto& v : level) s += v;
    c.push_back(s / static_cast<double>(level.size()));
  }
  double d = 1e9;
  for (std::size_t j = 0; j < f.levels.size(); ++j) {
    for (const auto& a : f.levels[j]) {
      std::vector<double> other;
      for (std::size_t l = 0; l < c.size(); ++l)
        if (l != j) other.push_back((a - c[l]).squaredNorm());
      std::sort(other.begin(), other.end());
      if (other.size() > 1) d = std::min(d, other[1] - other[0]);
      d = std::min(d, std::fabs(margin + (a - c[j]).squaredNorm() - other[0]));
    }
  }
  return d;
}

struct GradTally {
  std::string name;
  int configs = 0;
  double worst = 0.0;

  void add(std::span<const double> analytic, std::span<const double> numeric) {
    ++configs;
    worst = std::max(worst, relative_error(analytic, numeric));
  }
  CheckResult result() const {
    return {"gradient " + name, configs > 0 && worst <= kGradTol,
            std::to_string(configs) + " configs, worst relative error " + fmt("%.3g", worst)};
  }
};

}  // namespace

// ---------------------------------------------------------------------------

std::vector<CheckResult> loss_value_checks() {
  std::vector<CheckResult> out;
  const MlrHyper h{0.3, 0.1};

  // Centroids.
  out.push_back(expect_near("centroid of (0.2 .. 1.0)", compute_centroids(grid({{0.2, 0.4, 0.6, 0.8, 1.0}, {0.5}}))[0], 0.6));
  {
    const auto e = compute_centroids(grid({{0.3}, {0.7}}));
    out.push_back(expect_near("centroid of a single score", std::max(std::fabs(e[0] - 0.3), std::fabs(e[1] - 0.7)), 0.0));
  }
  {
    const auto e = compute_centroids(grid({{0.4, 0.4}, {0.4, 0.4}, {0.4}}));
    double dev = 0.0;
    for (double c : e) dev = std::max(dev, std::fabs(c - 0.4));
    out.push_back(expect_near("centroids of a constant grid", dev, 0.0));
  }

  // Separation.
  const std::vector<double> equal3{0.5, 0.5, 0.5};
  out.push_back(expect_near("separation, coincident centroids", separation_loss(equal3, h), 1.2));
  const std::vector<double> spread{0.0, 0.4, 1.0};
  out.push_back(expect_near("separation, margins met", separation_loss(spread, h), 0.0));
  const std::vector<double> single{0.5};
  out.push_back(expect_near("separation, one level", separation_loss(single, h), 0.0));

  // Compactness.
  {
    const ScoreGrid g = grid({{0.3, 0.3}, {0.6}});
    out.push_back(expect_near("compactness, scores at centroid", compactness_loss(g, compute_centroids(g), h), 0.0));
  }
  {
    const ScoreGrid g = grid({{0.1, 0.3}});
    out.push_back(expect_near("compactness, distances equal mu", compactness_loss(g, compute_centroids(g), h), 0.0));
  }
  {
    const ScoreGrid g = grid({{0.0, 0.4}});
    out.push_back(expect_near("compactness, distances 0.2", compactness_loss(g, compute_centroids(g), h), 0.2));
  }

  // Ordering.
  const std::vector<double> asc{0.1, 0.5, 0.9};
  out.push_back(expect_near("ordering, ascending centroids", ordering_loss(asc), 0.0));
  const std::vector<double> desc{0.9, 0.5, 0.2};
  out.push_back(expect_near("ordering, descending centroids", ordering_loss(desc), 1.4));
  const std::vector<double> tie{0.4, 0.4};
  out.push_back(expect_near("ordering, equal centroids", ordering_loss(tie), 0.0));

  // Full MLR loss.
  {
    // centroids all 0.2: separation 1.2, compactness 0.2, ordering 0
    const std::vector<ScoreGrid> one{grid({{0.0, 0.4}, {0.2}, {0.2}})};
    const LossReport r = mlr_loss(one, h);
    out.push_back(expect_near("mlr components 1.2 + 0.2 + 0.0", r.total, 1.4));
    out.push_back(expect_near("mlr separation component", r.component("sep"), 1.2));
    out.push_back(expect_near("mlr compactness component", r.component("com"), 0.2));
    const std::vector<ScoreGrid> two{one[0], one[0]};
    out.push_back(expect_near("mlr batch of two identical examples", mlr_loss(two, h).total, r.total));
  }
  {
    const std::vector<ScoreGrid> clustered{grid({{0.05, 0.05, 0.05}, {0.5, 0.5, 0.5}, {0.95, 0.95, 0.95}})};
    out.push_back(expect_near("mlr well-separated ascending grid", mlr_loss(clustered, h).total, 0.0));
  }

  // MSE.
  out.push_back(expect_near("mse, target 1.0 predicted 0.6", mse_loss(0.6, 1.0), 0.16));
  out.push_back(expect_near("mse, exact prediction", mse_loss(0.37, 0.37), 0.0));
  out.push_back(expect_near("mse symmetry", mse_loss(0.2, 0.9) - mse_loss(0.9, 0.2), 0.0));

  // KD.
  {
    std::mt19937_64 rng(11);
    const ForwardTrace teacher = make_trace(2, 5, 4, 2, 0.0, &rng);
    const ForwardTrace clone = teacher;
    out.push_back(expect_near("kd, student is a clone", kd_loss({&teacher, &clone}), 0.0));

    ForwardTrace shifted = teacher;
    shifted.layer_outputs.back()(0, 0) += 0.3;
    shifted.logit += 0.3;
    out.push_back(expect_near("kd, prediction layer differs by 0.3", kd_loss({&teacher, &shifted}), 0.09));

    const KdOptions raw{false, false};
    const double eps = 0.05;
    ForwardTrace poked = teacher;
    poked.attention[1][0](2, 3) += eps;
    out.push_back(expect_near("kd, one attention entry moved by eps", kd_loss({&teacher, &poked}, raw), eps * eps));

    // mse 0.16 (score 0.6, target 1.0) and kd 0.09
    shifted.score = 0.6;
    const std::vector<KdItem> batch{{{&teacher, &shifted}, 1.0}};
    out.push_back(expect_near("kd-mse total for (0.16, 0.09, 1, 5)", kd_mse_loss(batch, KdHyper{1.0, 5.0}).total, 0.61));

    ForwardTrace s2 = teacher;
    s2.score = 0.3;
    const std::vector<KdItem> pair{{{&teacher, &shifted}, 1.0}, {{&teacher, &s2}, 0.5}};
    out.push_back(expect_near("kd-mse with beta 0 is the batch-mean mse",
                              kd_mse_loss(pair, KdHyper{1.0, 0.0}).total, (0.16 + 0.04) / 2.0));
    const std::vector<KdItem> same{{{&teacher, &clone}, 0.9}, {{&teacher, &clone}, 0.1}};
    out.push_back(expect_near("kd-mse with alpha 0 and a cloned student", kd_mse_loss(same, KdHyper{0.0, 5.0}).total, 0.0));
    const double kd5 = kd_mse_loss(batch, KdHyper{1.0, 5.0}).component("kd");
    const double kd10 = kd_mse_loss(batch, KdHyper{1.0, 10.0}).component("kd");
    out.push_back(expect_near("doubling beta doubles the kd component", kd10, 2.0 * kd5));
  }

  // BCE.
  {
    const TwoLevelView half{{0.5, 0.5}, {0.5, 0.5, 0.5}};
    out.push_back(expect_near("bce at 0.5", bce_loss(half), std::log(2.0)));
    const double e = 1e-9;
    const TwoLevelView perfect{{1.0 - e, 1.0 - e}, {e, e}};
    out.push_back(expect_near("bce near-perfect scores", bce_loss(perfect), 0.0));
    const TwoLevelView a{{0.8, 0.7}, {0.4, 0.1}};
    const TwoLevelView b{{0.6, 0.9}, {0.2, 0.3}};  // 1 - s of a, roles swapped
    out.push_back(expect_near("bce symmetric swap", bce_loss(a), bce_loss(b)));
  }

  // Margin ranking.
  out.push_back(expect_near("ranking, gaps exceed margin", margin_ranking_loss({{0.9, 0.95}, {0.1, 0.5}}, 0.3), 0.0));
  out.push_back(expect_near("ranking, 0.6 vs 0.5", margin_ranking_loss({{0.6}, {0.5}}, 0.3), 0.2));
  out.push_back(expect_near("ranking, equal scores", margin_ranking_loss({{0.4, 0.4}, {0.4}}, 0.3), 0.3));

  // SupCon.
  {
    const FeatureGrid f = feature_grid({{{1, 0}, {1, 0}}, {{0, 1}, {0, 1}}});
    const double want = -std::log(std::exp(1.0) / (std::exp(1.0) + 2.0));
    out.push_back(expect_near("supcon, orthogonal levels at tau 1", supcon_loss(f, 1.0), want));
    const FeatureGrid same = feature_grid({{{1, 2, 3}, {1, 2, 3}, {1, 2, 3}}, {{1, 2, 3}, {1, 2, 3}, {1, 2, 3}}});
    out.push_back(expect_near("supcon, identical features", supcon_loss(same, 0.5), supcon(same, 0.5)));
    out.push_back(expect_near("supcon, identical features is ln(n - 1)", supcon_loss(same, 0.5), std::log(5.0)));
    const FeatureGrid mixed = feature_grid({{{1, 0.2}, {0.9, -0.1}}, {{-0.3, 1}, {0.1, 0.8}, {0.5, 0.5}}});
    out.push_back(expect_near("supcon, large temperature limit", supcon_loss(mixed, 1e6), std::log(4.0), 1e-5));
  }

  // FAT.
  {
    const FeatureGrid apart = feature_grid({{{0, 0}, {0, 0}}, {{3, 0}, {3, 0}}});
    out.push_back(expect_near("fat, anchors at own far centroids", fat_loss(apart, 0.5), 0.0));
    const FeatureGrid line = feature_grid({{{0}}, {{1}}});
    out.push_back(expect_near("fat, 1-D centroids 0 and 1", fat_loss(line, 0.5), 0.0));
    // both centroids sit at 0.5, so every anchor is equidistant from its own
    // and the other centroid
    const FeatureGrid eq = feature_grid({{{0.5}}, {{0.0}, {1.0}}});
    const double per_anchor = fat_loss(eq, 0.5);
    out.push_back(expect_near("fat, equidistant anchors contribute the margin", per_anchor, 3 * 0.5));
  }

  // Vanilla MLR.
  out.push_back(expect_near("vanilla mlr, gaps exceed margin", vanilla_mlr_loss(grid({{0.05, 0.1}, {0.45, 0.5}, {0.85, 0.9}}), 0.3), 0.0));
  out.push_back(expect_near("vanilla mlr, L=2 K=1", vanilla_mlr_loss(grid({{0.5}, {0.6}}), 0.3), 0.2));
  out.push_back(expect_near("vanilla mlr, uniform scores", vanilla_mlr_loss(grid({{0.4, 0.4}, {0.4}, {0.4, 0.4}}), 0.3), 0.3));
  out.push_back(expect_near("vanilla mlr equals ranking for L=2 K=1",
                            vanilla_mlr_loss(grid({{0.35}, {0.5}}), 0.3), margin_ranking_loss({{0.5}, {0.35}}, 0.3)));
  return out;
}

// ---------------------------------------------------------------------------

std::vector<CheckResult> gradient_checks(int configs_per_loss, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> levels_d(2, 4), slots_d(1, 5);
  const auto uniform = [&](double a, double b) { return a + (b - a) * unit(rng); };
  const auto random_grid = [&](int L, int K) {
    ScoreGrid g;
    for (int j = 0; j < L; ++j) {
      auto& level = g.levels.emplace_back();
      for (int k = 0; k < K; ++k) level.push_back(uniform(0.02, 0.98));
    }
    return g;
  };
  const auto random_features = [&](int L, int K, int dim) {
    FeatureGrid f;
    std::normal_distribution<double> g(0.0, 1.0);
    for (int j = 0; j < L; ++j) {
      auto& level = f.levels.emplace_back();
      for (int k = 0; k < K; ++k) {
        Vector v(dim);
        for (int d = 0; d < dim; ++d) v(d) = g(rng);
        level.push_back(v);
      }
    }
    return f;
  };

  std::vector<CheckResult> out;

  // MLR over a batch of two grids with random ablation switches.
  {
    GradTally t{"mlr_loss"};
    while (t.configs < configs_per_loss) {
      const MlrHyper h{uniform(0.1, 0.5), uniform(0.02, 0.2)};
      const MlrTerms terms{unit(rng) < 0.8, unit(rng) < 0.8, unit(rng) < 0.8};
      std::vector<ScoreGrid> batch{random_grid(levels_d(rng), slots_d(rng)), random_grid(levels_d(rng), slots_d(rng))};
      if (mlr_kink_distance(batch[0], h) < kKinkGap || mlr_kink_distance(batch[1], h) < kKinkGap) continue;
      std::vector<ScoreGrid> grads;
      mlr_loss(batch, h, terms, &grads);
      const auto numeric = central_difference(
          [&](const std::vector<double>& x) { return mlr_loss(unflatten(batch, x), h, terms).total; }, flatten(batch));
      t.add(flatten(grads), numeric);
    }
    out.push_back(t.result());
  }

  // KD-MSE over a batch of two trace pairs.
  {
    GradTally t{"kd_mse_loss"};
    std::uniform_int_distribution<int> layers_d(1, 2), seq_d(3, 6);
    while (t.configs < configs_per_loss) {
      const int T = layers_d(rng), seq = seq_d(rng);
      const KdHyper hyper{uniform(0.0, 2.0), uniform(0.5, 6.0)};
      const KdOptions opts{unit(rng) < 0.5, unit(rng) < 0.3};
      std::vector<ForwardTrace> teachers, students;
      std::vector<double> targets;
      for (int i = 0; i < 2; ++i) {
        teachers.push_back(make_trace(T, seq, 4, 2, 0.0, &rng));
        students.push_back(make_trace(T, seq, 4, 2, 0.0, &rng));
        if (unit(rng) < 0.5) {
          teachers.back().attention_mask.back() = 0;
          students.back().attention_mask.back() = 0;
        }
        students.back().score = uniform(0.05, 0.95);
        teachers.back().score = uniform(0.05, 0.95);
        targets.push_back(uniform(0.0, 1.0));
      }
      const auto loss_at = [&](const std::vector<ForwardTrace>& s, std::vector<TraceGradient>* g) {
        std::vector<KdItem> batch;
        for (std::size_t i = 0; i < s.size(); ++i) batch.push_back({{&teachers[i], &s[i]}, targets[i]});
        return kd_mse_loss(batch, hyper, opts, g).total;
      };
      std::vector<TraceGradient> grads;
      loss_at(students, &grads);
      std::vector<double> x, analytic;
      for (std::size_t i = 0; i < students.size(); ++i) {
        const auto xs = flatten(students[i]);
        const auto gs = flatten(grads[i]);
        x.insert(x.end(), xs.begin(), xs.end());
        analytic.insert(analytic.end(), gs.begin(), gs.end());
      }
      const auto numeric = central_difference(
          [&](const std::vector<double>& v) {
            std::vector<ForwardTrace> s = students;
            std::size_t i = 0;
            for (auto& tr : s) i = unflatten_into(tr, v, i);
            return loss_at(s, nullptr);
          },
          x);
      t.add(analytic, numeric);
    }
    out.push_back(t.result());
  }

  // BCE and margin ranking on two-level views.
  {
    GradTally bce{"bce_loss"}, rank{"margin_ranking_loss"};
    while (rank.configs < configs_per_loss) {
      const TwoLevelView view = TwoLevelView::from(random_grid(levels_d(rng), slots_d(rng)));
      const double margin = uniform(0.1, 0.5);
      std::vector<double> x = view.positives;
      x.insert(x.end(), view.negatives.begin(), view.negatives.end());
      const auto split = [&](const std::vector<double>& v) {
        TwoLevelView w;
        w.positives.assign(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(view.positives.size()));
        w.negatives.assign(v.begin() + static_cast<std::ptrdiff_t>(view.positives.size()), v.end());
        return w;
      };
      const auto join = [](const TwoLevelView& g) {
        std::vector<double> v = g.positives;
        v.insert(v.end(), g.negatives.begin(), g.negatives.end());
        return v;
      };
      if (bce.configs < configs_per_loss) {
        TwoLevelView g;
        bce_loss(view, &g);
        bce.add(join(g), central_difference([&](const std::vector<double>& v) { return bce_loss(split(v)); }, x));
      }
      double gap = 1e9;
      for (double p : view.positives)
        for (double n : view.negatives) gap = std::min(gap, std::fabs(margin - (p - n)));
      if (gap < kKinkGap) continue;
      TwoLevelView g;
      margin_ranking_loss(view, margin, &g);
      rank.add(join(g),
               central_difference([&](const std::vector<double>& v) { return margin_ranking_loss(split(v), margin); }, x));
    }
    out.push_back(bce.result());
    out.push_back(rank.result());
  }

  // SupCon.
  {
    GradTally t{"supcon_loss"};
    std::uniform_int_distribution<int> k_d(2, 3), l_d(2, 3);
    while (t.configs < configs_per_loss) {
      const FeatureGrid f = random_features(l_d(rng), k_d(rng), 3);
      const double tau = uniform(0.1, 1.0);
      FeatureGrid g;
      supcon_loss(f, tau, &g);
      t.add(flatten(g), central_difference([&](const std::vector<double>& x) { return supcon_loss(unflatten(f, x), tau); },
                                           flatten(f)));
    }
    out.push_back(t.result());
  }

  // FAT.
  {
    GradTally t{"fat_loss"};
    std::uniform_int_distribution<int> k_d(1, 4), l_d(2, 4);
    while (t.configs < configs_per_loss) {
      const FeatureGrid f = random_features(l_d(rng), k_d(rng), 3);
      const double margin = uniform(0.2, 1.0);
      if (fat_kink_distance(f, margin) < kKinkGap) continue;
      FeatureGrid g;
      fat_loss(f, margin, &g);
      t.add(flatten(g), central_difference([&](const std::vector<double>& x) { return fat_loss(unflatten(f, x), margin); },
                                           flatten(f)));
    }
    out.push_back(t.result());
  }

  // Vanilla MLR.
  {
    GradTally t{"vanilla_mlr_loss"};
    while (t.configs < configs_per_loss) {
      const std::vector<ScoreGrid> one{random_grid(levels_d(rng), slots_d(rng))};
      const double margin = uniform(0.1, 0.5);
      double gap = 1e9;
      for (std::size_t j = 0; j < one[0].levels.size(); ++j)
        for (std::size_t l = j + 1; l < one[0].levels.size(); ++l)
          for (double a : one[0].levels[j])
            for (double b : one[0].levels[l]) gap = std::min(gap, std::fabs(margin - (b - a)));
      if (gap < kKinkGap) continue;
      ScoreGrid g;
      vanilla_mlr_loss(one[0], margin, &g);
      t.add(flatten(std::vector<ScoreGrid>{g}),
            central_difference(
                [&](const std::vector<double>& x) { return vanilla_mlr_loss(unflatten(one, x)[0], margin); },
                flatten(one)));
    }
    out.push_back(t.result());
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<CheckResult> correlation_checks(int pairs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> n_d(3, 50), tie_d(0, 4);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst[3] = {0.0, 0.0, 0.0};
  int done = 0, with_ties = 0;
  while (done < pairs) {
    const int n = n_d(rng);
    const bool ties = done % 2 == 1;
    std::vector<double> x(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      x[static_cast<std::size_t>(i)] = ties ? tie_d(rng) : g(rng);
      y[static_cast<std::size_t>(i)] = ties ? tie_d(rng) : g(rng) + 0.5 * x[static_cast<std::size_t>(i)];
    }
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; }) ||
        std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) {
      continue;
    }
    worst[0] = std::max(worst[0], std::fabs(correlate(x, y, CorrelationMethod::pearson).coefficient - pearson(x, y)));
    worst[1] = std::max(worst[1], std::fabs(correlate(x, y, CorrelationMethod::spearman).coefficient - spearman(x, y)));
    worst[2] = std::max(worst[2], std::fabs(correlate(x, y, CorrelationMethod::kendall).coefficient - kendall_tau_b(x, y)));
    ++done;
    if (ties) ++with_ties;
  }
  std::vector<CheckResult> out;
  const char* names[3] = {"pearson", "spearman", "kendall"};
  for (int m = 0; m < 3; ++m) {
    out.push_back({std::string("correlation ") + names[m] + " vs brute force", worst[m] <= kCorrTol,
                   std::to_string(done) + " pairs (" + std::to_string(with_ties) + " with ties), worst |diff| " +
                       fmt("%.3g", worst[m])});
  }
  const std::vector<double> x{1, 2, 3, 4}, y{1, 3, 2, 4};
  const double tau = correlate(x, y, CorrelationMethod::kendall).coefficient;
  out.push_back({"kendall worked example is exactly 2/3", tau == 2.0 / 3.0, fmt("got %.17g", tau)});
  return out;
}

bool report(std::span<const CheckResult> results, std::ostream& out) {
  bool all = true;
  for (const auto& r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    all = all && r.passed;
  }
  return all;
}

bool run_selftest(std::ostream& out, std::uint64_t seed) {
  bool ok = true;
  out << "# loss values\n";
  ok = report(loss_value_checks(), out) && ok;
  out << "# gradients\n";
  ok = report(gradient_checks(100, seed), out) && ok;
  out << "# correlations\n";
  ok = report(correlation_checks(200, seed + 1), out) && ok;
  return ok;
}

}  // namespace dcm::oracle
