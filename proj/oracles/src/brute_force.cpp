#include "dcm/oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace dcm::oracle {

double pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double cov = 0.0, vx = 0.0, vy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (x[i] - mx) * (y[i] - my);
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
  }
  return cov / std::sqrt(vx * vy);
}

std::vector<double> counting_ranks(std::span<const double> v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0.0, equal = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (v[j] < v[i]) less += 1.0;
      if (v[j] == v[i]) equal += 1.0;
    }
    out[i] = 1.0 + less + (equal - 1.0) / 2.0;
  }
  return out;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  const auto rx = counting_ranks(x);
  const auto ry = counting_ranks(y);
  return pearson(rx, ry);
}

double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  long concordant = 0, discordant = 0, tied_x_only = 0, tied_y_only = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx == 0.0 && dy == 0.0) continue;
      if (dx == 0.0) {
        ++tied_x_only;
      } else if (dy == 0.0) {
        ++tied_y_only;
      } else if ((dx > 0) == (dy > 0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const double a = static_cast<double>(concordant + discordant + tied_y_only);
  const double b = static_cast<double>(concordant + discordant + tied_x_only);
  return static_cast<double>(concordant - discordant) / std::sqrt(a * b);
}

EigenPairs jacobi_eigen(const Matrix& symmetric, double tol, int max_sweeps) {
  const Index n = symmetric.rows();
  if (n != symmetric.cols()) throw std::invalid_argument("jacobi_eigen: matrix is not square");
  Matrix a = symmetric;
  Matrix v = Matrix::Identity(n, n);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= tol * tol * std::max(1.0, a.squaredNorm())) break;
    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  // selection sort, descending
  EigenPairs out{a.diagonal(), v};
  for (Index i = 0; i < n; ++i) {
    Index best = i;
    for (Index j = i + 1; j < n; ++j)
      if (out.values(j) > out.values(best)) best = j;
    if (best != i) {
      std::swap(out.values(i), out.values(best));
      out.vectors.col(i).swap(out.vectors.col(best));
    }
  }
  return out;
}

Matrix pca_coordinates(const Matrix& features) {
  const Index n = features.rows();
  const Index d = features.cols();
  RowVector mean = RowVector::Zero(d);
  for (Index i = 0; i < n; ++i) mean += features.row(i);
  mean /= static_cast<double>(n);
  Matrix centered(n, d);
  for (Index i = 0; i < n; ++i) centered.row(i) = features.row(i) - mean;
  Matrix cov = Matrix::Zero(d, d);
  for (Index i = 0; i < n; ++i)
    for (Index a = 0; a < d; ++a)
      for (Index b = 0; b < d; ++b) cov(a, b) += centered(i, a) * centered(i, b);
  cov /= static_cast<double>(n - 1);
  const EigenPairs e = jacobi_eigen(cov);
  Matrix axes(d, 2);
  for (Index c = 0; c < 2; ++c) {
    Vector axis = e.vectors.col(c);
    Index arg = 0;
    for (Index i = 1; i < d; ++i)
      if (std::fabs(axis(i)) > std::fabs(axis(arg))) arg = i;
    if (axis(arg) < 0) axis = -axis;
    axes.col(c) = axis;
  }
  return centered * axes;
}

double supcon(const FeatureGrid& features, double temperature) {
  std::vector<Vector> z;
  std::vector<std::size_t> label;
  for (std::size_t j = 0; j < features.levels.size(); ++j)
    for (const auto& f : features.levels[j]) {
      z.push_back(f / f.norm());
      label.push_back(j);
    }
  double total = 0.0;
  int anchors = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    double anchor_sum = 0.0;
    int positives = 0;
    for (std::size_t p = 0; p < z.size(); ++p) {
      if (p == i || label[p] != label[i]) continue;
      double denom = 0.0;
      for (std::size_t a = 0; a < z.size(); ++a)
        if (a != i) denom += std::exp(z[i].dot(z[a]) / temperature);
      anchor_sum += -std::log(std::exp(z[i].dot(z[p]) / temperature) / denom);
      ++positives;
    }
    if (positives == 0) continue;
    total += anchor_sum / positives;
    ++anchors;
  }
  return total / anchors;
}

std::vector<double> central_difference(const ScalarFn& f, std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double up = f(x);
    x[i] = orig - h;
    const double down = f(x);
    x[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double relative_error(std::span<const double> a, std::span<const double> b) {
  double na = 0.0, nb = 0.0, nd = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i] * a[i];
    nb += b[i] * b[i];
    nd += (a[i] - b[i]) * (a[i] - b[i]);
  }
  const double scale = std::sqrt(std::max(na, nb));
  if (scale < 1e-12) return 0.0;
  return std::sqrt(nd) / scale;
}

}  // namespace dcm::oracle
