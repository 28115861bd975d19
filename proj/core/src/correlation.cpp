#include "dcm/correlation.hpp"

#include "dcm/errors.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

namespace dcm {
namespace {

void check_inputs(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("correlate: inputs differ in length");
  if (x.size() < 3) throw ShapeError("correlate: at least 3 observations required");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw ShapeError("correlate: non-finite entry");
  }
}

[[noreturn]] void undefined() { throw CorrelationError("undefined correlation: an input has zero variance"); }

double pearson_coefficient(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) undefined();
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double t_test_p(double r, std::size_t n) {
  const double df = static_cast<double>(n) - 2.0;
  const double denom = 1.0 - r * r;
  if (denom <= 0.0) return 0.0;
  const double t = std::fabs(r) * std::sqrt(df / denom);
  boost::math::students_t dist(df);
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, t)), 0.0, 1.0);
}

/// Sum of f(t) over runs of equal values in a sorted sequence.
template <typename Key, typename F>
double tie_sum(const std::vector<std::size_t>& order, Key key, F f) {
  double s = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && key(order[j]) == key(order[i])) ++j;
    s += f(static_cast<double>(j - i));
    i = j;
  }
  return s;
}

/// Sorts idx[lo, hi) by y and returns the number of inversions.
std::uint64_t merge_count(std::vector<std::size_t>& idx, std::vector<std::size_t>& buf, std::size_t lo,
                          std::size_t hi, std::span<const double> y) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t swaps = merge_count(idx, buf, lo, mid, y) + merge_count(idx, buf, mid, hi, y);
  std::size_t a = lo, b = mid, o = lo;
  while (a < mid && b < hi) {
    if (y[idx[b]] < y[idx[a]]) {
      swaps += mid - a;
      buf[o++] = idx[b++];
    } else {
      buf[o++] = idx[a++];
    }
  }
  while (a < mid) buf[o++] = idx[a++];
  while (b < hi) buf[o++] = idx[b++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            idx.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

Correlation kendall(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return x[a] != x[b] ? x[a] < x[b] : y[a] < y[b];
  });

  const auto pairs = [](double t) { return t * (t - 1.0) / 2.0; };
  const double n0 = pairs(static_cast<double>(n));
  const double n1 = tie_sum(idx, [&](std::size_t i) { return x[i]; }, pairs);
  double n3 = 0.0;
  {
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i + 1;
      while (j < n && x[idx[j]] == x[idx[i]] && y[idx[j]] == y[idx[i]]) ++j;
      n3 += pairs(static_cast<double>(j - i));
      i = j;
    }
  }
  const double vx_tie = tie_sum(idx, [&](std::size_t i) { return x[i]; },
                                [](double t) { return t * (t - 1.0) * (2.0 * t + 5.0); });
  const double tx2 = tie_sum(idx, [&](std::size_t i) { return x[i]; },
                             [](double t) { return t * (t - 1.0) * (t - 2.0); });

  std::vector<std::size_t> buf(n);
  const double swaps = static_cast<double>(merge_count(idx, buf, 0, n, y));
  const double n2 = tie_sum(idx, [&](std::size_t i) { return y[i]; }, pairs);
  const double vy_tie = tie_sum(idx, [&](std::size_t i) { return y[i]; },
                                [](double t) { return t * (t - 1.0) * (2.0 * t + 5.0); });
  const double ty2 = tie_sum(idx, [&](std::size_t i) { return y[i]; },
                             [](double t) { return t * (t - 1.0) * (t - 2.0); });

  if (n1 == n0 || n2 == n0) undefined();
  // concordant - discordant, computed exactly on integers stored as doubles
  const double s = n0 - n1 - n2 + n3 - 2.0 * swaps;
  Correlation out;
  out.coefficient = std::clamp(s / std::sqrt((n0 - n1) * (n0 - n2)), -1.0, 1.0);

  const double nd = static_cast<double>(n);
  const double var = (nd * (nd - 1.0) * (2.0 * nd + 5.0) - vx_tie - vy_tie) / 18.0 +
                     (2.0 * n1) * (2.0 * n2) / (2.0 * nd * (nd - 1.0)) +
                     tx2 * ty2 / (9.0 * nd * (nd - 1.0) * (nd - 2.0));
  if (var <= 0.0) {
    out.p_value = s == 0.0 ? 1.0 : 0.0;
  } else {
    out.p_value = std::clamp(std::erfc(std::fabs(s) / std::sqrt(var) / std::sqrt(2.0)), 0.0, 1.0);
  }
  return out;
}

}  // namespace

std::string to_string(CorrelationMethod method) {
  switch (method) {
    case CorrelationMethod::pearson: return "pearson";
    case CorrelationMethod::spearman: return "spearman";
    case CorrelationMethod::kendall: return "kendall";
  }
  return "unknown";
}

CorrelationMethod parse_correlation_method(std::string_view text) {
  if (text == "pearson") return CorrelationMethod::pearson;
  if (text == "spearman") return CorrelationMethod::spearman;
  if (text == "kendall") return CorrelationMethod::kendall;
  throw ConfigError("unknown correlation method '" + std::string(text) + "'");
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[idx[j]] == values[idx[i]]) ++j;
    // positions i..j-1 hold ranks i+1..j
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[idx[k]] = r;
    i = j;
  }
  return ranks;
}

Correlation correlate(std::span<const double> x, std::span<const double> y, CorrelationMethod method) {
  check_inputs(x, y);
  switch (method) {
    case CorrelationMethod::pearson: {
      const double r = pearson_coefficient(x, y);
      return {r, t_test_p(r, x.size())};
    }
    case CorrelationMethod::spearman: {
      const auto rx = average_ranks(x);
      const auto ry = average_ranks(y);
      const double r = pearson_coefficient(rx, ry);
      return {r, t_test_p(r, x.size())};
    }
    case CorrelationMethod::kendall:
      return kendall(x, y);
  }
  throw ConfigError("unknown correlation method");
}

double CorrelationReport::coefficient(CorrelationMethod method) const {
  switch (method) {
    case CorrelationMethod::pearson: return pearson;
    case CorrelationMethod::spearman: return spearman;
    case CorrelationMethod::kendall: return kendall;
  }
  return 0.0;
}

double CorrelationReport::p_value(CorrelationMethod method) const {
  return p_values[static_cast<std::size_t>(method)];
}

CorrelationReport correlation_report(std::span<const double> x, std::span<const double> y) {
  CorrelationReport r;
  const Correlation p = correlate(x, y, CorrelationMethod::pearson);
  const Correlation s = correlate(x, y, CorrelationMethod::spearman);
  const Correlation k = correlate(x, y, CorrelationMethod::kendall);
  r.pearson = p.coefficient;
  r.spearman = s.coefficient;
  r.kendall = k.coefficient;
  r.average = (r.pearson + r.spearman + r.kendall) / 3.0;
  r.p_values = {p.p_value, s.p_value, k.p_value};
  r.n = static_cast<int>(x.size());
  return r;
}

}  // namespace dcm
