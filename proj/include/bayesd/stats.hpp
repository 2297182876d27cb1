#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace bayesd::stats {

template <typename Scalar>
Scalar mean(std::span<const Scalar> x) {
  if (x.empty()) return std::numeric_limits<Scalar>::quiet_NaN();
  Scalar s = 0;
  for (Scalar v : x) s += v;
  return s / static_cast<Scalar>(x.size());
}

// Two-pass sample variance with n - 1 denominator.
template <typename Scalar>
Scalar variance(std::span<const Scalar> x) {
  if (x.size() < 2) return std::numeric_limits<Scalar>::quiet_NaN();
  const Scalar m = mean(x);
  Scalar ss = 0, comp = 0;
  for (Scalar v : x) {
    ss += (v - m) * (v - m);
    comp += v - m;
  }
  const auto n = static_cast<Scalar>(x.size());
  return (ss - comp * comp / n) / (n - 1);
}

template <typename Scalar>
Scalar sd(std::span<const Scalar> x) {
  return std::sqrt(variance(x));
}

// Hyndman-Fan type 7 quantile of an already sorted sample.
template <typename Scalar>
Scalar quantile_sorted(std::span<const Scalar> sorted, double p) {
  if (sorted.empty()) return std::numeric_limits<Scalar>::quiet_NaN();
  if (p <= 0) return sorted.front();
  if (p >= 1) return sorted.back();
  const double h = (static_cast<double>(sorted.size()) - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const Scalar frac = static_cast<Scalar>(h - static_cast<double>(lo));
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

template <typename Scalar>
Scalar quantile(std::span<const Scalar> x, double p) {
  std::vector<Scalar> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  return quantile_sorted<Scalar>(s, p);
}

template <typename Scalar>
Scalar median(std::span<const Scalar> x) {
  return quantile(x, 0.5);
}

// Median absolute deviation scaled by 1.4826 for consistency with the normal sd.
template <typename Scalar>
Scalar mad(std::span<const Scalar> x) {
  const Scalar med = median(x);
  std::vector<Scalar> dev(x.size());
  std::transform(x.begin(), x.end(), dev.begin(), [med](Scalar v) { return std::abs(v - med); });
  return Scalar(1.4826) * median<Scalar>(dev);
}

template <typename Scalar>
Scalar correlation(std::span<const Scalar> x, std::span<const Scalar> y) {
  if (x.size() != y.size()) throw std::invalid_argument("correlation: length mismatch");
  const Scalar mx = mean(x), my = mean(y);
  Scalar sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Two-sample Kolmogorov-Smirnov distance sup |F_a - F_b|.
double ks_distance(std::span<const double> a, std::span<const double> b);

struct Interval {
  double low;
  double high;
};

// Equal-tailed interval with probability mass prob (type 7 quantiles).
Interval equal_tailed(std::span<const double> x, double prob);

// Shortest interval containing ceil(prob * n) draws.
Interval highest_density(std::span<const double> x, double prob);

}  // namespace bayesd::stats
