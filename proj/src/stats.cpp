#include "bayesd/stats.hpp"

namespace bayesd::stats {

double ks_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < sa.size() && j < sb.size()) {
    const double v = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == v) ++i;
    while (j < sb.size() && sb[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

Interval equal_tailed(std::span<const double> x, double prob) {
  if (!(prob > 0 && prob < 1)) throw std::invalid_argument("interval probability must lie in (0, 1)");
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  return {quantile_sorted<double>(s, (1 - prob) / 2), quantile_sorted<double>(s, (1 + prob) / 2)};
}

Interval highest_density(std::span<const double> x, double prob) {
  if (!(prob > 0 && prob < 1)) throw std::invalid_argument("interval probability must lie in (0, 1)");
  if (x.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  const auto n = s.size();
  const auto k = std::min(n, static_cast<std::size_t>(std::ceil(prob * static_cast<double>(n))));
  if (k <= 1) return {s.front(), s.front()};
  std::size_t best = 0;
  double width = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + k - 1 < n; ++i) {
    const double w = s[i + k - 1] - s[i];
    if (w < width) {
      width = w;
      best = i;
    }
  }
  return {s[best], s[best + k - 1]};
}

}  // namespace bayesd::stats
