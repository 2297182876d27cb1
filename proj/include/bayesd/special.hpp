#pragma once

#include <cmath>
#include <limits>
#include <numbers>

namespace bayesd::math {

inline double digamma(double x) {
  double result = 0;
  while (x < 6) {
    result -= 1 / x;
    x += 1;
  }
  const double f = 1 / (x * x);
  result += std::log(x) - 0.5 / x -
            f * (1.0 / 12 - f * (1.0 / 120 - f * (1.0 / 252 - f * (1.0 / 240 - f * (1.0 / 132)))));
  return result;
}

inline double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// Normalizing constant of a Student-t density with df degrees of freedom and unit scale.
inline double student_t_log_const(double df) {
  return std::lgamma(0.5 * (df + 1)) - std::lgamma(0.5 * df) - 0.5 * std::log(df * std::numbers::pi);
}

inline double student_t_log_const_ddf(double df) {
  return 0.5 * digamma(0.5 * (df + 1)) - 0.5 * digamma(0.5 * df) - 0.5 / df;
}

// Minimal forward-mode dual number; enough for the correlation transform.
struct Dual {
  double val = 0;
  double der = 0;

  Dual() = default;
  Dual(double v, double d = 0) : val(v), der(d) {}

  friend Dual operator+(Dual a, Dual b) { return {a.val + b.val, a.der + b.der}; }
  friend Dual operator-(Dual a, Dual b) { return {a.val - b.val, a.der - b.der}; }
  friend Dual operator*(Dual a, Dual b) { return {a.val * b.val, a.der * b.val + a.val * b.der}; }
  friend Dual operator/(Dual a, Dual b) {
    return {a.val / b.val, (a.der * b.val - a.val * b.der) / (b.val * b.val)};
  }
  Dual& operator+=(Dual b) { return *this = *this + b; }
  Dual& operator-=(Dual b) { return *this = *this - b; }
  Dual& operator*=(Dual b) { return *this = *this * b; }
};

inline Dual tanh(Dual a) {
  const double t = std::tanh(a.val);
  return {t, a.der * (1 - t * t)};
}
inline Dual sqrt(Dual a) {
  const double s = std::sqrt(a.val);
  return {s, a.der / (2 * s)};
}
inline Dual log(Dual a) { return {std::log(a.val), a.der / a.val}; }
inline Dual log1p(Dual a) { return {std::log1p(a.val), a.der / (1 + a.val)}; }

inline double value_of(double x) { return x; }
inline double value_of(Dual x) { return x.val; }

}  // namespace bayesd::math
