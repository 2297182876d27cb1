#pragma once

#include <string>

#include "bayesd/design.hpp"
#include "bayesd/formula.hpp"

namespace bayesd {

struct Prior {
  enum class Kind { flat, normal, student_t };
  Kind kind = Kind::flat;
  double df = 3;
  double location = 0;
  double scale = 1;

  static Prior flat() { return {}; }
  static Prior normal(double location, double scale) { return {Kind::normal, 0, location, scale}; }
  static Prior student_t(double df, double location, double scale) { return {Kind::student_t, df, location, scale}; }

  // Log density (with normalizing constant) and its derivative at x. For the
  // random-effect SDs the density is folded at zero (half prior, location 0).
  double log_density(double x, double* dx = nullptr, bool half = false) const;
  std::string describe() const;

  friend bool operator==(const Prior&, const Prior&) = default;
};

struct PriorSpec {
  Prior beta = Prior::flat();
  Prior beta_sigma = Prior::student_t(3, 0, 2.5);
  Prior tau = Prior::student_t(3, 0, 2.5);  // half; scale set from the response
  double lkj_eta = 1;
  // (nu - 1) ~ Gamma(shape, rate)
  double nu_shape = 2;
  double nu_rate = 0.1;

  friend bool operator==(const PriorSpec&, const PriorSpec&) = default;
};

// Flat fixed mean effects, Student-t(3, 0, 2.5) log-sigma effects,
// half-Student-t(3, 0, 2.5 mad(y)) random-effect SDs, LKJ(1) correlations
// and Gamma(2, 0.1) on nu - 1.
PriorSpec default_priors(const ModelSpec& spec, const ModelFrame& frame);

}  // namespace bayesd
