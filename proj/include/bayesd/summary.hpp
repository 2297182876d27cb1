#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "bayesd/nuts.hpp"
#include "bayesd/stats.hpp"

namespace bayesd {

struct Fit;

struct SummaryRow {
  std::string parameter;
  double estimate = 0;
  double error = 0;
  double ci_low = 0;
  double ci_high = 0;
};

struct SummaryOptions {
  double prob = 0.9;
  bool median = false;  // estimate = median instead of mean
  bool hpd = false;     // shortest interval instead of equal-tailed
  // Empty selects every parameter except the per-level random effects.
  std::vector<std::string> parameters;
};

struct SummaryTable {
  double prob = 0.9;
  std::vector<SummaryRow> rows;

  const SummaryRow& at(const std::string& parameter) const;
};

SummaryRow summarize_values(const std::string& name, std::span<const double> values, const SummaryOptions& options = {});
// Throws Error for names in options.parameters that are not in the draws.
SummaryTable summarize(const Draws& draws, const SummaryOptions& options = {});

void write_text(std::ostream& out, const SummaryTable& table);
// parameter,estimate,error,ci_low,ci_high
void write_csv(std::ostream& out, const SummaryTable& table);

struct VarianceRatio {
  double median = 0;
  stats::Interval ci{0, 0};
  double prob = 0.9;
  std::vector<double> draws;
  std::size_t excluded = 0;  // Student-t draws with nu <= 2
};

// Share of residual-plus-cluster variance due to a single cluster random
// intercept: tau^2 / (tau^2 + var_resid) with var_resid = sigma^2, times
// nu / (nu - 2) for Student-t residuals. Throws DesignError unless the model
// has exactly one group-level term, an intercept, on the mean and an
// intercept-only sigma submodel.
VarianceRatio variance_decomposition(const Fit& fit, double prob = 0.9);
double icc_value(double tau, double sigma, double nu);

}  // namespace bayesd
