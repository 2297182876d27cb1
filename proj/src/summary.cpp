#include "bayesd/summary.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

#include "bayesd/error.hpp"
#include "bayesd/fit.hpp"
#include "bayesd/io.hpp"

namespace bayesd {

const SummaryRow& SummaryTable::at(const std::string& parameter) const {
  for (const auto& r : rows)
    if (r.parameter == parameter) return r;
  throw Error("parameter '" + parameter + "' is not in the summary");
}

SummaryRow summarize_values(const std::string& name, std::span<const double> values, const SummaryOptions& options) {
  if (values.empty()) throw ValidationError("no draws to summarize for '" + name + "'");
  if (!(options.prob > 0 && options.prob < 1)) throw ValidationError("interval probability must lie in (0, 1)");
  SummaryRow row;
  row.parameter = name;
  row.estimate = options.median ? stats::median(values) : stats::mean(values);
  row.error = values.size() > 1 ? stats::sd(values) : 0;
  const stats::Interval ci =
      options.hpd ? stats::highest_density(values, options.prob) : stats::equal_tailed(values, options.prob);
  row.ci_low = ci.low;
  row.ci_high = ci.high;
  return row;
}

SummaryTable summarize(const Draws& draws, const SummaryOptions& options) {
  if (draws.total() == 0) throw ValidationError("no draws to summarize");
  SummaryTable table;
  table.prob = options.prob;
  std::vector<Eigen::Index> columns;
  if (options.parameters.empty()) {
    for (Eigen::Index j = 0; j < draws.n_parameters(); ++j)
      if (draws.names[static_cast<std::size_t>(j)].rfind("r_", 0) != 0) columns.push_back(j);
  } else {
    for (const auto& p : options.parameters) columns.push_back(draws.index_of(p));
  }
  for (const Eigen::Index j : columns) {
    const std::vector<double> x = draws.column(j);
    table.rows.push_back(summarize_values(draws.names[static_cast<std::size_t>(j)], x, options));
  }
  return table;
}

void write_text(std::ostream& out, const SummaryTable& table) {
  std::size_t width = 9;
  for (const auto& r : table.rows) width = std::max(width, r.parameter.size());
  const std::string ci_head = io::format_fixed(100 * table.prob, 0) + "%-CI";
  out << std::left << std::setw(static_cast<int>(width)) << "Parameter" << std::right << std::setw(10) << "Estimate"
      << std::setw(8) << "Error" << "  " << ci_head << '\n';
  for (const auto& r : table.rows) {
    out << std::left << std::setw(static_cast<int>(width)) << r.parameter << std::right << std::setw(10)
        << io::format_fixed(r.estimate, 2) << std::setw(8) << io::format_fixed(r.error, 2) << "  ["
        << io::format_fixed(r.ci_low, 2) << ", " << io::format_fixed(r.ci_high, 2) << "]\n";
  }
}

void write_csv(std::ostream& out, const SummaryTable& table) {
  out << "parameter,estimate,error,ci_low,ci_high\n";
  for (const auto& r : table.rows)
    out << r.parameter << ',' << io::format_double(r.estimate) << ',' << io::format_double(r.error) << ','
        << io::format_double(r.ci_low) << ',' << io::format_double(r.ci_high) << '\n';
}

double icc_value(double tau, double sigma, double nu) {
  double resid = sigma * sigma;
  if (std::isfinite(nu)) {
    if (!(nu > 2)) return std::numeric_limits<double>::quiet_NaN();
    resid *= nu / (nu - 2);
  }
  const double t2 = tau * tau;
  if (t2 == 0) return 0;
  return t2 / (t2 + resid);
}

VarianceRatio variance_decomposition(const Fit& fit, double prob) {
  const Model& m = *fit.model;
  const auto& d = m.design();
  if (d.mean_random.size() != 1 || !d.sigma_random.empty() || d.mean_random.front().q() != 1 ||
      d.mean_random.front().inner.names().front() != "Intercept")
    throw DesignError("variance decomposition needs exactly one random intercept on the mean and none on sigma");
  if (d.sigma_coding.names() != std::vector<std::string>{"Intercept"})
    throw DesignError("variance decomposition needs an intercept-only sigma submodel");
  const std::string tau_name = "sd_" + d.mean_random.front().factor + "__Intercept";
  const auto tau = fit.draws.column(tau_name);
  const auto log_sigma = fit.draws.column("b_sigma_Intercept");
  const bool student = m.has_nu();
  const std::vector<double> nu = student ? fit.draws.column("nu") : std::vector<double>();
  VarianceRatio out;
  out.prob = prob;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    const double v = icc_value(tau[i], std::exp(log_sigma[i]), student ? nu[i] : INFINITY);
    if (std::isnan(v)) {
      ++out.excluded;
      continue;
    }
    out.draws.push_back(v);
  }
  if (out.draws.empty()) throw ValidationError("every draw has nu <= 2: residual variance undefined");
  out.median = stats::median<double>(out.draws);
  out.ci = stats::equal_tailed(out.draws, prob);
  return out;
}

}  // namespace bayesd
