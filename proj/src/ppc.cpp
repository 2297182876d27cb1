#include "bayesd/ppc.hpp"

#include <numeric>
#include <random>

#include "bayesd/error.hpp"
#include "bayesd/fit.hpp"
#include "bayesd/io.hpp"
#include "bayesd/stats.hpp"

namespace bayesd {

namespace {

Eigen::VectorXd draw_row(const Draws& draws, std::size_t flat) {
  const auto per = static_cast<std::size_t>(draws.n_iterations());
  return draws.chains[flat / per].row(static_cast<Eigen::Index>(flat % per)).transpose();
}

double sd_of(const Eigen::VectorXd& v) {
  return stats::sd(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

}  // namespace

PpcReport pp_density(const Fit& fit, std::size_t m, std::uint64_t seed) {
  const Model& model = *fit.model;
  const Draws& draws = fit.draws;
  PpcReport out;
  out.observed = model.frame().y;
  const std::size_t total = draws.total();
  if (total == 0) throw ValidationError("posterior predictive check needs draws");
  if (m == 0) throw ValidationError("posterior predictive check needs at least one replicate");
  if (m > total) {
    out.warnings.push_back("requested " + std::to_string(m) + " replicates but only " + std::to_string(total) +
                           " draws exist; using " + std::to_string(total));
    m = total;
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, total - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(m);
  out.draw_indices = idx;

  const Eigen::Index n = out.observed.size();
  const double obs_mean = out.observed.mean(), obs_sd = sd_of(out.observed);
  std::normal_distribution<double> normal(0, 1);
  std::vector<double> pooled;
  pooled.reserve(m * static_cast<std::size_t>(n));
  std::size_t above_mean = 0, above_sd = 0;
  for (const std::size_t k : idx) {
    const Eigen::VectorXd row = draw_row(draws, k);
    const auto pred = model.predict(row);
    const double nu = model.nu_of(row);
    Eigen::VectorXd y(n);
    if (std::isfinite(nu)) {
      std::student_t_distribution<double> t(nu);
      for (Eigen::Index i = 0; i < n; ++i) y[i] = pred.eta[i] + std::exp(pred.log_sigma[i]) * t(rng);
    } else {
      for (Eigen::Index i = 0; i < n; ++i) y[i] = pred.eta[i] + std::exp(pred.log_sigma[i]) * normal(rng);
    }
    above_mean += y.mean() >= obs_mean ? 1 : 0;
    above_sd += sd_of(y) >= obs_sd ? 1 : 0;
    pooled.insert(pooled.end(), y.data(), y.data() + n);
    out.replicates.push_back(std::move(y));
  }
  out.ks = stats::ks_distance(std::span<const double>(out.observed.data(), static_cast<std::size_t>(n)), pooled);
  out.p_mean = static_cast<double>(above_mean) / static_cast<double>(m);
  out.p_sd = static_cast<double>(above_sd) / static_cast<double>(m);
  return out;
}

PpcReport pp_error(const Fit& fit) {
  const Model& model = *fit.model;
  const Draws& draws = fit.draws;
  PpcReport out;
  out.observed = model.frame().y;
  const std::size_t total = draws.total();
  if (total == 0) throw ValidationError("posterior predictive check needs draws");
  out.y_pred = Eigen::VectorXd::Zero(out.observed.size());
  for (std::size_t k = 0; k < total; ++k) out.y_pred += model.predict(draw_row(draws, k)).eta;
  out.y_pred /= static_cast<double>(total);
  out.residual = out.observed - out.y_pred;
  const Eigen::VectorXd abs_res = out.residual.cwiseAbs();
  const auto n = static_cast<std::size_t>(abs_res.size());
  out.abs_residual_correlation =
      stats::correlation(std::span<const double>(abs_res.data(), n), std::span<const double>(out.y_pred.data(), n));
  if (std::isnan(out.abs_residual_correlation))
    out.warnings.push_back("residual correlation undefined: residuals or predictions are constant");
  return out;
}

void write_ppc_density_csv(std::ostream& out, const PpcReport& report) {
  out << "source,obs_index,value\n";
  for (Eigen::Index i = 0; i < report.observed.size(); ++i)
    out << "y," << (i + 1) << ',' << io::format_double(report.observed[i]) << '\n';
  for (std::size_t k = 0; k < report.replicates.size(); ++k)
    for (Eigen::Index i = 0; i < report.replicates[k].size(); ++i)
      out << "yrep_" << (k + 1) << ',' << (i + 1) << ',' << io::format_double(report.replicates[k][i]) << '\n';
}

void write_ppc_error_csv(std::ostream& out, const PpcReport& report) {
  out << "y_pred,error\n";
  for (Eigen::Index i = 0; i < report.y_pred.size(); ++i)
    out << io::format_double(report.y_pred[i]) << ',' << io::format_double(report.residual[i]) << '\n';
}

}  // namespace bayesd
