#include "bayesd/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bayesd/error.hpp"
#include "bayesd/special.hpp"
#include "bayesd/stats.hpp"

namespace bayesd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Halves every chain; an odd middle draw is dropped.
Eigen::MatrixXd split_chains(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows() / 2;
  Eigen::MatrixXd out(n, 2 * x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    out.col(2 * c) = x.col(c).head(n);
    out.col(2 * c + 1) = x.col(c).tail(n);
  }
  return out;
}

bool is_constant(const Eigen::MatrixXd& x) {
  return x.size() == 0 || (x.array() == x(0, 0)).all();
}

double rhat_basic(const Eigen::MatrixXd& x) {
  const auto n = static_cast<double>(x.rows());
  const Eigen::Index m = x.cols();
  if (m < 2 || n < 2) return kNaN;
  Eigen::VectorXd means(m), vars(m);
  for (Eigen::Index c = 0; c < m; ++c) {
    means[c] = x.col(c).mean();
    vars[c] = is_constant(x.col(c)) ? 0.0 : (x.col(c).array() - means[c]).square().sum() / (n - 1);
  }
  const double W = vars.mean();
  const double B = n * (means.array() - means.mean()).square().sum() / static_cast<double>(m - 1);
  if (!(W > 0)) return B > 0 ? std::numeric_limits<double>::infinity() : kNaN;
  const double var_plus = (n - 1) / n * W + B / n;
  return std::sqrt(var_plus / W);
}

// Autocovariance by direct summation; chains here are at most a few thousand draws.
Eigen::VectorXd autocovariance(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  const Eigen::VectorXd d = x.array() - x.mean();
  Eigen::VectorXd acov(n);
  for (Eigen::Index lag = 0; lag < n; ++lag) acov[lag] = d.head(n - lag).dot(d.tail(n - lag)) / static_cast<double>(n);
  return acov;
}

double ess_of(const Eigen::MatrixXd& x) {
  const Eigen::Index m = x.cols();
  const Eigen::Index n = x.rows();
  if (n < 4 || is_constant(x)) return kNaN;
  Eigen::MatrixXd acov(n, m);
  Eigen::VectorXd means(m), vars(m);
  for (Eigen::Index c = 0; c < m; ++c) {
    acov.col(c) = autocovariance(x.col(c));
    means[c] = x.col(c).mean();
    vars[c] = acov(0, c) * static_cast<double>(n) / static_cast<double>(n - 1);
  }
  const double mean_var = vars.mean();
  double var_plus = mean_var * static_cast<double>(n - 1) / static_cast<double>(n);
  if (m > 1) var_plus += (means.array() - means.mean()).square().sum() / static_cast<double>(m - 1);
  if (!(var_plus > 0)) return kNaN;

  auto rho = [&](Eigen::Index lag) { return 1 - (mean_var - acov.row(lag).mean()) / var_plus; };
  Eigen::VectorXd rho_hat = Eigen::VectorXd::Zero(n);
  rho_hat[0] = 1;
  double rho_even = 1, rho_odd = rho(1);
  rho_hat[1] = rho_odd;
  Eigen::Index t = 1;
  // Geyer initial positive sequence.
  while (t < n - 4 && rho_even + rho_odd > 0) {
    rho_even = rho(t + 1);
    rho_odd = rho(t + 2);
    if (rho_even + rho_odd >= 0) {
      rho_hat[t + 1] = rho_even;
      rho_hat[t + 2] = rho_odd;
    }
    t += 2;
  }
  const Eigen::Index max_t = t;
  if (rho_even > 0) rho_hat[max_t + 1] = rho_even;
  // Geyer initial monotone sequence.
  t = 1;
  while (t <= max_t - 2) {
    if (rho_hat[t + 1] + rho_hat[t + 2] > rho_hat[t - 1] + rho_hat[t]) {
      rho_hat[t + 1] = (rho_hat[t - 1] + rho_hat[t]) / 2;
      rho_hat[t + 2] = rho_hat[t + 1];
    }
    t += 2;
  }
  const double total = static_cast<double>(n * m);
  double tau_hat = -1 + 2 * rho_hat.head(max_t).sum() + rho_hat[max_t];
  tau_hat = std::max(tau_hat, 1 / std::log10(total));
  return std::min(total / tau_hat, total);
}

// Inverse standard normal CDF (Acklam) polished by one Halley step.
double normal_quantile(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                             1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                             6.680131188771972e+01,  -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                             -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                             3.754408661907416e+00};
  double x;
  if (p < 0.02425) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p > 1 - 0.02425) {
    const double q = std::sqrt(-2 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2 * M_PI) * std::exp(x * x / 2);
  return x - u / (1 + x * u / 2);
}

Eigen::MatrixXd indicator(const Eigen::MatrixXd& x, double cut) {
  return (x.array() <= cut).cast<double>().matrix();
}

}  // namespace

Eigen::MatrixXd rank_normalize(const Eigen::MatrixXd& draws) {
  const Eigen::Index total = draws.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), 0);
  const double* data = draws.data();
  std::stable_sort(order.begin(), order.end(), [data](Eigen::Index a, Eigen::Index b) { return data[a] < data[b]; });
  Eigen::MatrixXd out(draws.rows(), draws.cols());
  double* res = out.data();
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && data[order[j + 1]] == data[order[i]]) ++j;
    const double rank = (static_cast<double>(i + j) / 2) + 1;
    const double z = normal_quantile((rank - 0.375) / (static_cast<double>(total) + 0.25));
    for (std::size_t k = i; k <= j; ++k) res[order[k]] = z;
    i = j + 1;
  }
  return out;
}

double split_rhat(const Eigen::MatrixXd& draws) {
  if (draws.cols() < 2 || draws.rows() < 4 || is_constant(draws)) return kNaN;
  const Eigen::MatrixXd split = split_chains(draws);
  const double bulk = rhat_basic(rank_normalize(split));
  const double med = stats::median<double>(std::span<const double>(split.data(), static_cast<std::size_t>(split.size())));
  const Eigen::MatrixXd folded = (split.array() - med).abs().matrix();
  const double tail = rhat_basic(rank_normalize(folded));
  // Sampling noise can push the ratio a hair below 1; 1 is its population floor.
  if (std::isnan(bulk)) return std::isnan(tail) ? tail : std::max(1.0, tail);
  if (std::isnan(tail)) return std::max(1.0, bulk);
  return std::max({1.0, bulk, tail});
}

double ess_basic(const Eigen::MatrixXd& draws) { return ess_of(split_chains(draws)); }

double ess_bulk(const Eigen::MatrixXd& draws) {
  if (is_constant(draws)) return kNaN;
  return ess_of(rank_normalize(split_chains(draws)));
}

double ess_tail(const Eigen::MatrixXd& draws) {
  if (is_constant(draws)) return kNaN;
  const Eigen::MatrixXd split = split_chains(draws);
  const std::span<const double> all(split.data(), static_cast<std::size_t>(split.size()));
  const double lo = ess_of(indicator(split, stats::quantile(all, 0.05)));
  const double hi = ess_of(indicator(split, stats::quantile(all, 0.95)));
  if (std::isnan(lo)) return hi;
  if (std::isnan(hi)) return lo;
  return std::min(lo, hi);
}

double Diagnostics::max_rhat() const {
  double r = 1;
  for (const auto& p : parameters)
    if (!std::isnan(p.rhat)) r = std::max(r, p.rhat);
  return r;
}

double Diagnostics::min_ess_bulk() const {
  double e = std::numeric_limits<double>::infinity();
  for (const auto& p : parameters)
    if (!std::isnan(p.ess_bulk)) e = std::min(e, p.ess_bulk);
  return e;
}

int Diagnostics::divergences() const {
  int n = 0;
  for (const auto& c : chains) n += c.divergences;
  return n;
}

const ParameterDiagnostics& Diagnostics::at(const std::string& name) const {
  for (const auto& p : parameters)
    if (p.name == name) return p;
  throw Error("unknown parameter '" + name + "'");
}

Diagnostics diagnose(const Draws& draws, int max_treedepth) {
  Diagnostics out;
  if (draws.n_chains() < 2) out.warnings.push_back("only one chain: Rhat omitted");
  if (draws.n_iterations() < 100)
    out.warnings.push_back("fewer than 100 draws per chain: diagnostics are unreliable");
  int constant = 0;
  for (Eigen::Index j = 0; j < draws.n_parameters(); ++j) {
    const Eigen::MatrixXd x = draws.per_chain(j);
    ParameterDiagnostics d;
    d.name = draws.names[static_cast<std::size_t>(j)];
    d.constant = is_constant(x);
    if (d.constant) ++constant;
    d.rhat = draws.n_chains() >= 2 ? split_rhat(x) : kNaN;
    d.ess_bulk = ess_bulk(x);
    d.ess_tail = ess_tail(x);
    const std::span<const double> all(x.data(), static_cast<std::size_t>(x.size()));
    d.mcse = d.constant ? 0 : stats::sd(all) / std::sqrt(d.ess_bulk);
    out.parameters.push_back(std::move(d));
  }
  if (constant > 0)
    out.warnings.push_back(std::to_string(constant) + " parameter(s) have constant draws: ESS and Rhat undefined");
  for (std::size_t c = 0; c < draws.info.size(); ++c) {
    ChainDiagnostics cd;
    double accept = 0;
    for (const auto& it : draws.info[c]) {
      cd.divergences += it.divergent ? 1 : 0;
      cd.treedepth_saturated += it.treedepth >= max_treedepth ? 1 : 0;
      accept += it.accept_stat;
      cd.step_size = it.step_size;
    }
    if (!draws.info[c].empty()) cd.mean_accept_stat = accept / static_cast<double>(draws.info[c].size());
    if (cd.divergences > 0)
      out.warnings.push_back("chain " + std::to_string(c + 1) + ": " + std::to_string(cd.divergences) +
                             " divergent transition(s)");
    if (cd.treedepth_saturated > 0)
      out.warnings.push_back("chain " + std::to_string(c + 1) + ": " + std::to_string(cd.treedepth_saturated) +
                             " transition(s) hit the maximum tree depth");
    out.chains.push_back(cd);
  }
  return out;
}

}  // namespace bayesd
