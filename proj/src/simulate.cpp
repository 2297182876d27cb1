#include "bayesd/simulate.hpp"

#include <cmath>
#include <random>

#include "bayesd/error.hpp"
#include "bayesd/model.hpp"

namespace bayesd {

namespace {

std::string padded(const char* prefix, std::size_t k, std::size_t total) {
  std::string digits = std::to_string(k);
  const std::size_t width = std::to_string(total).size();
  return prefix + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

}  // namespace

void validate(const SimConfig& c) {
  if (c.n_clusters == 0) throw ValidationError("n_clusters must be positive");
  if (c.subjects_min == 0 || c.subjects_max < c.subjects_min)
    throw ValidationError("subjects per cluster must satisfy 1 <= min <= max");
  if (c.total_subjects > 0 && c.total_subjects < c.n_clusters)
    throw ValidationError("total_subjects must be at least n_clusters");
  if (!(c.intervention_fraction >= 0 && c.intervention_fraction <= 1))
    throw ValidationError("intervention_fraction must lie in [0, 1]");
  for (double s : c.random_sds)
    if (!(s >= 0) || !std::isfinite(s)) throw ValidationError("random SDs must be finite and nonnegative");
  for (double b : c.fixed_effects)
    if (!std::isfinite(b)) throw ValidationError("fixed effects must be finite");
  for (double b : c.log_sigma_coeffs)
    if (std::isnan(b) || b == std::numeric_limits<double>::infinity())
      throw ValidationError("log-sigma coefficients must be finite or -inf");
  if (c.family == Family::student_t && !(c.nu > 2)) throw ValidationError("student_t residuals need nu > 2");
  if (!(c.correlation_pre_post > -1 && c.correlation_pre_post < 1))
    throw ValidationError("correlation_pre_post must lie in (-1, 1)");
  if (!(c.pretest_sd >= 0)) throw ValidationError("pretest_sd must be nonnegative");
}

SimulationResult simulate(const SimConfig& c) {
  validate(c);
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> size_dist(c.subjects_min, c.subjects_max);

  // Skeleton: subjects nested in clusters, both time points per subject.
  std::vector<std::size_t> cluster_size(c.n_clusters);
  std::size_t n_subjects = 0;
  if (c.total_subjects > 0) {
    for (std::size_t cl = 0; cl < c.n_clusters; ++cl)
      n_subjects += (cluster_size[cl] = c.total_subjects / c.n_clusters + (cl < c.total_subjects % c.n_clusters));
  } else {
    for (auto& s : cluster_size) n_subjects += (s = size_dist(rng));
  }
  std::vector<bool> treated(n_subjects, false);
  if (c.assignment == SimConfig::Assignment::per_cluster) {
    const auto k = static_cast<std::size_t>(std::llround(c.intervention_fraction * static_cast<double>(c.n_clusters)));
    std::size_t idx = 0;
    for (std::size_t cl = 0; cl < c.n_clusters; ++cl)
      for (std::size_t s = 0; s < cluster_size[cl]; ++s) treated[idx++] = cl >= c.n_clusters - k;
  } else {
    const auto k = static_cast<std::size_t>(std::llround(c.intervention_fraction * static_cast<double>(n_subjects)));
    std::vector<std::size_t> order(n_subjects);
    for (std::size_t i = 0; i < n_subjects; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < k; ++i) treated[order[i]] = true;
  }

  WideDataset wide;
  std::size_t idx = 0;
  for (std::size_t cl = 0; cl < c.n_clusters; ++cl) {
    const std::string cid = padded("c", cl + 1, c.n_clusters);
    for (std::size_t s = 0; s < cluster_size[cl]; ++s, ++idx)
      wide.records.push_back({padded("s", idx + 1, n_subjects), treated[idx] ? kIntervention : kControl, 0, 0, cid, cid});
  }

  ModelSpec spec = c.spec;
  spec.subset = {};
  const bool gain = spec.response == Response::gain;
  const LongDataset skeleton = pivot_long(wide);
  const Model model = gain ? Model(spec, make_frame(spec, wide)) : Model(spec, make_frame(spec, skeleton));

  if (c.fixed_effects.size() != static_cast<std::size_t>(model.n_beta()))
    throw ValidationError("fixed_effects needs " + std::to_string(model.n_beta()) + " values for this design");
  if (c.log_sigma_coeffs.size() != static_cast<std::size_t>(model.n_beta_sigma()))
    throw ValidationError("log_sigma_coeffs needs " + std::to_string(model.n_beta_sigma()) + " values for this design");
  std::size_t n_sd = 0;
  for (const auto& b : model.blocks()) n_sd += static_cast<std::size_t>(b.q);
  if (c.random_sds.size() != n_sd)
    throw ValidationError("random_sds needs " + std::to_string(n_sd) + " values for this design");

  // Truth vector in constrained layout.
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(model.constrained_dimension());
  for (std::size_t j = 0; j < c.fixed_effects.size(); ++j) truth[static_cast<Eigen::Index>(j)] = c.fixed_effects[j];
  for (std::size_t j = 0; j < c.log_sigma_coeffs.size(); ++j)
    truth[model.n_beta() + static_cast<Eigen::Index>(j)] = c.log_sigma_coeffs[j];
  std::size_t sd_pos = 0;
  for (const auto& b : model.blocks()) {
    for (Eigen::Index j = 0; j < b.q; ++j) {
      const double tau = c.random_sds[sd_pos++];
      truth[b.sd_out + j] = tau;
      for (Eigen::Index l = 0; l < b.levels; ++l) truth[b.r_out + l * b.q + j] = tau * std_normal(rng);
    }
  }
  if (model.has_nu()) truth[model.constrained_dimension() - 1] = c.family == Family::student_t ? c.nu : 1e6;

  // A -inf coefficient times a zero indicator would give NaN in the linear predictor.
  Eigen::VectorXd finite_truth = truth;
  for (auto& v : finite_truth)
    if (v == -std::numeric_limits<double>::infinity()) v = -1e300;
  const Model::Predictors pred = model.predict(finite_truth);
  const Eigen::Index n = model.frame().size();
  Eigen::VectorXd y(n);
  const double r = c.correlation_pre_post;
  // Residuals come in subject pairs (pre, post) for long data.
  std::chi_squared_distribution<double> chi(c.family == Family::student_t ? c.nu : 1.0);
  auto scale_draw = [&]() { return c.family == Family::student_t ? std::sqrt(c.nu / chi(rng)) : 1.0; };
  if (gain) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s = std::exp(pred.log_sigma[i]);
      y[i] = pred.eta[i] + s * std_normal(rng) * scale_draw();
    }
  } else {
    for (Eigen::Index i = 0; i + 1 < n; i += 2) {
      const double e1 = std_normal(rng);
      const double e2 = r * e1 + std::sqrt(1 - r * r) * std_normal(rng);
      const double w = scale_draw();
      y[i] = pred.eta[i] + std::exp(pred.log_sigma[i]) * e1 * w;
      y[i + 1] = pred.eta[i + 1] + std::exp(pred.log_sigma[i + 1]) * e2 * w;
    }
  }

  SimulationResult out;
  out.names = model.constrained_names();
  out.truth = truth;
  if (gain) {
    std::normal_distribution<double> pre(c.pretest_mean, c.pretest_sd);
    for (std::size_t i = 0; i < wide.records.size(); ++i) {
      auto& w = wide.records[i];
      w.pr = pre(rng);
      w.po = w.pr + y[static_cast<Eigen::Index>(i)];
    }
    out.data = pivot_long(wide);
  } else {
    out.data = skeleton;
    for (Eigen::Index i = 0; i < n; ++i) out.data.records[static_cast<std::size_t>(i)].score = y[i];
  }
  return out;
}

}  // namespace bayesd
