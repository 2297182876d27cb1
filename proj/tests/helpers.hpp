#pragma once

#include <cmath>
#include <functional>
#include <random>

#include "bayesd/fit.hpp"
#include "bayesd/simulate.hpp"

namespace testing_helpers {

// Two groups, two time points, several classes.
inline bayesd::LongDataset small_dataset(std::uint64_t seed, std::size_t clusters = 6, std::size_t subjects = 8) {
  bayesd::SimConfig c;
  c.spec = bayesd::preset("anova2");
  c.n_clusters = clusters;
  c.subjects_min = c.subjects_max = subjects;
  c.fixed_effects = {0.22, 0.44, 0.04, 0.03};
  c.log_sigma_coeffs = {-2.4, -2.2, 0.1, 0.05};
  c.random_sds = {0.05};
  c.seed = seed;
  return bayesd::simulate(c).data;
}

// Fourth-order central difference of f along coordinate j.
inline double central_difference(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
                                 Eigen::Index j, double h) {
  const double x0 = x[j];
  auto at = [&](double v) {
    x[j] = v;
    return f(x);
  };
  const double d = (-at(x0 + 2 * h) + 8 * at(x0 + h) - 8 * at(x0 - h) + at(x0 - 2 * h)) / (12 * h);
  x[j] = x0;
  return d;
}

inline double student_t_lpdf(double x, double nu, double mu, double s) {
  const double z = (x - mu) / s;
  return std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2) - 0.5 * std::log(nu * M_PI) - std::log(s) -
         (nu + 1) / 2 * std::log1p(z * z / nu);
}

inline double normal_lpdf(double x, double mu, double s) {
  const double z = (x - mu) / s;
  return -0.5 * z * z - std::log(s) - 0.5 * std::log(2 * M_PI);
}

}  // namespace testing_helpers

namespace testing_helpers {

// A fit whose draws are supplied directly: every row of every chain is produced
// by row(chain, iteration), in the model's constrained layout.
inline bayesd::Fit synthetic_fit(const bayesd::ModelSpec& spec, const bayesd::LongDataset& data, int chains,
                                 int iterations,
                                 const std::function<Eigen::VectorXd(int, int, const bayesd::Model&)>& row) {
  bayesd::Fit fit;
  fit.spec = spec;
  fit.data = data;
  fit.model = std::make_unique<bayesd::Model>(spec, bayesd::make_frame(spec, data));
  fit.draws.names = fit.model->constrained_names();
  for (int c = 0; c < chains; ++c) {
    Eigen::MatrixXd m(iterations, fit.model->constrained_dimension());
    for (int i = 0; i < iterations; ++i) m.row(i) = row(c, i, *fit.model).transpose();
    fit.draws.chains.push_back(m);
    fit.draws.info.emplace_back(static_cast<std::size_t>(iterations));
  }
  return fit;
}

}  // namespace testing_helpers
