#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace bayesd {

struct Fit;

struct PpcReport {
  Eigen::VectorXd observed;
  // density check
  std::vector<Eigen::VectorXd> replicates;
  std::vector<std::size_t> draw_indices;  // chain-major positions of the draws used
  double ks = 0;                          // observed vs pooled replicates
  double p_mean = 0;                      // Pr(mean(yrep) >= mean(y))
  double p_sd = 0;                        // Pr(sd(yrep) >= sd(y))
  // error check
  Eigen::VectorXd y_pred;
  Eigen::VectorXd residual;
  double abs_residual_correlation = 0;  // corr(|residual|, y_pred)
  std::vector<std::string> warnings;
};

// Replicates the response for m randomly chosen draws, keeping each draw's
// group-level effects. m is clamped to the number of draws with a warning.
PpcReport pp_density(const Fit& fit, std::size_t m, std::uint64_t seed);
// Posterior-mean linear predictor (group-level effects included) and residuals.
PpcReport pp_error(const Fit& fit);

// source,obs_index,value with source y or yrep_k
void write_ppc_density_csv(std::ostream& out, const PpcReport& report);
// y_pred,error
void write_ppc_error_csv(std::ostream& out, const PpcReport& report);

}  // namespace bayesd
