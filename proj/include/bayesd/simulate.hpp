#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "bayesd/data.hpp"
#include "bayesd/formula.hpp"

namespace bayesd {

struct SimConfig {
  // The generative structure: data are drawn from exactly this model's
  // design matrices and likelihood (subset restrictions are not applied).
  ModelSpec spec = preset("anova2");

  std::size_t n_clusters = 12;
  // Subjects per cluster, drawn uniformly from [min, max].
  std::size_t subjects_min = 30;
  std::size_t subjects_max = 30;
  // When positive, overrides min/max: this many subjects split as evenly as
  // possible over the clusters.
  std::size_t total_subjects = 0;
  enum class Assignment { per_cluster, per_subject };
  Assignment assignment = Assignment::per_subject;
  double intervention_fraction = 0.5;

  // Coefficients in the column order of the built design. random_sds lists the
  // coefficient SDs of every group-level term, mean terms first; a term whose
  // coefficients are correlated is simulated with identity correlation.
  std::vector<double> fixed_effects;
  std::vector<double> log_sigma_coeffs;  // -inf entries give a zero residual scale
  std::vector<double> random_sds;

  Family family = Family::normal;
  double nu = std::numeric_limits<double>::infinity();
  // Correlation between a subject's pre and post residuals.
  double correlation_pre_post = 0;
  // Gain models draw the pretest score from N(mean, sd) and add the gain.
  double pretest_mean = 0.3;
  double pretest_sd = 0.1;
  std::uint64_t seed = 1;
};

struct SimulationResult {
  LongDataset data;
  // Every parameter under the names Model::constrained_names() assigns.
  std::vector<std::string> names;
  Eigen::VectorXd truth;
};

// Throws ValidationError for inconsistent configurations.
SimulationResult simulate(const SimConfig& config);

void validate(const SimConfig& config);

}  // namespace bayesd
