#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "bayesd/nuts.hpp"

namespace bayesd {

struct ParameterDiagnostics {
  std::string name;
  double rhat = 0;  // NaN when undefined (single chain or constant draws)
  double ess_bulk = 0;
  double ess_tail = 0;
  double mcse = 0;
  bool constant = false;
};

struct ChainDiagnostics {
  int divergences = 0;
  int treedepth_saturated = 0;
  double mean_accept_stat = 0;
  double step_size = 0;
};

struct Diagnostics {
  std::vector<ParameterDiagnostics> parameters;
  std::vector<ChainDiagnostics> chains;
  std::vector<std::string> warnings;

  double max_rhat() const;  // NaN-free maximum; 1 when no Rhat is defined
  double min_ess_bulk() const;
  int divergences() const;
  const ParameterDiagnostics& at(const std::string& name) const;
};

// iterations x chains. Split-Rhat on rank-normalized draws, max of bulk and
// folded versions. Returns NaN for fewer than two chains or constant draws.
double split_rhat(const Eigen::MatrixXd& draws);
// Geyer-truncated effective sample size of the split chains, capped at the
// total number of draws.
double ess_basic(const Eigen::MatrixXd& draws);
double ess_bulk(const Eigen::MatrixXd& draws);
double ess_tail(const Eigen::MatrixXd& draws);
// Normal scores of average ranks, (r - 3/8) / (S + 1/4).
Eigen::MatrixXd rank_normalize(const Eigen::MatrixXd& draws);

Diagnostics diagnose(const Draws& draws, int max_treedepth = 10);

}  // namespace bayesd
