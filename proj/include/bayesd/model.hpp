#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>
#include <vector>

#include "bayesd/design.hpp"
#include "bayesd/formula.hpp"
#include "bayesd/priors.hpp"

namespace bayesd {

// Where one group-level term lives in the unconstrained and constrained vectors.
struct BlockLayout {
  std::size_t design_index = 0;  // into DesignMatrices::mean_random or ::sigma_random
  bool on_sigma = false;
  bool correlated = true;
  Eigen::Index q = 0;
  Eigen::Index levels = 0;
  // unconstrained: log tau (q), correlation raw (n_cor), standardized offsets (levels * q)
  Eigen::Index log_tau = 0;
  Eigen::Index cor_raw = 0;
  Eigen::Index z = 0;
  // constrained: sd (q), correlations (n_cor), random effects (levels * q)
  Eigen::Index sd_out = 0;
  Eigen::Index cor_out = 0;
  Eigen::Index r_out = 0;

  Eigen::Index n_cor() const noexcept { return correlated ? q * (q - 1) / 2 : 0; }
};

// Natural-scale parameters. Random effects are stored non-centered: the
// effects of level l are u_l = diag(tau) * L * z_l.
struct ParameterVector {
  struct Block {
    Eigen::VectorXd tau;
    Eigen::MatrixXd L;  // unit-diagonal-norm lower Cholesky factor of the correlation
    Eigen::MatrixXd z;  // levels x q
  };

  Eigen::VectorXd beta;
  Eigen::VectorXd beta_sigma;
  std::vector<Block> blocks;
  double nu = std::numeric_limits<double>::infinity();

  // levels x q matrix of materialized effects.
  Eigen::MatrixXd random_effects(std::size_t block) const;
};

// Cholesky factor of a q x q correlation matrix from q(q-1)/2 unconstrained
// values (tanh-transformed canonical partial correlations). Returns the log
// absolute Jacobian of the transform. Row-major q*q storage.
template <typename Scalar>
Scalar corr_cholesky_constrain(const Scalar* raw, int q, std::vector<Scalar>& L);

// LKJ(eta) log density of a correlation matrix expressed through its Cholesky factor.
template <typename Scalar>
Scalar lkj_cholesky_log_density(const std::vector<Scalar>& L, int q, double eta);

class Model {
 public:
  Model(ModelSpec spec, ModelFrame frame);
  Model(ModelSpec spec, ModelFrame frame, PriorSpec priors);

  const ModelSpec& spec() const noexcept { return spec_; }
  const ModelFrame& frame() const noexcept { return frame_; }
  const DesignMatrices& design() const noexcept { return design_; }
  const PriorSpec& priors() const noexcept { return priors_; }
  const std::vector<BlockLayout>& blocks() const noexcept { return blocks_; }
  const RandomDesign& block_design(std::size_t b) const;

  Eigen::Index dimension() const noexcept { return dim_; }
  Eigen::Index constrained_dimension() const noexcept { return static_cast<Eigen::Index>(constrained_names_.size()); }
  Eigen::Index n_beta() const noexcept { return design_.X.cols(); }
  Eigen::Index n_beta_sigma() const noexcept { return design_.X_sigma.cols(); }
  bool has_nu() const noexcept { return spec_.family == Family::student_t; }
  Eigen::Index nu_index() const noexcept { return dim_ - 1; }
  const std::vector<std::string>& unconstrained_names() const noexcept { return unconstrained_names_; }
  const std::vector<std::string>& constrained_names() const noexcept { return constrained_names_; }

  ParameterVector unpack(const Eigen::VectorXd& theta, double* log_jacobian = nullptr) const;
  Eigen::VectorXd pack(const ParameterVector& params) const;
  // Natural-scale row in constrained_names() order.
  Eigen::VectorXd constrain(const Eigen::VectorXd& theta) const;

  double log_likelihood(const ParameterVector& params) const;
  // Likelihood with explicitly given random effects (one levels x q matrix per block).
  double log_likelihood(const Eigen::VectorXd& beta, const Eigen::VectorXd& beta_sigma,
                        const std::vector<Eigen::MatrixXd>& effects, double nu) const;
  double log_prior(const ParameterVector& params) const;
  double log_posterior(const ParameterVector& params) const { return log_likelihood(params) + log_prior(params); }

  // Log posterior in the unconstrained space including transform Jacobians.
  // Non-finite evaluations return -infinity.
  double log_density(const Eigen::VectorXd& theta) const;
  double log_density_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const;

  struct Predictors {
    Eigen::VectorXd eta;        // location per observation
    Eigen::VectorXd log_sigma;  // log scale per observation
  };
  Predictors predict(const Eigen::Ref<const Eigen::VectorXd>& constrained) const;
  double nu_of(const Eigen::Ref<const Eigen::VectorXd>& constrained) const;

 private:
  double evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const;

  ModelSpec spec_;
  ModelFrame frame_;
  DesignMatrices design_;
  PriorSpec priors_;
  std::vector<BlockLayout> blocks_;
  Eigen::Index dim_ = 0;
  std::vector<std::string> unconstrained_names_;
  std::vector<std::string> constrained_names_;
};

}  // namespace bayesd
