#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace bayesd {

class Model;

struct SamplerConfig {
  int warmup = 1000;
  int iter = 5000;  // per chain, warmup included
  int chains = 4;
  double adapt_delta = 0.8;
  int max_treedepth = 10;
  std::uint64_t seed = 1;
  enum class Init { random, zero, user };
  Init init = Init::random;
  double init_radius = 2;      // random inits are uniform(-r, r) per unconstrained coordinate
  Eigen::VectorXd init_values;  // used with Init::user
  bool parallel = true;

  int draws_per_chain() const noexcept { return iter - warmup; }
  // Throws ValidationError unless 0 <= warmup < iter, 0 < adapt_delta < 1 and
  // 1 <= max_treedepth <= 20.
  void validate() const;
};

// A differentiable log density on R^dimension.
struct Target {
  Eigen::Index dimension = 0;
  // Returns the log density and writes the gradient; -inf marks points outside the support.
  std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)> log_density_gradient;
  // Optional map to the reported (natural-scale) parameters.
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> constrain;
  std::vector<std::string> names;              // unconstrained
  std::vector<std::string> constrained_names;  // empty when constrain is unset
};

Target make_target(const Model& model);

struct IterationInfo {
  bool divergent = false;
  int treedepth = 0;
  int n_leapfrog = 0;
  double energy = 0;
  double step_size = 0;
  double accept_stat = 0;
};

struct ChainResult {
  Eigen::MatrixXd unconstrained;  // draws x dimension, post-warmup
  std::vector<IterationInfo> info;
  double step_size = 0;
  Eigen::VectorXd inv_metric;
  int warmup_divergences = 0;
};

// Post-warmup draws of every chain.
struct Draws {
  std::vector<std::string> names;  // constrained parameters
  std::vector<Eigen::MatrixXd> chains;
  std::vector<std::string> unconstrained_names;
  std::vector<Eigen::MatrixXd> unconstrained;
  std::vector<std::vector<IterationInfo>> info;

  std::size_t n_chains() const noexcept { return chains.size(); }
  Eigen::Index n_iterations() const noexcept { return chains.empty() ? 0 : chains.front().rows(); }
  Eigen::Index n_parameters() const noexcept { return static_cast<Eigen::Index>(names.size()); }
  std::size_t total() const noexcept { return n_chains() * static_cast<std::size_t>(n_iterations()); }
  // Throws Error for unknown names.
  Eigen::Index index_of(const std::string& name) const;
  bool has(const std::string& name) const;
  // One parameter over all chains, chain-major.
  std::vector<double> column(const std::string& name) const;
  std::vector<double> column(Eigen::Index j) const;
  // iterations x chains matrix of one parameter.
  Eigen::MatrixXd per_chain(Eigen::Index j) const;
  int divergences() const;
};

ChainResult run_chain(const Target& target, const SamplerConfig& config, int chain_index);

// Runs config.chains independent chains, each seeded from (seed, chain index).
// Throws SamplerError when no finite initial point is found in 100 attempts or
// when every warmup transition diverges.
Draws nuts_sample(const Target& target, const SamplerConfig& config);

// Draws CSV: one row per (chain, iteration) with chain__ and iter__ leading,
// then every constrained parameter, then divergent__, treedepth__, energy__.
void write_draws_csv(std::ostream& out, const Draws& draws);
Draws read_draws_csv(std::istream& in);

std::uint64_t chain_seed(std::uint64_t seed, int chain_index);

// One leapfrog step with a diagonal inverse metric; exposed for integrator tests.
void leapfrog(const Target& target, const Eigen::VectorXd& inv_metric, double step, Eigen::VectorXd& q,
              Eigen::VectorXd& p, Eigen::VectorXd& grad, double& log_density);

}  // namespace bayesd
