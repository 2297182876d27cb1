#include "bayesd/nuts.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <thread>

#include "bayesd/error.hpp"
#include "bayesd/io.hpp"
#include "bayesd/model.hpp"
#include "bayesd/special.hpp"

namespace bayesd {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kMaxDeltaH = 1000;

struct PhasePoint {
  Eigen::VectorXd q;
  Eigen::VectorXd p;
  Eigen::VectorXd grad;
  double log_density = kNegInf;
};

// Step-size adaptation by dual averaging.
class StepSizeAdapter {
 public:
  void restart(double step) {
    mu_ = std::log(10 * step);
    counter_ = 0;
    s_bar_ = 0;
    x_bar_ = 0;
  }
  double learn(double accept_stat, double delta) {
    ++counter_;
    accept_stat = std::min(1.0, accept_stat);
    const double eta = 1.0 / (counter_ + kT0);
    s_bar_ = (1 - eta) * s_bar_ + eta * (delta - accept_stat);
    const double x = mu_ - s_bar_ * std::sqrt(counter_) / kGamma;
    const double x_eta = std::pow(counter_, -kKappa);
    x_bar_ = (1 - x_eta) * x_bar_ + x_eta * x;
    return std::exp(x);
  }
  double final_step() const { return std::exp(x_bar_); }

 private:
  static constexpr double kGamma = 0.05, kT0 = 10, kKappa = 0.75;
  double mu_ = 0, s_bar_ = 0, x_bar_ = 0, counter_ = 0;
};

// Fixed warmup schedule: an initial 75-iteration step-size-only buffer,
// doubling metric windows starting at 25 iterations, and a final 50-iteration
// step-size buffer. Short warmups shrink the buffers to 15% / 10%.
class MetricAdapter {
 public:
  MetricAdapter(int warmup, Eigen::Index dim) : warmup_(warmup), mean_(Eigen::VectorXd::Zero(dim)), m2_(Eigen::VectorXd::Zero(dim)) {
    if (warmup < 20) {
      enabled_ = false;
      return;
    }
    if (init_buffer_ + base_window_ + term_buffer_ > warmup) {
      init_buffer_ = static_cast<int>(0.15 * warmup);
      term_buffer_ = static_cast<int>(0.1 * warmup);
      base_window_ = warmup - (init_buffer_ + term_buffer_);
    }
    window_size_ = base_window_;
    next_window_ = init_buffer_ + window_size_ - 1;
  }

  // Feeds one warmup draw; returns true and writes a new inverse metric at window ends.
  bool learn(const Eigen::VectorXd& q, Eigen::VectorXd& inv_metric) {
    if (!enabled_) return false;
    if (in_window()) add(q);
    if (counter_ == next_window_ && counter_ != warmup_) {
      compute_next_window();
      const double n = count_;
      Eigen::VectorXd var = m2_ / (n - 1);
      inv_metric = (n / (n + 5)) * var.array() + 1e-3 * (5 / (n + 5));
      count_ = 0;
      mean_.setZero();
      m2_.setZero();
      ++counter_;
      return true;
    }
    ++counter_;
    return false;
  }

 private:
  bool in_window() const {
    return counter_ >= init_buffer_ && counter_ < warmup_ - term_buffer_ && counter_ != warmup_;
  }
  void add(const Eigen::VectorXd& q) {
    ++count_;
    const Eigen::VectorXd delta = q - mean_;
    mean_ += delta / count_;
    m2_ += delta.cwiseProduct(q - mean_);
  }
  void compute_next_window() {
    if (next_window_ == warmup_ - term_buffer_ - 1) return;
    window_size_ *= 2;
    next_window_ = counter_ + window_size_;
    if (next_window_ != warmup_ - term_buffer_ - 1) {
      const int boundary = next_window_ + 2 * window_size_;
      if (boundary >= warmup_ - term_buffer_) next_window_ = warmup_ - term_buffer_ - 1;
    }
  }

  int warmup_;
  bool enabled_ = true;
  int init_buffer_ = 75, term_buffer_ = 50, base_window_ = 25;
  int window_size_ = 0, next_window_ = 0, counter_ = 0;
  double count_ = 0;
  Eigen::VectorXd mean_;
  Eigen::VectorXd m2_;
};

class NutsChain {
 public:
  NutsChain(const Target& target, const SamplerConfig& config, std::uint64_t seed)
      : target_(target), config_(config), rng_(seed), inv_metric_(Eigen::VectorXd::Ones(target.dimension)) {}

  ChainResult run(int chain_index);

 private:
  double hamiltonian(const PhasePoint& z) const {
    return -z.log_density + 0.5 * z.p.cwiseProduct(inv_metric_).dot(z.p);
  }
  Eigen::VectorXd sharp(const Eigen::VectorXd& p) const { return inv_metric_.cwiseProduct(p); }
  void sample_momentum(PhasePoint& z) {
    for (Eigen::Index i = 0; i < z.p.size(); ++i) z.p[i] = normal_(rng_) / std::sqrt(inv_metric_[i]);
  }
  void evolve(PhasePoint& z, double step) const {
    leapfrog(target_, inv_metric_, step, z.q, z.p, z.grad, z.log_density);
  }
  static bool criterion(const Eigen::VectorXd& p_sharp_minus, const Eigen::VectorXd& p_sharp_plus,
                        const Eigen::VectorXd& rho) {
    return p_sharp_plus.dot(rho) > 0 && p_sharp_minus.dot(rho) > 0;
  }
  double uniform() { return uniform_(rng_); }

  void initialize(int chain_index);
  void init_step_size();
  IterationInfo transition();
  bool build_tree(int depth, PhasePoint& z, PhasePoint& z_propose, Eigen::VectorXd& p_sharp_beg,
                  Eigen::VectorXd& p_sharp_end, Eigen::VectorXd& rho, Eigen::VectorXd& p_beg, Eigen::VectorXd& p_end,
                  double H0, double sign, int& n_leapfrog, double& log_sum_weight, double& sum_metro_prob);

  const Target& target_;
  const SamplerConfig& config_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  Eigen::VectorXd inv_metric_;
  double step_ = 1;
  PhasePoint z_;
  bool divergent_ = false;
};

void NutsChain::initialize(int chain_index) {
  const Eigen::Index dim = target_.dimension;
  z_.p = Eigen::VectorXd::Zero(dim);
  for (int attempt = 0; attempt < 100; ++attempt) {
    switch (config_.init) {
      case SamplerConfig::Init::zero: z_.q = Eigen::VectorXd::Zero(dim); break;
      case SamplerConfig::Init::user:
        if (config_.init_values.size() != dim) throw SamplerError("user init has the wrong length");
        z_.q = config_.init_values;
        break;
      case SamplerConfig::Init::random: {
        std::uniform_real_distribution<double> u(-config_.init_radius, config_.init_radius);
        z_.q.resize(dim);
        for (Eigen::Index i = 0; i < dim; ++i) z_.q[i] = u(rng_);
        break;
      }
    }
    z_.log_density = target_.log_density_gradient(z_.q, z_.grad);
    if (std::isfinite(z_.log_density) && z_.grad.allFinite()) return;
    if (config_.init != SamplerConfig::Init::random) break;
  }
  throw SamplerError("chain " + std::to_string(chain_index + 1) +
                     ": could not find an initial point with finite log density and gradient");
}

void NutsChain::init_step_size() {
  const PhasePoint start = z_;
  auto one_step = [&]() {
    z_ = start;
    sample_momentum(z_);
    const double H0 = hamiltonian(z_);
    evolve(z_, step_);
    double h = hamiltonian(z_);
    if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
    return H0 - h;
  };
  const double log08 = std::log(0.8);
  const int direction = one_step() > log08 ? 1 : -1;
  while (true) {
    const double delta_H = one_step();
    if (direction == 1 && !(delta_H > log08)) break;
    if (direction == -1 && !(delta_H < log08)) break;
    step_ = direction == 1 ? 2 * step_ : 0.5 * step_;
    if (step_ > 1e7) throw SamplerError("posterior is improper: step size grew without bound; check the model priors");
    if (step_ == 0) throw SamplerError("no acceptably small step size found; the log density may be ill-defined");
  }
  z_ = start;
}

bool NutsChain::build_tree(int depth, PhasePoint& z, PhasePoint& z_propose, Eigen::VectorXd& p_sharp_beg,
                           Eigen::VectorXd& p_sharp_end, Eigen::VectorXd& rho, Eigen::VectorXd& p_beg,
                           Eigen::VectorXd& p_end, double H0, double sign, int& n_leapfrog, double& log_sum_weight,
                           double& sum_metro_prob) {
  if (depth == 0) {
    evolve(z, sign * step_);
    ++n_leapfrog;
    double h = hamiltonian(z);
    if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
    if (h - H0 > kMaxDeltaH) divergent_ = true;
    log_sum_weight = math::log_sum_exp(log_sum_weight, H0 - h);
    sum_metro_prob += H0 - h > 0 ? 1 : std::exp(H0 - h);
    z_propose = z;
    p_sharp_beg = sharp(z.p);
    p_sharp_end = p_sharp_beg;
    rho += z.p;
    p_beg = z.p;
    p_end = p_beg;
    return !divergent_;
  }
  const Eigen::Index dim = z.q.size();
  // Initial subtree.
  double log_sum_weight_init = kNegInf;
  Eigen::VectorXd p_init_end(dim), p_sharp_init_end(dim), rho_init = Eigen::VectorXd::Zero(dim);
  if (!build_tree(depth - 1, z, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg, p_init_end, H0, sign,
                  n_leapfrog, log_sum_weight_init, sum_metro_prob))
    return false;
  // Final subtree.
  PhasePoint z_propose_final = z;
  double log_sum_weight_final = kNegInf;
  Eigen::VectorXd p_final_beg(dim), p_sharp_final_beg(dim), rho_final = Eigen::VectorXd::Zero(dim);
  if (!build_tree(depth - 1, z, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final, p_final_beg, p_end, H0,
                  sign, n_leapfrog, log_sum_weight_final, sum_metro_prob))
    return false;
  // Multinomial sample from the merged subtrees.
  const double log_sum_weight_subtree = math::log_sum_exp(log_sum_weight_init, log_sum_weight_final);
  log_sum_weight = math::log_sum_exp(log_sum_weight, log_sum_weight_subtree);
  if (log_sum_weight_final > log_sum_weight_subtree) {
    z_propose = z_propose_final;
  } else if (uniform() < std::exp(log_sum_weight_final - log_sum_weight_subtree)) {
    z_propose = z_propose_final;
  }
  const Eigen::VectorXd rho_subtree = rho_init + rho_final;
  rho += rho_subtree;
  // U-turn checks over the merged tree and across the subtree boundary.
  bool persist = criterion(p_sharp_beg, p_sharp_end, rho_subtree);
  persist = persist && criterion(p_sharp_beg, p_sharp_final_beg, rho_init + p_final_beg);
  persist = persist && criterion(p_sharp_init_end, p_sharp_end, rho_final + p_init_end);
  return persist;
}

IterationInfo NutsChain::transition() {
  sample_momentum(z_);
  divergent_ = false;
  const Eigen::Index dim = z_.q.size();
  PhasePoint z_fwd = z_, z_bck = z_, z_sample = z_, z_propose = z_;
  Eigen::VectorXd p_fwd_fwd = z_.p, p_sharp_fwd_fwd = sharp(z_.p);
  Eigen::VectorXd p_fwd_bck = z_.p, p_sharp_fwd_bck = p_sharp_fwd_fwd;
  Eigen::VectorXd p_bck_fwd = z_.p, p_sharp_bck_fwd = p_sharp_fwd_fwd;
  Eigen::VectorXd p_bck_bck = z_.p, p_sharp_bck_bck = p_sharp_fwd_fwd;
  Eigen::VectorXd rho = z_.p;
  double log_sum_weight = 0;
  const double H0 = hamiltonian(z_);
  int n_leapfrog = 0;
  double sum_metro_prob = 0;
  int depth = 0;
  while (depth < config_.max_treedepth) {
    Eigen::VectorXd rho_fwd = Eigen::VectorXd::Zero(dim), rho_bck = Eigen::VectorXd::Zero(dim);
    bool valid_subtree = false;
    double log_sum_weight_subtree = kNegInf;
    if (uniform() > 0.5) {
      rho_bck = rho;
      p_bck_fwd = p_fwd_bck;
      p_sharp_bck_fwd = p_sharp_fwd_bck;
      PhasePoint z = z_fwd;
      valid_subtree = build_tree(depth, z, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck, p_fwd_fwd,
                                 H0, 1, n_leapfrog, log_sum_weight_subtree, sum_metro_prob);
      z_fwd = std::move(z);
    } else {
      rho_fwd = rho;
      p_fwd_bck = p_bck_fwd;
      p_sharp_fwd_bck = p_sharp_bck_fwd;
      PhasePoint z = z_bck;
      valid_subtree = build_tree(depth, z, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd, p_bck_bck,
                                 H0, -1, n_leapfrog, log_sum_weight_subtree, sum_metro_prob);
      z_bck = std::move(z);
    }
    if (!valid_subtree) break;
    ++depth;
    if (log_sum_weight_subtree > log_sum_weight) {
      z_sample = z_propose;
    } else if (uniform() < std::exp(log_sum_weight_subtree - log_sum_weight)) {
      z_sample = z_propose;
    }
    log_sum_weight = math::log_sum_exp(log_sum_weight, log_sum_weight_subtree);
    rho = rho_bck + rho_fwd;
    bool persist = criterion(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
    persist = persist && criterion(p_sharp_bck_bck, p_sharp_fwd_bck, rho_bck + p_fwd_bck);
    persist = persist && criterion(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_fwd + p_bck_fwd);
    if (!persist) break;
  }
  z_ = z_sample;
  IterationInfo info;
  info.divergent = divergent_;
  info.treedepth = depth;
  info.n_leapfrog = n_leapfrog;
  info.step_size = step_;
  info.accept_stat = n_leapfrog > 0 ? sum_metro_prob / n_leapfrog : 0;
  info.energy = hamiltonian(z_);
  return info;
}

ChainResult NutsChain::run(int chain_index) {
  initialize(chain_index);
  init_step_size();
  StepSizeAdapter step_adapter;
  step_adapter.restart(step_);
  MetricAdapter metric_adapter(config_.warmup, target_.dimension);
  ChainResult out;
  for (int it = 0; it < config_.warmup; ++it) {
    const IterationInfo info = transition();
    if (info.divergent) ++out.warmup_divergences;
    step_ = step_adapter.learn(info.accept_stat, config_.adapt_delta);
    if (metric_adapter.learn(z_.q, inv_metric_)) {
      init_step_size();
      step_adapter.restart(step_);
    }
  }
  if (config_.warmup > 0) {
    if (out.warmup_divergences == config_.warmup)
      throw SamplerError("chain " + std::to_string(chain_index + 1) +
                         ": every warmup transition diverged; use a smaller initial step size or a higher adapt_delta");
    step_ = step_adapter.final_step();
  }
  const int n = config_.draws_per_chain();
  out.unconstrained.resize(n, target_.dimension);
  out.info.reserve(static_cast<std::size_t>(n));
  for (int it = 0; it < n; ++it) {
    out.info.push_back(transition());
    out.unconstrained.row(it) = z_.q.transpose();
  }
  out.step_size = step_;
  out.inv_metric = inv_metric_;
  return out;
}

}  // namespace

void SamplerConfig::validate() const {
  if (warmup < 0 || iter <= warmup) throw ValidationError("sampler needs 0 <= warmup < iter");
  if (chains < 1) throw ValidationError("sampler needs at least one chain");
  if (!(adapt_delta > 0 && adapt_delta < 1)) throw ValidationError("adapt_delta must lie in (0, 1)");
  if (max_treedepth < 1 || max_treedepth > 20) throw ValidationError("max_treedepth must lie in [1, 20]");
  if (!(init_radius >= 0)) throw ValidationError("init radius must be nonnegative");
}

void leapfrog(const Target& target, const Eigen::VectorXd& inv_metric, double step, Eigen::VectorXd& q,
              Eigen::VectorXd& p, Eigen::VectorXd& grad, double& log_density) {
  p += 0.5 * step * grad;
  q += step * inv_metric.cwiseProduct(p);
  log_density = target.log_density_gradient(q, grad);
  if (!std::isfinite(log_density) || !grad.allFinite()) {
    log_density = kNegInf;
    grad.setZero(q.size());
    return;
  }
  p += 0.5 * step * grad;
}

std::uint64_t chain_seed(std::uint64_t seed, int chain_index) {
  auto mix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  };
  return mix(seed ^ mix(static_cast<std::uint64_t>(chain_index) + 1));
}

ChainResult run_chain(const Target& target, const SamplerConfig& config, int chain_index) {
  config.validate();
  NutsChain chain(target, config, chain_seed(config.seed, chain_index));
  return chain.run(chain_index);
}

Draws nuts_sample(const Target& target, const SamplerConfig& config) {
  config.validate();
  const auto n_chains = static_cast<std::size_t>(config.chains);
  std::vector<ChainResult> results(n_chains);
  std::vector<std::exception_ptr> errors(n_chains);
  auto work = [&](std::size_t c) {
    try {
      results[c] = run_chain(target, config, static_cast<int>(c));
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  if (config.parallel && n_chains > 1) {
    std::vector<std::jthread> threads;
    for (std::size_t c = 0; c < n_chains; ++c) threads.emplace_back(work, c);
  } else {
    for (std::size_t c = 0; c < n_chains; ++c) work(c);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  Draws draws;
  draws.unconstrained_names = target.names;
  draws.names = target.constrain ? target.constrained_names : target.names;
  if (draws.unconstrained_names.empty())
    for (Eigen::Index j = 0; j < target.dimension; ++j) draws.unconstrained_names.push_back("theta[" + std::to_string(j + 1) + "]");
  if (draws.names.empty()) draws.names = draws.unconstrained_names;
  for (auto& r : results) {
    Eigen::MatrixXd constrained;
    if (target.constrain) {
      constrained.resize(r.unconstrained.rows(), static_cast<Eigen::Index>(draws.names.size()));
      for (Eigen::Index i = 0; i < r.unconstrained.rows(); ++i)
        constrained.row(i) = target.constrain(r.unconstrained.row(i).transpose()).transpose();
    } else {
      constrained = r.unconstrained;
    }
    draws.chains.push_back(std::move(constrained));
    draws.unconstrained.push_back(std::move(r.unconstrained));
    draws.info.push_back(std::move(r.info));
  }
  return draws;
}

Target make_target(const Model& model) {
  Target t;
  t.dimension = model.dimension();
  t.log_density_gradient = [&model](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
    return model.log_density_gradient(theta, grad);
  };
  t.constrain = [&model](const Eigen::VectorXd& theta) { return model.constrain(theta); };
  t.names = model.unconstrained_names();
  t.constrained_names = model.constrained_names();
  return t;
}

Eigen::Index Draws::index_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw Error("unknown parameter '" + name + "'");
  return static_cast<Eigen::Index>(it - names.begin());
}

bool Draws::has(const std::string& name) const { return std::find(names.begin(), names.end(), name) != names.end(); }

std::vector<double> Draws::column(const std::string& name) const { return column(index_of(name)); }

std::vector<double> Draws::column(Eigen::Index j) const {
  std::vector<double> out;
  out.reserve(total());
  for (const auto& c : chains)
    for (Eigen::Index i = 0; i < c.rows(); ++i) out.push_back(c(i, j));
  return out;
}

Eigen::MatrixXd Draws::per_chain(Eigen::Index j) const {
  Eigen::MatrixXd m(n_iterations(), static_cast<Eigen::Index>(n_chains()));
  for (std::size_t c = 0; c < n_chains(); ++c) m.col(static_cast<Eigen::Index>(c)) = chains[c].col(j);
  return m;
}

int Draws::divergences() const {
  int n = 0;
  for (const auto& chain : info)
    for (const auto& it : chain) n += it.divergent ? 1 : 0;
  return n;
}

void write_draws_csv(std::ostream& out, const Draws& draws) {
  out << "chain__,iter__";
  for (const auto& n : draws.names) out << ',' << n;
  out << ",divergent__,treedepth__,energy__\n";
  for (std::size_t c = 0; c < draws.n_chains(); ++c) {
    const auto& m = draws.chains[c];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      out << (c + 1) << ',' << (i + 1);
      for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << io::format_double(m(i, j));
      const IterationInfo info = c < draws.info.size() && static_cast<std::size_t>(i) < draws.info[c].size()
                                     ? draws.info[c][static_cast<std::size_t>(i)]
                                     : IterationInfo{};
      out << ',' << (info.divergent ? 1 : 0) << ',' << info.treedepth << ',' << io::format_double(info.energy)
          << '\n';
    }
  }
}

Draws read_draws_csv(std::istream& in) {
  std::string line;
  if (!io::read_line(in, line)) throw ParseError("empty draws file", 0, "");
  const auto header = io::split(line, ',');
  if (header.size() < 5 || header[0] != "chain__" || header[1] != "iter__" || header[header.size() - 3] != "divergent__")
    throw ParseError("draws file has an unexpected header", 0, "");
  Draws d;
  d.names.assign(header.begin() + 2, header.end() - 3);
  const auto np = static_cast<Eigen::Index>(d.names.size());
  std::vector<std::vector<std::vector<double>>> rows;
  std::size_t row = 0;
  while (io::read_line(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto f = io::split(line, ',');
    if (f.size() != header.size()) throw ParseError("draws row " + std::to_string(row) + " has wrong field count", row, "");
    const auto chain = static_cast<std::size_t>(std::stoul(f[0]));
    if (chain == 0) throw ParseError("chain index must start at 1", row, "chain__");
    if (rows.size() < chain) {
      rows.resize(chain);
      d.info.resize(chain);
    }
    std::vector<double> vals(static_cast<std::size_t>(np));
    for (Eigen::Index j = 0; j < np; ++j) {
      const auto v = io::parse_double(f[static_cast<std::size_t>(j) + 2]);
      if (!v) throw ParseError("draws row " + std::to_string(row) + ": bad number", row, d.names[static_cast<std::size_t>(j)]);
      vals[static_cast<std::size_t>(j)] = *v;
    }
    rows[chain - 1].push_back(std::move(vals));
    IterationInfo info;
    info.divergent = f[f.size() - 3] == "1";
    info.treedepth = std::stoi(f[f.size() - 2]);
    info.energy = io::parse_double(f.back()).value_or(0);
    d.info[chain - 1].push_back(info);
  }
  for (const auto& r : rows) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(r.size()), np);
    for (std::size_t i = 0; i < r.size(); ++i)
      for (Eigen::Index j = 0; j < np; ++j) m(static_cast<Eigen::Index>(i), j) = r[i][static_cast<std::size_t>(j)];
    d.chains.push_back(std::move(m));
  }
  return d;
}

}  // namespace bayesd
