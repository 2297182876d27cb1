#include "bayesd/model.hpp"

#include <cmath>
#include <numbers>

#include "bayesd/error.hpp"
#include "bayesd/special.hpp"

namespace bayesd {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
const double kLogSqrt2Pi = 0.5 * std::log(2 * std::numbers::pi);

}  // namespace

template <typename Scalar>
Scalar corr_cholesky_constrain(const Scalar* raw, int q, std::vector<Scalar>& L) {
  using std::log;
  using std::sqrt;
  using std::tanh;
  using math::log;
  using math::sqrt;
  using math::tanh;
  L.assign(static_cast<std::size_t>(q * q), Scalar(0));
  Scalar log_jac(0);
  L[0] = Scalar(1);
  int k = 0;
  for (int i = 1; i < q; ++i) {
    Scalar z = tanh(raw[k++]);
    log_jac += log(Scalar(1) - z * z);
    L[static_cast<std::size_t>(i * q)] = z;
    Scalar sum_sqs = z * z;
    for (int j = 1; j < i; ++j) {
      z = tanh(raw[k++]);
      log_jac += log(Scalar(1) - z * z);
      log_jac += Scalar(0.5) * log(Scalar(1) - sum_sqs);
      const Scalar v = z * sqrt(Scalar(1) - sum_sqs);
      L[static_cast<std::size_t>(i * q + j)] = v;
      sum_sqs += v * v;
    }
    L[static_cast<std::size_t>(i * q + i)] = sqrt(Scalar(1) - sum_sqs);
  }
  return log_jac;
}

template <typename Scalar>
Scalar lkj_cholesky_log_density(const std::vector<Scalar>& L, int q, double eta) {
  using std::log;
  using math::log;
  Scalar lp(0);
  for (int i = 1; i < q; ++i)
    lp += Scalar(q - i - 1 + 2 * eta - 2) * log(L[static_cast<std::size_t>(i * q + i)]);
  return lp;
}

template double corr_cholesky_constrain<double>(const double*, int, std::vector<double>&);
template math::Dual corr_cholesky_constrain<math::Dual>(const math::Dual*, int, std::vector<math::Dual>&);
template double lkj_cholesky_log_density<double>(const std::vector<double>&, int, double);
template math::Dual lkj_cholesky_log_density<math::Dual>(const std::vector<math::Dual>&, int, double);

Eigen::MatrixXd ParameterVector::random_effects(std::size_t b) const {
  const auto& blk = blocks.at(b);
  return blk.z * (blk.tau.asDiagonal() * blk.L).transpose();
}

Model::Model(ModelSpec spec, ModelFrame frame)
    : Model(spec, frame, default_priors(spec, frame)) {}

Model::Model(ModelSpec spec, ModelFrame frame, PriorSpec priors)
    : spec_(std::move(spec)), frame_(std::move(frame)), priors_(priors) {
  design_ = build_design(spec_, frame_);
  Eigen::Index u = 0;
  for (const auto& n : design_.mean_coding.names()) {
    unconstrained_names_.push_back("b_" + n);
    constrained_names_.push_back("b_" + n);
  }
  for (const auto& n : design_.sigma_coding.names()) {
    unconstrained_names_.push_back("b_sigma_" + n);
    constrained_names_.push_back("b_sigma_" + n);
  }
  u = static_cast<Eigen::Index>(unconstrained_names_.size());

  auto add_block = [&](const RandomDesign& rd, std::size_t index) {
    BlockLayout b;
    b.design_index = index;
    b.on_sigma = rd.on_sigma;
    b.correlated = rd.correlated;
    b.q = rd.q();
    b.levels = rd.n_levels();
    const std::string pre = rd.on_sigma ? "sigma_" : "";
    std::vector<std::string> coef;
    for (const auto& n : rd.inner.names()) coef.push_back(pre + n);

    b.log_tau = u;
    for (const auto& c : coef) unconstrained_names_.push_back("log_sd_" + rd.factor + "__" + c);
    b.cor_raw = b.log_tau + b.q;
    for (Eigen::Index k = 0; k < b.n_cor(); ++k)
      unconstrained_names_.push_back("cor_raw_" + rd.factor + "__" + pre + std::to_string(k));
    b.z = b.cor_raw + b.n_cor();
    for (const auto& lvl : rd.levels)
      for (const auto& c : coef) unconstrained_names_.push_back("z_" + rd.factor + "[" + lvl + "|" + c + "]");
    u = b.z + b.levels * b.q;

    b.sd_out = static_cast<Eigen::Index>(constrained_names_.size());
    for (const auto& c : coef) constrained_names_.push_back("sd_" + rd.factor + "__" + c);
    b.cor_out = static_cast<Eigen::Index>(constrained_names_.size());
    if (b.correlated)
      for (Eigen::Index i = 0; i < b.q; ++i)
        for (Eigen::Index j = i + 1; j < b.q; ++j)
          constrained_names_.push_back("cor_" + rd.factor + "__" + coef[static_cast<std::size_t>(i)] + "__" +
                                       coef[static_cast<std::size_t>(j)]);
    b.r_out = static_cast<Eigen::Index>(constrained_names_.size());
    const std::string rname = "r_" + rd.factor + (rd.on_sigma ? "__sigma" : "");
    for (const auto& lvl : rd.levels)
      for (const auto& n : rd.inner.names()) constrained_names_.push_back(rname + "[" + lvl + "|" + n + "]");
    blocks_.push_back(b);
  };
  for (std::size_t k = 0; k < design_.mean_random.size(); ++k) add_block(design_.mean_random[k], k);
  for (std::size_t k = 0; k < design_.sigma_random.size(); ++k) add_block(design_.sigma_random[k], k);
  if (has_nu()) {
    unconstrained_names_.push_back("log_nu_minus_1");
    constrained_names_.push_back("nu");
    ++u;
  }
  dim_ = u;
}

const RandomDesign& Model::block_design(std::size_t b) const {
  const auto& blk = blocks_.at(b);
  return blk.on_sigma ? design_.sigma_random[blk.design_index] : design_.mean_random[blk.design_index];
}

ParameterVector Model::unpack(const Eigen::VectorXd& theta, double* log_jacobian) const {
  if (theta.size() != dim_) throw std::invalid_argument("parameter vector has wrong length");
  ParameterVector p;
  double lj = 0;
  p.beta = theta.head(n_beta());
  p.beta_sigma = theta.segment(n_beta(), n_beta_sigma());
  for (const auto& b : blocks_) {
    ParameterVector::Block blk;
    blk.tau = theta.segment(b.log_tau, b.q).array().exp();
    lj += theta.segment(b.log_tau, b.q).sum();
    blk.L = Eigen::MatrixXd::Identity(b.q, b.q);
    if (b.n_cor() > 0) {
      std::vector<double> L;
      lj += corr_cholesky_constrain(theta.data() + b.cor_raw, static_cast<int>(b.q), L);
      blk.L = Eigen::Map<const RowMajorMatrix>(L.data(), b.q, b.q);
    }
    blk.z = Eigen::Map<const RowMajorMatrix>(theta.data() + b.z, b.levels, b.q);
    p.blocks.push_back(std::move(blk));
  }
  if (has_nu()) {
    const double a = theta[nu_index()];
    p.nu = 1 + std::exp(a);
    lj += a;
  }
  if (log_jacobian) *log_jacobian = lj;
  return p;
}

Eigen::VectorXd Model::pack(const ParameterVector& p) const {
  Eigen::VectorXd theta(dim_);
  theta.head(n_beta()) = p.beta;
  theta.segment(n_beta(), n_beta_sigma()) = p.beta_sigma;
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const auto& b = blocks_[k];
    const auto& blk = p.blocks[k];
    theta.segment(b.log_tau, b.q) = blk.tau.array().log();
    // Invert the correlation transform row by row.
    Eigen::Index m = b.cor_raw;
    for (Eigen::Index i = 1; i < b.q && b.n_cor() > 0; ++i) {
      double sum_sqs = 0;
      for (Eigen::Index j = 0; j < i; ++j) {
        const double zz = j == 0 ? blk.L(i, 0) : blk.L(i, j) / std::sqrt(1 - sum_sqs);
        theta[m++] = std::atanh(zz);
        sum_sqs += blk.L(i, j) * blk.L(i, j);
      }
    }
    Eigen::Map<RowMajorMatrix>(theta.data() + b.z, b.levels, b.q) = blk.z;
  }
  if (has_nu()) theta[nu_index()] = std::log(p.nu - 1);
  return theta;
}

Eigen::VectorXd Model::constrain(const Eigen::VectorXd& theta) const {
  const ParameterVector p = unpack(theta);
  Eigen::VectorXd out(constrained_dimension());
  out.head(n_beta()) = p.beta;
  out.segment(n_beta(), n_beta_sigma()) = p.beta_sigma;
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const auto& b = blocks_[k];
    const auto& blk = p.blocks[k];
    out.segment(b.sd_out, b.q) = blk.tau;
    if (b.correlated) {
      const Eigen::MatrixXd C = blk.L * blk.L.transpose();
      Eigen::Index m = b.cor_out;
      for (Eigen::Index i = 0; i < b.q; ++i)
        for (Eigen::Index j = i + 1; j < b.q; ++j) out[m++] = C(i, j);
    }
    const Eigen::MatrixXd U = p.random_effects(k);
    Eigen::Map<RowMajorMatrix>(out.data() + b.r_out, b.levels, b.q) = U;
  }
  if (has_nu()) out[constrained_dimension() - 1] = p.nu;
  return out;
}

double Model::log_likelihood(const Eigen::VectorXd& beta, const Eigen::VectorXd& beta_sigma,
                             const std::vector<Eigen::MatrixXd>& effects, double nu) const {
  Eigen::VectorXd eta = design_.X * beta;
  Eigen::VectorXd ls = design_.X_sigma * beta_sigma;
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const RandomDesign& rd = block_design(k);
    Eigen::VectorXd& target = blocks_[k].on_sigma ? ls : eta;
    for (Eigen::Index i = 0; i < frame_.size(); ++i)
      target[i] += rd.inner_rows.row(i).dot(effects[k].row(rd.level_index[static_cast<std::size_t>(i)]));
  }
  double lp = 0;
  for (Eigen::Index i = 0; i < frame_.size(); ++i) {
    const double r = (frame_.y[i] - eta[i]) * std::exp(-ls[i]);
    if (spec_.family == Family::normal)
      lp += -kLogSqrt2Pi - ls[i] - 0.5 * r * r;
    else
      lp += math::student_t_log_const(nu) - ls[i] - 0.5 * (nu + 1) * std::log1p(r * r / nu);
  }
  return std::isfinite(lp) ? lp : -std::numeric_limits<double>::infinity();
}

double Model::log_likelihood(const ParameterVector& p) const {
  std::vector<Eigen::MatrixXd> effects;
  for (std::size_t k = 0; k < blocks_.size(); ++k) effects.push_back(p.random_effects(k));
  return log_likelihood(p.beta, p.beta_sigma, effects, p.nu);
}

double Model::log_prior(const ParameterVector& p) const {
  double lp = 0;
  for (Eigen::Index j = 0; j < p.beta.size(); ++j) lp += priors_.beta.log_density(p.beta[j]);
  for (Eigen::Index j = 0; j < p.beta_sigma.size(); ++j) lp += priors_.beta_sigma.log_density(p.beta_sigma[j]);
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const auto& blk = p.blocks[k];
    for (Eigen::Index j = 0; j < blk.tau.size(); ++j) lp += priors_.tau.log_density(blk.tau[j], nullptr, true);
    if (blocks_[k].n_cor() > 0) {
      const auto q = static_cast<int>(blocks_[k].q);
      std::vector<double> L(static_cast<std::size_t>(q * q));
      Eigen::Map<RowMajorMatrix>(L.data(), q, q) = blk.L;
      lp += lkj_cholesky_log_density(L, q, priors_.lkj_eta);
    }
    lp += -0.5 * blk.z.squaredNorm() - kLogSqrt2Pi * static_cast<double>(blk.z.size());
  }
  if (has_nu()) {
    const double x = p.nu - 1;
    lp += priors_.nu_shape * std::log(priors_.nu_rate) - std::lgamma(priors_.nu_shape) +
          (priors_.nu_shape - 1) * std::log(x) - priors_.nu_rate * x;
  }
  return lp;
}

double Model::log_density(const Eigen::VectorXd& theta) const { return evaluate(theta, nullptr); }

double Model::log_density_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const {
  grad.resize(dim_);
  return evaluate(theta, &grad);
}

double Model::evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  if (theta.size() != dim_) throw std::invalid_argument("parameter vector has wrong length");
  if (!theta.allFinite()) return kNegInf;
  const Eigen::Index n = frame_.size();
  const Eigen::Index p = n_beta(), ps = n_beta_sigma();
  const auto beta = theta.head(p);
  const auto beta_sigma = theta.segment(p, ps);
  Eigen::VectorXd eta = design_.X * beta;
  Eigen::VectorXd ls = design_.X_sigma * beta_sigma;
  double lp = 0;

  struct Work {
    Eigen::VectorXd tau;
    Eigen::MatrixXd L;
    Eigen::MatrixXd M;
    std::vector<double> Lflat;
  };
  std::vector<Work> work(blocks_.size());
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const auto& b = blocks_[k];
    Work& w = work[k];
    const auto log_tau = theta.segment(b.log_tau, b.q);
    w.tau = log_tau.array().exp();
    lp += log_tau.sum();
    for (Eigen::Index j = 0; j < b.q; ++j) lp += priors_.tau.log_density(w.tau[j], nullptr, true);
    w.L = Eigen::MatrixXd::Identity(b.q, b.q);
    if (b.n_cor() > 0) {
      const auto q = static_cast<int>(b.q);
      lp += corr_cholesky_constrain(theta.data() + b.cor_raw, q, w.Lflat);
      lp += lkj_cholesky_log_density(w.Lflat, q, priors_.lkj_eta);
      w.L = Eigen::Map<const RowMajorMatrix>(w.Lflat.data(), b.q, b.q);
    }
    w.M = w.tau.asDiagonal() * w.L;
    const Eigen::Map<const RowMajorMatrix> Z(theta.data() + b.z, b.levels, b.q);
    lp += -0.5 * Z.squaredNorm() - kLogSqrt2Pi * static_cast<double>(Z.size());
    const Eigen::MatrixXd U = Z * w.M.transpose();
    const RandomDesign& rd = block_design(k);
    Eigen::VectorXd& target = b.on_sigma ? ls : eta;
    for (Eigen::Index i = 0; i < n; ++i)
      target[i] += rd.inner_rows.row(i).dot(U.row(rd.level_index[static_cast<std::size_t>(i)]));
  }

  for (Eigen::Index j = 0; j < p; ++j) lp += priors_.beta.log_density(beta[j]);
  for (Eigen::Index j = 0; j < ps; ++j) lp += priors_.beta_sigma.log_density(beta_sigma[j]);

  double nu = std::numeric_limits<double>::infinity();
  const bool student = has_nu();
  if (student) {
    const double a = theta[nu_index()];
    const double x = std::exp(a);
    nu = 1 + x;
    lp += priors_.nu_shape * std::log(priors_.nu_rate) - std::lgamma(priors_.nu_shape) +
          (priors_.nu_shape - 1) * a - priors_.nu_rate * x + a;
  }

  Eigen::VectorXd d_eta, d_ls;
  if (grad) {
    d_eta.resize(n);
    d_ls.resize(n);
  }
  double d_nu = 0;
  if (student) {
    lp += static_cast<double>(n) * math::student_t_log_const(nu);
    if (grad) d_nu += static_cast<double>(n) * math::student_t_log_const_ddf(nu);
  } else {
    lp -= static_cast<double>(n) * kLogSqrt2Pi;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = std::exp(ls[i]);
    const double r = (frame_.y[i] - eta[i]) / s;
    const double r2 = r * r;
    if (!student) {
      lp += -ls[i] - 0.5 * r2;
      if (grad) {
        d_eta[i] = r / s;
        d_ls[i] = r2 - 1;
      }
    } else {
      const double l1p = std::log1p(r2 / nu);
      lp += -ls[i] - 0.5 * (nu + 1) * l1p;
      if (grad) {
        const double wgt = nu + r2;
        d_eta[i] = (nu + 1) * r / (s * wgt);
        d_ls[i] = (nu + 1) * r2 / wgt - 1;
        d_nu += -0.5 * l1p + 0.5 * (nu + 1) * r2 / (nu * wgt);
      }
    }
  }
  if (!std::isfinite(lp)) return kNegInf;
  if (!grad) return lp;

  Eigen::VectorXd& g = *grad;
  g.setZero();
  g.head(p) = design_.X.transpose() * d_eta;
  g.segment(p, ps) = design_.X_sigma.transpose() * d_ls;
  for (Eigen::Index j = 0; j < p; ++j) {
    double d = 0;
    priors_.beta.log_density(beta[j], &d);
    g[j] += d;
  }
  for (Eigen::Index j = 0; j < ps; ++j) {
    double d = 0;
    priors_.beta_sigma.log_density(beta_sigma[j], &d);
    g[p + j] += d;
  }
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const auto& b = blocks_[k];
    const Work& w = work[k];
    const RandomDesign& rd = block_design(k);
    const Eigen::VectorXd& d_target = b.on_sigma ? d_ls : d_eta;
    Eigen::MatrixXd GU = Eigen::MatrixXd::Zero(b.levels, b.q);
    for (Eigen::Index i = 0; i < n; ++i)
      GU.row(rd.level_index[static_cast<std::size_t>(i)]) += d_target[i] * rd.inner_rows.row(i);
    const Eigen::Map<const RowMajorMatrix> Z(theta.data() + b.z, b.levels, b.q);
    Eigen::Map<RowMajorMatrix>(g.data() + b.z, b.levels, b.q) = GU * w.M - Z;
    const Eigen::MatrixXd dM = GU.transpose() * Z;
    for (Eigen::Index j = 0; j < b.q; ++j) {
      const double dtau = dM.row(j).dot(w.L.row(j));
      double dprior = 0;
      priors_.tau.log_density(w.tau[j], &dprior, true);
      g[b.log_tau + j] = (dtau + dprior) * w.tau[j] + 1;
    }
    if (b.n_cor() > 0) {
      const Eigen::MatrixXd dL = w.tau.asDiagonal() * dM;
      const auto q = static_cast<int>(b.q);
      std::vector<math::Dual> raw(static_cast<std::size_t>(b.n_cor()));
      std::vector<math::Dual> Ld;
      for (Eigen::Index m = 0; m < b.n_cor(); ++m) {
        for (Eigen::Index t = 0; t < b.n_cor(); ++t)
          raw[static_cast<std::size_t>(t)] = math::Dual(theta[b.cor_raw + t], t == m ? 1.0 : 0.0);
        const math::Dual lj = corr_cholesky_constrain(raw.data(), q, Ld);
        const math::Dual lkj = lkj_cholesky_log_density(Ld, q, priors_.lkj_eta);
        double acc = lj.der + lkj.der;
        for (int i = 0; i < q; ++i)
          for (int j = 0; j <= i; ++j) acc += dL(i, j) * Ld[static_cast<std::size_t>(i * q + j)].der;
        g[b.cor_raw + m] = acc;
      }
    }
  }
  if (student) {
    const double x = nu - 1;
    g[nu_index()] = d_nu * x + priors_.nu_shape - priors_.nu_rate * x;
  }
  return lp;
}

Model::Predictors Model::predict(const Eigen::Ref<const Eigen::VectorXd>& c) const {
  if (c.size() != constrained_dimension()) throw std::invalid_argument("constrained row has wrong length");
  Predictors out;
  out.eta = design_.X * c.head(n_beta());
  out.log_sigma = design_.X_sigma * c.segment(n_beta(), n_beta_sigma());
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const auto& b = blocks_[k];
    const RandomDesign& rd = block_design(k);
    const Eigen::Map<const RowMajorMatrix> U(c.data() + b.r_out, b.levels, b.q);
    Eigen::VectorXd& target = b.on_sigma ? out.log_sigma : out.eta;
    for (Eigen::Index i = 0; i < frame_.size(); ++i)
      target[i] += rd.inner_rows.row(i).dot(U.row(rd.level_index[static_cast<std::size_t>(i)]));
  }
  return out;
}

double Model::nu_of(const Eigen::Ref<const Eigen::VectorXd>& c) const {
  return has_nu() ? c[constrained_dimension() - 1] : std::numeric_limits<double>::infinity();
}

}  // namespace bayesd
