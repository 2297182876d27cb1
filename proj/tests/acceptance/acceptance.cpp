// Acceptance criteria. Each criterion prints one PASS/FAIL line; the exit code
// is nonzero when any selected criterion fails.

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../helpers.hpp"
#include "bayesd/cli.hpp"
#include "bayesd/diagnostics.hpp"
#include "bayesd/effect_size.hpp"
#include "bayesd/fit.hpp"
#include "bayesd/io.hpp"
#include "bayesd/ppc.hpp"
#include "bayesd/simulate.hpp"
#include "bayesd/stats.hpp"
#include "bayesd/summary.hpp"

using namespace bayesd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) { return io::format_fixed(v, digits); }

std::string ratio(int hit, int total) {
  return fmt(static_cast<double>(hit) / total, 3) + " (" + std::to_string(hit) + "/" + std::to_string(total) + ")";
}

SamplerConfig sampler(const ModelSpec& spec, int warmup, int draws, std::uint64_t seed) {
  SamplerConfig s;
  s.warmup = warmup;
  s.iter = warmup + draws;
  s.chains = 4;
  s.adapt_delta = spec.adapt_delta;
  s.max_treedepth = spec.max_treedepth;
  s.seed = seed;
  return s;
}

// A one-draw posterior holding the simulation truth.
Draws truth_draws(const SimulationResult& sim) {
  Draws d;
  d.names = sim.names;
  d.chains.push_back(sim.truth.transpose());
  d.info.emplace_back(1);
  return d;
}

// 1 ------------------------------------------------------------------------

Outcome formulas() {
  MlTerms b;
  b.mu_diff = 0.04;
  b.sigma1 = std::exp(-2.36);
  b.sigma2 = std::exp(-2.39);
  b.sd1 = 0.02;
  b.sd2 = 0.04;
  b.sd_sigma1 = 0.05;
  b.sd_sigma2 = 0.11;
  const double between = d_s_ml_between(b, 506, 123);

  MlTerms w;
  w.mu_diff = 0.22;
  w.sigma1 = std::exp(-2.49);
  w.sigma2 = std::exp(-1.94);
  w.sd1 = 0.02;
  w.sd2 = 0.09;
  w.sd_sigma1 = 0.07;
  w.sd_sigma2 = 0.19;
  w.sd_id = 0.05;
  const double within = d_s_ml_within(w);

  MlTerms g;
  g.mu_diff = 0.21;
  g.sigma = std::exp(-1.85);
  g.sd_pr = 0.09;
  g.sd_po = 0.03;
  g.sd_sigma_pr = 0.11;
  g.sd_sigma_po = 0.09;
  const double gain = d_z_ml(g);

  const bool ok = std::abs(between - 0.34) <= 0.01 && std::abs(within - 1.07) <= 0.02 && std::abs(gain - 0.90) <= 0.02;
  return {ok, "d_s_ml_between " + fmt(between) + " (0.34 +- 0.01), d_s_ml_within " + fmt(within) +
                  " (1.07 +- 0.02), d_z_ml " + fmt(gain) + " (0.90 +- 0.02)"};
}

// 2 ------------------------------------------------------------------------

Outcome identities() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> mean(-2, 2), sd(0.05, 3), scale(0.1, 10), shift(-5, 5);
  std::uniform_int_distribution<int> size(2, 600);
  double worst = 0;
  auto track = [&](double a, double b) { worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(b))); };

  for (int i = 0; i < 1000; ++i) {
    const double m1 = mean(rng), m2 = mean(rng), s1 = sd(rng), s2 = sd(rng);
    const double n = size(rng), n1 = size(rng), n2 = size(rng);
    // equal sizes: pooled form equals the paired form
    track(d_s_pooled(m1, m2, s1, s2, n, n), d_s_paired(m1, m2, s1, s2));
    // equal sds: pooled equals heteroscedastic
    track(d_s_pooled(m1, m2, s1, s1, n1, n2), d_s_hetero(m1, m2, s1, s1));

    // multilevel formulas without the extra SDs
    MlTerms t;
    t.mu_diff = m2 - m1;
    t.sigma1 = s1;
    t.sigma2 = s2;
    t.sigma = s1;
    track(d_s_ml_between(t, n1, n2), d_s_pooled(m1, m2, s1, s2, n1, n2));
    track(d_s_ml_within(t), d_s_paired(m1, m2, s1, s2));
    track(d_z_ml(t), d_z(m2 - m1, s1));

    // scale and shift of the outcome
    const double a = scale(rng), c = shift(rng);
    track(d_s_pooled(a * m1 + c, a * m2 + c, a * s1, a * s2, n1, n2), d_s_pooled(m1, m2, s1, s2, n1, n2));
    track(d_s_hetero(a * m1 + c, a * m2 + c, a * s1, a * s2), d_s_hetero(m1, m2, s1, s2));
    track(d_s_paired(a * m1 + c, a * m2 + c, a * s1, a * s2), d_s_paired(m1, m2, s1, s2));
    track(d_z(a * (m2 - m1), a * s1), d_z(m2 - m1, s1));
    // antisymmetry
    track(d_s_pooled(m2, m1, s2, s1, n2, n1), -d_s_pooled(m1, m2, s1, s2, n1, n2));
    track(d_s_hetero(m2, m1, s2, s1), -d_s_hetero(m1, m2, s1, s2));
    track(d_s_paired(m2, m1, s2, s1), -d_s_paired(m1, m2, s1, s2));
    track(d_z(m1 - m2, s1), -d_z(m2 - m1, s1));

    // multilevel kinds with outcome-scale SDs; log-scale SDs are unit free
    MlTerms f = t;
    f.sd1 = sd(rng);
    f.sd2 = sd(rng);
    f.sd_id = sd(rng);
    f.sd_pr = sd(rng);
    f.sd_po = sd(rng);
    MlTerms fa = f;
    for (double* v : {&fa.mu_diff, &fa.sigma1, &fa.sigma2, &fa.sigma, &fa.sd1, &fa.sd2, &fa.sd_id, &fa.sd_pr, &fa.sd_po})
      *v *= a;
    track(d_s_ml_between(fa, n1, n2), d_s_ml_between(f, n1, n2));
    track(d_s_ml_within(fa), d_s_ml_within(f));
    track(d_z_ml(fa), d_z_ml(f));
    MlTerms fs = f;
    fs.mu_diff = -f.mu_diff;
    std::swap(fs.sigma1, fs.sigma2);
    std::swap(fs.sd1, fs.sd2);
    track(d_s_ml_between(fs, n2, n1), -d_s_ml_between(f, n1, n2));
    track(d_s_ml_within(fs), -d_s_ml_within(f));
    track(d_z_ml(fs), -d_z_ml(f));
  }

  // Whole pipeline: affine maps of the scores leave sample effect sizes unchanged.
  SimConfig c;
  c.spec = preset("anova2");
  c.n_clusters = 6;
  c.subjects_min = 5;
  c.subjects_max = 15;
  c.fixed_effects = {0.3, 0.5, 0.05, 0.1};
  c.log_sigma_coeffs = {-2.3, -2.0, 0.2, 0.1};
  c.random_sds = {0.05};
  c.seed = 77;
  const LongDataset data = simulate(c).data;
  LongDataset mapped = data, flipped = data;
  for (auto& r : mapped.records) r.score = 3.7 * r.score - 1.2;
  for (auto& r : flipped.records) r.time = r.time == kPretest ? kPosttest : kPretest;
  for (const auto& design : {SampleDesign::pooled(kPosttest), SampleDesign::paired(kControl)}) {
    const auto base = sample_effect_sizes(data, design);
    const auto moved = sample_effect_sizes(mapped, design);
    for (std::size_t k = 0; k < base.size(); ++k) track(moved[k].estimate, base[k].estimate);
  }
  const auto paired = sample_effect_sizes(data, SampleDesign::paired(kControl));
  const auto reversed = sample_effect_sizes(flipped, SampleDesign::paired(kControl));
  for (std::size_t k = 0; k < paired.size(); ++k) track(reversed[k].estimate, -paired[k].estimate);

  return {worst < 1e-12, "max relative discrepancy " + io::format_double(worst) + " < 1e-12 over 1000 cases"};
}

// 3 ------------------------------------------------------------------------

Outcome conjugate() {
  const double sigma = 0.5, prior_mean = 1.0, prior_sd = 10.0;
  const int n = 50;
  int passed = 0;
  std::string first_failure;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    std::normal_distribution<double> y_dist(2.0, sigma);
    double sum = 0;
    for (int i = 0; i < n; ++i) sum += y_dist(rng);
    const double precision = 1 / (prior_sd * prior_sd) + n / (sigma * sigma);
    const double post_mean = (prior_mean / (prior_sd * prior_sd) + sum / (sigma * sigma)) / precision;
    const double post_sd = 1 / std::sqrt(precision);

    Target t;
    t.dimension = 1;
    t.names = {"mu"};
    t.log_density_gradient = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
      const double mu = x[0];
      g.resize(1);
      g[0] = (sum - n * mu) / (sigma * sigma) - (mu - prior_mean) / (prior_sd * prior_sd);
      return -0.5 * (n * mu * mu - 2 * mu * sum) / (sigma * sigma) -
             0.5 * (mu - prior_mean) * (mu - prior_mean) / (prior_sd * prior_sd);
    };
    SamplerConfig cfg;
    cfg.warmup = 1000;
    cfg.iter = 2000;
    cfg.seed = seed;
    const Draws draws = nuts_sample(t, cfg);
    const Diagnostics diag = diagnose(draws);
    const std::vector<double> x = draws.column(0);
    const double m = stats::mean<double>(x), s = stats::sd<double>(x);
    // MCSE of the sd by the delta method on squared deviations.
    const Eigen::MatrixXd sq = (draws.per_chain(0).array() - m).square();
    std::vector<double> sqv(sq.data(), sq.data() + sq.size());
    const double mcse_var = stats::sd<double>(sqv) / std::sqrt(ess_basic(sq));
    const double mcse_sd = mcse_var / (2 * s);
    const double mcse_mean = diag.parameters.at(0).mcse;
    const bool ok = std::abs(m - post_mean) < 3 * mcse_mean && std::abs(s - post_sd) < 3 * mcse_sd &&
                    draws.divergences() == 0 && diag.max_rhat() < 1.01;
    passed += ok;
    if (!ok && first_failure.empty())
      first_failure = "; seed " + std::to_string(seed) + ": mean err " + fmt(std::abs(m - post_mean) / mcse_mean, 2) +
                      " mcse, sd err " + fmt(std::abs(s - post_sd) / mcse_sd, 2) + " mcse, divergences " +
                      std::to_string(draws.divergences()) + ", rhat " + fmt(diag.max_rhat());
  }
  return {passed == 20, std::to_string(passed) + "/20 seeds within 3 MCSE, no divergences, Rhat < 1.01" + first_failure};
}

// 4 ------------------------------------------------------------------------

// Fourth-order central difference with the step chosen from a decade ladder:
// the estimate whose neighbour on the ladder agrees with it best.
double stepped_difference(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                          Eigen::Index j) {
  std::vector<double> d;
  for (double h : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) d.push_back(testing_helpers::central_difference(f, x, j, h));
  std::size_t best = 1;
  for (std::size_t k = 1; k < d.size(); ++k)
    if (std::abs(d[k] - d[k - 1]) < std::abs(d[best] - d[best - 1])) best = k;
  return d[best];
}

Outcome gradients() {
  const LongDataset data = testing_helpers::small_dataset(41);
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> unif(-2, 2);
  double worst = 0;
  std::string where;
  int coordinates = 0;
  for (const auto& name : preset_names()) {
    const ModelSpec spec = preset(name);
    const Model model(spec, make_frame(spec, data));
    auto f = [&](const Eigen::VectorXd& x) { return model.log_density(x); };
    for (int p = 0; p < 10; ++p) {
      Eigen::VectorXd theta(model.dimension());
      for (auto& v : theta) v = unif(rng);
      Eigen::VectorXd g;
      model.log_density_gradient(theta, g);
      for (Eigen::Index j = 0; j < model.dimension(); ++j) {
        const double fd = stepped_difference(f, theta, j);
        const double rel = std::abs(g[j] - fd) / std::max({std::abs(g[j]), std::abs(fd), 1.0});
        ++coordinates;
        if (!(rel <= worst)) {
          worst = rel;
          where = name + " " + model.unconstrained_names()[static_cast<std::size_t>(j)];
        }
      }
    }
  }
  return {worst < 1e-6, "max relative error " + io::format_double(worst) + " < 1e-6 over " +
                            std::to_string(coordinates) + " coordinates (worst: " + where + ")"};
}

// 5 ------------------------------------------------------------------------

Outcome recovery() {
  int covered = 0, total = 0, unconverged = 0;
  std::map<std::string, int> misses;
  for (std::uint64_t rep = 0; rep < 20; ++rep) {
    SimConfig c;
    c.spec = preset("anova2");
    c.n_clusters = 12;
    c.total_subjects = 400;
    c.fixed_effects = {0.22, 0.44, 0.04, 0.03};
    c.log_sigma_coeffs = {-2.4, -2.2, 0.1, 0.05};
    c.random_sds = {0.05};
    c.family = Family::student_t;
    c.nu = 8;
    c.seed = 500 + rep;
    const SimulationResult sim = simulate(c);
    const Fit fit = fit_model(c.spec, sim.data, sampler(c.spec, 1000, 1000, 600 + rep));
    unconverged += !fit.converged();
    SummaryOptions so;
    so.prob = 0.9;
    const SummaryTable table = summarize(fit.draws, so);
    for (std::size_t i = 0; i < sim.names.size(); ++i) {
      const std::string& name = sim.names[i];
      if (!(name.starts_with("b_") || name.starts_with("sd_") || name == "nu")) continue;
      const SummaryRow& row = table.at(name);
      const double truth = sim.truth[static_cast<Eigen::Index>(i)];
      const bool hit = row.ci_low <= truth && truth <= row.ci_high;
      covered += hit;
      ++total;
      if (!hit) ++misses[name];
    }
  }
  std::string miss_text;
  for (const auto& [name, k] : misses) miss_text += (miss_text.empty() ? "" : ", ") + name + " " + std::to_string(k);
  return {static_cast<double>(covered) / total >= 0.85,
          "90% CI coverage " + ratio(covered, total) + " >= 0.85; unconverged fits " + std::to_string(unconverged) +
              "; misses: " + (miss_text.empty() ? "none" : miss_text)};
}

// 6 ------------------------------------------------------------------------

double icc_median(std::size_t clusters, std::size_t subjects, double tau, double sigma, std::uint64_t seed) {
  SimConfig c;
  c.spec = preset("icc");
  c.n_clusters = clusters;
  c.subjects_min = c.subjects_max = subjects;
  c.fixed_effects = {0.5};
  c.log_sigma_coeffs = {std::log(sigma)};
  c.random_sds = {tau};
  c.seed = seed;
  const Fit fit = fit_model(c.spec, simulate(c).data, sampler(c.spec, 1000, 1000, seed + 1));
  return variance_decomposition(fit, 0.9).median;
}

Outcome icc() {
  const double main = icc_median(400, 10, 1.0, 1.0, 61);
  const double none = icc_median(50, 10, 0.0, 1.0, 62);
  const double all = icc_median(50, 10, 1.0, 0.01, 63);
  const bool analytic = icc_value(0, 1, INFINITY) == 0 && icc_value(1, 1e-8, INFINITY) > 1 - 1e-12 &&
                        std::abs(icc_value(1, 1, INFINITY) - 0.5) < 1e-15 &&
                        std::abs(icc_value(1, 1, 4) - 1.0 / 3) < 1e-15;
  const bool ok = main >= 0.45 && main <= 0.55 && none < 0.05 && all > 0.95 && analytic;
  return {ok, "median ICC " + fmt(main) + " in [0.45, 0.55]; tau = 0 gives " + fmt(none) +
                  " < 0.05; sigma = 0.01 gives " + fmt(all) + " > 0.95; analytic limits " + (analytic ? "ok" : "wrong")};
}

// 7 ------------------------------------------------------------------------

struct CoverageCase {
  std::string preset_name;
  std::string level;
  Contrast contrast;
  EffectKind kind;
  SimConfig config;
};

int effect_coverage(const CoverageCase& cc, int reps, std::uint64_t seed0) {
  int hit = 0;
  for (int rep = 0; rep < reps; ++rep) {
    SimConfig c = cc.config;
    c.seed = seed0 + static_cast<std::uint64_t>(rep);
    const SimulationResult sim = simulate(c);
    const ModelSpec spec = preset(cc.preset_name, cc.level);
    const Fit fit = fit_model(spec, sim.data, sampler(spec, 500, 500, c.seed + 7919));
    const Cell base = cc.contrast == Contrast::between ? Cell{{"time", cc.level}} : Cell{{"group", cc.level}};
    const CellMap map = make_cell_map(*fit.model, cc.contrast, base);
    const auto [n1, n2] = cell_sizes(*fit.model, map);
    const EffectSize posterior = posterior_effect_size(fit.draws, cc.kind, map, n1, n2);
    const double truth = posterior_effect_size(truth_draws(sim), cc.kind, map, n1, n2).estimate;
    hit += posterior.ci->low <= truth && truth <= posterior.ci->high;
  }
  return hit;
}

Outcome effect_coverage_all() {
  CoverageCase pooled{"ttest_between", kPosttest, Contrast::between, EffectKind::d_s_ml_between, {}};
  pooled.config.spec = preset("ttest_between");
  pooled.config.n_clusters = 12;
  pooled.config.subjects_min = pooled.config.subjects_max = 10;
  pooled.config.fixed_effects = {0.40, 0.06};
  pooled.config.log_sigma_coeffs = {std::log(0.10), std::log(0.14)};
  pooled.config.random_sds = {0.03, 0.05, 0.1, 0.1};
  pooled.config.family = Family::student_t;
  pooled.config.nu = 10;

  CoverageCase paired{"ttest_within", kControl, Contrast::within, EffectKind::d_s_ml_within, {}};
  paired.config.spec = preset("ttest_within");
  paired.config.n_clusters = 12;
  paired.config.subjects_min = paired.config.subjects_max = 10;
  paired.config.intervention_fraction = 0;
  paired.config.fixed_effects = {0.30, 0.12};
  paired.config.log_sigma_coeffs = {std::log(0.10), std::log(0.13)};
  paired.config.random_sds = {0.05, 0.03, 0.05, 0.1, 0.1};
  paired.config.family = Family::student_t;
  paired.config.nu = 10;

  const int hp = effect_coverage(pooled, 40, 7000);
  const int hw = effect_coverage(paired, 40, 8000);
  return {hp >= 34 && hw >= 34, "pooled d_s_ml_between coverage " + ratio(hp, 40) + ", paired d_s_ml_within coverage " +
                                    ratio(hw, 40) + "; each >= 0.85"};
}

// 8 ------------------------------------------------------------------------

Outcome correlation_law() {
  bool ok = true;
  std::string detail;
  std::uint64_t seed = 80;
  for (double r : {0.0, 0.18, 0.39, 0.5, 0.8}) {
    SimConfig c;
    c.spec = preset("anova2");
    c.n_clusters = 50;
    c.subjects_min = c.subjects_max = 100;
    c.intervention_fraction = 0;
    // a single group leaves the timepre and timepost columns
    c.fixed_effects = {0.0, 0.3};
    c.log_sigma_coeffs = {0.0, 0.0};
    c.random_sds = {0.0};
    c.correlation_pre_post = r;
    c.seed = ++seed;
    const auto effects = sample_effect_sizes(simulate(c).data, SampleDesign::paired(kControl));
    double ds = 0, dz = 0, n = 0;
    for (const auto& e : effects) {
      if (e.kind == EffectKind::d_s_paired) ds = e.estimate;
      if (e.kind == EffectKind::d_z) {
        dz = e.estimate;
        n = e.n1;
      }
    }
    const double predicted = ds / std::sqrt(2 * (1 - r));
    const double se = std::sqrt(1 / n + dz * dz / (2 * n));
    const double z = std::abs(dz - predicted) / se;
    ok = ok && n == 5000 && z < 3;
    detail += (detail.empty() ? "" : "; ") + std::string("r ") + fmt(r, 2) + ": d_z " + fmt(dz) + " vs " + fmt(predicted) +
              " (" + fmt(z, 2) + " SE)";
  }
  return {ok, detail};
}

// 9 ------------------------------------------------------------------------

Outcome compare_fractions() {
  SimConfig c;
  c.spec = preset("anova2");
  c.n_clusters = 12;
  c.total_subjects = 629;
  c.intervention_fraction = 123.0 / 629.0;
  c.fixed_effects = {0.30, 0.34, 0.02, 0.02};
  c.log_sigma_coeffs = {std::log(0.15), std::log(0.10), std::log(2.5), 0.0};
  c.random_sds = {0.0};
  c.seed = 90;
  cli::CompareOptions o;
  o.design = SampleDesign::pooled(kPosttest);
  o.fractions = {0.1, 1.0};
  o.reps = 100;
  o.seed = 91;
  const cli::CompareResult res = cli::compare(simulate(c).data, o);
  const double small = res.mean_abs_difference(0.1, EffectKind::d_s_pooled, EffectKind::d_s_hetero);
  const double full = res.mean_abs_difference(1.0, EffectKind::d_s_pooled, EffectKind::d_s_hetero);
  return {small > full, "mean |d_s_pooled - d_s_hetero| " + fmt(small, 5) + " at fraction 0.1 > " + fmt(full, 5) +
                            " at fraction 1.0 (" + std::to_string(res.failures.size()) + " failed cells)"};
}

// 10 -----------------------------------------------------------------------

Outcome ppc() {
  int wins = 0;
  double ks1 = 0, ks2 = 0;
  for (int rep = 0; rep < 20; ++rep) {
    SimConfig c;
    c.spec = preset("anova2");
    c.n_clusters = 8;
    c.subjects_min = c.subjects_max = 25;
    c.fixed_effects = {0.30, 0.45, 0.05, 0.10};
    c.log_sigma_coeffs = {std::log(0.04), std::log(0.15), std::log(1.5), std::log(1.4)};
    c.random_sds = {0.02};
    c.seed = 1000 + static_cast<std::uint64_t>(rep);
    const LongDataset data = simulate(c).data;
    const ModelSpec s1 = preset("anova1"), s2 = preset("anova2");
    const Fit f1 = fit_model(s1, data, sampler(s1, 500, 500, c.seed + 1));
    const Fit f2 = fit_model(s2, data, sampler(s2, 500, 500, c.seed + 2));
    const double k1 = pp_density(f1, 100, c.seed + 3).ks;
    const double k2 = pp_density(f2, 100, c.seed + 3).ks;
    ks1 += k1 / 20;
    ks2 += k2 / 20;
    wins += k2 < k1;
  }
  return {wins >= 16, "anova2 KS below anova1 KS in " + ratio(wins, 20) + " >= 0.80 (mean KS " + fmt(ks2) + " vs " +
                          fmt(ks1) + ")"};
}

// 11 -----------------------------------------------------------------------

std::map<std::string, std::string> run_pipeline(const fs::path& dir) {
  fs::remove_all(dir);
  const std::string d = dir.string();
  const std::vector<std::vector<std::string>> commands{
      {"simulate", "--preset", "anova2", "--clusters", "6", "--subjects", "8", "--fixed", "0.22,0.44,0.04,0.03",
       "--log-sigma", "-2.4,-2.2,0.1,0.05", "--random-sds", "0.05", "--seed", "11", "--outdir", d + "/sim"},
      {"fit", "--input", d + "/sim/data.csv", "--preset", "anova2", "--warmup", "300", "--iter", "600", "--seed", "12",
       "--allow-unconverged", "--outdir", d + "/fit"},
      {"summary", "--fit", d + "/fit", "--format", "csv", "--outdir", d + "/summary"},
      {"effectsize", "--fit", d + "/fit", "--design", "pooled", "--level", "post", "--outdir", d + "/es"},
      {"ppcheck", "--fit", d + "/fit", "--mode", "density", "-m", "10", "--seed", "13", "--outdir", d + "/ppc"},
  };
  std::map<std::string, std::string> hashes;
  for (const auto& args : commands) {
    std::vector<const char*> argv{"bayesd"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    hashes["exit " + args[0]] = std::to_string(code);
    hashes["stdout " + args[0]] = io::fnv1a_hex(out.str());
  }
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream bytes;
    bytes << in.rdbuf();
    hashes[fs::relative(entry.path(), dir).string()] = io::fnv1a_hex(bytes.str());
  }
  return hashes;
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "bayesd_acceptance_determinism";
  const auto first = run_pipeline(dir);
  const auto second = run_pipeline(dir);
  fs::remove_all(dir);
  bool failed_command = false;
  for (const auto& [k, v] : first)
    if (k.starts_with("exit ") && v != "0") failed_command = true;
  std::string diff;
  for (const auto& [k, v] : first) {
    const auto it = second.find(k);
    if (it == second.end() || it->second != v) diff += " " + k;
  }
  const bool has_draws = first.contains("fit/draws.csv");
  return {diff.empty() && !failed_command && has_draws && first.size() == second.size(),
          std::to_string(first.size()) + " files and outputs hashed twice; " +
              (diff.empty() ? std::string("all identical") : "differ:" + diff) +
              (failed_command ? "; a command exited nonzero" : "")};
}

const std::vector<std::pair<std::string, std::function<Outcome()>>>& criteria() {
  static const std::vector<std::pair<std::string, std::function<Outcome()>>> list{
      {"formula reproduction", formulas},
      {"identity suite", identities},
      {"sampler correctness", conjugate},
      {"gradient check", gradients},
      {"parameter recovery", recovery},
      {"ICC recovery", icc},
      {"effect-size CI coverage", effect_coverage_all},
      {"d_z/d_s correlation law", correlation_law},
      {"pooled vs heteroscedastic by fraction", compare_fractions},
      {"posterior predictive discrimination", ppc},
      {"determinism", determinism},
  };
  return list;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> selected;
  app.add_option("--criterion", selected, "Criteria to run (default: all)")->check(CLI::Range(1, 11));
  CLI11_PARSE(app, argc, argv);
  if (selected.empty())
    for (int i = 1; i <= 11; ++i) selected.push_back(i);

  bool all = true;
  for (int i : selected) {
    const auto& [name, check] = criteria()[static_cast<std::size_t>(i - 1)];
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "criterion " << i << " [" << (o.pass ? "PASS" : "FAIL") << "] " << name << ": " << o.detail << " ["
              << fmt(seconds, 1) << " s]" << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
