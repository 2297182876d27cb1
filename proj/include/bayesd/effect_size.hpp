#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "bayesd/data.hpp"
#include "bayesd/design.hpp"
#include "bayesd/error.hpp"
#include "bayesd/nuts.hpp"
#include "bayesd/stats.hpp"

namespace bayesd {

class Model;

enum class EffectKind { d_s_pooled, d_s_hetero, d_s_paired, d_z, d_s_ml_between, d_s_ml_within, d_z_ml };

std::string to_string(EffectKind kind);
EffectKind parse_effect_kind(const std::string& text);
std::vector<EffectKind> all_effect_kinds();

struct EffectSize {
  EffectKind kind = EffectKind::d_s_pooled;
  double estimate = 0;
  std::optional<double> error;
  std::optional<stats::Interval> ci;
  double prob = 0.9;
  std::vector<double> draws;  // chain-major when posterior
  int n_chains = 0;
  double n1 = 0;
  double n2 = 0;
  std::vector<std::string> warnings;

  std::string label() const { return to_string(kind); }
};

struct MlTerms {
  double mu_diff = 0;
  double sigma1 = 0, sigma2 = 0;
  double sd1 = 0, sd2 = 0;
  double sd_sigma1 = 0, sd_sigma2 = 0;
  double sd_id = 0;
  // gain model
  double sigma = 0;
  double sd_pr = 0, sd_po = 0;
  double sd_sigma_pr = 0, sd_sigma_po = 0;
};

struct PairedBundle {
  EffectSize d_s;
  EffectSize d_z;
};

namespace detail {
template <typename Scalar>
Scalar checked_ratio(Scalar numerator, Scalar variance, const char* what) {
  if (!(variance > 0) || !std::isfinite(variance))
    throw UndefinedEffectError(std::string(what) + ": standardizer is zero or undefined");
  return numerator / std::sqrt(variance);
}
}  // namespace detail

template <typename Scalar>
Scalar d_s_pooled(Scalar mu1, Scalar mu2, Scalar s1, Scalar s2, double n1, double n2) {
  if (n1 < 2 || n2 < 2) throw UndefinedEffectError("d_s_pooled: each group needs at least 2 observations");
  const Scalar pooled = ((n1 - 1) * s1 * s1 + (n2 - 1) * s2 * s2) / (n1 + n2 - 2);
  return detail::checked_ratio<Scalar>(mu2 - mu1, pooled, "d_s_pooled");
}

template <typename Scalar>
Scalar d_s_hetero(Scalar mu1, Scalar mu2, Scalar s1, Scalar s2) {
  return detail::checked_ratio<Scalar>(mu2 - mu1, (s1 * s1 + s2 * s2) / 2, "d_s_hetero");
}

template <typename Scalar>
Scalar d_s_paired(Scalar mu1, Scalar mu2, Scalar s1, Scalar s2) {
  return detail::checked_ratio<Scalar>(std::sqrt(Scalar(2)) * (mu2 - mu1), s1 * s1 + s2 * s2, "d_s_paired");
}

template <typename Scalar>
Scalar d_z(Scalar mu_diff, Scalar sigma_diff) {
  return detail::checked_ratio<Scalar>(mu_diff, sigma_diff * sigma_diff, "d_z");
}

inline double d_s_ml_between(const MlTerms& t, double n1, double n2) {
  if (n1 < 1 || n2 < 1 || n1 + n2 <= 2) throw UndefinedEffectError("d_s_ml_between: group sizes too small");
  const double v1 = t.sigma1 * t.sigma1 + t.sd1 * t.sd1 + t.sd_sigma1 * t.sd_sigma1;
  const double v2 = t.sigma2 * t.sigma2 + t.sd2 * t.sd2 + t.sd_sigma2 * t.sd_sigma2;
  return std::sqrt(n1 + n2 - 2) *
         detail::checked_ratio(t.mu_diff, (n1 - 1) * v1 + (n2 - 1) * v2, "d_s_ml_between");
}

inline double d_s_ml_within(const MlTerms& t) {
  const double v = t.sigma1 * t.sigma1 + t.sd1 * t.sd1 + t.sd_sigma1 * t.sd_sigma1 + t.sigma2 * t.sigma2 +
                   t.sd2 * t.sd2 + t.sd_sigma2 * t.sd_sigma2 + 2 * t.sd_id * t.sd_id;
  return std::sqrt(2.0) * detail::checked_ratio(t.mu_diff, v, "d_s_ml_within");
}

inline double d_z_ml(const MlTerms& t) {
  const double v = t.sigma * t.sigma + t.sd_pr * t.sd_pr + t.sd_sigma_pr * t.sd_sigma_pr + t.sd_po * t.sd_po +
                   t.sd_sigma_po * t.sd_sigma_po;
  return detail::checked_ratio(t.mu_diff, v, "d_z_ml");
}

inline double t_from_dz(double dz, double n) {
  if (n < 1) throw ValidationError("t_from_dz needs n >= 1");
  return std::sqrt(n) * dz;
}

// True when the interval excludes zero; an endpoint at zero counts as inclusion.
bool is_significant(const EffectSize& effect);

// Linear combination of draw columns.
struct LinearExpr {
  std::vector<std::pair<std::string, double>> terms;
  bool empty() const noexcept { return terms.empty(); }
};

// Standard deviation of z' u for one group-level block, where u has the
// block's SDs and correlations.
struct BlockSdExpr {
  std::vector<double> coef;
  std::vector<std::string> sd;
  std::vector<std::string> cor;  // row-major over i < j; empty strings mean uncorrelated
};

// Several blocks combine by adding their variances.
struct SdExpr {
  std::vector<BlockSdExpr> blocks;
  bool empty() const noexcept { return blocks.empty(); }
};

enum class Contrast { between, within, gain };

// How each formula ingredient is read off one draw of a fitted model.
struct CellMap {
  Contrast contrast = Contrast::between;
  Cell cell1, cell2;
  LinearExpr mu1, mu2;
  LinearExpr log_sigma1, log_sigma2;  // gain: log_sigma1 is the single residual scale
  SdExpr sd1, sd2, sd_sigma1, sd_sigma2, sd_id;
  SdExpr sd_pr, sd_po, sd_sigma_pr, sd_sigma_po;
};

// Between contrasts compare group levels, within contrasts time levels; the
// other factors stay at `base` (default: their first level). Gain models need
// Contrast::gain. Throws DesignError when the model lacks two levels of the
// contrast factor.
CellMap make_cell_map(const Model& model, Contrast contrast, const Cell& base = {});

// Subjects per contrast cell in the model's data.
std::pair<double, double> cell_sizes(const Model& model, const CellMap& map);

// Per-draw formula ingredients; missing collects ingredients absent from the map.
MlTerms ml_terms(const Draws& draws, const CellMap& map, std::size_t chain, Eigen::Index iteration,
                 std::vector<std::string>* missing = nullptr);

struct PosteriorOptions {
  double prob = 0.9;
  bool median = false;
  bool hpd = false;
};

// Evaluates the kind's formula on every draw; ml terms absent from the model
// enter as zero with a warning. Throws DesignError on kind/design mismatch and
// Error on unresolvable parameter names.
EffectSize posterior_effect_size(const Draws& draws, EffectKind kind, const CellMap& map, double n1, double n2,
                                 const PosteriorOptions& options = {});

struct SampleDesign {
  enum class Kind { pooled, paired };
  Kind kind = Kind::pooled;
  std::string level;  // time for pooled, group for paired

  static SampleDesign pooled(std::string time) { return {Kind::pooled, std::move(time)}; }
  static SampleDesign paired(std::string group) { return {Kind::paired, std::move(group)}; }
};

// Point estimates from sample moments. Pooled designs compare control with
// intervention at one time (d_s_pooled, d_s_hetero, d_s_paired); paired
// designs compare pre with post within one group and add d_z.
std::vector<EffectSize> sample_effect_sizes(const LongDataset& data, const SampleDesign& design);

PairedBundle d_paired_bundle(const LongDataset& data, const std::string& group);
// Posterior bundle: d_s_paired from a within fit and d_z from a gain fit.
PairedBundle d_paired_bundle(const Draws& within_draws, const CellMap& within_map, const Draws& gain_draws,
                             const CellMap& gain_map, double n, const PosteriorOptions& options = {});

void write_effect_csv(std::ostream& out, const std::vector<EffectSize>& effects);
void write_effect_text(std::ostream& out, const std::vector<EffectSize>& effects);
// kind,chain,iteration,value
void write_effect_draws_csv(std::ostream& out, const std::vector<EffectSize>& effects);

}  // namespace bayesd
