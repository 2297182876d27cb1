#include "bayesd/effect_size.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <set>

#include "bayesd/io.hpp"
#include "bayesd/model.hpp"

namespace bayesd {

namespace {

const std::vector<std::pair<EffectKind, std::string>>& kind_names() {
  static const std::vector<std::pair<EffectKind, std::string>> names = {
      {EffectKind::d_s_pooled, "d_s_pooled"},         {EffectKind::d_s_hetero, "d_s_hetero"},
      {EffectKind::d_s_paired, "d_s_paired"},         {EffectKind::d_z, "d_z"},
      {EffectKind::d_s_ml_between, "d_s_ml_between"}, {EffectKind::d_s_ml_within, "d_s_ml_within"},
      {EffectKind::d_z_ml, "d_z_ml"}};
  return names;
}

struct ResolvedLinear {
  std::vector<std::pair<Eigen::Index, double>> terms;
  double eval(const Eigen::MatrixXd& m, Eigen::Index i) const {
    double s = 0;
    for (const auto& [j, c] : terms) s += c * m(i, j);
    return s;
  }
};

struct ResolvedBlock {
  std::vector<double> coef;
  std::vector<Eigen::Index> sd;
  std::vector<Eigen::Index> cor;  // -1 = uncorrelated
};

struct ResolvedSd {
  std::vector<ResolvedBlock> blocks;
  double eval(const Eigen::MatrixXd& m, Eigen::Index i) const {
    double var = 0;
    for (const auto& b : blocks) {
      const std::size_t q = b.sd.size();
      std::size_t k = 0;
      for (std::size_t a = 0; a < q; ++a) {
        const double sa = b.coef[a] * m(i, b.sd[a]);
        var += sa * sa;
        for (std::size_t c = a + 1; c < q; ++c, ++k) {
          if (b.cor[k] < 0) continue;
          var += 2 * sa * b.coef[c] * m(i, b.sd[c]) * m(i, b.cor[k]);
        }
      }
    }
    return std::sqrt(std::max(0.0, var));
  }
};

struct ResolvedMap {
  ResolvedLinear mu1, mu2, log_sigma1, log_sigma2;
  ResolvedSd sd1, sd2, sd_sigma1, sd_sigma2, sd_id, sd_pr, sd_po, sd_sigma_pr, sd_sigma_po;
  Contrast contrast = Contrast::between;
  std::vector<std::string> missing;

  MlTerms eval(const Eigen::MatrixXd& m, Eigen::Index i) const {
    MlTerms t;
    t.mu_diff = mu2.eval(m, i) - mu1.eval(m, i);
    t.sigma1 = std::exp(log_sigma1.eval(m, i));
    t.sigma2 = contrast == Contrast::gain ? t.sigma1 : std::exp(log_sigma2.eval(m, i));
    t.sigma = t.sigma1;
    t.sd1 = sd1.eval(m, i);
    t.sd2 = sd2.eval(m, i);
    t.sd_sigma1 = sd_sigma1.eval(m, i);
    t.sd_sigma2 = sd_sigma2.eval(m, i);
    t.sd_id = sd_id.eval(m, i);
    t.sd_pr = sd_pr.eval(m, i);
    t.sd_po = sd_po.eval(m, i);
    t.sd_sigma_pr = sd_sigma_pr.eval(m, i);
    t.sd_sigma_po = sd_sigma_po.eval(m, i);
    return t;
  }
};

ResolvedMap resolve(const Draws& draws, const CellMap& map) {
  ResolvedMap r;
  r.contrast = map.contrast;
  auto linear = [&](const LinearExpr& e) {
    ResolvedLinear out;
    for (const auto& [name, c] : e.terms) out.terms.emplace_back(draws.index_of(name), c);
    return out;
  };
  auto sd = [&](const SdExpr& e, const char* slot) {
    ResolvedSd out;
    if (e.empty()) r.missing.emplace_back(slot);
    for (const auto& b : e.blocks) {
      ResolvedBlock rb;
      rb.coef = b.coef;
      for (const auto& n : b.sd) rb.sd.push_back(draws.index_of(n));
      for (const auto& n : b.cor) rb.cor.push_back(n.empty() ? -1 : draws.index_of(n));
      out.blocks.push_back(std::move(rb));
    }
    return out;
  };
  r.mu1 = linear(map.mu1);
  r.mu2 = linear(map.mu2);
  r.log_sigma1 = linear(map.log_sigma1);
  r.log_sigma2 = linear(map.log_sigma2);
  r.sd1 = sd(map.sd1, "sd1");
  r.sd2 = sd(map.sd2, "sd2");
  r.sd_sigma1 = sd(map.sd_sigma1, "sd_sigma1");
  r.sd_sigma2 = sd(map.sd_sigma2, "sd_sigma2");
  r.sd_id = sd(map.sd_id, "sd_id");
  r.sd_pr = sd(map.sd_pr, "sd_pr");
  r.sd_po = sd(map.sd_po, "sd_po");
  r.sd_sigma_pr = sd(map.sd_sigma_pr, "sd_sigma_pr");
  r.sd_sigma_po = sd(map.sd_sigma_po, "sd_sigma_po");
  return r;
}

LinearExpr linear_from(const Coding& coding, const Cell& cell, const std::string& prefix) {
  LinearExpr e;
  const Eigen::RowVectorXd row = coding.row(cell);
  for (Eigen::Index j = 0; j < row.size(); ++j)
    if (row[j] != 0) e.terms.emplace_back(prefix + coding.names()[static_cast<std::size_t>(j)], row[j]);
  return e;
}

std::optional<BlockSdExpr> block_from(const RandomDesign& rd, const Cell& cell) {
  const Eigen::RowVectorXd z = rd.inner.row(cell);
  const std::string pre = rd.on_sigma ? "sigma_" : "";
  const auto& names = rd.inner.names();
  std::vector<std::size_t> used;
  for (Eigen::Index k = 0; k < z.size(); ++k)
    if (z[k] != 0) used.push_back(static_cast<std::size_t>(k));
  if (used.empty()) return std::nullopt;
  BlockSdExpr b;
  for (std::size_t a = 0; a < used.size(); ++a) {
    b.coef.push_back(z[static_cast<Eigen::Index>(used[a])]);
    b.sd.push_back("sd_" + rd.factor + "__" + pre + names[used[a]]);
    for (std::size_t c = a + 1; c < used.size(); ++c)
      b.cor.push_back(rd.correlated ? "cor_" + rd.factor + "__" + pre + names[used[a]] + "__" + pre + names[used[c]]
                                    : std::string());
  }
  return b;
}

bool needs_two_cells(EffectKind kind) {
  return kind == EffectKind::d_s_pooled || kind == EffectKind::d_s_hetero || kind == EffectKind::d_s_paired ||
         kind == EffectKind::d_s_ml_between || kind == EffectKind::d_s_ml_within;
}

void check_kind(EffectKind kind, const CellMap& map) {
  const std::string k = to_string(kind);
  if (needs_two_cells(kind) && map.contrast == Contrast::gain)
    throw DesignError(k + " needs a two-cell contrast, but the model is a gain model");
  if ((kind == EffectKind::d_z || kind == EffectKind::d_z_ml) && map.contrast != Contrast::gain)
    throw DesignError(k + " needs a gain model (po - pr response)");
  if (kind == EffectKind::d_s_ml_between && map.contrast != Contrast::between)
    throw DesignError(k + " needs a between-group contrast");
  if (kind == EffectKind::d_s_ml_within) {
    if (map.contrast != Contrast::within) throw DesignError(k + " needs a pre/post contrast");
    if (map.sd_id.empty()) throw DesignError(k + " needs a subject random intercept (1|id) in the model");
  }
}

std::vector<std::string> ml_slots(EffectKind kind) {
  switch (kind) {
    case EffectKind::d_s_ml_between: return {"sd1", "sd2", "sd_sigma1", "sd_sigma2"};
    case EffectKind::d_s_ml_within: return {"sd1", "sd2", "sd_sigma1", "sd_sigma2", "sd_id"};
    case EffectKind::d_z_ml: return {"sd_pr", "sd_po", "sd_sigma_pr", "sd_sigma_po"};
    default: return {};
  }
}

double evaluate(EffectKind kind, const MlTerms& t, double n1, double n2) {
  switch (kind) {
    case EffectKind::d_s_pooled: return d_s_pooled(0.0, t.mu_diff, t.sigma1, t.sigma2, n1, n2);
    case EffectKind::d_s_hetero: return d_s_hetero(0.0, t.mu_diff, t.sigma1, t.sigma2);
    case EffectKind::d_s_paired: return d_s_paired(0.0, t.mu_diff, t.sigma1, t.sigma2);
    case EffectKind::d_z: return d_z(t.mu_diff, t.sigma);
    case EffectKind::d_s_ml_between: return d_s_ml_between(t, n1, n2);
    case EffectKind::d_s_ml_within: return d_s_ml_within(t);
    case EffectKind::d_z_ml: return d_z_ml(t);
  }
  return 0;
}

void summarize_draws(EffectSize& e, const PosteriorOptions& options) {
  const std::span<const double> x(e.draws);
  e.estimate = options.median ? stats::median(x) : stats::mean(x);
  e.error = e.draws.size() > 1 ? stats::sd(x) : 0.0;
  e.ci = options.hpd ? stats::highest_density(x, options.prob) : stats::equal_tailed(x, options.prob);
  e.prob = options.prob;
}

std::string na_or(const std::optional<double>& v) { return v ? io::format_double(*v) : "NA"; }

}  // namespace

std::string to_string(EffectKind kind) {
  for (const auto& [k, n] : kind_names())
    if (k == kind) return n;
  return "?";
}

EffectKind parse_effect_kind(const std::string& text) {
  for (const auto& [k, n] : kind_names())
    if (n == text) return k;
  throw ValidationError("unknown effect size kind '" + text + "'");
}

std::vector<EffectKind> all_effect_kinds() {
  std::vector<EffectKind> out;
  for (const auto& [k, n] : kind_names()) out.push_back(k);
  return out;
}

bool is_significant(const EffectSize& effect) {
  if (!effect.ci) throw ValidationError("significance needs a credible interval for " + effect.label());
  return effect.ci->low > 0 || effect.ci->high < 0;
}

CellMap make_cell_map(const Model& model, Contrast contrast, const Cell& base) {
  const auto& d = model.design();
  const bool gain_model = model.spec().response == Response::gain;
  if (gain_model != (contrast == Contrast::gain))
    throw DesignError(gain_model ? "gain models support only the gain contrast"
                                 : "the gain contrast needs a po - pr response");
  CellMap map;
  map.contrast = contrast;
  Cell cell = base;
  for (const auto& [factor, levels] : d.levels)
    if (!cell.count(factor) && !levels.empty()) cell[factor] = levels.front();

  if (contrast == Contrast::gain) {
    map.cell1 = map.cell2 = cell;
    map.mu2 = linear_from(d.mean_coding, cell, "b_");
    map.log_sigma1 = linear_from(d.sigma_coding, cell, "b_sigma_");
    map.log_sigma2 = map.log_sigma1;
  } else {
    const std::string factor = contrast == Contrast::between ? "group" : "time";
    const auto it = d.levels.find(factor);
    if (it == d.levels.end() || it->second.size() < 2)
      throw DesignError("a " + std::string(contrast == Contrast::between ? "between" : "within") +
                        " contrast needs two levels of '" + factor + "' in the fitted data");
    map.cell1 = map.cell2 = cell;
    map.cell1[factor] = it->second[0];
    map.cell2[factor] = it->second[1];
    map.mu1 = linear_from(d.mean_coding, map.cell1, "b_");
    map.mu2 = linear_from(d.mean_coding, map.cell2, "b_");
    map.log_sigma1 = linear_from(d.sigma_coding, map.cell1, "b_sigma_");
    map.log_sigma2 = linear_from(d.sigma_coding, map.cell2, "b_sigma_");
  }

  auto add = [](SdExpr& slot, std::optional<BlockSdExpr> b) {
    if (b) slot.blocks.push_back(std::move(*b));
  };
  for (std::size_t b = 0; b < model.blocks().size(); ++b) {
    const RandomDesign& rd = model.block_design(b);
    if (contrast == Contrast::gain) {
      if (rd.factor == "class_pre") add(rd.on_sigma ? map.sd_sigma_pr : map.sd_pr, block_from(rd, map.cell1));
      if (rd.factor == "class_post") add(rd.on_sigma ? map.sd_sigma_po : map.sd_po, block_from(rd, map.cell1));
    } else if (rd.factor == "id" && !rd.on_sigma) {
      add(map.sd_id, block_from(rd, map.cell1));
    } else {
      add(rd.on_sigma ? map.sd_sigma1 : map.sd1, block_from(rd, map.cell1));
      add(rd.on_sigma ? map.sd_sigma2 : map.sd2, block_from(rd, map.cell2));
    }
  }
  return map;
}

std::pair<double, double> cell_sizes(const Model& model, const CellMap& map) {
  const auto& f = model.frame();
  auto count = [&](const Cell& cell) {
    std::set<std::string> ids;
    const auto& id = f.factor("id");
    for (std::size_t i = 0; i < id.size(); ++i) {
      bool match = true;
      for (const char* factor : {"group", "time"}) {
        const auto it = f.factors.find(factor);
        const auto c = cell.find(factor);
        if (it != f.factors.end() && c != cell.end() && it->second[i] != c->second) match = false;
      }
      if (match) ids.insert(id[i]);
    }
    return static_cast<double>(ids.size());
  };
  return {count(map.cell1), count(map.cell2)};
}

MlTerms ml_terms(const Draws& draws, const CellMap& map, std::size_t chain, Eigen::Index iteration,
                 std::vector<std::string>* missing) {
  const ResolvedMap r = resolve(draws, map);
  if (missing) *missing = r.missing;
  return r.eval(draws.chains.at(chain), iteration);
}

EffectSize posterior_effect_size(const Draws& draws, EffectKind kind, const CellMap& map, double n1, double n2,
                                 const PosteriorOptions& options) {
  check_kind(kind, map);
  if (draws.total() == 0) throw ValidationError("no draws to compute " + to_string(kind) + " from");
  const ResolvedMap r = resolve(draws, map);
  EffectSize e;
  e.kind = kind;
  e.n1 = n1;
  e.n2 = n2;
  e.n_chains = static_cast<int>(draws.n_chains());
  for (const auto& slot : ml_slots(kind))
    if (std::find(r.missing.begin(), r.missing.end(), slot) != r.missing.end())
      e.warnings.push_back(to_string(kind) + ": " + slot + " is not in the model and enters as 0");
  e.draws.reserve(draws.total());
  for (const auto& chain : draws.chains)
    for (Eigen::Index i = 0; i < chain.rows(); ++i) e.draws.push_back(evaluate(kind, r.eval(chain, i), n1, n2));
  summarize_draws(e, options);
  return e;
}

namespace {

struct Moments {
  double mean, sd, n;
};

// An sd at round-off level of the data is reported as exactly zero.
Moments moments(const std::vector<double>& x) {
  const std::span<const double> s(x);
  Moments m{stats::mean(s), stats::sd(s), static_cast<double>(x.size())};
  double scale = 0;
  for (double v : x) scale = std::max(scale, std::abs(v));
  if (m.sd <= 64 * std::numeric_limits<double>::epsilon() * scale) m.sd = 0;
  return m;
}

template <typename F>
void push_effect(std::vector<EffectSize>& out, EffectKind kind, double n1, double n2, F&& compute) {
  EffectSize e;
  e.kind = kind;
  e.n1 = n1;
  e.n2 = n2;
  try {
    e.estimate = compute();
  } catch (const UndefinedEffectError& err) {
    e.estimate = std::numeric_limits<double>::quiet_NaN();
    e.warnings.push_back(err.what());
  }
  out.push_back(std::move(e));
}

}  // namespace

std::vector<EffectSize> sample_effect_sizes(const LongDataset& data, const SampleDesign& design) {
  std::vector<EffectSize> out;
  Moments a{}, b{};
  std::vector<double> gains;
  if (design.kind == SampleDesign::Kind::pooled) {
    std::map<std::string, std::vector<double>> by_group;
    for (const auto& r : data.records)
      if (r.time == design.level) by_group[r.group].push_back(r.score);
    const auto c = by_group.find(kControl), t = by_group.find(kIntervention);
    if (c == by_group.end() || t == by_group.end())
      throw ValidationError("pooled design at time '" + design.level + "' needs control and intervention cells");
    if (c->second.size() < 2 || t->second.size() < 2)
      throw ValidationError("each group needs at least 2 observations at time '" + design.level + "'");
    a = moments(c->second);
    b = moments(t->second);
  } else {
    const WideDataset wide = pivot_wide(filter(data, nullptr, &design.level));
    if (wide.records.size() < 2)
      throw ValidationError("paired design in group '" + design.level + "' needs at least 2 complete subjects");
    std::vector<double> pre, post;
    for (const auto& w : wide.records) {
      pre.push_back(w.pr);
      post.push_back(w.po);
      gains.push_back(w.gain());
    }
    a = moments(pre);
    b = moments(post);
  }
  push_effect(out, EffectKind::d_s_pooled, a.n, b.n, [&] { return d_s_pooled(a.mean, b.mean, a.sd, b.sd, a.n, b.n); });
  push_effect(out, EffectKind::d_s_hetero, a.n, b.n, [&] { return d_s_hetero(a.mean, b.mean, a.sd, b.sd); });
  push_effect(out, EffectKind::d_s_paired, a.n, b.n, [&] { return d_s_paired(a.mean, b.mean, a.sd, b.sd); });
  if (design.kind == SampleDesign::Kind::paired) {
    const Moments g = moments(gains);
    push_effect(out, EffectKind::d_z, g.n, g.n, [&] { return d_z(g.mean, g.sd); });
  }
  if (std::all_of(out.begin(), out.end(), [](const EffectSize& e) { return std::isnan(e.estimate); }))
    throw UndefinedEffectError("no effect size is defined: " + out.front().warnings.front());
  return out;
}

PairedBundle d_paired_bundle(const LongDataset& data, const std::string& group) {
  const auto all = sample_effect_sizes(data, SampleDesign::paired(group));
  PairedBundle b;
  for (const auto& e : all) {
    if (e.kind == EffectKind::d_s_paired) b.d_s = e;
    if (e.kind == EffectKind::d_z) b.d_z = e;
  }
  return b;
}

PairedBundle d_paired_bundle(const Draws& within_draws, const CellMap& within_map, const Draws& gain_draws,
                             const CellMap& gain_map, double n, const PosteriorOptions& options) {
  PairedBundle b;
  b.d_s = posterior_effect_size(within_draws, EffectKind::d_s_paired, within_map, n, n, options);
  b.d_z = posterior_effect_size(gain_draws, EffectKind::d_z, gain_map, n, n, options);
  return b;
}

void write_effect_csv(std::ostream& out, const std::vector<EffectSize>& effects) {
  out << "kind,estimate,error,ci_low,ci_high,n1,n2,significant\n";
  for (const auto& e : effects) {
    out << e.label() << ',' << io::format_double(e.estimate) << ',' << na_or(e.error) << ','
        << na_or(e.ci ? std::optional(e.ci->low) : std::nullopt) << ','
        << na_or(e.ci ? std::optional(e.ci->high) : std::nullopt) << ',' << io::format_double(e.n1) << ','
        << io::format_double(e.n2) << ',' << (e.ci ? (is_significant(e) ? "true" : "false") : "NA") << '\n';
  }
}

void write_effect_text(std::ostream& out, const std::vector<EffectSize>& effects) {
  for (const auto& e : effects) {
    out << e.label() << " = " << io::format_fixed(e.estimate, 2);
    if (e.error) out << " (sd " << io::format_fixed(*e.error, 2) << ")";
    if (e.ci) {
      out << ", " << io::format_fixed(100 * e.prob, 0) << "%-CI [" << io::format_fixed(e.ci->low, 2) << ", "
          << io::format_fixed(e.ci->high, 2) << "]" << (is_significant(e) ? ", significant" : "");
    }
    out << "; n1 = " << e.n1 << ", n2 = " << e.n2 << '\n';
    for (const auto& w : e.warnings) out << "  warning: " << w << '\n';
  }
}

void write_effect_draws_csv(std::ostream& out, const std::vector<EffectSize>& effects) {
  out << "kind,chain,iteration,value\n";
  for (const auto& e : effects) {
    if (e.draws.empty()) continue;
    const std::size_t chains = e.n_chains > 0 ? static_cast<std::size_t>(e.n_chains) : 1;
    const std::size_t per = e.draws.size() / chains;
    for (std::size_t i = 0; i < e.draws.size(); ++i)
      out << e.label() << ',' << (i / per + 1) << ',' << (i % per + 1) << ',' << io::format_double(e.draws[i]) << '\n';
  }
}

}  // namespace bayesd
