#include "bayesd/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <map>
#include <sstream>
#include <thread>

#include "bayesd/diagnostics.hpp"
#include "bayesd/error.hpp"
#include "bayesd/fit.hpp"
#include "bayesd/io.hpp"
#include "bayesd/ppc.hpp"
#include "bayesd/simulate.hpp"
#include "bayesd/summary.hpp"

namespace bayesd::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

struct Shared {
  std::string input;
  std::string outdir;
  std::string format = "text";
  std::uint64_t seed = 1;
  double prob = 0.9;
  int warmup = 1000;
  int iter = 5000;
  int chains = 4;
  double adapt_delta = 0.8;
  int max_treedepth = 10;
  CLI::Option* adapt_delta_opt = nullptr;
  CLI::Option* max_treedepth_opt = nullptr;
};

void add_shared(CLI::App* sub, Shared& s) {
  sub->add_option("--input", s.input, "Input CSV (long format: id,class,group,time,score)");
  sub->add_option("--outdir", s.outdir, "Directory for output files");
  sub->add_option("--seed", s.seed, "Random seed");
  sub->add_option("--prob", s.prob, "Credible interval probability")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--warmup", s.warmup, "Warmup iterations per chain");
  sub->add_option("--iter", s.iter, "Total iterations per chain, warmup included");
  sub->add_option("--chains", s.chains, "Number of chains");
  s.adapt_delta_opt = sub->add_option("--adapt-delta", s.adapt_delta, "Target acceptance statistic");
  s.max_treedepth_opt = sub->add_option("--max-treedepth", s.max_treedepth, "Maximum NUTS tree depth");
  sub->add_option("--format", s.format, "Output format")->check(CLI::IsMember({"text", "csv", "json"}));
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

void require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw ValidationError(flag + " is required");
}

json shared_json(const Shared& s) {
  return json{{"input", s.input},   {"outdir", s.outdir}, {"format", s.format},
              {"seed", s.seed},     {"prob", s.prob},     {"warmup", s.warmup},
              {"iter", s.iter},     {"chains", s.chains}, {"adapt_delta", s.adapt_delta},
              {"max_treedepth", s.max_treedepth}};
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config,
                    const std::vector<std::string>& argv, const std::vector<fs::path>& inputs,
                    const std::vector<std::string>& outputs) {
  json m;
  m["tool"] = "bayesd";
  m["version"] = kVersion;
  m["command"] = command;
  m["argv"] = argv;
  m["seed"] = config.contains("seed") ? config["seed"] : json(nullptr);
  m["config"] = config;
  json in = json::array();
  for (const auto& p : inputs) {
    if (p.empty()) continue;
    in.push_back({{"path", p.string()}, {"fnv1a64", io::fnv1a_hex(read_bytes(p))}});
  }
  m["inputs"] = in;
  m["outputs"] = outputs;
  open_out(dir / "manifest.json") << m.dump(2) << '\n';
}

LongDataset load_input(const std::string& path, std::ostream& err) {
  require(path, "--input");
  auto result = load_long(fs::path(path));
  for (const auto& w : result.warnings) err << "warning: " << w << '\n';
  return std::move(result.data);
}

SamplerConfig sampler_from(const Shared& s, const ModelSpec& spec, const std::string& init) {
  SamplerConfig c;
  c.warmup = s.warmup;
  c.iter = s.iter;
  c.chains = s.chains;
  c.seed = s.seed;
  c.adapt_delta = s.adapt_delta_opt->count() ? s.adapt_delta : spec.adapt_delta;
  c.max_treedepth = s.max_treedepth_opt->count() ? s.max_treedepth : spec.max_treedepth;
  c.init = init == "zero" ? SamplerConfig::Init::zero : SamplerConfig::Init::random;
  return c;
}

void print_warnings(std::ostream& err, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) err << "warning: " << w << '\n';
}

void write_diagnostics_csv(std::ostream& out, const Diagnostics& d) {
  out << "parameter,rhat,ess_bulk,ess_tail,mcse\n";
  for (const auto& p : d.parameters)
    out << p.name << ',' << io::format_double(p.rhat) << ',' << io::format_double(p.ess_bulk) << ','
        << io::format_double(p.ess_tail) << ',' << io::format_double(p.mcse) << '\n';
}

json summary_json(const SummaryTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"parameter", r.parameter},
                    {"estimate", r.estimate},
                    {"error", r.error},
                    {"ci_low", r.ci_low},
                    {"ci_high", r.ci_high}});
  return json{{"prob", t.prob}, {"rows", rows}};
}

json effect_json(const std::vector<EffectSize>& effects) {
  json out = json::array();
  for (const auto& e : effects) {
    json j{{"kind", e.label()}, {"estimate", e.estimate}, {"n1", e.n1}, {"n2", e.n2}};
    if (e.error) j["error"] = *e.error;
    if (e.ci) {
      j["ci_low"] = e.ci->low;
      j["ci_high"] = e.ci->high;
      j["prob"] = e.prob;
      j["significant"] = is_significant(e);
    }
    if (!e.warnings.empty()) j["warnings"] = e.warnings;
    out.push_back(std::move(j));
  }
  return out;
}

std::vector<EffectKind> default_kinds(Contrast c, const CellMap& map) {
  switch (c) {
    case Contrast::between: return {EffectKind::d_s_pooled, EffectKind::d_s_hetero, EffectKind::d_s_ml_between};
    case Contrast::within:
      if (map.sd_id.empty()) return {EffectKind::d_s_paired};
      return {EffectKind::d_s_paired, EffectKind::d_s_ml_within};
    case Contrast::gain: return {EffectKind::d_z, EffectKind::d_z_ml};
  }
  return {};
}

// ---------------------------------------------------------------- commands

int cmd_describe(const Shared& s, const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  const LongDataset data = load_input(s.input, err);
  const auto cells = descriptives(data);
  auto csv = [&](std::ostream& o) {
    o << "time,group,n,mean,sd,median,q1,q3,outliers\n";
    for (const auto& c : cells)
      o << c.time << ',' << c.group << ',' << c.n << ',' << io::format_double(c.mean) << ','
        << io::format_double(c.sd) << ',' << io::format_double(c.median) << ',' << io::format_double(c.q1) << ','
        << io::format_double(c.q3) << ',' << c.outliers.size() << '\n';
  };
  if (s.format == "csv") {
    csv(out);
  } else if (s.format == "json") {
    json j = json::array();
    for (const auto& c : cells)
      j.push_back({{"time", c.time}, {"group", c.group}, {"n", c.n}, {"mean", c.mean}, {"sd", c.sd},
                   {"median", c.median}, {"q1", c.q1}, {"q3", c.q3}, {"outliers", c.outliers}});
    out << j.dump(2) << '\n';
  } else {
    out << std::left << std::setw(6) << "time" << std::setw(14) << "group" << std::right << std::setw(6) << "n"
        << std::setw(9) << "mean" << std::setw(9) << "sd" << std::setw(9) << "median" << std::setw(9) << "q1"
        << std::setw(9) << "q3" << std::setw(10) << "outliers" << '\n';
    for (const auto& c : cells) {
      out << std::left << std::setw(6) << c.time << std::setw(14) << c.group << std::right << std::setw(6) << c.n;
      if (c.empty) {
        out << "  (no records)\n";
        continue;
      }
      out << std::setw(9) << io::format_fixed(c.mean, 3) << std::setw(9) << io::format_fixed(c.sd, 3) << std::setw(9)
          << io::format_fixed(c.median, 3) << std::setw(9) << io::format_fixed(c.q1, 3) << std::setw(9)
          << io::format_fixed(c.q3, 3) << std::setw(10) << c.outliers.size() << '\n';
    }
  }
  if (!s.outdir.empty()) {
    auto f = open_out(fs::path(s.outdir) / "descriptives.csv");
    csv(f);
    write_manifest(s.outdir, "describe", shared_json(s), argv, {s.input}, {"descriptives.csv"});
  }
  return 0;
}

struct SimulateFlags {
  std::string preset = "anova2";
  std::size_t clusters = 12;
  std::size_t subjects = 30;
  std::size_t subjects_max = 0;
  std::size_t total_subjects = 0;
  std::string assignment = "per_subject";
  double intervention_fraction = 0.5;
  std::vector<double> fixed, log_sigma, random_sds;
  std::string family = "normal";
  double nu = INFINITY;
  double correlation = 0;
  double pretest_mean = 0.3;
  double pretest_sd = 0.1;
};

int cmd_simulate(const Shared& s, const SimulateFlags& f, const std::vector<std::string>& argv, std::ostream& out) {
  require(s.outdir, "--outdir");
  SimConfig c;
  c.spec = preset(f.preset);
  c.n_clusters = f.clusters;
  c.subjects_min = f.subjects;
  c.subjects_max = std::max(f.subjects, f.subjects_max);
  c.total_subjects = f.total_subjects;
  c.assignment = f.assignment == "per_cluster" ? SimConfig::Assignment::per_cluster : SimConfig::Assignment::per_subject;
  c.intervention_fraction = f.intervention_fraction;
  c.fixed_effects = f.fixed;
  c.log_sigma_coeffs = f.log_sigma;
  c.random_sds = f.random_sds;
  c.family = parse_family(f.family);
  c.nu = f.nu;
  c.correlation_pre_post = f.correlation;
  c.pretest_mean = f.pretest_mean;
  c.pretest_sd = f.pretest_sd;
  c.seed = s.seed;
  const SimulationResult sim = simulate(c);
  const fs::path dir(s.outdir);
  auto data = open_out(dir / "data.csv");
  write_long(data, sim.data);
  auto truth = open_out(dir / "truth.csv");
  truth << "parameter,value\n";
  for (std::size_t i = 0; i < sim.names.size(); ++i)
    truth << sim.names[i] << ',' << io::format_double(sim.truth[static_cast<Eigen::Index>(i)]) << '\n';
  json config = shared_json(s);
  config["preset"] = f.preset;
  config["clusters"] = f.clusters;
  config["subjects"] = c.subjects_min;
  config["subjects_max"] = c.subjects_max;
  config["total_subjects"] = c.total_subjects;
  config["assignment"] = f.assignment;
  config["intervention_fraction"] = f.intervention_fraction;
  config["fixed"] = f.fixed;
  config["log_sigma"] = f.log_sigma;
  config["random_sds"] = f.random_sds;
  config["family"] = f.family;
  config["nu"] = std::isfinite(f.nu) ? json(f.nu) : json("inf");
  config["correlation"] = f.correlation;
  write_manifest(dir, "simulate", config, argv, {}, {"data.csv", "truth.csv"});
  out << "simulated " << sim.data.records.size() << " records into " << (dir / "data.csv").string() << '\n';
  return 0;
}

struct FitFlags {
  std::string preset;
  std::string level;
  std::string model_file;
  std::string family;
  std::string init = "random";
  bool allow_unconverged = false;
};

ModelSpec spec_from(const FitFlags& f) {
  if (f.preset.empty() == f.model_file.empty()) throw ValidationError("give exactly one of --preset and --model");
  ModelSpec spec = f.preset.empty() ? parse_model_spec(read_bytes(f.model_file)) : preset(f.preset, f.level);
  if (!f.family.empty()) spec.family = parse_family(f.family);
  return spec;
}

int cmd_fit(const Shared& s, const FitFlags& f, const std::vector<std::string>& argv, std::ostream& out,
            std::ostream& err) {
  require(s.outdir, "--outdir");
  const LongDataset data = load_input(s.input, err);
  const ModelSpec spec = spec_from(f);
  const SamplerConfig sampler = sampler_from(s, spec, f.init);
  const Fit fit = fit_model(spec, data, sampler);
  const fs::path dir(s.outdir);
  save_fit(dir, fit);
  auto diag = open_out(dir / "diagnostics.csv");
  write_diagnostics_csv(diag, fit.diagnostics);
  SummaryOptions so;
  so.prob = s.prob;
  const SummaryTable table = summarize(fit.draws, so);
  auto sum = open_out(dir / "summary.csv");
  write_csv(sum, table);
  json config = shared_json(s);
  config["adapt_delta"] = sampler.adapt_delta;
  config["max_treedepth"] = sampler.max_treedepth;
  config["model"] = serialize(spec);
  config["init"] = f.init;
  config["allow_unconverged"] = f.allow_unconverged;
  write_manifest(dir, "fit", config, argv, {s.input},
                 {"model.txt", "sampler.txt", "data.csv", "draws.csv", "diagnostics.csv", "summary.csv"});
  if (s.format == "csv") write_csv(out, table);
  else if (s.format == "json") out << summary_json(table).dump(2) << '\n';
  else write_text(out, table);
  print_warnings(err, fit.diagnostics.warnings);
  if (!fit.converged()) {
    const std::string msg = "fit did not converge (max Rhat " + io::format_fixed(fit.diagnostics.max_rhat(), 3) +
                            ", " + std::to_string(fit.diagnostics.divergences()) + " divergent transitions)";
    if (!f.allow_unconverged) throw ConvergenceFailure(msg + "; rerun with --allow-unconverged to accept it");
    err << "warning: " << msg << '\n';
  }
  return 0;
}

int cmd_summary(const Shared& s, const std::string& fit_dir, bool median, bool hpd,
                const std::vector<std::string>& parameters, std::ostream& out) {
  require(fit_dir, "--fit");
  const Fit fit = load_fit(fit_dir);
  SummaryOptions so;
  so.prob = s.prob;
  so.median = median;
  so.hpd = hpd;
  so.parameters = parameters;
  const SummaryTable table = summarize(fit.draws, so);
  if (s.format == "csv") write_csv(out, table);
  else if (s.format == "json") out << summary_json(table).dump(2) << '\n';
  else write_text(out, table);
  if (!s.outdir.empty()) {
    auto f = open_out(fs::path(s.outdir) / "summary.csv");
    write_csv(f, table);
  }
  return 0;
}

int cmd_icc(const Shared& s, const std::string& fit_dir, std::ostream& out, std::ostream& err) {
  require(fit_dir, "--fit");
  const Fit fit = load_fit(fit_dir);
  const VarianceRatio r = variance_decomposition(fit, s.prob);
  if (r.excluded > 0) err << "warning: " << r.excluded << " draw(s) with nu <= 2 excluded\n";
  if (s.format == "csv") {
    out << "estimate,ci_low,ci_high,prob,excluded\n"
        << io::format_double(r.median) << ',' << io::format_double(r.ci.low) << ',' << io::format_double(r.ci.high)
        << ',' << io::format_double(r.prob) << ',' << r.excluded << '\n';
  } else if (s.format == "json") {
    out << json{{"estimate", r.median}, {"ci_low", r.ci.low}, {"ci_high", r.ci.high}, {"prob", r.prob},
                {"excluded", r.excluded}}
               .dump(2)
        << '\n';
  } else {
    out << "ICC (posterior median) = " << io::format_fixed(r.median, 3) << ", "
        << io::format_fixed(100 * r.prob, 0) << "%-CI [" << io::format_fixed(r.ci.low, 3) << ", "
        << io::format_fixed(r.ci.high, 3) << "]\n";
  }
  return 0;
}

int cmd_ppcheck(const Shared& s, const std::string& fit_dir, const std::string& mode, std::size_t m,
                const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  require(fit_dir, "--fit");
  const Fit fit = load_fit(fit_dir);
  const fs::path dir = s.outdir.empty() ? fs::path(fit_dir) : fs::path(s.outdir);
  if (mode == "density") {
    const PpcReport r = pp_density(fit, m, s.seed);
    print_warnings(err, r.warnings);
    auto f = open_out(dir / "ppc_density.csv");
    write_ppc_density_csv(f, r);
    out << "replicates = " << r.replicates.size() << ", KS distance = " << io::format_fixed(r.ks, 4)
        << ", p(mean) = " << io::format_fixed(r.p_mean, 3) << ", p(sd) = " << io::format_fixed(r.p_sd, 3) << '\n';
  } else {
    const PpcReport r = pp_error(fit);
    print_warnings(err, r.warnings);
    auto f = open_out(dir / "ppc_error.csv");
    write_ppc_error_csv(f, r);
    out << "observations = " << r.residual.size()
        << ", corr(|residual|, prediction) = " << io::format_fixed(r.abs_residual_correlation, 3) << '\n';
  }
  json config = shared_json(s);
  config["fit"] = fit_dir;
  config["mode"] = mode;
  config["m"] = m;
  write_manifest(dir, "ppcheck", config, argv, {fs::path(fit_dir) / "draws.csv"},
                 {mode == "density" ? "ppc_density.csv" : "ppc_error.csv"});
  return 0;
}

struct EffectFlags {
  std::string fit_dir;
  std::string design = "pooled";
  std::string level;
  std::vector<std::string> kinds;
  bool median = false;
  bool hpd = false;
};

int cmd_effectsize(const Shared& s, const EffectFlags& f, const std::vector<std::string>& argv, std::ostream& out,
                   std::ostream& err) {
  std::vector<EffectSize> effects;
  std::vector<fs::path> inputs;
  if (!f.fit_dir.empty()) {
    const Fit fit = load_fit(f.fit_dir);
    inputs.push_back(fs::path(f.fit_dir) / "draws.csv");
    const Contrast contrast = f.design == "gain"     ? Contrast::gain
                              : f.design == "paired" ? Contrast::within
                                                     : Contrast::between;
    Cell base;
    if (!f.level.empty()) base[contrast == Contrast::between ? "time" : "group"] = f.level;
    const CellMap map = make_cell_map(*fit.model, contrast, base);
    const auto [n1, n2] = cell_sizes(*fit.model, map);
    PosteriorOptions po;
    po.prob = s.prob;
    po.median = f.median;
    po.hpd = f.hpd;
    std::vector<EffectKind> kinds;
    for (const auto& k : f.kinds) kinds.push_back(parse_effect_kind(k));
    if (kinds.empty()) kinds = default_kinds(contrast, map);
    for (const EffectKind k : kinds) effects.push_back(posterior_effect_size(fit.draws, k, map, n1, n2, po));
  } else {
    const LongDataset data = load_input(s.input, err);
    inputs.push_back(s.input);
    if (f.design == "gain") throw ValidationError("sample effect sizes support --design pooled or paired");
    const SampleDesign design = f.design == "paired"
                                    ? SampleDesign::paired(f.level.empty() ? kControl : f.level)
                                    : SampleDesign::pooled(f.level.empty() ? kPosttest : f.level);
    effects = sample_effect_sizes(data, design);
    if (!f.kinds.empty()) {
      std::vector<EffectSize> kept;
      for (const auto& k : f.kinds) {
        const EffectKind kind = parse_effect_kind(k);
        const auto it = std::find_if(effects.begin(), effects.end(), [&](const EffectSize& e) { return e.kind == kind; });
        if (it == effects.end()) throw ValidationError(k + " is not available from sample moments for this design");
        kept.push_back(*it);
      }
      effects = std::move(kept);
    }
  }
  if (s.format == "csv") {
    write_effect_csv(out, effects);
  } else if (s.format == "json") {
    out << effect_json(effects).dump(2) << '\n';
  } else {
    write_effect_text(out, effects);
    for (const auto& e : effects)
      if (e.kind == EffectKind::d_z && e.ci == std::nullopt && std::isfinite(e.estimate))
        out << "t = " << io::format_fixed(t_from_dz(e.estimate, e.n1), 2) << '\n';
  }
  for (const auto& e : effects)
    if (s.format != "text") print_warnings(err, e.warnings);
  if (!s.outdir.empty()) {
    const fs::path dir(s.outdir);
    auto report = open_out(dir / "effect_sizes.csv");
    write_effect_csv(report, effects);
    std::vector<std::string> outputs{"effect_sizes.csv"};
    if (!f.fit_dir.empty()) {
      auto per_draw = open_out(dir / "effect_draws.csv");
      write_effect_draws_csv(per_draw, effects);
      outputs.push_back("effect_draws.csv");
    }
    json config = shared_json(s);
    config["fit"] = f.fit_dir;
    config["design"] = f.design;
    config["level"] = f.level;
    config["kinds"] = f.kinds;
    config["median"] = f.median;
    config["hpd"] = f.hpd;
    write_manifest(dir, "effectsize", config, argv, inputs, outputs);
  }
  return 0;
}

int cmd_compare(const Shared& s, const std::string& design, const std::string& level, const std::vector<double>& fractions,
                int reps, const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  const LongDataset data = load_input(s.input, err);
  CompareOptions o;
  o.design = design == "paired" ? SampleDesign::paired(level.empty() ? kControl : level)
                                : SampleDesign::pooled(level.empty() ? kPosttest : level);
  o.fractions = fractions;
  o.reps = reps;
  o.seed = s.seed;
  const CompareResult r = compare(data, o);
  for (const double frac : fractions) {
    out << "fraction " << io::format_double(frac) << ": mean |d_s_pooled - d_s_hetero| = "
        << io::format_double(r.mean_abs_difference(frac, EffectKind::d_s_pooled, EffectKind::d_s_hetero)) << '\n';
  }
  out << r.rows.size() << " rows, " << r.failures.size() << " recorded failures\n";
  if (!s.outdir.empty()) {
    const fs::path dir(s.outdir);
    auto rows = open_out(dir / "compare.csv");
    write_compare_csv(rows, r);
    auto fails = open_out(dir / "compare_failures.csv");
    write_compare_failures_csv(fails, r);
    json config = shared_json(s);
    config["design"] = design;
    config["level"] = level;
    config["fractions"] = fractions;
    config["reps"] = reps;
    write_manifest(dir, "compare", config, argv, {s.input}, {"compare.csv", "compare_failures.csv"});
  } else {
    write_compare_csv(out, r);
  }
  return 0;
}

}  // namespace

double CompareResult::mean_abs_difference(double fraction, EffectKind a, EffectKind b) const {
  std::map<int, std::pair<double, double>> by_rep;
  std::map<int, int> seen;
  for (const auto& r : rows) {
    if (r.fraction != fraction) continue;
    if (r.kind == a) {
      by_rep[r.rep].first = r.estimate;
      seen[r.rep] |= 1;
    } else if (r.kind == b) {
      by_rep[r.rep].second = r.estimate;
      seen[r.rep] |= 2;
    }
  }
  double sum = 0;
  int n = 0;
  for (const auto& [rep, v] : by_rep) {
    if (seen[rep] != 3) continue;
    sum += std::abs(v.first - v.second);
    ++n;
  }
  return n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

CompareResult compare(const LongDataset& data, const CompareOptions& options) {
  for (const double f : options.fractions)
    if (!(f > 0 && f <= 1)) throw ValidationError("fractions must lie in (0, 1]");
  if (options.reps < 1) throw ValidationError("reps must be at least 1");
  const std::vector<EffectKind> kinds =
      options.design.kind == SampleDesign::Kind::paired
          ? std::vector<EffectKind>{EffectKind::d_s_pooled, EffectKind::d_s_hetero, EffectKind::d_s_paired,
                                    EffectKind::d_z}
          : std::vector<EffectKind>{EffectKind::d_s_pooled, EffectKind::d_s_hetero, EffectKind::d_s_paired};
  const std::size_t n_cells = options.fractions.size() * static_cast<std::size_t>(options.reps);
  std::vector<CompareResult> cells(n_cells);
  auto work = [&](std::size_t cell) {
    const double frac = options.fractions[cell / static_cast<std::size_t>(options.reps)];
    const int rep = static_cast<int>(cell % static_cast<std::size_t>(options.reps)) + 1;
    CompareResult& r = cells[cell];
    try {
      const LongDataset sub = subsample(data, frac, chain_seed(options.seed, static_cast<int>(cell)));
      for (const auto& e : sample_effect_sizes(sub, options.design)) {
        if (std::isnan(e.estimate)) {
          r.failures.push_back({frac, rep, to_string(e.kind), e.warnings.empty() ? "undefined" : e.warnings.front()});
          continue;
        }
        r.rows.push_back({frac, rep, e.kind, e.estimate, e.n1, e.n2});
      }
    } catch (const Error& e) {
      for (const EffectKind k : kinds) r.failures.push_back({frac, rep, to_string(k), e.what()});
    }
  };
  const std::size_t workers =
      options.parallel ? std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), n_cells))
                       : 1;
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> threads;
    for (std::size_t w = 0; w < workers; ++w)
      threads.emplace_back([&] {
        for (std::size_t c = next++; c < n_cells; c = next++) work(c);
      });
  }
  CompareResult out;
  for (auto& c : cells) {
    out.rows.insert(out.rows.end(), c.rows.begin(), c.rows.end());
    out.failures.insert(out.failures.end(), c.failures.begin(), c.failures.end());
  }
  return out;
}

void write_compare_csv(std::ostream& out, const CompareResult& result) {
  out << "fraction,rep,kind,estimate,n1,n2\n";
  for (const auto& r : result.rows)
    out << io::format_double(r.fraction) << ',' << r.rep << ',' << to_string(r.kind) << ','
        << io::format_double(r.estimate) << ',' << io::format_double(r.n1) << ',' << io::format_double(r.n2) << '\n';
}

void write_compare_failures_csv(std::ostream& out, const CompareResult& result) {
  out << "fraction,rep,kind,message\n";
  for (const auto& f : result.failures) {
    std::string msg = f.message;
    std::replace(msg.begin(), msg.end(), ',', ';');
    out << io::format_double(f.fraction) << ',' << f.rep << ',' << f.kind << ',' << msg << '\n';
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian multilevel effect sizes for pre/post intervention studies", "bayesd"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::vector<std::string> args(argv, argv + argc);

  Shared shared;
  auto* describe = app.add_subcommand("describe", "Descriptive statistics per time x group cell");
  add_shared(describe, shared);

  auto* simulate_cmd = app.add_subcommand("simulate", "Simulate a dataset from a preset's generative model");
  add_shared(simulate_cmd, shared);
  SimulateFlags sim;
  simulate_cmd->add_option("--preset", sim.preset, "Generative model preset")->check(CLI::IsMember(preset_names()));
  simulate_cmd->add_option("--clusters", sim.clusters, "Number of clusters");
  simulate_cmd->add_option("--subjects", sim.subjects, "Subjects per cluster (minimum)");
  simulate_cmd->add_option("--subjects-max", sim.subjects_max, "Subjects per cluster (maximum)");
  simulate_cmd->add_option("--total-subjects", sim.total_subjects, "Exact subject count split evenly over clusters");
  simulate_cmd->add_option("--assignment", sim.assignment, "Treatment assignment")
      ->check(CLI::IsMember({"per_subject", "per_cluster"}));
  simulate_cmd->add_option("--intervention-fraction", sim.intervention_fraction, "Share assigned to intervention");
  simulate_cmd->add_option("--fixed", sim.fixed, "Mean coefficients in design column order")->delimiter(',');
  simulate_cmd->add_option("--log-sigma", sim.log_sigma, "Log-sigma coefficients")->delimiter(',');
  simulate_cmd->add_option("--random-sds", sim.random_sds, "Group-level SDs, mean terms first")->delimiter(',');
  simulate_cmd->add_option("--family", sim.family, "Residual family")->check(CLI::IsMember({"normal", "student"}));
  simulate_cmd->add_option("--nu", sim.nu, "Student-t degrees of freedom");
  simulate_cmd->add_option("--correlation", sim.correlation, "Pre/post residual correlation");
  simulate_cmd->add_option("--pretest-mean", sim.pretest_mean, "Pretest mean for gain models");
  simulate_cmd->add_option("--pretest-sd", sim.pretest_sd, "Pretest SD for gain models");

  auto* fit_cmd = app.add_subcommand("fit", "Fit a model by NUTS and save draws");
  add_shared(fit_cmd, shared);
  FitFlags ff;
  fit_cmd->add_option("--preset", ff.preset, "Model preset")->check(CLI::IsMember(preset_names()));
  fit_cmd->add_option("--level", ff.level, "Subset level for ttest and gain presets");
  fit_cmd->add_option("--model", ff.model_file, "Model spec file (key = value lines)");
  fit_cmd->add_option("--family", ff.family, "Override the residual family")
      ->check(CLI::IsMember({"normal", "student"}));
  fit_cmd->add_option("--init", ff.init, "Initial values")->check(CLI::IsMember({"random", "zero"}));
  fit_cmd->add_flag("--allow-unconverged", ff.allow_unconverged, "Exit 0 even when diagnostics fail");

  std::string fit_dir;
  auto* summary_cmd = app.add_subcommand("summary", "Posterior summary table of a saved fit");
  add_shared(summary_cmd, shared);
  bool median = false, hpd = false;
  std::vector<std::string> parameters;
  summary_cmd->add_option("--fit", fit_dir, "Fit directory");
  summary_cmd->add_flag("--median", median, "Report posterior medians");
  summary_cmd->add_flag("--hpd", hpd, "Report highest-density intervals");
  summary_cmd->add_option("--parameters", parameters, "Parameters to report")->delimiter(',');

  auto* icc_cmd = app.add_subcommand("icc", "Intraclass correlation of a random-intercept fit");
  add_shared(icc_cmd, shared);
  icc_cmd->add_option("--fit", fit_dir, "Fit directory");

  auto* ppc_cmd = app.add_subcommand("ppcheck", "Posterior predictive checks");
  add_shared(ppc_cmd, shared);
  std::string mode = "density";
  std::size_t m = 100;
  ppc_cmd->add_option("--fit", fit_dir, "Fit directory");
  ppc_cmd->add_option("--mode", mode, "Check type")->check(CLI::IsMember({"density", "error"}));
  ppc_cmd->add_option("-m", m, "Number of replicated datasets");

  auto* es_cmd = app.add_subcommand("effectsize", "Effect sizes from a fit or from sample moments");
  add_shared(es_cmd, shared);
  EffectFlags ef;
  es_cmd->add_option("--fit", ef.fit_dir, "Fit directory (posterior effect sizes)");
  es_cmd->add_option("--design", ef.design, "Contrast")->check(CLI::IsMember({"pooled", "paired", "gain"}));
  es_cmd->add_option("--level", ef.level, "Time (pooled) or group (paired) to hold fixed");
  es_cmd->add_option("--kind", ef.kinds, "Effect size kinds")->delimiter(',');
  es_cmd->add_flag("--median", ef.median, "Report posterior medians");
  es_cmd->add_flag("--hpd", ef.hpd, "Report highest-density intervals");

  auto* cmp_cmd = app.add_subcommand("compare", "Sample effect sizes over random subsamples");
  add_shared(cmp_cmd, shared);
  std::string cmp_design = "pooled", cmp_level;
  std::vector<double> fractions{0.1, 0.25, 0.5, 1.0};
  int reps = 100;
  cmp_cmd->add_option("--design", cmp_design, "Contrast")->check(CLI::IsMember({"pooled", "paired"}));
  cmp_cmd->add_option("--level", cmp_level, "Time (pooled) or group (paired) to hold fixed");
  cmp_cmd->add_option("--fractions", fractions, "Subsample fractions")->delimiter(',');
  cmp_cmd->add_option("--reps", reps, "Replications per fraction");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? 0 : 1;
  }

  try {
    if (*describe) return cmd_describe(shared, args, out, err);
    if (*simulate_cmd) return cmd_simulate(shared, sim, args, out);
    if (*fit_cmd) return cmd_fit(shared, ff, args, out, err);
    if (*summary_cmd) return cmd_summary(shared, fit_dir, median, hpd, parameters, out);
    if (*icc_cmd) return cmd_icc(shared, fit_dir, out, err);
    if (*ppc_cmd) return cmd_ppcheck(shared, fit_dir, mode, m, args, out, err);
    if (*es_cmd) return cmd_effectsize(shared, ef, args, out, err);
    if (*cmp_cmd) return cmd_compare(shared, cmp_design, cmp_level, fractions, reps, args, out, err);
  } catch (const ConvergenceFailure& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const SamplerError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    err << "error: " << e.what();
    if (e.row() > 0) err << " (row " << e.row();
    if (!e.column().empty()) err << (e.row() > 0 ? ", " : " (") << "column " << e.column();
    if (e.row() > 0 || !e.column().empty()) err << ')';
    err << '\n';
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 3;
  }
  return 1;
}

}  // namespace bayesd::cli
