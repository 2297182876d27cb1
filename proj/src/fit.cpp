#include "bayesd/fit.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "bayesd/design.hpp"
#include "bayesd/error.hpp"
#include "bayesd/io.hpp"

namespace bayesd {

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

}  // namespace

Fit fit_model(const ModelSpec& spec, const LongDataset& data, const SamplerConfig& sampler) {
  Fit fit;
  fit.spec = spec;
  fit.data = data;
  fit.sampler = sampler;
  fit.model = std::make_unique<Model>(spec, make_frame(spec, data));
  fit.draws = nuts_sample(make_target(*fit.model), sampler);
  fit.diagnostics = diagnose(fit.draws, sampler.max_treedepth);
  return fit;
}

bool Fit::converged(double max_rhat) const {
  if (diagnostics.divergences() > 0) return false;
  for (const auto& p : diagnostics.parameters) {
    if (p.constant) continue;
    if (std::isnan(p.rhat)) {
      if (draws.n_chains() >= 2) return false;
    } else if (p.rhat > max_rhat) {
      return false;
    }
  }
  return true;
}

std::string serialize(const SamplerConfig& c) {
  std::ostringstream out;
  out << "warmup = " << c.warmup << '\n'
      << "iter = " << c.iter << '\n'
      << "chains = " << c.chains << '\n'
      << "adapt_delta = " << io::format_double(c.adapt_delta) << '\n'
      << "max_treedepth = " << c.max_treedepth << '\n'
      << "seed = " << c.seed << '\n'
      << "init = "
      << (c.init == SamplerConfig::Init::zero ? "zero" : c.init == SamplerConfig::Init::user ? "user" : "random")
      << '\n';
  return out.str();
}

SamplerConfig parse_sampler_config(const std::string& text) {
  SamplerConfig c;
  std::istringstream in(text);
  std::string line;
  while (io::read_line(in, line)) {
    line = std::string(io::trim(line));
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("sampler config line lacks '='", 0, line);
    const std::string key(io::trim(line.substr(0, eq)));
    const std::string value(io::trim(line.substr(eq + 1)));
    try {
      if (key == "warmup") c.warmup = std::stoi(value);
      else if (key == "iter") c.iter = std::stoi(value);
      else if (key == "chains") c.chains = std::stoi(value);
      else if (key == "adapt_delta") c.adapt_delta = std::stod(value);
      else if (key == "max_treedepth") c.max_treedepth = std::stoi(value);
      else if (key == "seed") c.seed = std::stoull(value);
      else if (key == "init") c.init = value == "zero" ? SamplerConfig::Init::zero : SamplerConfig::Init::random;
      else throw ParseError("unknown sampler config key '" + key + "'", 0, key);
    } catch (const std::logic_error&) {
      throw ParseError("bad value for sampler config key '" + key + "'", 0, key);
    }
  }
  return c;
}

void save_fit(const std::filesystem::path& dir, const Fit& fit) {
  std::filesystem::create_directories(dir);
  open_out(dir / "model.txt") << serialize(fit.spec);
  open_out(dir / "sampler.txt") << serialize(fit.sampler);
  auto data = open_out(dir / "data.csv");
  write_long(data, fit.data);
  auto draws = open_out(dir / "draws.csv");
  write_draws_csv(draws, fit.draws);
}

Fit load_fit(const std::filesystem::path& dir) {
  Fit fit;
  fit.spec = parse_model_spec(read_file(dir / "model.txt"));
  fit.sampler = parse_sampler_config(read_file(dir / "sampler.txt"));
  fit.data = load_long(dir / "data.csv").data;
  fit.model = std::make_unique<Model>(fit.spec, make_frame(fit.spec, fit.data));
  std::ifstream in(dir / "draws.csv", std::ios::binary);
  if (!in) throw Error("cannot open " + (dir / "draws.csv").string());
  fit.draws = read_draws_csv(in);
  if (fit.draws.names != fit.model->constrained_names())
    throw Error("draws in " + dir.string() + " do not match the parameters of the saved model");
  fit.draws.unconstrained_names = fit.model->unconstrained_names();
  fit.diagnostics = diagnose(fit.draws, fit.sampler.max_treedepth);
  return fit;
}

}  // namespace bayesd
