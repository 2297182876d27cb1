#pragma once

#include <filesystem>
#include <memory>

#include "bayesd/data.hpp"
#include "bayesd/diagnostics.hpp"
#include "bayesd/formula.hpp"
#include "bayesd/model.hpp"
#include "bayesd/nuts.hpp"

namespace bayesd {

struct Fit {
  ModelSpec spec;
  LongDataset data;
  SamplerConfig sampler;
  std::unique_ptr<Model> model;
  Draws draws;
  Diagnostics diagnostics;

  // No divergences and every non-constant parameter has Rhat <= max_rhat.
  // With two or more chains an undefined Rhat counts as unconverged.
  bool converged(double max_rhat = 1.01) const;
};

Fit fit_model(const ModelSpec& spec, const LongDataset& data, const SamplerConfig& sampler);

// A fit directory holds model.txt, sampler.txt, data.csv and draws.csv.
void save_fit(const std::filesystem::path& dir, const Fit& fit);
// Rebuilds the model from the saved spec and data; throws Error when the
// saved draws do not match the model's parameters.
Fit load_fit(const std::filesystem::path& dir);

std::string serialize(const SamplerConfig& config);
SamplerConfig parse_sampler_config(const std::string& text);

}  // namespace bayesd
