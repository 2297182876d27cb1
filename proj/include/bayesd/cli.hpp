#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "bayesd/data.hpp"
#include "bayesd/effect_size.hpp"

namespace bayesd::cli {

inline constexpr const char* kVersion = "0.1.0";

// Exit codes: 0 success, 1 usage or data error, 2 convergence failure, 3 internal error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct CompareOptions {
  SampleDesign design = SampleDesign::pooled(kPosttest);
  std::vector<double> fractions{0.1, 0.25, 0.5, 1.0};
  int reps = 100;
  std::uint64_t seed = 1;
  bool parallel = true;
};

struct CompareRow {
  double fraction = 0;
  int rep = 0;
  EffectKind kind = EffectKind::d_s_pooled;
  double estimate = 0;
  double n1 = 0;
  double n2 = 0;
};

struct CompareFailure {
  double fraction = 0;
  int rep = 0;
  std::string kind;
  std::string message;
};

struct CompareResult {
  std::vector<CompareRow> rows;
  std::vector<CompareFailure> failures;

  // Mean of |a - b| over the reps at one fraction where both kinds are defined.
  double mean_abs_difference(double fraction, EffectKind a, EffectKind b) const;
};

// Subsamples every (fraction, rep) cell with its own seed and computes the
// sample effect sizes. Cells that fail are recorded and the sweep continues.
CompareResult compare(const LongDataset& data, const CompareOptions& options);

void write_compare_csv(std::ostream& out, const CompareResult& result);
void write_compare_failures_csv(std::ostream& out, const CompareResult& result);

}  // namespace bayesd::cli
