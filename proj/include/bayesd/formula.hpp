#pragma once

#include <optional>
#include <string>
#include <vector>

namespace bayesd {

// A fixed-effect term: the intercept is tracked separately, so a term is a
// main effect (one factor) or an interaction (several factors).
struct Term {
  std::vector<std::string> factors;

  std::string label() const;  // "time", "time:group"
  friend bool operator==(const Term&, const Term&) = default;
};

struct TermList {
  bool intercept = true;
  std::vector<Term> terms;

  friend bool operator==(const TermList&, const TermList&) = default;
};

// "(inner | factor)"; "||" marks uncorrelated coefficients.
struct RandomTerm {
  TermList inner;
  std::string grouping_factor;
  bool correlated = true;

  friend bool operator==(const RandomTerm&, const RandomTerm&) = default;
};

struct Submodel {
  TermList fixed;
  std::vector<RandomTerm> random;

  friend bool operator==(const Submodel&, const Submodel&) = default;
};

enum class Family { normal, student_t };
enum class Response { score, gain };

// Restricts the data a model is fitted to (e.g. pretest records only).
struct Subset {
  std::optional<std::string> time;
  std::optional<std::string> group;

  friend bool operator==(const Subset&, const Subset&) = default;
};

struct ModelSpec {
  std::string name;
  Response response = Response::score;
  Submodel mean;
  Submodel sigma;  // log link; an intercept-only submodel is a homoscedastic scale
  Family family = Family::student_t;
  Subset subset;
  // Sampler settings the model was designed for (the ANOVA.3-style presets need more care).
  double adapt_delta = 0.8;
  int max_treedepth = 10;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// Parses "lhs ~ rhs" where rhs is a '+' separated list of 0, 1, factor,
// a*b, a:b and (inner|factor) terms. Returns the lhs and fills the submodel.
std::string parse_formula(const std::string& text, Submodel& out);

// Canonical rendering: "score ~ 0 + time + group + time:group + (1 | id)".
std::string to_string(const std::string& lhs, const Submodel& submodel);

std::string response_name(Response r);
std::string family_name(Family f);
Family parse_family(const std::string& name);

// Plain-text block of "key = value" lines: name, family, mean, sigma, subset,
// adapt_delta, max_treedepth.
std::string serialize(const ModelSpec& spec);
ModelSpec parse_model_spec(const std::string& text);

// Named model structures. Time/group arguments select the subset the model
// is fitted to: ttest_between fixes a time point, ttest_within and gain fix a group.
//   anova1         score ~ 0 + time*group + (1|id)
//   anova2         score ~ 0 + time*group + (1|id), sigma ~ 0 + time*group
//   anova3         anova2 plus (0 + time*group|class) on both submodels
//   icc            score ~ 1 + (1|class)
//   ttest_between  score ~ group + (0 + group|class), sigma ~ 0 + group + (0 + group|class)
//   ttest_within   score ~ time + (1|id) + (0 + time|class), sigma ~ 0 + time + (0 + time|class)
//   gain           po - pr ~ group + (0 + group|class_pre) + (0 + group|class_post),
//                  sigma ~ 1 + (1|class_pre) + (1|class_post)
ModelSpec preset(const std::string& name, const std::string& level = "");

std::vector<std::string> preset_names();

}  // namespace bayesd
