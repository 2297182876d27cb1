#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <map>
#include <string>
#include <vector>

#include "bayesd/data.hpp"
#include "bayesd/formula.hpp"

namespace bayesd {

// Response vector plus the categorical columns a formula may reference.
// Long data exposes id, class, group, time; wide data exposes id, group,
// class_pre, class_post with the gain po - pr as response.
struct ModelFrame {
  Response response = Response::score;
  Eigen::VectorXd y;
  std::map<std::string, std::vector<std::string>> factors;

  Eigen::Index size() const noexcept { return y.size(); }
  const std::vector<std::string>& factor(const std::string& name) const;
};

// Applies the spec's subset and picks long or wide shape from the response.
ModelFrame make_frame(const ModelSpec& spec, const LongDataset& data);
ModelFrame make_frame(const ModelSpec& spec, const WideDataset& data);

using Cell = std::map<std::string, std::string>;

// Column coding of a term list. A factor inside a term is coded by treatment
// contrasts (first level as reference) when the term without that factor is
// also in the model, and by one indicator per level otherwise; without an
// intercept, the first term is the one whose factor gets every level.
class Coding {
 public:
  Coding() = default;
  Coding(const TermList& terms, const std::map<std::string, std::vector<std::string>>& levels);

  Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(columns_.size()); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::vector<std::string> factors() const;

  // Model-matrix row for a cell; every factor the coding uses must be present.
  Eigen::RowVectorXd row(const Cell& cell) const;
  Eigen::MatrixXd matrix(const ModelFrame& frame) const;

 private:
  struct Column {
    std::vector<std::pair<std::string, std::string>> indicators;  // empty = intercept
  };
  std::vector<Column> columns_;
  std::vector<std::string> names_;
};

struct RandomDesign {
  std::string factor;
  bool on_sigma = false;
  bool correlated = true;
  Coding inner;
  std::vector<std::string> levels;
  std::vector<int> level_index;  // per observation
  Eigen::MatrixXd inner_rows;    // n x q

  Eigen::Index q() const noexcept { return inner.size(); }
  Eigen::Index n_levels() const noexcept { return static_cast<Eigen::Index>(levels.size()); }
  // n x (levels * q); columns grouped by level, coefficients within a level.
  Eigen::SparseMatrix<double> Z() const;
};

struct DesignMatrices {
  Coding mean_coding;
  Coding sigma_coding;
  Eigen::MatrixXd X;
  Eigen::MatrixXd X_sigma;
  std::vector<RandomDesign> mean_random;
  std::vector<RandomDesign> sigma_random;
  std::map<std::string, std::vector<std::string>> levels;
};

// Throws DesignError for unknown factors and for rank-deficient fixed-effect
// matrices, naming the aliased columns.
DesignMatrices build_design(const ModelSpec& spec, const ModelFrame& frame);

}  // namespace bayesd
