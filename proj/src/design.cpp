#include "bayesd/design.hpp"

#include <algorithm>
#include <set>

#include "bayesd/error.hpp"
#include "bayesd/io.hpp"

namespace bayesd {

const std::vector<std::string>& ModelFrame::factor(const std::string& name) const {
  const auto it = factors.find(name);
  if (it == factors.end()) {
    std::vector<std::string> known;
    for (const auto& [k, v] : factors) known.push_back(k);
    throw DesignError("formula references unknown column '" + name + "' (available: " + io::join(known, ", ") + ")");
  }
  return it->second;
}

ModelFrame make_frame(const ModelSpec& spec, const LongDataset& data) {
  if (spec.response == Response::gain) return make_frame(spec, pivot_wide(data));
  const LongDataset sub = filter(data, spec.subset.time ? &*spec.subset.time : nullptr,
                                 spec.subset.group ? &*spec.subset.group : nullptr);
  if (sub.empty()) throw DesignError("no records left after applying the model subset");
  ModelFrame f;
  f.response = Response::score;
  const auto n = static_cast<Eigen::Index>(sub.size());
  f.y.resize(n);
  auto& id = f.factors["id"];
  auto& cls = f.factors["class"];
  auto& group = f.factors["group"];
  auto& time = f.factors["time"];
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = sub.records[static_cast<std::size_t>(i)];
    f.y[i] = r.score;
    id.push_back(r.subject_id);
    cls.push_back(r.cluster_id);
    group.push_back(r.group);
    time.push_back(r.time);
  }
  return f;
}

ModelFrame make_frame(const ModelSpec& spec, const WideDataset& data) {
  if (spec.response != Response::gain) throw DesignError("a score model needs long-format data");
  if (spec.subset.time) throw DesignError("a gain model cannot be restricted to one time point");
  ModelFrame f;
  f.response = Response::gain;
  std::vector<const WideRecord*> rows;
  for (const auto& r : data.records)
    if (!spec.subset.group || r.group == *spec.subset.group) rows.push_back(&r);
  if (rows.empty()) throw DesignError("no records left after applying the model subset");
  f.y.resize(static_cast<Eigen::Index>(rows.size()));
  auto& id = f.factors["id"];
  auto& group = f.factors["group"];
  auto& cpre = f.factors["class_pre"];
  auto& cpost = f.factors["class_post"];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    f.y[static_cast<Eigen::Index>(i)] = rows[i]->gain();
    id.push_back(rows[i]->subject_id);
    group.push_back(rows[i]->group);
    cpre.push_back(rows[i]->cluster_pre);
    cpost.push_back(rows[i]->cluster_post);
  }
  return f;
}

Coding::Coding(const TermList& list, const std::map<std::string, std::vector<std::string>>& levels) {
  if (list.intercept) {
    columns_.push_back({});
    names_.emplace_back("Intercept");
  }
  auto has_term = [&](const std::vector<std::string>& factors) {
    if (factors.empty()) return list.intercept;
    return std::any_of(list.terms.begin(), list.terms.end(), [&](const Term& t) {
      return std::set<std::string>(t.factors.begin(), t.factors.end()) ==
             std::set<std::string>(factors.begin(), factors.end());
    });
  };
  for (std::size_t ti = 0; ti < list.terms.size(); ++ti) {
    const Term& term = list.terms[ti];
    // Level sets per factor, first factor varying fastest.
    std::vector<std::vector<std::string>> sets;
    for (const auto& f : term.factors) {
      const auto it = levels.find(f);
      if (it == levels.end()) throw DesignError("formula references unknown column '" + f + "'");
      std::vector<std::string> without;
      for (const auto& g : term.factors)
        if (g != f) without.push_back(g);
      bool full = !has_term(without);
      if (without.empty() && !list.intercept) full = ti == 0;
      std::vector<std::string> lv = it->second;
      if (!full && !lv.empty()) lv.erase(lv.begin());
      sets.push_back(std::move(lv));
    }
    std::vector<std::size_t> idx(sets.size(), 0);
    const bool any_empty = std::any_of(sets.begin(), sets.end(), [](const auto& s) { return s.empty(); });
    if (any_empty) continue;
    while (true) {
      Column col;
      std::vector<std::string> parts;
      for (std::size_t k = 0; k < sets.size(); ++k) {
        col.indicators.emplace_back(term.factors[k], sets[k][idx[k]]);
        parts.push_back(term.factors[k] + sets[k][idx[k]]);
      }
      columns_.push_back(std::move(col));
      names_.push_back(io::join(parts, ":"));
      std::size_t k = 0;
      while (k < sets.size() && ++idx[k] == sets[k].size()) idx[k++] = 0;
      if (k == sets.size()) break;
    }
  }
}

std::vector<std::string> Coding::factors() const {
  std::vector<std::string> out;
  for (const auto& c : columns_)
    for (const auto& [f, l] : c.indicators)
      if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
  return out;
}

Eigen::RowVectorXd Coding::row(const Cell& cell) const {
  Eigen::RowVectorXd r(size());
  for (Eigen::Index j = 0; j < size(); ++j) {
    double v = 1;
    for (const auto& [f, l] : columns_[static_cast<std::size_t>(j)].indicators) {
      const auto it = cell.find(f);
      if (it == cell.end()) throw DesignError("cell does not specify a level for factor '" + f + "'");
      if (it->second != l) v = 0;
    }
    r[j] = v;
  }
  return r;
}

Eigen::MatrixXd Coding::matrix(const ModelFrame& frame) const {
  Eigen::MatrixXd m(frame.size(), size());
  for (Eigen::Index j = 0; j < size(); ++j) {
    for (Eigen::Index i = 0; i < frame.size(); ++i) {
      double v = 1;
      for (const auto& [f, l] : columns_[static_cast<std::size_t>(j)].indicators)
        if (frame.factor(f)[static_cast<std::size_t>(i)] != l) v = 0;
      m(i, j) = v;
    }
  }
  return m;
}

Eigen::SparseMatrix<double> RandomDesign::Z() const {
  const auto n = static_cast<Eigen::Index>(level_index.size());
  Eigen::SparseMatrix<double> z(n, n_levels() * q());
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < q(); ++k)
      if (inner_rows(i, k) != 0) trip.emplace_back(i, level_index[static_cast<std::size_t>(i)] * q() + k, inner_rows(i, k));
  z.setFromTriplets(trip.begin(), trip.end());
  return z;
}

namespace {

void check_rank(const Eigen::MatrixXd& X, const std::vector<std::string>& names, const std::string& what) {
  if (X.cols() == 0) return;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  const auto rank = qr.rank();
  if (rank == X.cols()) return;
  std::vector<std::string> aliased;
  for (Eigen::Index k = rank; k < X.cols(); ++k) aliased.push_back(names[static_cast<std::size_t>(qr.colsPermutation().indices()[k])]);
  std::sort(aliased.begin(), aliased.end());
  throw DesignError(what + " design matrix is rank deficient; aliased columns: " + io::join(aliased, ", "));
}

RandomDesign build_random(const RandomTerm& term, bool on_sigma, const ModelFrame& frame,
                          const std::map<std::string, std::vector<std::string>>& levels) {
  RandomDesign rd;
  rd.factor = term.grouping_factor;
  rd.on_sigma = on_sigma;
  rd.correlated = term.correlated;
  rd.inner = Coding(term.inner, levels);
  if (rd.q() == 0)
    throw DesignError("group-level term on '" + rd.factor + "' has no coefficients for the observed levels");
  const auto& values = frame.factor(rd.factor);
  rd.levels = levels.at(rd.factor);
  std::map<std::string, int> pos;
  for (std::size_t k = 0; k < rd.levels.size(); ++k) pos[rd.levels[k]] = static_cast<int>(k);
  rd.level_index.reserve(values.size());
  for (const auto& v : values) rd.level_index.push_back(pos.at(v));
  rd.inner_rows = rd.inner.matrix(frame);
  return rd;
}

}  // namespace

DesignMatrices build_design(const ModelSpec& spec, const ModelFrame& frame) {
  if (frame.size() == 0) throw DesignError("empty dataset");
  DesignMatrices d;
  for (const auto& [name, values] : frame.factors) d.levels[name] = ordered_levels(values);
  d.mean_coding = Coding(spec.mean.fixed, d.levels);
  d.sigma_coding = Coding(spec.sigma.fixed, d.levels);
  if (d.sigma_coding.size() == 0) throw DesignError("sigma submodel has no fixed columns");
  d.X = d.mean_coding.matrix(frame);
  d.X_sigma = d.sigma_coding.matrix(frame);
  check_rank(d.X, d.mean_coding.names(), "mean");
  check_rank(d.X_sigma, d.sigma_coding.names(), "sigma");
  for (const auto& r : spec.mean.random) d.mean_random.push_back(build_random(r, false, frame, d.levels));
  for (const auto& r : spec.sigma.random) d.sigma_random.push_back(build_random(r, true, frame, d.levels));
  return d;
}

}  // namespace bayesd
