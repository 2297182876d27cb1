#include "bayesd/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <unordered_map>

#include "bayesd/error.hpp"
#include "bayesd/io.hpp"
#include "bayesd/stats.hpp"

namespace bayesd {

namespace {

// Known levels sort first in their natural order; anything else follows lexicographically.
std::pair<int, int> canonical_rank(const std::string& v) {
  if (v == kPretest) return {0, 0};
  if (v == kPosttest) return {0, 1};
  if (v == kControl) return {1, 0};
  if (v == kIntervention) return {1, 1};
  return {2, 0};
}

std::size_t require_column(const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ParseError("missing column '" + name + "'", 0, name);
  return static_cast<std::size_t>(it - header.begin());
}

std::vector<std::string> read_header(std::istream& in, char delimiter) {
  std::string line;
  if (!io::read_line(in, line)) throw ParseError("empty input: header row expected", 0, "");
  auto header = io::split(line, delimiter);
  for (auto& h : header) h = std::string(io::trim(h));
  return header;
}

}  // namespace

std::vector<std::string> ordered_levels(std::vector<std::string> values) {
  std::sort(values.begin(), values.end(), [](const std::string& a, const std::string& b) {
    const auto ra = canonical_rank(a), rb = canonical_rank(b);
    if (ra != rb) return ra < rb;
    return a < b;
  });
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return values;
}

LoadResult load_long(std::istream& in, const LoadOptions& options) {
  const auto header = read_header(in, options.delimiter);
  const ColumnMap& cm = options.columns;
  const std::size_t c_subject = require_column(header, cm.subject);
  const std::size_t c_cluster = require_column(header, cm.cluster);
  const std::size_t c_group = require_column(header, cm.group);
  const std::size_t c_time = require_column(header, cm.time);
  const std::size_t c_score = require_column(header, cm.score);

  LoadResult result;
  std::map<std::pair<std::string, std::string>, std::size_t> seen;
  std::unordered_map<std::string, std::string> subject_group;
  std::string line;
  std::size_t row = 0;
  while (io::read_line(in, line)) {
    ++row;
    if (io::trim(line).empty()) continue;
    const auto fields = io::split(line, options.delimiter);
    if (fields.size() != header.size())
      throw ParseError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                           " fields, found " + std::to_string(fields.size()),
                       row, "");
    LongRecord rec;
    rec.subject_id = std::string(io::trim(fields[c_subject]));
    rec.cluster_id = std::string(io::trim(fields[c_cluster]));
    rec.group = std::string(io::trim(fields[c_group]));
    rec.time = std::string(io::trim(fields[c_time]));
    const auto score = io::parse_double(fields[c_score]);
    if (!score || !std::isfinite(*score))
      throw ParseError("row " + std::to_string(row) + ", column '" + cm.score + "': non-numeric score '" +
                           fields[c_score] + "'",
                       row, cm.score);
    rec.score = *score;
    if (rec.score < 0 || rec.score > 1) {
      const std::string msg = "row " + std::to_string(row) + ": score " + io::format_double(rec.score) +
                              " outside [0, 1]";
      if (options.strict_rates) throw ParseError(msg, row, cm.score);
      result.warnings.push_back(msg);
    }
    const auto key = std::make_pair(rec.subject_id, rec.time);
    if (auto [it, inserted] = seen.emplace(key, row); !inserted)
      throw ParseError("row " + std::to_string(row) + ": duplicate key (id=" + rec.subject_id +
                           ", time=" + rec.time + "), first seen at row " + std::to_string(it->second),
                       row, cm.subject);
    if (auto [it, inserted] = subject_group.emplace(rec.subject_id, rec.group);
        !inserted && it->second != rec.group)
      throw ParseError("row " + std::to_string(row) + ": subject " + rec.subject_id +
                           " appears in groups '" + it->second + "' and '" + rec.group + "'",
                       row, cm.group);
    result.data.records.push_back(std::move(rec));
  }
  return result;
}

LoadResult load_long(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'", 0, "");
  return load_long(in, options);
}

void write_long(std::ostream& out, const LongDataset& data, char d) {
  out << "id" << d << "class" << d << "group" << d << "time" << d << "score\n";
  for (const auto& r : data.records)
    out << r.subject_id << d << r.cluster_id << d << r.group << d << r.time << d
        << io::format_double(r.score) << '\n';
}

WideDataset load_wide(std::istream& in, char delimiter) {
  const auto header = read_header(in, delimiter);
  const std::size_t c_id = require_column(header, "id");
  const std::size_t c_group = require_column(header, "group");
  const std::size_t c_pr = require_column(header, "pr");
  const std::size_t c_po = require_column(header, "po");
  const std::size_t c_cpre = require_column(header, "class_pre");
  const std::size_t c_cpost = require_column(header, "class_post");
  WideDataset data;
  std::set<std::string> ids;
  std::string line;
  std::size_t row = 0;
  while (io::read_line(in, line)) {
    ++row;
    if (io::trim(line).empty()) continue;
    const auto f = io::split(line, delimiter);
    if (f.size() != header.size()) throw ParseError("row " + std::to_string(row) + ": wrong field count", row, "");
    WideRecord r;
    r.subject_id = std::string(io::trim(f[c_id]));
    r.group = std::string(io::trim(f[c_group]));
    r.cluster_pre = std::string(io::trim(f[c_cpre]));
    r.cluster_post = std::string(io::trim(f[c_cpost]));
    const auto pr = io::parse_double(f[c_pr]);
    const auto po = io::parse_double(f[c_po]);
    if (!pr || !std::isfinite(*pr)) throw ParseError("row " + std::to_string(row) + ": non-numeric pr", row, "pr");
    if (!po || !std::isfinite(*po)) throw ParseError("row " + std::to_string(row) + ": non-numeric po", row, "po");
    r.pr = *pr;
    r.po = *po;
    if (!ids.insert(r.subject_id).second)
      throw ParseError("row " + std::to_string(row) + ": duplicate id " + r.subject_id, row, "id");
    data.records.push_back(std::move(r));
  }
  return data;
}

void write_wide(std::ostream& out, const WideDataset& data, char d) {
  out << "id" << d << "group" << d << "pr" << d << "po" << d << "class_pre" << d << "class_post\n";
  for (const auto& r : data.records)
    out << r.subject_id << d << r.group << d << io::format_double(r.pr) << d << io::format_double(r.po) << d
        << r.cluster_pre << d << r.cluster_post << '\n';
}

void validate(const LongDataset& data) {
  std::set<std::pair<std::string, std::string>> keys;
  std::unordered_map<std::string, std::string> subject_group;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& r = data.records[i];
    if (!std::isfinite(r.score)) throw ValidationError("record " + std::to_string(i + 1) + ": non-finite score");
    if (!keys.emplace(r.subject_id, r.time).second)
      throw ValidationError("duplicate key (id=" + r.subject_id + ", time=" + r.time + ")");
    if (auto [it, ins] = subject_group.emplace(r.subject_id, r.group); !ins && it->second != r.group)
      throw ValidationError("subject " + r.subject_id + " belongs to more than one group");
  }
}

WideDataset pivot_wide(const LongDataset& data, PivotReport* report) {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::pair<const LongRecord*, const LongRecord*>> by_subject;
  for (const auto& r : data.records) {
    auto [it, inserted] = by_subject.try_emplace(r.subject_id, nullptr, nullptr);
    if (inserted) order.push_back(r.subject_id);
    if (r.time == kPretest) it->second.first = &r;
    else if (r.time == kPosttest) it->second.second = &r;
  }
  WideDataset wide;
  for (const auto& id : order) {
    const auto [pre, post] = by_subject.at(id);
    if (!pre || !post) {
      if (report) report->dropped_subjects.push_back(id);
      continue;
    }
    wide.records.push_back({id, pre->group, pre->score, post->score, pre->cluster_id, post->cluster_id});
  }
  return wide;
}

LongDataset pivot_long(const WideDataset& data) {
  LongDataset out;
  out.records.reserve(2 * data.size());
  for (const auto& w : data.records) {
    out.records.push_back({w.subject_id, w.cluster_pre, w.group, kPretest, w.pr});
    out.records.push_back({w.subject_id, w.cluster_post, w.group, kPosttest, w.po});
  }
  return out;
}

LongDataset complete_cases(const LongDataset& data, PivotReport* report) {
  std::unordered_map<std::string, int> mask;
  std::vector<std::string> order;
  for (const auto& r : data.records) {
    auto [it, inserted] = mask.try_emplace(r.subject_id, 0);
    if (inserted) order.push_back(r.subject_id);
    if (r.time == kPretest) it->second |= 1;
    if (r.time == kPosttest) it->second |= 2;
  }
  if (report)
    for (const auto& id : order)
      if (mask[id] != 3) report->dropped_subjects.push_back(id);
  LongDataset out;
  for (const auto& r : data.records)
    if (mask[r.subject_id] == 3) out.records.push_back(r);
  return out;
}

std::vector<CellDescriptives> descriptives(const LongDataset& data) {
  std::vector<std::string> times, groups;
  for (const auto& r : data.records) {
    times.push_back(r.time);
    groups.push_back(r.group);
  }
  times = ordered_levels(std::move(times));
  groups = ordered_levels(std::move(groups));
  std::vector<CellDescriptives> out;
  for (const auto& t : times) {
    for (const auto& g : groups) {
      CellDescriptives cell;
      cell.time = t;
      cell.group = g;
      std::vector<double> x;
      for (const auto& r : data.records)
        if (r.time == t && r.group == g) x.push_back(r.score);
      cell.n = x.size();
      cell.empty = x.empty();
      if (!x.empty()) {
        std::sort(x.begin(), x.end());
        const std::span<const double> s(x);
        cell.mean = stats::mean(s);
        cell.sd = x.size() > 1 ? stats::sd(s) : 0.0;
        cell.median = stats::quantile_sorted(s, 0.5);
        cell.q1 = stats::quantile_sorted(s, 0.25);
        cell.q3 = stats::quantile_sorted(s, 0.75);
        const double iqr = cell.q3 - cell.q1;
        for (double v : x)
          if (v < cell.q1 - 1.5 * iqr || v > cell.q3 + 1.5 * iqr) cell.outliers.push_back(v);
      }
      out.push_back(std::move(cell));
    }
  }
  return out;
}

LongDataset subsample(const LongDataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction > 0 && fraction <= 1)) throw ValidationError("subsample fraction must lie in (0, 1]");
  LongDataset complete = complete_cases(data);
  if (fraction == 1.0) return complete;

  std::map<std::string, std::vector<std::string>> subjects;  // group -> ids, first-appearance order
  std::set<std::string> seen;
  for (const auto& r : complete.records)
    if (seen.insert(r.subject_id).second) subjects[r.group].push_back(r.subject_id);

  std::mt19937_64 rng(seed);
  std::set<std::string> keep;
  for (auto& [group, ids] : subjects) {
    const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(ids.size())));
    if (k < 2)
      throw ValidationError("subsample leaves " + std::to_string(k) + " subject(s) in group '" + group +
                            "'; at least 2 required");
    std::shuffle(ids.begin(), ids.end(), rng);
    keep.insert(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
  }
  LongDataset out;
  for (const auto& r : complete.records)
    if (keep.contains(r.subject_id)) out.records.push_back(r);
  return out;
}

LongDataset filter(const LongDataset& data, const std::string* time, const std::string* group) {
  LongDataset out;
  for (const auto& r : data.records)
    if ((!time || r.time == *time) && (!group || r.group == *group)) out.records.push_back(r);
  return out;
}

}  // namespace bayesd
