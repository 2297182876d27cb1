#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace bayesd {

inline constexpr const char* kPretest = "pre";
inline constexpr const char* kPosttest = "post";
inline constexpr const char* kControl = "control";
inline constexpr const char* kIntervention = "intervention";

// One measurement of one subject. Group and time are kept as level strings so
// that designs with more than two groups or time points load unchanged.
struct LongRecord {
  std::string subject_id;
  std::string cluster_id;
  std::string group;
  std::string time;
  double score = 0;

  friend bool operator==(const LongRecord&, const LongRecord&) = default;
};

struct LongDataset {
  std::vector<LongRecord> records;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
  friend bool operator==(const LongDataset&, const LongDataset&) = default;
};

struct WideRecord {
  std::string subject_id;
  std::string group;
  double pr = 0;
  double po = 0;
  std::string cluster_pre;
  std::string cluster_post;

  double gain() const noexcept { return po - pr; }
  friend bool operator==(const WideRecord&, const WideRecord&) = default;
};

struct WideDataset {
  std::vector<WideRecord> records;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
  friend bool operator==(const WideDataset&, const WideDataset&) = default;
};

// Header names for the five roles of a long file.
struct ColumnMap {
  std::string subject = "id";
  std::string cluster = "class";
  std::string group = "group";
  std::string time = "time";
  std::string score = "score";
};

struct LoadOptions {
  char delimiter = ',';
  ColumnMap columns{};
  // Reject scores outside [0, 1] instead of warning about them.
  bool strict_rates = false;
};

struct LoadResult {
  LongDataset data;
  std::vector<std::string> warnings;
};

// Parses a delimited long file with a header row. Throws ParseError naming the
// offending row and column on missing columns, non-numeric scores and
// duplicated (subject, time) keys.
LoadResult load_long(std::istream& in, const LoadOptions& options = {});
LoadResult load_long(const std::filesystem::path& path, const LoadOptions& options = {});
void write_long(std::ostream& out, const LongDataset& data, char delimiter = ',');

WideDataset load_wide(std::istream& in, char delimiter = ',');
void write_wide(std::ostream& out, const WideDataset& data, char delimiter = ',');

// Checks the record invariants; throws ValidationError.
void validate(const LongDataset& data);

struct PivotReport {
  // Subjects lacking one of the two time points, in order of first appearance.
  std::vector<std::string> dropped_subjects;
};

// One wide row per subject observed at both pre and post; other subjects are
// dropped and listed in the report.
WideDataset pivot_wide(const LongDataset& data, PivotReport* report = nullptr);
LongDataset pivot_long(const WideDataset& data);

// Subjects with both time points, original record order.
LongDataset complete_cases(const LongDataset& data, PivotReport* report = nullptr);

struct CellDescriptives {
  std::string time;
  std::string group;
  std::size_t n = 0;
  bool empty = true;
  double mean = 0;
  double sd = 0;
  double median = 0;
  double q1 = 0;
  double q3 = 0;
  // Scores beyond the Tukey fences q1 - 1.5 IQR and q3 + 1.5 IQR.
  std::vector<double> outliers;
};

// One entry per (time, group) combination of the observed levels, time major.
// A combination without records is reported with empty = true.
std::vector<CellDescriptives> descriptives(const LongDataset& data);

// Keeps round(fraction * n_g) complete subjects of every group g, chosen by a
// seeded shuffle. Throws ValidationError when a group would keep fewer than 2.
LongDataset subsample(const LongDataset& data, double fraction, std::uint64_t seed);

// Distinct values ordered the way the design matrices order factor levels:
// pre < post and control < intervention first, anything else lexicographically.
std::vector<std::string> ordered_levels(std::vector<std::string> values);

LongDataset filter(const LongDataset& data, const std::string* time, const std::string* group);

}  // namespace bayesd
