#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace w2fair {

// Parse failure with the file position attached; the message carries
// path, 1-based row (header = row 1) and column name.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& path, long row, const std::string& column,
             const std::string& reason);
  long row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  long row_;
  std::string column_;
};

struct Example {
  std::vector<double> features;
  int label = 0;  // class id, 1-based
  int group = 0;  // 0 or 1
};

struct Dataset {
  std::vector<Example> examples;
  int num_classes = 0;
  int num_features = 0;
  std::vector<std::string> feature_names;

  long size() const { return static_cast<long>(examples.size()); }

  // Example indices of one (class, group) stratum; cls is 1-based.
  const std::vector<long>& stratum(int cls, int group) const;
  long support(int cls, int group) const {
    return static_cast<long>(stratum(cls, group).size());
  }

  // Must be called after examples/num_classes change by hand; load_csv,
  // generate and subset leave the index current.
  void rebuild_strata();

  // Plain-text (class x group) support counts, one line per class.
  std::string support_table() const;

 private:
  std::vector<std::vector<long>> strata_;
};

struct CsvSchema {
  std::string label_column = "label";
  std::string group_column = "group";
  // Empty means: every remaining column is a feature, in header order.
  std::vector<std::string> feature_columns;
};

// Comma-separated, header row required, '.' decimal point. Labels are
// integers 1..K (K inferred from the data), groups are 0 or 1.
Dataset load_csv(const std::string& path, const CsvSchema& schema = {});
void save_csv(const Dataset& dataset, const std::string& path);

struct SplitFractions {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

struct SplitIndices {
  std::vector<long> train, val, test;
};

// Shuffles each (class, group) stratum with the seed and apportions it by
// largest remainder, so each split's stratum count is within one of the
// fractional target.
SplitIndices stratified_split(const Dataset& dataset, const SplitFractions& f,
                              std::uint64_t seed);

Dataset subset(const Dataset& dataset, std::span<const long> indices);

// One biased class in the synthetic generator: group-1 members of cls are
// shifted `shift` of the way toward the mean of `toward`, and `flip_rate`
// of them are relabeled to `toward`.
struct BiasSpec {
  int cls = 0;
  int toward = 0;
  double shift = 0.0;
  double flip_rate = 0.0;
};

struct SyntheticSpec {
  int num_classes = 4;
  int num_features = 10;
  long per_class_group0 = 1000;
  long per_class_group1 = 1000;
  double mean_scale = 4.0;  // class k mean sits at mean_scale on axis k-1
  double noise_sd = 1.0;
  std::vector<BiasSpec> bias;
  std::uint64_t seed = 1;
};

// Axis-aligned Gaussian class clusters with the configured group-conditional
// shift / label-flip bias. Counts are per (class, group) before flips.
Dataset generate(const SyntheticSpec& spec);

}  // namespace w2fair
