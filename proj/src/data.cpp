#include "w2fair/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "w2fair/rng.hpp"

namespace w2fair {

namespace {

std::string format_parse_message(const std::string& path, long row,
                                 const std::string& column,
                                 const std::string& reason) {
  std::ostringstream os;
  os << path << ":" << row << ": ";
  if (!column.empty()) os << "column '" << column << "': ";
  os << reason;
  return os.str();
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_double(const std::string& s, const std::string& path, long row,
                    const std::string& column) {
  double value = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value))
    throw ParseError(path, row, column, "not a finite number: '" + s + "'");
  return value;
}

long parse_int(const std::string& s, const std::string& path, long row,
               const std::string& column) {
  long value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError(path, row, column, "not an integer: '" + s + "'");
  return value;
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

ParseError::ParseError(const std::string& path, long row,
                       const std::string& column, const std::string& reason)
    : std::runtime_error(format_parse_message(path, row, column, reason)),
      row_(row),
      column_(column) {}

const std::vector<long>& Dataset::stratum(int cls, int group) const {
  if (cls < 1 || cls > num_classes)
    throw std::out_of_range("Dataset::stratum: class id out of range");
  if (group != 0 && group != 1)
    throw std::out_of_range("Dataset::stratum: group must be 0 or 1");
  return strata_[static_cast<std::size_t>(cls - 1) * 2 + group];
}

void Dataset::rebuild_strata() {
  strata_.assign(static_cast<std::size_t>(num_classes) * 2, {});
  for (long i = 0; i < size(); ++i) {
    const Example& ex = examples[i];
    if (ex.label < 1 || ex.label > num_classes)
      throw std::invalid_argument("Dataset: label outside [1, num_classes]");
    if (ex.group != 0 && ex.group != 1)
      throw std::invalid_argument("Dataset: group outside {0, 1}");
    strata_[static_cast<std::size_t>(ex.label - 1) * 2 + ex.group].push_back(i);
  }
}

std::string Dataset::support_table() const {
  std::ostringstream os;
  os << "class group0 group1\n";
  for (int k = 1; k <= num_classes; ++k)
    os << k << " " << support(k, 0) << " " << support(k, 1) << "\n";
  return os.str();
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);

  std::string line;
  if (!std::getline(in, line))
    throw ParseError(path, 1, "", "missing header row");
  const std::vector<std::string> header = split_fields(line);

  const auto column_index = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw ParseError(path, 1, name, "column not found in header");
    return static_cast<std::size_t>(it - header.begin());
  };

  const std::size_t label_idx = column_index(schema.label_column);
  const std::size_t group_idx = column_index(schema.group_column);
  if (label_idx == group_idx)
    throw ParseError(path, 1, schema.label_column,
                     "label and group columns coincide");

  std::vector<std::size_t> feature_idx;
  std::vector<std::string> feature_names;
  if (schema.feature_columns.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (i != label_idx && i != group_idx) {
        feature_idx.push_back(i);
        feature_names.push_back(header[i]);
      }
  } else {
    for (const std::string& name : schema.feature_columns) {
      const std::size_t i = column_index(name);
      if (i == label_idx || i == group_idx)
        throw ParseError(path, 1, name, "feature column overlaps label/group");
      feature_idx.push_back(i);
      feature_names.push_back(name);
    }
  }
  if (feature_idx.empty())
    throw ParseError(path, 1, "", "no feature columns");

  Dataset ds;
  ds.num_features = static_cast<int>(feature_idx.size());
  ds.feature_names = feature_names;

  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != header.size())
      throw ParseError(path, row, "",
                       "expected " + std::to_string(header.size()) +
                           " fields, got " + std::to_string(fields.size()));
    Example ex;
    const long label = parse_int(fields[label_idx], path, row, schema.label_column);
    if (label < 1)
      throw ParseError(path, row, schema.label_column,
                       "class label must be a positive integer, got '" +
                           fields[label_idx] + "'");
    const long group = parse_int(fields[group_idx], path, row, schema.group_column);
    if (group != 0 && group != 1)
      throw ParseError(path, row, schema.group_column,
                       "group must be 0 or 1, got '" + fields[group_idx] + "'");
    ex.label = static_cast<int>(label);
    ex.group = static_cast<int>(group);
    ex.features.reserve(feature_idx.size());
    for (std::size_t fi = 0; fi < feature_idx.size(); ++fi)
      ex.features.push_back(
          parse_double(fields[feature_idx[fi]], path, row, feature_names[fi]));
    ds.num_classes = std::max(ds.num_classes, ex.label);
    ds.examples.push_back(std::move(ex));
  }
  if (ds.examples.empty()) throw ParseError(path, row, "", "no data rows");

  ds.rebuild_strata();
  return ds;
}

void save_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_csv: cannot open " + path);
  for (int i = 0; i < dataset.num_features; ++i) {
    const std::string name = i < static_cast<int>(dataset.feature_names.size())
                                 ? dataset.feature_names[i]
                                 : "x" + std::to_string(i + 1);
    out << name << ",";
  }
  out << "label,group\n";
  for (const Example& ex : dataset.examples) {
    for (double v : ex.features) out << format_double(v) << ",";
    out << ex.label << "," << ex.group << "\n";
  }
  if (!out) throw std::runtime_error("save_csv: write failed: " + path);
}

SplitIndices stratified_split(const Dataset& dataset, const SplitFractions& f,
                              std::uint64_t seed) {
  const double fractions[3] = {f.train, f.val, f.test};
  double sum = 0.0;
  for (double x : fractions) {
    if (!(x > 0.0))
      throw std::invalid_argument("stratified_split: fractions must be > 0");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("stratified_split: fractions must sum to 1");

  SplitIndices out;
  Rng root(seed);
  int ordinal = 0;
  for (int cls = 1; cls <= dataset.num_classes; ++cls) {
    for (int group = 0; group <= 1; ++group, ++ordinal) {
      std::vector<long> idx = dataset.stratum(cls, group);
      Rng rng = root.stream(static_cast<std::uint64_t>(ordinal));
      for (std::size_t i = 0; i + 1 < idx.size(); ++i) {
        const auto j = i + rng.below(idx.size() - i);
        std::swap(idx[i], idx[j]);
      }

      // largest-remainder apportionment keeps every split within one of
      // its fractional target
      const auto n = static_cast<double>(idx.size());
      long counts[3];
      double remainders[3];
      long assigned = 0;
      for (int s = 0; s < 3; ++s) {
        const double target = n * fractions[s];
        counts[s] = static_cast<long>(std::floor(target));
        remainders[s] = target - static_cast<double>(counts[s]);
        assigned += counts[s];
      }
      long leftover = static_cast<long>(idx.size()) - assigned;
      while (leftover > 0) {
        int best = 0;
        for (int s = 1; s < 3; ++s)
          if (remainders[s] > remainders[best]) best = s;
        ++counts[best];
        remainders[best] = -1.0;
        --leftover;
      }

      std::vector<long>* dests[3] = {&out.train, &out.val, &out.test};
      std::size_t pos = 0;
      for (int s = 0; s < 3; ++s)
        for (long c = 0; c < counts[s]; ++c)
          dests[s]->push_back(idx[pos++]);
    }
  }
  return out;
}

Dataset subset(const Dataset& dataset, std::span<const long> indices) {
  Dataset out;
  out.num_classes = dataset.num_classes;
  out.num_features = dataset.num_features;
  out.feature_names = dataset.feature_names;
  out.examples.reserve(indices.size());
  for (long i : indices) {
    if (i < 0 || i >= dataset.size())
      throw std::out_of_range("subset: index out of range");
    out.examples.push_back(dataset.examples[i]);
  }
  out.rebuild_strata();
  return out;
}

Dataset generate(const SyntheticSpec& spec) {
  if (spec.num_classes < 2)
    throw std::invalid_argument("generate: num_classes must be >= 2");
  if (spec.num_features < spec.num_classes)
    throw std::invalid_argument(
        "generate: num_features must be >= num_classes (axis-aligned means)");
  if (spec.per_class_group0 < 1 || spec.per_class_group1 < 1)
    throw std::invalid_argument("generate: per-class counts must be >= 1");
  if (!(spec.noise_sd > 0.0))
    throw std::invalid_argument("generate: noise_sd must be positive");

  std::vector<const BiasSpec*> bias_of(spec.num_classes + 1, nullptr);
  for (const BiasSpec& b : spec.bias) {
    if (b.cls < 1 || b.cls > spec.num_classes || b.toward < 1 ||
        b.toward > spec.num_classes || b.cls == b.toward)
      throw std::invalid_argument("generate: bad bias class pair");
    if (!(b.flip_rate >= 0.0 && b.flip_rate <= 1.0) || !std::isfinite(b.shift))
      throw std::invalid_argument("generate: bad bias parameters");
    if (bias_of[b.cls])
      throw std::invalid_argument("generate: duplicate bias entry for class " +
                                  std::to_string(b.cls));
    bias_of[b.cls] = &b;
  }

  Dataset ds;
  ds.num_classes = spec.num_classes;
  ds.num_features = spec.num_features;
  for (int i = 1; i <= spec.num_features; ++i)
    ds.feature_names.push_back("x" + std::to_string(i));

  Rng root(spec.seed);
  for (int cls = 1; cls <= spec.num_classes; ++cls) {
    for (int group = 0; group <= 1; ++group) {
      Rng rng = root.stream(static_cast<std::uint64_t>(cls - 1) * 2 + group);
      const long count =
          group == 0 ? spec.per_class_group0 : spec.per_class_group1;
      const BiasSpec* bias = group == 1 ? bias_of[cls] : nullptr;

      std::vector<double> mean(spec.num_features, 0.0);
      mean[cls - 1] = spec.mean_scale;
      if (bias && bias->shift != 0.0) {
        // move `shift` of the way from this class mean toward the other
        mean[cls - 1] += bias->shift * (0.0 - spec.mean_scale);
        mean[bias->toward - 1] += bias->shift * spec.mean_scale;
      }

      for (long i = 0; i < count; ++i) {
        Example ex;
        ex.group = group;
        ex.label = cls;
        ex.features.resize(spec.num_features);
        for (int d = 0; d < spec.num_features; ++d)
          ex.features[d] = rng.normal(mean[d], spec.noise_sd);
        if (bias && bias->flip_rate > 0.0 && rng.uniform01() < bias->flip_rate)
          ex.label = bias->toward;
        ds.examples.push_back(std::move(ex));
      }
    }
  }
  ds.rebuild_strata();
  return ds;
}

}  // namespace w2fair
