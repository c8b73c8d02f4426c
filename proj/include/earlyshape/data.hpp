#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "earlyshape/error.hpp"
#include "earlyshape/numerics.hpp"

namespace earlyshape {

struct LabeledSeries {
  std::vector<double> values;
  std::size_t label = 0;

  std::size_t length() const { return values.size(); }
};

struct Dataset {
  std::vector<LabeledSeries> series;
  std::size_t n_classes = 0;
  std::string name;

  std::size_t size() const { return series.size(); }
  bool empty() const { return series.empty(); }
  /// Common series length L (0 for an empty set).
  std::size_t series_length() const { return series.empty() ? 0 : series.front().length(); }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(n_classes, 0);
    for (const auto& s : series) ++counts[s.label];
    return counts;
  }

  /// Copy of the items at `indices`, same class count and name.
  Dataset subset(const std::vector<std::size_t>& indices) const {
    Dataset out{{}, n_classes, name};
    out.series.reserve(indices.size());
    for (auto i : indices) out.series.push_back(series.at(i));
    return out;
  }
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  const bool delimited = line.find_first_of(",\t") != std::string_view::npos;
  std::size_t pos = 0;
  if (delimited) {
    while (true) {
      const auto next = line.find_first_of(",\t", pos);
      fields.push_back(line.substr(pos, next == std::string_view::npos ? line.npos : next - pos));
      if (next == std::string_view::npos) break;
      pos = next + 1;
    }
  } else {
    // Legacy archive files separate fields by runs of spaces.
    while (pos < line.size()) {
      const auto start = line.find_first_not_of(' ', pos);
      if (start == std::string_view::npos) break;
      const auto end = line.find(' ', start);
      fields.push_back(line.substr(start, end == std::string_view::npos ? line.npos : end - start));
      pos = end == std::string_view::npos ? line.size() : end;
    }
  }
  return fields;
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(std::string_view field, std::size_t line_no, std::size_t col) {
  field = trim(field);
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (field.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line_no) + ", field " + std::to_string(col) +
                     ": not a finite number: '" + std::string(field) + "'");
  }
  return v;
}

/// File stem without a trailing _TRAIN / _TEST split tag.
inline std::string dataset_name(const std::filesystem::path& path) {
  std::string stem = path.stem().string();
  for (std::string_view tag : {"_TRAIN", "_TEST"}) {
    if (stem.size() > tag.size() && stem.ends_with(tag)) return stem.substr(0, stem.size() - tag.size());
  }
  return stem;
}

}  // namespace detail

/// Reads a UCR-archive text file. Each non-blank line is one record: the class
/// label followed by the observations, separated by commas or tabs. Labels are
/// remapped to 0..n_classes-1 in ascending order of their original value.
inline Dataset load_ucr(const std::filesystem::path& path,
                        std::optional<std::size_t> expected_classes = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset file: " + path.string());

  std::vector<double> raw_labels;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::trim(line);
    if (text.empty()) continue;
    const auto fields = detail::split_fields(text);
    if (fields.size() < 2) {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) +
                        ": expected a label and at least one observation");
    }
    if (width == 0) {
      width = fields.size();
    } else if (fields.size() != width) {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) + ": ragged row with " +
                        std::to_string(fields.size() - 1) + " observations, expected " +
                        std::to_string(width - 1));
    }
    const double label = detail::parse_double(fields[0], line_no, 1);
    if (label != std::round(label)) {
      throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                       ": class label is not integer-valued");
    }
    std::vector<double> values(width - 1);
    for (std::size_t j = 1; j < width; ++j) values[j - 1] = detail::parse_double(fields[j], line_no, j + 1);
    raw_labels.push_back(label);
    rows.push_back(std::move(values));
  }

  std::map<double, std::size_t> remap;
  for (double l : raw_labels) remap.emplace(l, 0);
  std::size_t next = 0;
  for (auto& [_, idx] : remap) idx = next++;

  if (expected_classes && *expected_classes != remap.size()) {
    throw ValidationError(path.string() + ": found " + std::to_string(remap.size()) +
                          " classes, expected " + std::to_string(*expected_classes));
  }

  Dataset d;
  d.name = detail::dataset_name(path);
  d.n_classes = remap.size();
  d.series.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    d.series.push_back({std::move(rows[i]), remap.at(raw_labels[i])});
  }
  return d;
}

/// Writes the dataset back in UCR layout (tab separated, 0-based labels,
/// 17 significant digits).
inline void write_ucr(const Dataset& d, std::ostream& out) {
  std::ostringstream line;
  line.precision(17);
  for (const auto& s : d.series) {
    line.str({});
    line << s.label;
    for (double v : s.values) line << '\t' << v;
    out << line.str() << '\n';
  }
}

inline LabeledSeries znormalize(const LabeledSeries& series) {
  const auto n = static_cast<double>(series.length());
  double mean = 0.0;
  for (double v : series.values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : series.values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  LabeledSeries out{std::vector<double>(series.length(), 0.0), series.label};
  if (sd <= 1e-12) return out;
  for (std::size_t i = 0; i < series.length(); ++i) out.values[i] = (series.values[i] - mean) / sd;
  return out;
}

inline Dataset znormalize(const Dataset& d) {
  Dataset out{{}, d.n_classes, d.name};
  out.series.reserve(d.size());
  for (const auto& s : d.series) out.series.push_back(znormalize(s));
  return out;
}

inline LabeledSeries truncate(const LabeledSeries& series, std::size_t s) {
  if (s < 1 || s > series.length()) {
    throw BoundsError("truncate: length " + std::to_string(s) + " outside [1, " +
                      std::to_string(series.length()) + "]");
  }
  return {{series.values.begin(), series.values.begin() + static_cast<std::ptrdiff_t>(s)},
          series.label};
}

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

namespace detail {

inline std::vector<std::vector<std::size_t>> members_by_class(const Dataset& d) {
  std::vector<std::vector<std::size_t>> members(d.n_classes);
  for (std::size_t i = 0; i < d.size(); ++i) members[d.series[i].label].push_back(i);
  return members;
}

}  // namespace detail

/// Stratified k-fold split. Each class is shuffled and dealt round-robin
/// across folds; the dealing position carries over between classes so fold
/// sizes stay within one of each other as well.
inline std::vector<Fold> stratified_kfold(const Dataset& d, std::size_t k, Rng& rng) {
  if (k < 2) throw StratificationError("stratified_kfold: k must be at least 2");
  const auto counts = d.class_counts();
  if (d.n_classes < 2) throw StratificationError("stratified_kfold: need at least 2 classes");
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] < k) {
      throw StratificationError("stratified_kfold: class " + std::to_string(c) + " has " +
                                std::to_string(counts[c]) + " members, fewer than k=" +
                                std::to_string(k));
    }
  }
  std::vector<std::size_t> fold_of(d.size());
  std::size_t deal = 0;
  for (auto& members : detail::members_by_class(d)) {
    rng.shuffle(members);
    for (auto i : members) fold_of[i] = deal++ % k;
  }
  std::vector<Fold> folds(k);
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t f = 0; f < k; ++f) (f == fold_of[i] ? folds[f].validation : folds[f].train).push_back(i);
  }
  return folds;
}

/// Stratified hold-out: round(fraction * n_c) members of each class (at least
/// one when the class has two or more) go to validation.
inline Fold stratified_holdout(const Dataset& d, double fraction, Rng& rng) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw RangeError("stratified_holdout: fraction must be in (0,1)");
  std::vector<char> is_val(d.size(), 0);
  for (auto& members : detail::members_by_class(d)) {
    if (members.empty()) continue;
    rng.shuffle(members);
    auto take = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(members.size()) + 0.5));
    if (take == 0 && members.size() >= 2) take = 1;
    if (take >= members.size()) take = members.size() - 1;
    for (std::size_t j = 0; j < take; ++j) is_val[members[j]] = 1;
  }
  Fold out;
  for (std::size_t i = 0; i < d.size(); ++i) (is_val[i] ? out.validation : out.train).push_back(i);
  return out;
}

/// Geometric truncation prior P(s; rho) = rho^(s-1) (1 - rho), clamped to
/// [s_min, L].
struct TruncationSampler {
  double rho = 0.0;
  std::size_t s_min = 1;
  std::size_t length = 1;

  TruncationSampler(double rho_, std::size_t s_min_, std::size_t length_)
      : rho(rho_), s_min(s_min_), length(length_) {
    if (!(rho >= 0.0 && rho < 1.0)) throw RangeError("TruncationSampler: rho must be in [0,1)");
    if (s_min < 1 || s_min > length) {
      throw RangeError("TruncationSampler: require 1 <= s_min <= L");
    }
  }
};

/// Unclamped geometric draw on {1, 2, ...} by inverting the survival function
/// P(s > n) = rho^n. Results are capped at `cap` to stay representable.
inline std::size_t sample_geometric(double rho, Rng& rng, std::size_t cap) {
  if (rho <= 0.0) return 1;
  const double u = 1.0 - rng.uniform01();  // (0, 1]
  const double k = std::floor(std::log(u) / std::log(rho));
  if (!(k < static_cast<double>(cap))) return cap;
  return 1 + static_cast<std::size_t>(k);
}

inline std::size_t sample_truncation(const TruncationSampler& ts, Rng& rng) {
  const std::size_t raw = sample_geometric(ts.rho, rng, ts.length);
  return std::clamp(raw, ts.s_min, ts.length);
}

/// The clamped pmf that sample_truncation draws from, indexed by s (entries
/// below s_min are zero). Tail mass rho^(L-1) sits on L, head mass
/// 1 - rho^(s_min) on s_min.
inline std::vector<double> clamped_truncation_pmf(const TruncationSampler& ts) {
  std::vector<double> pmf(ts.length + 1, 0.0);
  if (ts.s_min == ts.length) {
    pmf[ts.length] = 1.0;
    return pmf;
  }
  pmf[ts.s_min] = 1.0 - std::pow(ts.rho, static_cast<double>(ts.s_min));
  for (std::size_t s = ts.s_min + 1; s < ts.length; ++s) {
    pmf[s] = std::pow(ts.rho, static_cast<double>(s - 1)) * (1.0 - ts.rho);
  }
  pmf[ts.length] = std::pow(ts.rho, static_cast<double>(ts.length - 1));
  return pmf;
}

/// Prefix length for an observed fraction: round_half_up(f * L). The small
/// offset keeps decimal fractions such as 0.1 * 275 = 27.5 on the upper side.
inline std::size_t prefix_length(double fraction, std::size_t length) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw RangeError("fraction " + std::to_string(fraction) + " outside (0, 1]");
  }
  const auto s = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(length) + 0.5 + 1e-9));
  if (s < 1) {
    throw BoundsError("fraction " + std::to_string(fraction) + " of length " +
                      std::to_string(length) + " truncates below one timestamp");
  }
  return std::min(s, length);
}

}  // namespace earlyshape
