#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "earlyshape/data.hpp"
#include "earlyshape/error.hpp"
#include "earlyshape/eval.hpp"
#include "earlyshape/numerics.hpp"
#include "earlyshape/parallel.hpp"
#include "earlyshape/train.hpp"

namespace earlyshape {

/// 1-nearest-neighbour classifier on raw (optionally truncated) series.
struct KnnModel {
  Matrix2D series;  // one training series per row
  std::vector<std::size_t> labels;
  std::optional<std::size_t> truncation;

  std::size_t length() const { return series.cols(); }
};

/// Stores `train`, keeping only the first `truncation` values of each series
/// when given. Prefixes are compared raw, without re-normalisation.
inline KnnModel make_knn(const Dataset& train, std::optional<std::size_t> truncation = std::nullopt) {
  if (train.empty()) throw EvaluationError("make_knn: empty training set");
  const std::size_t L = train.series_length();
  const std::size_t len = truncation.value_or(L);
  if (len < 1 || len > L) throw BoundsError("make_knn: truncation " + std::to_string(len) + " outside [1, " + std::to_string(L) + "]");
  KnnModel m{Matrix2D(train.size(), len), {}, truncation};
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train.series[i].length() != L) throw ShapeError("make_knn: training series lengths differ");
    std::copy_n(train.series[i].values.begin(), len, m.series.row(i).begin());
    m.labels.push_back(train.series[i].label);
  }
  return m;
}

/// Label of the training series with the smallest squared Euclidean distance;
/// ties go to the lowest training index.
inline std::size_t knn_predict(const KnnModel& model, std::span<const double> query) {
  if (query.size() != model.length()) {
    throw ShapeError("knn_predict: query length " + std::to_string(query.size()) + " != stored length " +
                     std::to_string(model.length()));
  }
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_index = 0;
  for (std::size_t i = 0; i < model.series.rows(); ++i) {
    const auto row = model.series.row(i);
    double d = 0.0;
    for (std::size_t t = 0; t < row.size() && d < best; ++t) {
      const double diff = row[t] - query[t];
      d += diff * diff;
    }
    if (d < best) {
      best = d;
      best_index = i;
    }
  }
  return model.labels[best_index];
}

/// Fraction of `test` that the 1NN model misclassifies (test series truncated
/// to the model's length).
inline double knn_error(const KnnModel& model, const Dataset& test, std::size_t workers = 1) {
  if (test.empty()) throw EvaluationError("knn_error: empty test set");
  std::vector<char> wrong(test.size(), 0);
  parallel_for(test.size(), workers, [&](std::size_t i) {
    const auto& s = test.series[i];
    if (s.length() < model.length()) throw ShapeError("knn_error: test series shorter than model length");
    wrong[i] = knn_predict(model, std::span<const double>(s.values).first(model.length())) != s.label;
  });
  std::size_t n = 0;
  for (char w : wrong) n += w;
  return static_cast<double>(n) / static_cast<double>(test.size());
}

/// Fixed-truncation 1NN: for each fraction f both sets are cut to
/// round(f·L) before classification. Points carry accuracy.
inline EarlinessCurve knn_error_curve(const Dataset& train, const Dataset& test, std::span<const double> fractions,
                                      std::size_t workers = 1) {
  if (fractions.empty()) throw EvaluationError("knn_error_curve: no fractions");
  const std::size_t L = train.series_length();
  std::vector<CurvePoint> points;
  for (double f : fractions) {
    const auto model = make_knn(train, prefix_length(f, L));
    points.push_back({f, 1.0 - knn_error(model, test, workers), std::nullopt});
  }
  return make_curve(std::move(points));
}

struct EnsembleMember {
  double fraction = 1.0;
  std::size_t length = 0;
  NetworkParams params;
  TrainReport report;
};

/// One network per fraction, each trained with every example cut to exactly
/// round(f·L) (the truncation sampler is never used). Member i trains with
/// seed cfg.seed + i.
inline std::vector<EnsembleMember> fixed_ensemble_train(const Dataset& dataset, std::span<const double> fractions,
                                                        const TrainConfig& cfg, const NetworkConfig& net,
                                                        const std::function<void(std::size_t, const EpochRecord&)>& observer = {}) {
  std::vector<EnsembleMember> members;
  const std::size_t L = dataset.series_length();
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    TrainConfig member_cfg = cfg;
    member_cfg.fixed_length = prefix_length(fractions[i], L);
    member_cfg.seed = cfg.seed + i;
    try {
      EpochObserver obs;
      if (observer) obs = [&, i](const EpochRecord& r) { observer(i, r); };
      auto fit = train(dataset, member_cfg, net, obs);
      members.push_back({fractions[i], *member_cfg.fixed_length, std::move(fit.params), std::move(fit.report)});
    } catch (const Error& e) {
      e.rethrow_with_context("ensemble member at fraction " + std::to_string(fractions[i]));
    }
  }
  return members;
}

/// Each member evaluated only at its own fraction.
inline EarlinessCurve fixed_ensemble_curve(const std::vector<EnsembleMember>& members, const NetworkConfig& net,
                                           const Dataset& test, std::size_t workers = 1) {
  std::vector<CurvePoint> points;
  for (const auto& m : members) {
    const double f[] = {m.fraction};
    points.push_back(eval_fixed_fractions(m.params, net, test, f, workers).points.front());
  }
  return make_curve(std::move(points));
}

}  // namespace earlyshape
