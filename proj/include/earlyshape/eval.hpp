#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "earlyshape/data.hpp"
#include "earlyshape/error.hpp"
#include "earlyshape/nn.hpp"
#include "earlyshape/parallel.hpp"

namespace earlyshape {

struct CurvePoint {
  double avg_fraction = 1.0;
  double accuracy = 0.0;
  std::optional<double> threshold;

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct EarlinessCurve {
  std::vector<CurvePoint> points;
  double auc = 0.0;
};

/// Trapezoid area under accuracy vs. fraction, divided by the fraction span so
/// a constant accuracy a scores a. One point (or a zero span) scores the mean
/// accuracy.
inline double curve_auc(std::span<const CurvePoint> points) {
  if (points.empty()) throw EvaluationError("curve_auc: no points");
  const double span = points.back().avg_fraction - points.front().avg_fraction;
  if (points.size() == 1 || span <= 0.0) {
    double sum = 0.0;
    for (const auto& p : points) sum += p.accuracy;
    return sum / static_cast<double>(points.size());
  }
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += 0.5 * (points[i].accuracy + points[i - 1].accuracy) *
            (points[i].avg_fraction - points[i - 1].avg_fraction);
  }
  return area / span;
}

/// Sorts points by fraction (stable, so threshold order survives ties) and
/// fills in the area.
inline EarlinessCurve make_curve(std::vector<CurvePoint> points) {
  std::stable_sort(points.begin(), points.end(),
                   [](const CurvePoint& a, const CurvePoint& b) { return a.avg_fraction < b.avg_fraction; });
  EarlinessCurve c{std::move(points), 0.0};
  c.auc = curve_auc(c.points);
  return c;
}

/// n evenly spaced fractions {1/n, 2/n, ..., 1}.
inline std::vector<double> even_fractions(std::size_t n) {
  std::vector<double> out;
  for (std::size_t i = 1; i <= n; ++i) out.push_back(static_cast<double>(i) / static_cast<double>(n));
  out.back() = 1.0;
  return out;
}

/// One checkpoint per timestamp: {1/L, 2/L, ..., 1}.
inline std::vector<double> per_timestamp_checkpoints(std::size_t length) { return even_fractions(length); }

inline std::vector<double> default_checkpoints() { return even_fractions(20); }

inline std::vector<double> default_thresholds() {
  return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 0.999};
}

namespace detail {

/// Width of a tower's final map for an input of `len` timestamps.
inline std::size_t final_width(const ChannelConfig& ch, std::size_t len) {
  const std::size_t m = ch.filter_len;
  for (std::size_t l = 0; l + 1 < ch.widths.size(); ++l) len = (len - m + 1) / ch.pool_factor;
  return len - m + 1;
}

}  // namespace detail

/// Infer-mode probabilities for several prefixes T_{↓s} of one series.
///
/// Valid convolution and remainder-dropping pooling make the maps of a prefix
/// exact leading columns of the full-length maps, so one full forward pass
/// serves every s >= min_input_length; each prefix only re-takes row maxima
/// over its leading columns. Shorter prefixes are zero-padded and run on
/// their own. Results are bitwise identical to predict_proba on the prefix.
inline std::vector<std::vector<double>> prefix_probabilities(const NetworkParams& params,
                                                             const NetworkConfig& cfg,
                                                             std::span<const double> series,
                                                             std::span<const std::size_t> lengths) {
  const std::size_t s_min = min_input_length(cfg);
  std::vector<std::vector<double>> out(lengths.size());
  std::vector<Matrix2D> full;
  if (series.size() >= s_min) full = final_maps(params, cfg, series);
  std::vector<double> feats;
  for (std::size_t q = 0; q < lengths.size(); ++q) {
    const std::size_t s = lengths[q];
    if (s < 1 || s > series.size()) throw BoundsError("prefix_probabilities: prefix length out of range");
    if (s < s_min) {
      out[q] = predict_proba(params, cfg, series.first(s));
      continue;
    }
    feats.clear();
    for (std::size_t c = 0; c < cfg.channels.size(); ++c) {
      const std::size_t width = detail::final_width(cfg.channels[c], s);
      const auto& map = full[c];
      for (std::size_t r = 0; r < map.rows(); ++r) {
        const auto row = map.row(r);
        std::size_t best = 0;
        for (std::size_t t = 1; t < width; ++t) {
          if (row[t] > row[best]) best = t;
        }
        feats.push_back(row[best]);
      }
    }
    out[q] = classify_features(params, feats);
  }
  return out;
}

/// Per-series probabilities at each fraction in `fractions`.
inline std::vector<std::vector<std::vector<double>>> prefix_probabilities(const NetworkParams& params,
                                                                          const NetworkConfig& cfg,
                                                                          const Dataset& d,
                                                                          std::span<const double> fractions,
                                                                          std::size_t workers = 1) {
  std::vector<std::vector<std::vector<double>>> out(d.size());
  parallel_for(d.size(), workers, [&](std::size_t i) {
    const auto& s = d.series[i];
    std::vector<std::size_t> lengths;
    for (double f : fractions) lengths.push_back(prefix_length(f, s.length()));
    out[i] = prefix_probabilities(params, cfg, s.values, lengths);
  });
  return out;
}

/// Accuracy of argmax predictions on T_{↓round(f·L)} for each fraction f.
inline EarlinessCurve eval_fixed_fractions(const NetworkParams& params, const NetworkConfig& cfg, const Dataset& test,
                                           std::span<const double> fractions, std::size_t workers = 1) {
  if (test.empty()) throw EvaluationError("eval_fixed_fractions: empty test set");
  if (fractions.empty()) throw EvaluationError("eval_fixed_fractions: no fractions");
  const auto probs = prefix_probabilities(params, cfg, test, fractions, workers);
  std::vector<CurvePoint> points;
  for (std::size_t q = 0; q < fractions.size(); ++q) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) correct += argmax(probs[i][q]) == test.series[i].label;
    points.push_back({fractions[q], static_cast<double>(correct) / static_cast<double>(test.size()), std::nullopt});
  }
  return make_curve(std::move(points));
}

/// Index of the first checkpoint whose top probability reaches `threshold`,
/// or the last checkpoint when none does.
inline std::size_t first_crossing(std::span<const double> max_probs, double threshold) {
  for (std::size_t q = 0; q < max_probs.size(); ++q) {
    if (max_probs[q] >= threshold) return q;
  }
  return max_probs.size() - 1;
}

/// Confidence-threshold early prediction. For each threshold, every series is
/// scanned checkpoint by checkpoint and the first prediction whose top softmax
/// probability reaches the threshold is committed; otherwise the full-length
/// prediction is used. Each point is (mean committed fraction, accuracy).
inline EarlinessCurve eval_threshold_sweep(const NetworkParams& params, const NetworkConfig& cfg, const Dataset& test,
                                           std::span<const double> thresholds, std::span<const double> checkpoints,
                                           std::size_t workers = 1) {
  if (test.empty()) throw EvaluationError("eval_threshold_sweep: empty test set");
  if (checkpoints.empty() || checkpoints.back() != 1.0 || !std::is_sorted(checkpoints.begin(), checkpoints.end())) {
    throw EvaluationError("eval_threshold_sweep: checkpoints must be ascending and end at 1.0");
  }
  for (double t : thresholds) {
    if (!(t >= 0.0 && t <= 1.0)) throw RangeError("eval_threshold_sweep: threshold outside [0, 1]");
  }
  const auto probs = prefix_probabilities(params, cfg, test, checkpoints, workers);
  std::vector<std::vector<double>> top(test.size(), std::vector<double>(checkpoints.size()));
  std::vector<std::vector<std::size_t>> pred(test.size(), std::vector<std::size_t>(checkpoints.size()));
  for (std::size_t i = 0; i < test.size(); ++i) {
    for (std::size_t q = 0; q < checkpoints.size(); ++q) {
      pred[i][q] = argmax(probs[i][q]);
      top[i][q] = probs[i][q][pred[i][q]];
    }
  }
  std::vector<CurvePoint> points;
  for (double tau : thresholds) {
    double frac_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const std::size_t q = first_crossing(top[i], tau);
      frac_sum += checkpoints[q];
      correct += pred[i][q] == test.series[i].label;
    }
    const auto n = static_cast<double>(test.size());
    points.push_back({frac_sum / n, static_cast<double>(correct) / n, tau});
  }
  return make_curve(std::move(points));
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string format_fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

/// CSV with header `threshold,avg_fraction,accuracy`; the threshold field is
/// empty for fixed-fraction curves.
inline void write_curve_csv(const EarlinessCurve& curve, std::ostream& out) {
  out << "threshold,avg_fraction,accuracy\n";
  for (const auto& p : curve.points) {
    out << (p.threshold ? format_fixed6(*p.threshold) : std::string()) << ',' << format_fixed6(p.avg_fraction)
        << ',' << format_fixed6(p.accuracy) << '\n';
  }
}

inline nlohmann::json curve_to_json(const EarlinessCurve& curve) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : curve.points) {
    nlohmann::json j{{"avg_fraction", p.avg_fraction}, {"accuracy", p.accuracy}};
    j["threshold"] = p.threshold ? nlohmann::json(*p.threshold) : nlohmann::json(nullptr);
    pts.push_back(std::move(j));
  }
  return {{"points", std::move(pts)}, {"auc", curve.auc}};
}

}  // namespace earlyshape
