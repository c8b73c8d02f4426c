#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "earlyshape/error.hpp"
#include "earlyshape/numerics.hpp"

namespace earlyshape {

/// One convolutional tower. Every layer uses the same filter length; all
/// layers but the last are followed by non-overlapping max-pooling.
struct ChannelConfig {
  std::size_t filter_len = 3;
  std::vector<std::size_t> widths{48, 48, 96};
  std::size_t pool_factor = 2;

  friend bool operator==(const ChannelConfig&, const ChannelConfig&) = default;
};

struct NetworkConfig {
  std::vector<ChannelConfig> channels;
  std::size_t n_classes = 2;
  double dropout_rate = 0.0;
  std::size_t series_len = 0;

  /// Width of the max-over-time feature vector: sum of last-layer widths.
  std::size_t feature_dim() const {
    std::size_t n = 0;
    for (const auto& c : channels) n += c.widths.back();
    return n;
  }

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Filter lengths for the three towers: max(3, round_half_up(p * L)) for
/// p in {3%, 5%, 10%}. Integer arithmetic keeps the .5 cases exact.
inline std::vector<std::size_t> derive_filter_lengths(std::size_t series_len) {
  std::vector<std::size_t> out;
  for (std::size_t percent : {3u, 5u, 10u}) {
    out.push_back(std::max<std::size_t>(3, (percent * series_len + 50) / 100));
  }
  return out;
}

/// Smallest input length for which the tower's last conv layer still emits one
/// column. Inverts len' = floor((len - m + 1) / k) for pooled layers and
/// len' = len - m + 1 for the final layer.
inline std::size_t min_input_length(const ChannelConfig& ch) {
  const std::size_t m = ch.filter_len;
  std::size_t need = m;  // input to the last conv layer
  for (std::size_t layer = ch.widths.size() - 1; layer-- > 0;) {
    // pooled output must be >= need, so conv output >= need * k
    need = need * ch.pool_factor + m - 1;
  }
  return need;
}

inline std::size_t min_input_length(const NetworkConfig& cfg) {
  std::size_t s = 1;
  for (const auto& ch : cfg.channels) s = std::max(s, min_input_length(ch));
  return s;
}

inline void validate(const NetworkConfig& cfg) {
  if (cfg.channels.empty()) throw ConfigError("network needs at least one channel");
  if (cfg.n_classes < 2) throw ConfigError("network needs at least two classes");
  if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0)) {
    throw ConfigError("dropout rate must be in [0, 1)");
  }
  for (const auto& ch : cfg.channels) {
    if (ch.filter_len < 1) throw ConfigError("filter length must be positive");
    if (ch.pool_factor < 1) throw ConfigError("pool factor must be positive");
    if (ch.widths.empty()) throw ConfigError("channel needs at least one conv layer");
    for (auto w : ch.widths) {
      if (w == 0) throw ConfigError("layer width must be positive");
    }
  }
  if (cfg.series_len > 0 && min_input_length(cfg) > cfg.series_len) {
    throw ConfigError("architecture too deep for series length: needs " +
                      std::to_string(min_input_length(cfg)) + " timestamps, series has " +
                      std::to_string(cfg.series_len));
  }
}

/// Three towers with filter lengths {3%, 5%, 10%} of L and widths {48, 48, 96}.
inline NetworkConfig standard_network(std::size_t series_len, std::size_t n_classes,
                                      std::size_t pool_factor = 2, double dropout_rate = 0.5) {
  NetworkConfig cfg;
  for (auto m : derive_filter_lengths(series_len)) {
    cfg.channels.push_back({m, {48, 48, 96}, pool_factor});
  }
  cfg.n_classes = n_classes;
  cfg.dropout_rate = dropout_rate;
  cfg.series_len = series_len;
  validate(cfg);
  return cfg;
}

// ---------------------------------------------------------------------------
// Parameters

/// Filters stored as [out][in][tap], row-major.
struct ConvLayerParams {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t filter_len = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  double& w(std::size_t o, std::size_t i, std::size_t j) {
    return weights[(o * in_channels + i) * filter_len + j];
  }
  double w(std::size_t o, std::size_t i, std::size_t j) const {
    return weights[(o * in_channels + i) * filter_len + j];
  }
  std::span<const double> filter(std::size_t o, std::size_t i) const {
    return {weights.data() + (o * in_channels + i) * filter_len, filter_len};
  }

  friend bool operator==(const ConvLayerParams&, const ConvLayerParams&) = default;
};

struct ChannelParams {
  std::vector<ConvLayerParams> layers;
  friend bool operator==(const ChannelParams&, const ChannelParams&) = default;
};

enum class TensorKind { weight, bias };

struct TensorRef {
  std::span<double> values;
  TensorKind kind;
};

struct ConstTensorRef {
  std::span<const double> values;
  TensorKind kind;
};

/// Every trainable tensor of the network. Gradients and optimizer state use
/// the same layout.
struct ParameterSet {
  std::vector<ChannelParams> channels;
  Matrix2D dense;                 // [n_classes x feature_dim]
  std::vector<double> dense_bias;  // [n_classes]

  static ParameterSet zeros(const NetworkConfig& cfg) {
    ParameterSet p;
    for (const auto& ch : cfg.channels) {
      ChannelParams cp;
      std::size_t in = 1;
      for (auto width : ch.widths) {
        cp.layers.push_back({width, in, ch.filter_len,
                             std::vector<double>(width * in * ch.filter_len, 0.0),
                             std::vector<double>(width, 0.0)});
        in = width;
      }
      p.channels.push_back(std::move(cp));
    }
    p.dense = Matrix2D(cfg.n_classes, cfg.feature_dim());
    p.dense_bias.assign(cfg.n_classes, 0.0);
    return p;
  }

  /// Tensors in a fixed order: per channel, per layer (weights, bias), then
  /// dense weights and dense bias.
  std::vector<TensorRef> tensors() {
    std::vector<TensorRef> out;
    for (auto& ch : channels) {
      for (auto& l : ch.layers) {
        out.push_back({l.weights, TensorKind::weight});
        out.push_back({l.bias, TensorKind::bias});
      }
    }
    out.push_back({dense.values(), TensorKind::weight});
    out.push_back({dense_bias, TensorKind::bias});
    return out;
  }

  std::vector<ConstTensorRef> tensors() const {
    std::vector<ConstTensorRef> out;
    for (const auto& ch : channels) {
      for (const auto& l : ch.layers) {
        out.push_back({l.weights, TensorKind::weight});
        out.push_back({l.bias, TensorKind::bias});
      }
    }
    out.push_back({dense.values(), TensorKind::weight});
    out.push_back({dense_bias, TensorKind::bias});
    return out;
  }

  std::size_t size() const {
    std::size_t n = dense.size() + dense_bias.size();
    for (const auto& ch : channels) {
      for (const auto& l : ch.layers) n += l.weights.size() + l.bias.size();
    }
    return n;
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(size());
    for (auto t : tensors()) out.insert(out.end(), t.values.begin(), t.values.end());
    return out;
  }

  void assign(std::span<const double> flat) {
    if (flat.size() != size()) throw ShapeError("ParameterSet::assign: length mismatch");
    std::size_t pos = 0;
    for (auto t : tensors()) {
      std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), t.values.size(), t.values.begin());
      pos += t.values.size();
    }
  }

  void set_zero() {
    for (auto t : tensors()) std::fill(t.values.begin(), t.values.end(), 0.0);
  }

  /// this += other, tensor by tensor.
  void accumulate(const ParameterSet& other) {
    auto dst = tensors();
    auto src = other.tensors();
    if (dst.size() != src.size()) throw ShapeError("ParameterSet::accumulate: layout mismatch");
    for (std::size_t t = 0; t < dst.size(); ++t) {
      if (dst[t].values.size() != src[t].values.size()) throw ShapeError("ParameterSet::accumulate: shape mismatch");
      for (std::size_t i = 0; i < dst[t].values.size(); ++i) dst[t].values[i] += src[t].values[i];
    }
  }

  void scale(double factor) {
    for (auto t : tensors()) {
      for (auto& v : t.values) v *= factor;
    }
  }

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;
};

using NetworkParams = ParameterSet;
using Gradients = ParameterSet;

/// Throws ShapeError unless `p` has the layout `cfg` prescribes.
inline void check_shapes(const NetworkParams& p, const NetworkConfig& cfg) {
  const auto ref = ParameterSet::zeros(cfg);
  bool ok = p.channels.size() == ref.channels.size() && p.dense.rows() == ref.dense.rows() &&
            p.dense.cols() == ref.dense.cols() && p.dense_bias.size() == ref.dense_bias.size();
  for (std::size_t c = 0; ok && c < ref.channels.size(); ++c) {
    ok = p.channels[c].layers.size() == ref.channels[c].layers.size();
    for (std::size_t l = 0; ok && l < ref.channels[c].layers.size(); ++l) {
      const auto& a = p.channels[c].layers[l];
      const auto& b = ref.channels[c].layers[l];
      ok = a.out_channels == b.out_channels && a.in_channels == b.in_channels &&
           a.filter_len == b.filter_len && a.weights.size() == b.weights.size() &&
           a.bias.size() == b.bias.size();
    }
  }
  if (!ok) throw ShapeError("parameters do not match the network configuration");
}

// ---------------------------------------------------------------------------
// Layer primitives

/// Valid cross-correlation:
/// out[c, i] = bias[c] + sum_{c', j} w[c, c', j] * in[c', i + j].
inline Matrix2D conv1d_valid(const Matrix2D& input, const ConvLayerParams& layer) {
  const std::size_t m = layer.filter_len;
  if (input.rows() != layer.in_channels) {
    throw ShapeError("conv1d_valid: input has " + std::to_string(input.rows()) +
                     " channels, layer expects " + std::to_string(layer.in_channels));
  }
  if (input.cols() < m) {
    throw ShapeError("conv1d_valid: input length " + std::to_string(input.cols()) +
                     " shorter than filter length " + std::to_string(m));
  }
  const std::size_t out_len = input.cols() - m + 1;
  Matrix2D out(layer.out_channels, out_len);
  for (std::size_t o = 0; o < layer.out_channels; ++o) {
    double* dst = out.row(o).data();
    std::fill_n(dst, out_len, layer.bias[o]);
    for (std::size_t i = 0; i < layer.in_channels; ++i) {
      const double* src = input.row(i).data();
      const double* f = layer.weights.data() + (o * layer.in_channels + i) * m;
      for (std::size_t j = 0; j < m; ++j) {
        const double wj = f[j];
        const double* s = src + j;
        for (std::size_t t = 0; t < out_len; ++t) dst[t] += wj * s[t];
      }
    }
  }
  return out;
}

inline Matrix2D relu(const Matrix2D& x) {
  Matrix2D out = x;
  for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

struct PoolResult {
  Matrix2D values;
  std::vector<std::size_t> argmax;  // [rows x windows], column index into the input
};

/// Non-overlapping max-pooling; trailing l mod k columns are dropped and ties
/// resolve to the first maximal column.
inline PoolResult maxpool1d(const Matrix2D& x, std::size_t k) {
  if (k < 1) throw ShapeError("maxpool1d: pool factor must be positive");
  const std::size_t windows = x.cols() / k;
  if (windows == 0) {
    throw ShapeError("maxpool1d: input length " + std::to_string(x.cols()) +
                     " shorter than pool factor " + std::to_string(k));
  }
  PoolResult r{Matrix2D(x.rows(), windows), std::vector<std::size_t>(x.rows() * windows)};
  for (std::size_t c = 0; c < x.rows(); ++c) {
    const auto row = x.row(c);
    for (std::size_t w = 0; w < windows; ++w) {
      std::size_t best = w * k;
      for (std::size_t t = best + 1; t < (w + 1) * k; ++t) {
        if (row[t] > row[best]) best = t;
      }
      r.values(c, w) = row[best];
      r.argmax[c * windows + w] = best;
    }
  }
  return r;
}

struct MaxOverTime {
  std::vector<double> features;
  std::vector<std::size_t> argmax;  // column of the first maximum per feature
};

/// Row maxima of each map, concatenated map by map.
inline MaxOverTime global_max_over_time(std::span<const Matrix2D> maps) {
  MaxOverTime r;
  for (const auto& map : maps) {
    if (map.cols() == 0) throw ShapeError("global_max_over_time: empty feature map");
    for (std::size_t c = 0; c < map.rows(); ++c) {
      const auto row = map.row(c);
      std::size_t best = 0;
      for (std::size_t t = 1; t < row.size(); ++t) {
        if (row[t] > row[best]) best = t;
      }
      r.features.push_back(row[best]);
      r.argmax.push_back(best);
    }
  }
  return r;
}

enum class Mode { train, infer };

struct DropoutResult {
  std::vector<double> values;
  std::vector<double> mask;  // 0 or 1/(1-rate) per feature
};

/// Drops whole features (each one is a collapsed feature map) with probability
/// `rate` and rescales survivors by 1/(1-rate). Identity in infer mode.
inline DropoutResult spatial_dropout(std::span<const double> features, double rate, Rng* rng, Mode mode) {
  if (!(rate >= 0.0 && rate < 1.0)) throw RangeError("spatial_dropout: rate must be in [0, 1)");
  DropoutResult r{{features.begin(), features.end()}, std::vector<double>(features.size(), 1.0)};
  if (mode == Mode::infer || rate == 0.0) return r;
  if (rng == nullptr) throw RangeError("spatial_dropout: train mode needs a random stream");
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < features.size(); ++i) {
    r.mask[i] = rng->uniform01() < rate ? 0.0 : keep_scale;
    r.values[i] *= r.mask[i];
  }
  return r;
}

inline std::vector<double> softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

/// Cross-entropy -log p[label] with p clamped below at 1e-12.
inline double loss(std::span<const double> probs, std::size_t label) {
  return -std::log(std::max(probs[label], 1e-12));
}

/// Index of the first maximal entry.
inline std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

// ---------------------------------------------------------------------------
// Forward / backward

struct LayerCache {
  Matrix2D input;  // layer input (previous pooled map, or the raw series)
  Matrix2D pre;    // conv output o
  Matrix2D act;    // relu(o)
  std::vector<std::size_t> pool_argmax;  // empty for the last layer
  std::size_t pooled_cols = 0;
};

struct ChannelCache {
  std::vector<LayerCache> layers;
  std::vector<std::size_t> feature_argmax;
};

struct ForwardCache {
  std::vector<ChannelCache> channels;
  std::vector<double> features;  // F(T) before dropout
  std::vector<double> dropout_mask;
  std::vector<double> dropped;   // F(T) after dropout
  std::vector<double> logits;
  std::vector<double> probs;
  std::size_t input_length = 0;   // length of the series passed in
  std::size_t padded_length = 0;  // length actually convolved
};

struct ForwardResult {
  std::vector<double> probs;
  ForwardCache cache;
};

namespace detail {

inline void require_finite(const Matrix2D& m, std::size_t channel, std::size_t layer, const char* what) {
  if (!m.all_finite()) {
    throw NumericError("non-finite " + std::string(what) + " in channel " + std::to_string(channel) +
                       ", layer " + std::to_string(layer));
  }
}

inline Matrix2D padded_input(std::span<const double> series, std::size_t min_len) {
  const std::size_t len = std::max(series.size(), min_len);
  Matrix2D x(1, len, 0.0);
  std::copy(series.begin(), series.end(), x.row(0).begin());
  return x;
}

/// Runs one tower and returns its last activation map.
inline Matrix2D run_channel(const ChannelParams& cp, const ChannelConfig& ch, Matrix2D x,
                            std::size_t channel_index, ChannelCache* cache) {
  const std::size_t n_layers = cp.layers.size();
  for (std::size_t l = 0; l < n_layers; ++l) {
    LayerCache lc;
    lc.pre = conv1d_valid(x, cp.layers[l]);
    require_finite(lc.pre, channel_index, l, "pre-activation");
    lc.act = relu(lc.pre);
    if (l + 1 < n_layers) {
      auto pooled = maxpool1d(lc.act, ch.pool_factor);
      lc.pooled_cols = pooled.values.cols();
      if (cache) {
        lc.pool_argmax = std::move(pooled.argmax);
        lc.input = std::move(x);
      }
      x = std::move(pooled.values);
    } else {
      if (!cache) return std::move(lc.act);
      lc.input = std::move(x);
      Matrix2D last = lc.act;
      cache->layers.push_back(std::move(lc));
      return last;
    }
    if (cache) cache->layers.push_back(std::move(lc));
  }
  return x;  // unreachable: widths is non-empty
}

}  // namespace detail

/// Last activation map of every tower for the (zero-padded) series.
inline std::vector<Matrix2D> final_maps(const NetworkParams& params, const NetworkConfig& cfg,
                                        std::span<const double> series) {
  const auto x = detail::padded_input(series, min_input_length(cfg));
  std::vector<Matrix2D> maps;
  maps.reserve(cfg.channels.size());
  for (std::size_t c = 0; c < cfg.channels.size(); ++c) {
    maps.push_back(detail::run_channel(params.channels[c], cfg.channels[c], x, c, nullptr));
  }
  return maps;
}

/// Dense layer + softmax on a (post-dropout) feature vector.
inline std::vector<double> classify_features(const NetworkParams& params, std::span<const double> features,
                                             std::vector<double>* logits_out = nullptr) {
  auto logits = matvec(params.dense, features);
  for (std::size_t k = 0; k < logits.size(); ++k) logits[k] += params.dense_bias[k];
  for (double v : logits) {
    if (!std::isfinite(v)) throw NumericError("non-finite logit in dense layer");
  }
  auto probs = softmax(logits);
  if (logits_out) *logits_out = std::move(logits);
  return probs;
}

/// Full forward pass with cache. Inputs shorter than min_input_length(cfg) are
/// right-padded with zeros. If `fixed_mask` is given it replaces the sampled
/// dropout mask (used to hold the mask still during gradient checks).
inline ForwardResult forward(const NetworkParams& params, const NetworkConfig& cfg,
                             std::span<const double> series, Mode mode, Rng* rng,
                             const std::vector<double>* fixed_mask = nullptr) {
  if (series.empty()) throw ShapeError("forward: empty series");
  ForwardResult r;
  auto& cache = r.cache;
  cache.input_length = series.size();
  const auto x = detail::padded_input(series, min_input_length(cfg));
  cache.padded_length = x.cols();

  std::vector<Matrix2D> maps;
  cache.channels.resize(cfg.channels.size());
  for (std::size_t c = 0; c < cfg.channels.size(); ++c) {
    maps.push_back(detail::run_channel(params.channels[c], cfg.channels[c], x, c, &cache.channels[c]));
  }
  auto mot = global_max_over_time(maps);
  std::size_t pos = 0;
  for (std::size_t c = 0; c < cfg.channels.size(); ++c) {
    const std::size_t n = maps[c].rows();
    cache.channels[c].feature_argmax.assign(mot.argmax.begin() + static_cast<std::ptrdiff_t>(pos),
                                            mot.argmax.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
  }
  cache.features = std::move(mot.features);

  if (fixed_mask) {
    if (fixed_mask->size() != cache.features.size()) throw ShapeError("forward: dropout mask length mismatch");
    cache.dropout_mask = *fixed_mask;
    cache.dropped = cache.features;
    for (std::size_t i = 0; i < cache.dropped.size(); ++i) cache.dropped[i] *= cache.dropout_mask[i];
  } else {
    auto d = spatial_dropout(cache.features, cfg.dropout_rate, rng, mode);
    cache.dropped = std::move(d.values);
    cache.dropout_mask = std::move(d.mask);
  }
  cache.probs = classify_features(params, cache.dropped, &cache.logits);
  r.probs = cache.probs;
  return r;
}

/// Infer-mode class probabilities.
inline std::vector<double> predict_proba(const NetworkParams& params, const NetworkConfig& cfg,
                                         std::span<const double> series) {
  const auto maps = final_maps(params, cfg, series);
  return classify_features(params, global_max_over_time(maps).features);
}

/// Infer-mode max-over-time features F(T).
inline std::vector<double> features(const NetworkParams& params, const NetworkConfig& cfg,
                                    std::span<const double> series) {
  return global_max_over_time(final_maps(params, cfg, series)).features;
}

/// Exact gradient of loss(probs, label) with respect to every parameter.
inline Gradients backward(const NetworkParams& params, const NetworkConfig& cfg, const ForwardCache& cache,
                          std::size_t label) {
  if (cache.channels.size() != cfg.channels.size() || cache.probs.size() != cfg.n_classes ||
      cache.features.size() != params.dense.cols() || label >= cfg.n_classes) {
    throw ShapeError("backward: cache does not match network configuration");
  }
  Gradients g = ParameterSet::zeros(cfg);

  std::vector<double> dlogits = cache.probs;
  dlogits[label] -= 1.0;
  const std::size_t n_feat = cache.features.size();
  std::vector<double> dfeat(n_feat, 0.0);
  for (std::size_t k = 0; k < dlogits.size(); ++k) {
    g.dense_bias[k] = dlogits[k];
    auto grow = g.dense.row(k);
    const auto wrow = params.dense.row(k);
    for (std::size_t f = 0; f < n_feat; ++f) {
      grow[f] = dlogits[k] * cache.dropped[f];
      dfeat[f] += wrow[f] * dlogits[k];
    }
  }
  for (std::size_t f = 0; f < n_feat; ++f) dfeat[f] *= cache.dropout_mask[f];

  std::size_t feat_offset = 0;
  for (std::size_t c = 0; c < cfg.channels.size(); ++c) {
    const auto& cc = cache.channels[c];
    const auto& cp = params.channels[c];
    auto& gc = g.channels[c];
    const std::size_t n_layers = cc.layers.size();

    // Gradient with respect to the last activation map: only argmax columns.
    const auto& last = cc.layers.back();
    Matrix2D dact(last.act.rows(), last.act.cols(), 0.0);
    for (std::size_t r = 0; r < last.act.rows(); ++r) dact(r, cc.feature_argmax[r]) = dfeat[feat_offset + r];
    feat_offset += last.act.rows();

    for (std::size_t l = n_layers; l-- > 0;) {
      const auto& lc = cc.layers[l];
      const auto& layer = cp.layers[l];
      auto& gl = gc.layers[l];
      const std::size_t m = layer.filter_len;
      const std::size_t out_len = lc.pre.cols();

      // relu'
      Matrix2D dpre = std::move(dact);
      for (std::size_t i = 0; i < dpre.size(); ++i) {
        if (!(lc.pre.values()[i] > 0.0)) dpre.values()[i] = 0.0;
      }

      Matrix2D dinput;
      if (l > 0) dinput = Matrix2D(lc.input.rows(), lc.input.cols(), 0.0);
      for (std::size_t o = 0; o < layer.out_channels; ++o) {
        const double* dp = dpre.row(o).data();
        bool any = false;
        double bsum = 0.0;
        for (std::size_t t = 0; t < out_len; ++t) {
          bsum += dp[t];
          any = any || dp[t] != 0.0;
        }
        gl.bias[o] = bsum;
        if (!any) continue;
        for (std::size_t i = 0; i < layer.in_channels; ++i) {
          const double* src = lc.input.row(i).data();
          double* gw = gl.weights.data() + (o * layer.in_channels + i) * m;
          const double* w = layer.weights.data() + (o * layer.in_channels + i) * m;
          double* di = l > 0 ? dinput.row(i).data() : nullptr;
          for (std::size_t j = 0; j < m; ++j) {
            const double* s = src + j;
            double acc = 0.0;
            for (std::size_t t = 0; t < out_len; ++t) acc += dp[t] * s[t];
            gw[j] = acc;
            if (di) {
              const double wj = w[j];
              double* d = di + j;
              for (std::size_t t = 0; t < out_len; ++t) d[t] += wj * dp[t];
            }
          }
        }
      }
      if (l == 0) break;

      // Route through the previous layer's pooling back onto its activations.
      const auto& prev = cc.layers[l - 1];
      dact = Matrix2D(prev.act.rows(), prev.act.cols(), 0.0);
      const std::size_t windows = prev.pooled_cols;
      for (std::size_t r = 0; r < prev.act.rows(); ++r) {
        for (std::size_t w = 0; w < windows; ++w) {
          dact(r, prev.pool_argmax[r * windows + w]) += dinput(r, w);
        }
      }
    }
  }
  return g;
}

}  // namespace earlyshape
