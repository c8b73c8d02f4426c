#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "earlyshape/data.hpp"
#include "earlyshape/error.hpp"
#include "earlyshape/eval.hpp"
#include "earlyshape/nn.hpp"
#include "earlyshape/numerics.hpp"
#include "earlyshape/optim.hpp"
#include "earlyshape/parallel.hpp"

namespace earlyshape {

inline std::vector<double> default_auc_grid() { return even_fractions(10); }

struct TrainConfig {
  double rho = 0.98;
  std::size_t pool_factor = 2;
  double dropout_rate = 0.5;
  double weight_decay = 0.0;
  std::size_t batch_size = 50;
  std::size_t max_epochs = 200;
  std::size_t patience = 20;
  std::uint64_t seed = 0;
  /// Stratified hold-out used for early stopping when no validation set is given.
  double validation_fraction = 0.2;
  std::vector<double> auc_fraction_grid = default_auc_grid();
  /// When set, every example is truncated to exactly this length and the
  /// geometric sampler is never consulted (fixed-truncation training).
  std::optional<std::size_t> fixed_length;
  double lr = 1e-3;
  double rms_alpha = 0.9;
  double rms_eps = 1e-8;
  /// Threads for per-example gradients and evaluation. Results do not depend on it.
  std::size_t workers = 1;
};

inline void validate(const TrainConfig& cfg) {
  if (!(cfg.rho >= 0.0 && cfg.rho < 1.0)) throw ConfigError("rho must be in [0, 1)");
  if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1)");
  if (!(cfg.weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  if (cfg.pool_factor < 1) throw ConfigError("pool factor must be positive");
  if (cfg.batch_size < 1) throw ConfigError("batch size must be positive");
  if (cfg.patience < 1) throw ConfigError("patience must be at least 1");
  if (cfg.max_epochs < 1) throw ConfigError("max epochs must be at least 1");
  if (!(cfg.validation_fraction > 0.0 && cfg.validation_fraction < 1.0)) {
    throw ConfigError("validation fraction must be in (0, 1)");
  }
  const auto& g = cfg.auc_fraction_grid;
  if (g.empty() || g.back() != 1.0 || !std::is_sorted(g.begin(), g.end()) || !(g.front() > 0.0)) {
    throw ConfigError("AUC fraction grid must be ascending within (0, 1] and end at 1.0");
  }
  if (!(cfg.lr >= 0.0) || !(cfg.rms_alpha > 0.0 && cfg.rms_alpha < 1.0) || !(cfg.rms_eps > 0.0)) {
    throw ConfigError("invalid RMSprop constants");
  }
}

/// `base` with the pool factor and dropout rate taken from the hyperparameters.
inline NetworkConfig network_for(const TrainConfig& cfg, NetworkConfig base) {
  for (auto& ch : base.channels) ch.pool_factor = cfg.pool_factor;
  base.dropout_rate = cfg.dropout_rate;
  validate(base);
  return base;
}

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double validation_auc = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_auc = -1.0;
  std::string stop_reason;
  double wall_seconds = 0.0;
};

struct TrainResult {
  NetworkParams params;
  TrainReport report;
};

using EpochObserver = std::function<void(const EpochRecord&)>;

/// Validation earliness-AUC: accuracy on T_{↓round(f·L)} for each grid
/// fraction, integrated by trapezoid and normalised by the grid span.
inline double earliness_auc(const NetworkParams& params, const NetworkConfig& cfg, const Dataset& validation,
                            std::span<const double> fraction_grid, std::size_t workers = 1) {
  if (validation.empty()) throw EvaluationError("earliness_auc: empty validation set");
  if (fraction_grid.empty() || fraction_grid.back() != 1.0) {
    throw EvaluationError("earliness_auc: grid must be non-empty and end at 1.0");
  }
  return eval_fixed_fractions(params, cfg, validation, fraction_grid, workers).auc;
}

namespace detail {

/// Per-example gradients are summed in fixed chunks of this many examples and
/// the chunk sums are added in order, so the batch gradient is the same for
/// every worker count.
inline constexpr std::size_t kGradChunk = 5;

}  // namespace detail

/// Trains with an explicit validation set (used inside cross-validation).
inline TrainResult train(const Dataset& train_set, const Dataset& validation, const TrainConfig& cfg,
                         const NetworkConfig& net, const EpochObserver& observer = {}) {
  validate(cfg);
  validate(net);
  if (train_set.empty()) throw ConfigError("training set is empty");
  const std::size_t L = train_set.series_length();
  const std::size_t s_min = min_input_length(net);
  if (s_min > L) {
    throw ConfigError("architecture too deep for series length: needs " + std::to_string(s_min) +
                      " timestamps, series has " + std::to_string(L));
  }
  if (cfg.fixed_length && (*cfg.fixed_length < 1 || *cfg.fixed_length > L)) {
    throw BoundsError("fixed truncation length outside [1, L]");
  }
  const auto started = std::chrono::steady_clock::now();

  Rng init_rng(cfg.seed, "init");
  Rng batch_rng(cfg.seed, "minibatch");
  Rng trunc_rng(cfg.seed, "truncation");
  Rng dropout_rng(cfg.seed, "dropout");
  const TruncationSampler sampler(cfg.rho, s_min, L);

  NetworkParams params = init_params(net, init_rng);
  RmsPropState opt(net, cfg.lr, cfg.rms_alpha, cfg.rms_eps);

  TrainResult result{params, {}};
  std::vector<std::size_t> all(train_set.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double loss_sum = 0.0;
    const auto batches = make_minibatches(all, cfg.batch_size, batch_rng);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& batch = batches[b];
      std::vector<std::size_t> lengths(batch.size());
      std::vector<std::uint64_t> drop_seeds(batch.size());
      for (std::size_t j = 0; j < batch.size(); ++j) {
        lengths[j] = cfg.fixed_length ? *cfg.fixed_length : sample_truncation(sampler, trunc_rng);
        drop_seeds[j] = dropout_rng.next_u64();
      }
      const std::size_t n_chunks = (batch.size() + detail::kGradChunk - 1) / detail::kGradChunk;
      std::vector<Gradients> chunk_grads(n_chunks);
      std::vector<double> chunk_loss(n_chunks, 0.0);
      try {
        parallel_for(n_chunks, cfg.workers, [&](std::size_t c) {
          Gradients acc = ParameterSet::zeros(net);
          const std::size_t end = std::min(batch.size(), (c + 1) * detail::kGradChunk);
          for (std::size_t j = c * detail::kGradChunk; j < end; ++j) {
            const auto& ex = train_set.series[batch[j]];
            Rng drop(drop_seeds[j], "dropout-mask");
            const auto fwd = forward(params, net, std::span<const double>(ex.values).first(lengths[j]),
                                     Mode::train, &drop);
            chunk_loss[c] += loss(fwd.probs, ex.label);
            acc.accumulate(backward(params, net, fwd.cache, ex.label));
          }
          chunk_grads[c] = std::move(acc);
        });
        Gradients grad = std::move(chunk_grads[0]);
        for (std::size_t c = 1; c < n_chunks; ++c) grad.accumulate(chunk_grads[c]);
        grad.scale(1.0 / static_cast<double>(batch.size()));
        for (double l : chunk_loss) loss_sum += l;
        rmsprop_step(opt, params, grad, cfg.weight_decay);
      } catch (const NumericError& e) {
        e.rethrow_with_context("epoch " + std::to_string(epoch) + ", batch " + std::to_string(b + 1));
      }
    }

    EpochRecord rec{epoch, loss_sum / static_cast<double>(train_set.size()),
                    earliness_auc(params, net, validation, cfg.auc_fraction_grid, cfg.workers)};
    result.report.epochs.push_back(rec);
    if (observer) observer(rec);
    if (rec.validation_auc > result.report.best_auc) {
      result.report.best_auc = rec.validation_auc;
      result.report.best_epoch = epoch;
      result.params = params;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      result.report.stop_reason = "patience";
      break;
    }
  }
  if (result.report.stop_reason.empty()) result.report.stop_reason = "max_epochs";
  result.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

/// Trains on `dataset`, holding out a stratified `validation_fraction` of it
/// for early stopping.
inline TrainResult train(const Dataset& dataset, const TrainConfig& cfg, const NetworkConfig& net,
                         const EpochObserver& observer = {}) {
  validate(cfg);
  Rng holdout_rng(cfg.seed, "holdout");
  const auto split = stratified_holdout(dataset, cfg.validation_fraction, holdout_rng);
  return train(dataset.subset(split.train), dataset.subset(split.validation), cfg, net, observer);
}

inline nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j{{"rho", c.rho},
                   {"pool_factor", c.pool_factor},
                   {"dropout_rate", c.dropout_rate},
                   {"weight_decay", c.weight_decay},
                   {"batch_size", c.batch_size},
                   {"max_epochs", c.max_epochs},
                   {"patience", c.patience},
                   {"seed", c.seed},
                   {"validation_fraction", c.validation_fraction},
                   {"auc_fraction_grid", c.auc_fraction_grid},
                   {"lr", c.lr},
                   {"rms_alpha", c.rms_alpha},
                   {"rms_eps", c.rms_eps}};
  j["fixed_length"] = c.fixed_length ? nlohmann::json(*c.fixed_length) : nlohmann::json(nullptr);
  return j;
}

/// Overlays the keys present in `j` onto `base`. Unknown keys are rejected.
inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {}) {
  for (const auto& [key, value] : j.items()) {
    if (key == "rho") base.rho = value.get<double>();
    else if (key == "pool_factor") base.pool_factor = value.get<std::size_t>();
    else if (key == "dropout_rate") base.dropout_rate = value.get<double>();
    else if (key == "weight_decay") base.weight_decay = value.get<double>();
    else if (key == "batch_size") base.batch_size = value.get<std::size_t>();
    else if (key == "max_epochs") base.max_epochs = value.get<std::size_t>();
    else if (key == "patience") base.patience = value.get<std::size_t>();
    else if (key == "seed") base.seed = value.get<std::uint64_t>();
    else if (key == "validation_fraction") base.validation_fraction = value.get<double>();
    else if (key == "auc_fraction_grid") base.auc_fraction_grid = value.get<std::vector<double>>();
    else if (key == "lr") base.lr = value.get<double>();
    else if (key == "rms_alpha") base.rms_alpha = value.get<double>();
    else if (key == "rms_eps") base.rms_eps = value.get<double>();
    else if (key == "fixed_length") {
      base.fixed_length = value.is_null() ? std::nullopt : std::optional<std::size_t>(value.get<std::size_t>());
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  return base;
}

inline nlohmann::json to_json(const TrainReport& r) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"validation_auc", e.validation_auc}});
  }
  return {{"epochs", std::move(epochs)},
          {"best_epoch", r.best_epoch},
          {"best_auc", r.best_auc},
          {"stop_reason", r.stop_reason},
          {"wall_seconds", r.wall_seconds}};
}

// ---------------------------------------------------------------------------
// Hyperparameter search

struct HyperGrid {
  std::vector<double> rho{0.90, 0.95, 0.98, 0.99, 0.995};
  std::vector<std::size_t> pool_factor{2, 3, 5};
  std::vector<double> dropout_rate{0.4, 0.5, 0.6};
  std::vector<double> weight_decay{0.0, 1e-6, 1e-5, 1e-4};
};

/// Cartesian product in declaration order (rho outermost, weight decay
/// innermost), every other field copied from `base`.
inline std::vector<TrainConfig> expand_grid(const HyperGrid& grid, const TrainConfig& base) {
  std::vector<TrainConfig> out;
  for (double rho : grid.rho) {
    for (auto pool : grid.pool_factor) {
      for (double drop : grid.dropout_rate) {
        for (double wd : grid.weight_decay) {
          TrainConfig c = base;
          c.rho = rho;
          c.pool_factor = pool;
          c.dropout_rate = drop;
          c.weight_decay = wd;
          out.push_back(c);
        }
      }
    }
  }
  return out;
}

struct CvEntry {
  std::size_t candidate_index = 0;  // position in the candidate list
  TrainConfig config;
  std::vector<double> fold_auc;
  double mean_auc = 0.0;
};

namespace detail {

/// Higher mean AUC wins; ties go to the smaller rho.
inline bool cv_prefers(const CvEntry& a, const CvEntry& b) {
  return a.mean_auc > b.mean_auc || (a.mean_auc == b.mean_auc && a.config.rho < b.config.rho);
}

}  // namespace detail

struct CvResult {
  TrainConfig best;
  std::size_t best_index = 0;
  std::vector<CvEntry> evaluated;  // in candidate order
  std::vector<std::size_t> infeasible;  // candidates whose architecture exceeds L
};

/// k-fold cross-validation over `candidates`. Candidates whose network would
/// need more than L timestamps are skipped. Up to `budget` of the rest are
/// picked uniformly without replacement (all of them when budget covers the
/// list); each is scored by mean validation earliness-AUC over the folds.
/// Ties go to the smaller rho, then the earlier candidate.
inline CvResult cv_search(const Dataset& dataset, const std::vector<TrainConfig>& candidates,
                          const NetworkConfig& base_net, std::size_t k, std::size_t budget, std::uint64_t seed,
                          const std::function<void(const CvEntry&)>& observer = {}) {
  if (candidates.empty()) throw ConfigError("cv_search: no candidate configurations");
  if (budget < 1) throw ConfigError("cv_search: budget must be at least 1");
  Rng fold_rng(seed, "cv-folds");
  const auto folds = stratified_kfold(dataset, k, fold_rng);
  const std::size_t L = dataset.series_length();

  CvResult result;
  std::vector<std::size_t> feasible;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto net = base_net;
    for (auto& ch : net.channels) ch.pool_factor = candidates[i].pool_factor;
    (min_input_length(net) <= L ? feasible : result.infeasible).push_back(i);
  }
  if (feasible.empty()) throw ConfigError("cv_search: every candidate is too deep for series length " + std::to_string(L));

  std::vector<std::size_t> chosen = feasible;
  if (budget < chosen.size()) {
    Rng pick(seed, "cv-budget");
    pick.shuffle(chosen);
    chosen.resize(budget);
    std::sort(chosen.begin(), chosen.end());
  }

  for (auto ci : chosen) {
    CvEntry entry{ci, candidates[ci], {}, 0.0};
    const auto net = network_for(candidates[ci], base_net);
    for (std::size_t f = 0; f < folds.size(); ++f) {
      TrainConfig cfg = candidates[ci];
      cfg.seed = derive_seed(seed, ci, f);
      const auto fit = train(dataset.subset(folds[f].train), dataset.subset(folds[f].validation), cfg, net);
      entry.fold_auc.push_back(fit.report.best_auc);
    }
    double sum = 0.0;
    for (double a : entry.fold_auc) sum += a;
    entry.mean_auc = sum / static_cast<double>(entry.fold_auc.size());
    if (observer) observer(entry);
    result.evaluated.push_back(std::move(entry));
  }

  std::size_t best = 0;
  for (std::size_t e = 1; e < result.evaluated.size(); ++e) {
    if (detail::cv_prefers(result.evaluated[e], result.evaluated[best])) best = e;
  }
  result.best_index = result.evaluated[best].candidate_index;
  result.best = result.evaluated[best].config;
  return result;
}

}  // namespace earlyshape
