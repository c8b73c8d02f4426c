// earlyshape command-line driver.
//
// Exit codes: 0 success, 1 invalid input or configuration, 2 filesystem error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "earlyshape/earlyshape.hpp"

namespace fs = std::filesystem;
using namespace earlyshape;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Dataset lookup

fs::path resolve_data_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("EARLYSHAPE_DATA"); env && *env) return env;
  throw ConfigError("no data directory: pass --data or set EARLYSHAPE_DATA");
}

/// `<dir>/<name>_<split>` with an optional .tsv/.txt/.csv extension, also
/// looking inside `<dir>/<name>/` (the 2018 archive layout). Spaces in the
/// name are dropped, so "Gun Point" finds GunPoint_TRAIN.
fs::path resolve_split(const fs::path& dir, std::string name, const std::string& split) {
  std::erase(name, ' ');
  if (name.empty()) throw ConfigError("--dataset is empty");
  const std::string stem = name + "_" + split;
  for (const fs::path& base : {dir, dir / name}) {
    for (const char* ext : {"", ".tsv", ".txt", ".csv"}) {
      const auto p = base / (stem + ext);
      if (fs::is_regular_file(p)) return p;
    }
  }
  throw IoError("dataset file " + stem + " not found under " + dir.string());
}

struct DataArgs {
  std::string dir;
  std::string name;
};

void add_data_flags(CLI::App* app, DataArgs& d) {
  app->add_option("--data", d.dir, "Directory holding <name>_TRAIN / <name>_TEST (default $EARLYSHAPE_DATA)");
  app->add_option("--dataset", d.name, "Dataset name, e.g. Trace or \"Gun Point\"")->required();
}

Dataset load_split(const DataArgs& d, const std::string& split) {
  return load_ucr(resolve_split(resolve_data_dir(d.dir), d.name, split));
}

// ---------------------------------------------------------------------------
// Training configuration: flags > --config file > defaults

struct TrainFlags {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<double> rho, dropout, weight_decay, lr;
  std::optional<std::size_t> pool, epochs, patience, batch;
  std::size_t workers = 1;
};

void add_train_flags(CLI::App* app, TrainFlags& f) {
  app->add_option("--config", f.config_file, "JSON file with TrainConfig fields");
  app->add_option("--seed", f.seed, "Master seed");
  app->add_option("--rho", f.rho, "Geometric truncation parameter in [0, 1)");
  app->add_option("--pool", f.pool, "Max-pooling factor");
  app->add_option("--dropout", f.dropout, "SpatialDropout rate in [0, 1)");
  app->add_option("--weight-decay", f.weight_decay, "L2 weight decay");
  app->add_option("--lr", f.lr, "RMSprop learning rate");
  app->add_option("--batch", f.batch, "Minibatch size");
  app->add_option("--epochs", f.epochs, "Maximum epochs");
  app->add_option("--patience", f.patience, "Early-stopping patience in epochs");
  app->add_option("--workers", f.workers, "Worker threads (results do not depend on this)");
}

template <class T>
void check_flag(const std::optional<T>& v, bool ok, const std::string& flag, const std::string& rule) {
  if (v && !ok) {
    std::ostringstream s;
    s << flag << ' ' << *v << ": " << rule;
    throw ConfigError(s.str());
  }
}

TrainConfig effective_config(const TrainFlags& f) {
  TrainConfig cfg;
  if (!f.config_file.empty()) {
    json j;
    try {
      j = json::parse(read_file(f.config_file));
    } catch (const json::exception& e) {
      throw ConfigError("--config " + f.config_file + ": " + e.what());
    }
    try {
      cfg = train_config_from_json(j, cfg);
    } catch (const json::exception& e) {
      throw ConfigError("--config " + f.config_file + ": " + e.what());
    }
  }
  check_flag(f.rho, f.rho && *f.rho >= 0.0 && *f.rho < 1.0, "--rho", "must be in [0, 1)");
  check_flag(f.dropout, f.dropout && *f.dropout >= 0.0 && *f.dropout < 1.0, "--dropout", "must be in [0, 1)");
  check_flag(f.weight_decay, f.weight_decay && *f.weight_decay >= 0.0, "--weight-decay", "must be non-negative");
  check_flag(f.lr, f.lr && *f.lr > 0.0, "--lr", "must be positive");
  check_flag(f.pool, f.pool && *f.pool >= 1, "--pool", "must be at least 1");
  check_flag(f.batch, f.batch && *f.batch >= 1, "--batch", "must be at least 1");
  check_flag(f.epochs, f.epochs && *f.epochs >= 1, "--epochs", "must be at least 1");
  check_flag(f.patience, f.patience && *f.patience >= 1, "--patience", "must be at least 1");
  if (f.seed) cfg.seed = *f.seed;
  if (f.rho) cfg.rho = *f.rho;
  if (f.pool) cfg.pool_factor = *f.pool;
  if (f.dropout) cfg.dropout_rate = *f.dropout;
  if (f.weight_decay) cfg.weight_decay = *f.weight_decay;
  if (f.lr) cfg.lr = *f.lr;
  if (f.batch) cfg.batch_size = *f.batch;
  if (f.epochs) cfg.max_epochs = *f.epochs;
  if (f.patience) cfg.patience = *f.patience;
  if (f.workers < 1) throw ConfigError("--workers must be at least 1");
  cfg.workers = f.workers;
  validate(cfg);
  return cfg;
}

NetworkConfig network_for_data(const TrainConfig& cfg, const Dataset& d) {
  return standard_network(d.series_length(), d.n_classes, cfg.pool_factor, cfg.dropout_rate);
}

std::string epoch_line(const EpochRecord& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "epoch %zu loss %.6f auc %.6f", r.epoch, r.train_loss, r.validation_auc);
  return buf;
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(flag + ": '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw ConfigError(flag + ": empty list");
  return out;
}

std::vector<double> fractions_flag(const std::string& text, const std::string& flag, std::vector<double> fallback) {
  if (text.empty()) return fallback;
  auto v = parse_list(text, flag);
  for (double f : v) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError(flag + " " + std::to_string(f) + ": fractions must be in (0, 1]");
  }
  return v;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string curve_csv(const EarlinessCurve& c) {
  std::ostringstream s;
  write_curve_csv(c, s);
  return s.str();
}

// ---------------------------------------------------------------------------
// Commands

struct TrainArgs {
  DataArgs data;
  TrainFlags flags;
  std::string out = "run";
};

int cmd_train(const TrainArgs& a) {
  const auto cfg = effective_config(a.flags);
  const auto dataset = load_split(a.data, "TRAIN");
  const auto net = network_for_data(cfg, dataset);
  const fs::path out = a.out;

  std::string log;
  const auto fit = train(dataset, cfg, net, [&](const EpochRecord& r) {
    const auto line = epoch_line(r);
    std::cerr << line << '\n';
    log += line + '\n';
  });
  log += "stop " + fit.report.stop_reason + " best_epoch " + std::to_string(fit.report.best_epoch) + '\n';

  const json report{{"dataset", dataset.name},
                    {"train_config", to_json(cfg)},
                    {"network_config", to_json(net)},
                    {"report", to_json(fit.report)}};
  StagedOutputs staged;
  staged.stage(out / "model.json", serialize_model({net, fit.params}));
  staged.stage(out / "report.json", dump(report));
  staged.stage(out / "train.log", log);
  staged.commit();
  std::cout << "best epoch " << fit.report.best_epoch << " validation auc " << format_fixed6(fit.report.best_auc)
            << " (" << fit.report.stop_reason << ")\n";
  return 0;
}

struct EvalArgs {
  DataArgs data;
  std::string model;
  std::string mode = "fixed";
  std::string thresholds, fractions, checkpoints;
  std::string out = "eval";
  std::size_t workers = 1;
  bool per_timestamp = false;
};

int cmd_eval(const EvalArgs& a) {
  if (a.mode != "fixed" && a.mode != "threshold") throw ConfigError("--mode must be fixed or threshold");
  if (a.workers < 1) throw ConfigError("--workers must be at least 1");
  const auto model = load_model(a.model);
  const auto test = load_split(a.data, "TEST");
  if (test.series_length() != model.config.series_len || test.n_classes != model.config.n_classes) {
    throw ValidationError("test set shape (L=" + std::to_string(test.series_length()) + ", classes=" +
                          std::to_string(test.n_classes) + ") does not match the model");
  }
  EarlinessCurve curve;
  json settings{{"mode", a.mode}};
  if (a.mode == "fixed") {
    const auto fr = fractions_flag(a.fractions, "--fractions", even_fractions(10));
    curve = eval_fixed_fractions(model.params, model.config, test, fr, a.workers);
    settings["fractions"] = fr;
  } else {
    const auto th = a.thresholds.empty() ? default_thresholds() : parse_list(a.thresholds, "--thresholds");
    if (a.per_timestamp && !a.checkpoints.empty()) throw ConfigError("--per-timestamp and --checkpoints are exclusive");
    const auto cp = a.per_timestamp ? per_timestamp_checkpoints(test.series_length())
                                    : fractions_flag(a.checkpoints, "--checkpoints", default_checkpoints());
    curve = eval_threshold_sweep(model.params, model.config, test, th, cp, a.workers);
    settings["thresholds"] = th;
    settings["checkpoints"] = cp;
  }
  json j = curve_to_json(curve);
  j["dataset"] = test.name;
  j["model"] = a.model;
  j["settings"] = settings;
  const fs::path out = a.out;
  StagedOutputs staged;
  staged.stage(out / "curve.csv", curve_csv(curve));
  staged.stage(out / "curve.json", dump(j));
  staged.commit();
  std::cout << "auc " << format_fixed6(curve.auc) << " over " << curve.points.size() << " points\n";
  return 0;
}

struct BaselineArgs {
  std::string kind;
  DataArgs data;
  TrainFlags flags;
  std::string fractions;
  std::string out = "baseline";
};

int cmd_baseline(const BaselineArgs& a) {
  const auto train_set = load_split(a.data, "TRAIN");
  const auto test = load_split(a.data, "TEST");
  const fs::path out = a.out;
  StagedOutputs staged;
  if (a.kind == "knn") {
    const std::size_t workers = std::max<std::size_t>(a.flags.workers, 1);
    const double err = knn_error(make_knn(train_set), test, workers);
    json j{{"dataset", test.name}, {"method", "1nn-euclidean"}, {"error", err}};
    if (!a.fractions.empty()) {
      const auto fr = fractions_flag(a.fractions, "--fractions", {});
      const auto curve = knn_error_curve(train_set, test, fr, workers);
      staged.stage(out / "knn_curve.csv", curve_csv(curve));
      j["curve"] = curve_to_json(curve);
    }
    staged.stage(out / "knn.json", dump(j));
    staged.commit();
    std::printf("%s 1NN error %.3f\n", test.name.c_str(), err);
    return 0;
  }
  if (a.kind != "ensemble") throw ConfigError("baseline kind must be knn or ensemble");
  const auto cfg = effective_config(a.flags);
  const auto net = network_for_data(cfg, train_set);
  const auto fr = fractions_flag(a.fractions, "--fractions", even_fractions(10));
  const auto members = fixed_ensemble_train(train_set, fr, cfg, net, [](std::size_t i, const EpochRecord& r) {
    std::cerr << "member " << i << ' ' << epoch_line(r) << '\n';
  });
  const auto curve = fixed_ensemble_curve(members, net, test, cfg.workers);
  json reports = json::array();
  for (const auto& m : members) {
    reports.push_back({{"fraction", m.fraction}, {"length", m.length}, {"report", to_json(m.report)}});
  }
  json j = curve_to_json(curve);
  j["dataset"] = test.name;
  j["train_config"] = to_json(cfg);
  j["members"] = std::move(reports);
  staged.stage(out / "ensemble_curve.csv", curve_csv(curve));
  staged.stage(out / "ensemble.json", dump(j));
  staged.commit();
  std::cout << "ensemble auc " << format_fixed6(curve.auc) << '\n';
  return 0;
}

struct CvArgs {
  DataArgs data;
  TrainFlags flags;
  std::size_t budget = 8;
  std::size_t folds = 5;
  std::string out = "cv";
};

int cmd_cv(const CvArgs& a) {
  const auto base = effective_config(a.flags);
  const auto dataset = load_split(a.data, "TRAIN");
  const auto net = network_for_data(base, dataset);
  const auto candidates = expand_grid(HyperGrid{}, base);
  const auto result = cv_search(dataset, candidates, net, a.folds, a.budget, base.seed, [](const CvEntry& e) {
    std::cerr << "candidate " << e.candidate_index << " mean auc " << format_fixed6(e.mean_auc) << '\n';
  });
  json entries = json::array();
  for (const auto& e : result.evaluated) {
    entries.push_back({{"candidate_index", e.candidate_index},
                       {"config", to_json(e.config)},
                       {"fold_auc", e.fold_auc},
                       {"mean_auc", e.mean_auc}});
  }
  const json j{{"dataset", dataset.name},  {"folds", a.folds},
               {"budget", a.budget},       {"base_config", to_json(base)},
               {"best_index", result.best_index}, {"best_config", to_json(result.best)},
               {"evaluated", std::move(entries)}, {"infeasible", result.infeasible}};
  write_file_atomic(fs::path(a.out) / "cv.json", dump(j));
  std::cout << "best rho " << result.best.rho << " pool " << result.best.pool_factor << " dropout "
            << result.best.dropout_rate << " weight_decay " << result.best.weight_decay << '\n';
  return 0;
}

struct ExportArgs {
  std::string kind;
  std::string model;
  DataArgs data;
  std::size_t index = 0;
  std::string split = "TEST";
  std::string out = "export";
};

int cmd_export(const ExportArgs& a) {
  const auto model = load_model(a.model);
  Manifest m;
  if (a.kind == "filters") {
    m = export_filters(model.params, model.config, a.out);
  } else if (a.kind == "trace") {
    if (a.data.name.empty()) throw ConfigError("export trace needs --dataset");
    if (a.split != "TRAIN" && a.split != "TEST") throw ConfigError("--split must be TRAIN or TEST");
    const auto d = load_split(a.data, a.split);
    if (a.index >= d.size()) {
      throw ConfigError("--index " + std::to_string(a.index) + " outside [0, " + std::to_string(d.size()) + ")");
    }
    m = trace_feature_maps(model.params, model.config, d.series[a.index].values, a.out);
  } else {
    throw ConfigError("export kind must be filters or trace");
  }
  std::cout << m.files.size() << " files written to " << a.out << '\n';
  return 0;
}

struct SweepArgs {
  DataArgs data;
  TrainFlags flags;
  std::string rhos, fractions;
  std::string out = "sweep";
};

int cmd_sweep(const SweepArgs& a) {
  const auto base = effective_config(a.flags);
  const auto rhos = a.rhos.empty() ? default_sweep_rhos() : parse_list(a.rhos, "--rhos");
  for (double r : rhos) {
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("--rhos " + std::to_string(r) + ": must be in [0, 1)");
  }
  const auto fr = fractions_flag(a.fractions, "--fractions", even_fractions(10));
  const auto train_set = load_split(a.data, "TRAIN");
  const auto test = load_split(a.data, "TEST");
  const auto net = network_for_data(base, train_set);
  const auto members = rho_sweep(train_set, test, rhos, base, net, fr, [](std::size_t i, const EpochRecord& r) {
    std::cerr << "rho#" << i << ' ' << epoch_line(r) << '\n';
  });
  write_sweep_outputs(members, a.out);
  json reports = json::array();
  for (const auto& m : members) {
    reports.push_back({{"rho", m.rho}, {"auc", m.curve.auc}, {"report", to_json(m.report)}});
  }
  write_file_atomic(fs::path(a.out) / "sweep.json",
                    dump({{"dataset", test.name}, {"base_config", to_json(base)}, {"members", std::move(reports)}}));
  for (const auto& m : members) std::cout << "rho " << m.rho << " auc " << format_fixed6(m.curve.auc) << '\n';
  return 0;
}

struct PlotArgs {
  std::vector<std::string> curves;
  std::string out = "plot.gp";
  std::string title = "Earliness curves";
};

int cmd_plot(const PlotArgs& a) {
  std::vector<fs::path> files(a.curves.begin(), a.curves.end());
  emit_plot_script(files, a.out, a.title);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Early-aware shapelet ConvNets for early time-series classification"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model with stochastic truncation");
  add_data_flags(train_cmd, train_args.data);
  add_train_flags(train_cmd, train_args.flags);
  train_cmd->add_option("--out", train_args.out, "Output directory");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Earliness curve of a saved model on the test split");
  add_data_flags(eval_cmd, eval_args.data);
  eval_cmd->add_option("--model", eval_args.model, "Model JSON")->required();
  eval_cmd->add_option("--mode", eval_args.mode, "fixed or threshold");
  eval_cmd->add_option("--fractions", eval_args.fractions, "Comma-separated fractions (fixed mode)");
  eval_cmd->add_option("--thresholds", eval_args.thresholds, "Comma-separated confidence thresholds");
  eval_cmd->add_option("--checkpoints", eval_args.checkpoints, "Comma-separated checkpoint fractions ending at 1");
  eval_cmd->add_flag("--per-timestamp", eval_args.per_timestamp,
                     "Check every timestamp instead of the checkpoint grid (threshold mode; cost grows with L^2)");
  eval_cmd->add_option("--workers", eval_args.workers, "Worker threads");
  eval_cmd->add_option("--out", eval_args.out, "Output directory");

  BaselineArgs base_args;
  auto* base_cmd = app.add_subcommand("baseline", "1NN or fixed-truncation ensemble baselines");
  base_cmd->add_option("kind", base_args.kind, "knn or ensemble")->required();
  add_data_flags(base_cmd, base_args.data);
  add_train_flags(base_cmd, base_args.flags);
  base_cmd->add_option("--fractions", base_args.fractions, "Comma-separated fractions");
  base_cmd->add_option("--out", base_args.out, "Output directory");

  CvArgs cv_args;
  auto* cv_cmd = app.add_subcommand("cv", "Cross-validated hyperparameter search");
  add_data_flags(cv_cmd, cv_args.data);
  add_train_flags(cv_cmd, cv_args.flags);
  cv_cmd->add_option("--budget", cv_args.budget, "Number of grid points to evaluate");
  cv_cmd->add_option("--folds", cv_args.folds, "Number of folds");
  cv_cmd->add_option("--out", cv_args.out, "Output directory");

  ExportArgs export_args;
  auto* export_cmd = app.add_subcommand("export", "Dump learned filters or feature-map traces");
  export_cmd->add_option("kind", export_args.kind, "filters or trace")->required();
  export_cmd->add_option("--model", export_args.model, "Model JSON")->required();
  export_cmd->add_option("--data", export_args.data.dir, "Data directory (trace)");
  export_cmd->add_option("--dataset", export_args.data.name, "Dataset name (trace)");
  export_cmd->add_option("--split", export_args.split, "TRAIN or TEST (trace)");
  export_cmd->add_option("--index", export_args.index, "Series index within the split (trace)");
  export_cmd->add_option("--out", export_args.out, "Output directory");

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "Train one model per rho and overlay their curves");
  add_data_flags(sweep_cmd, sweep_args.data);
  add_train_flags(sweep_cmd, sweep_args.flags);
  sweep_cmd->add_option("--rhos", sweep_args.rhos, "Comma-separated rho values");
  sweep_cmd->add_option("--fractions", sweep_args.fractions, "Comma-separated fractions");
  sweep_cmd->add_option("--out", sweep_args.out, "Output directory");

  PlotArgs plot_args;
  auto* plot_cmd = app.add_subcommand("plot", "Write a gnuplot script overlaying curve CSVs");
  plot_cmd->add_option("curves", plot_args.curves, "Curve CSV files")->required();
  plot_cmd->add_option("--out", plot_args.out, "Script path");
  plot_cmd->add_option("--title", plot_args.title, "Plot title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train_cmd) return cmd_train(train_args);
    if (*eval_cmd) return cmd_eval(eval_args);
    if (*base_cmd) return cmd_baseline(base_args);
    if (*cv_cmd) return cmd_cv(cv_args);
    if (*export_cmd) return cmd_export(export_args);
    if (*sweep_cmd) return cmd_sweep(sweep_args);
    if (*plot_cmd) return cmd_plot(plot_args);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
