#pragma once

#include <cstdio>
#include <filesystem>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "earlyshape/data.hpp"
#include "earlyshape/error.hpp"
#include "earlyshape/eval.hpp"
#include "earlyshape/export.hpp"
#include "earlyshape/io.hpp"
#include "earlyshape/train.hpp"

namespace earlyshape {

/// Default rho values: the cross-validation grid.
inline std::vector<double> default_sweep_rhos() { return HyperGrid{}.rho; }

struct SweepMember {
  double rho = 0.0;
  NetworkParams params;
  TrainReport report;
  EarlinessCurve curve;  // fixed-fraction curve on the test set
};

/// Trains one model per rho (member i uses seed base.seed + i, so a
/// single-member sweep reproduces a plain train run with the same seed) and
/// evaluates each at the fixed `fractions` on `test`. Output order follows
/// `rhos`.
inline std::vector<SweepMember> rho_sweep(const Dataset& train_set, const Dataset& test, const std::vector<double>& rhos,
                                          const TrainConfig& base, const NetworkConfig& net,
                                          const std::vector<double>& fractions = even_fractions(10),
                                          const std::function<void(std::size_t, const EpochRecord&)>& observer = {}) {
  if (rhos.empty()) throw ConfigError("rho sweep needs at least one rho value");
  for (double r : rhos) {
    if (!(r >= 0.0 && r < 1.0)) throw RangeError("rho " + std::to_string(r) + " outside [0, 1)");
  }
  std::vector<SweepMember> out;
  for (std::size_t i = 0; i < rhos.size(); ++i) {
    TrainConfig cfg = base;
    cfg.rho = rhos[i];
    cfg.seed = base.seed + i;
    try {
      EpochObserver obs;
      if (observer) obs = [&, i](const EpochRecord& r) { observer(i, r); };
      const auto model_net = network_for(cfg, net);
      auto fit = train(train_set, cfg, model_net, obs);
      auto curve = eval_fixed_fractions(fit.params, model_net, test, fractions, cfg.workers);
      out.push_back({rhos[i], std::move(fit.params), std::move(fit.report), std::move(curve)});
    } catch (const Error& e) {
      e.rethrow_with_context("rho " + std::to_string(rhos[i]));
    }
  }
  return out;
}

/// Combined long-format CSV: `rho,fraction,accuracy`.
inline void write_sweep_csv(const std::vector<SweepMember>& members, std::ostream& out) {
  out << "rho,fraction,accuracy\n";
  for (const auto& m : members) {
    for (const auto& p : m.curve.points) {
      out << format_fixed6(m.rho) << ',' << format_fixed6(p.avg_fraction) << ',' << format_fixed6(p.accuracy) << '\n';
    }
  }
}

/// Writes sweep.csv, one curve_rho_<rho>.csv per member and plot.gp into
/// `out_dir`. Returns the per-member curve paths.
inline std::vector<std::filesystem::path> write_sweep_outputs(const std::vector<SweepMember>& members,
                                                              const std::filesystem::path& out_dir) {
  std::vector<std::filesystem::path> curves;
  {
    StagedOutputs staged;
    std::ostringstream combined;
    write_sweep_csv(members, combined);
    staged.stage(out_dir / "sweep.csv", combined.str());
    for (const auto& m : members) {
      char name[64];
      std::snprintf(name, sizeof name, "curve_rho_%g.csv", m.rho);
      std::ostringstream csv;
      write_curve_csv(m.curve, csv);
      curves.push_back(out_dir / name);
      staged.stage(curves.back(), csv.str());
    }
    staged.commit();
  }
  emit_plot_script(curves, out_dir / "plot.gp", "Earliness curves by rho");
  return curves;
}

}  // namespace earlyshape
