#pragma once

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "earlyshape/error.hpp"
#include "earlyshape/io.hpp"
#include "earlyshape/nn.hpp"

namespace earlyshape {

struct ManifestEntry {
  std::string path;  // relative to the output directory
  std::size_t rows = 0;  // data rows, header excluded
  std::size_t bytes = 0;
};

struct Manifest {
  std::vector<ManifestEntry> files;
};

inline nlohmann::json to_json(const Manifest& m) {
  nlohmann::json files = nlohmann::json::array();
  for (const auto& f : m.files) files.push_back({{"path", f.path}, {"rows", f.rows}, {"bytes", f.bytes}});
  return {{"files", std::move(files)}};
}

/// 17 significant digits: enough for any double to re-parse bit-exactly.
inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

/// Stages files under `dir` and the manifest describing them, then commits
/// everything at once. manifest.json itself is not listed.
class ExportWriter {
 public:
  explicit ExportWriter(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void add(const std::string& name, const std::string& contents, std::size_t rows) {
    const auto bytes = staged_.stage(dir_ / name, contents);
    manifest_.files.push_back({name, rows, bytes});
  }

  Manifest finish() {
    staged_.stage(dir_ / "manifest.json", to_json(manifest_).dump(2) + "\n");
    staged_.commit();
    return std::move(manifest_);
  }

 private:
  std::filesystem::path dir_;
  StagedOutputs staged_;
  Manifest manifest_;
};

inline std::string tap_header(std::size_t m) {
  std::string h;
  for (std::size_t j = 0; j < m; ++j) h += ",tap_" + std::to_string(j);
  return h;
}

}  // namespace detail

/// One CSV per (channel, layer), named filters_c<channel>_l<layer>.csv with
/// 1-based indices. First-layer rows are `channel,layer,filter_index,taps...`;
/// deeper layers have one row per (filter, input channel).
inline Manifest export_filters(const NetworkParams& params, const NetworkConfig& cfg,
                               const std::filesystem::path& out_dir) {
  check_shapes(params, cfg);
  detail::ExportWriter writer(out_dir);
  for (std::size_t c = 0; c < params.channels.size(); ++c) {
    const auto& layers = params.channels[c].layers;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& layer = layers[l];
      std::ostringstream csv;
      std::size_t rows = 0;
      if (l == 0) {
        csv << "channel,layer,filter_index" << detail::tap_header(layer.filter_len) << '\n';
        for (std::size_t o = 0; o < layer.out_channels; ++o, ++rows) {
          csv << c + 1 << ',' << l + 1 << ',' << o;
          for (double w : layer.filter(o, 0)) csv << ',' << format_g17(w);
          csv << '\n';
        }
      } else {
        csv << "filter_index,in_channel" << detail::tap_header(layer.filter_len) << '\n';
        for (std::size_t o = 0; o < layer.out_channels; ++o) {
          for (std::size_t i = 0; i < layer.in_channels; ++i, ++rows) {
            csv << o << ',' << i;
            for (double w : layer.filter(o, i)) csv << ',' << format_g17(w);
            csv << '\n';
          }
        }
      }
      writer.add("filters_c" + std::to_string(c + 1) + "_l" + std::to_string(l + 1) + ".csv", csv.str(), rows);
    }
  }
  return writer.finish();
}

/// Infer-mode forward on `series`, dumping every post-activation map
/// (fmap_c<channel>_l<layer>.csv, rows = filters, columns = time) and
/// features.csv with one row per max-over-time feature and its argmax column
/// in the last map of its tower.
inline Manifest trace_feature_maps(const NetworkParams& params, const NetworkConfig& cfg,
                                   std::span<const double> series, const std::filesystem::path& out_dir) {
  const auto fw = forward(params, cfg, series, Mode::infer, nullptr);
  const auto& cache = fw.cache;
  detail::ExportWriter writer(out_dir);
  for (std::size_t c = 0; c < cache.channels.size(); ++c) {
    const auto& layers = cache.channels[c].layers;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& act = layers[l].act;
      std::ostringstream csv;
      csv << "filter_index";
      for (std::size_t t = 0; t < act.cols(); ++t) csv << ",t_" << t;
      csv << '\n';
      for (std::size_t o = 0; o < act.rows(); ++o) {
        csv << o;
        for (double v : act.row(o)) csv << ',' << format_g17(v);
        csv << '\n';
      }
      writer.add("fmap_c" + std::to_string(c + 1) + "_l" + std::to_string(l + 1) + ".csv", csv.str(), act.rows());
    }
  }

  std::ostringstream csv;
  csv << "feature_index,channel,filter_index,value,argmax,map_width\n";
  std::size_t k = 0;
  for (std::size_t c = 0; c < cache.channels.size(); ++c) {
    const auto& ch = cache.channels[c];
    const auto& last = ch.layers.back().act;
    for (std::size_t o = 0; o < last.rows(); ++o, ++k) {
      csv << k << ',' << c + 1 << ',' << o << ',' << format_g17(cache.features[k]) << ',' << ch.feature_argmax[o]
          << ',' << last.cols() << '\n';
    }
  }
  writer.add("features.csv", csv.str(), k);
  return writer.finish();
}

/// Gnuplot script overlaying accuracy against average observed fraction, one
/// legend entry per curve file (titled by file stem), in the given order.
/// Output depends only on the arguments, so it is byte-stable.
inline void emit_plot_script(const std::vector<std::filesystem::path>& curve_files,
                             const std::filesystem::path& out_path, const std::string& title = "Earliness curves") {
  if (curve_files.empty()) throw ValidationError("emit_plot_script: no curve files");
  for (const auto& f : curve_files) {
    if (!std::filesystem::is_regular_file(f)) throw IoError("curve file not found: " + f.string());
  }
  std::ostringstream s;
  s << "# gnuplot script\n"
    << "set datafile separator ','\n"
    << "set key bottom right\n"
    << "set title '" << title << "'\n"
    << "set xlabel 'average observed fraction'\n"
    << "set ylabel 'accuracy'\n"
    << "set xrange [0:1]\n"
    << "set yrange [0:1.05]\n"
    << "set grid\n"
    << "plot ";
  for (std::size_t i = 0; i < curve_files.size(); ++i) {
    if (i) s << ", \\\n     ";
    s << "'" << curve_files[i].generic_string() << "' skip 1 using 2:3 with linespoints title '"
      << curve_files[i].stem().string() << "'";
  }
  s << "\n";
  write_file_atomic(out_path, s.str());
}

}  // namespace earlyshape
