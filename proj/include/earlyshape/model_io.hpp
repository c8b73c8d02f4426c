#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "earlyshape/error.hpp"
#include "earlyshape/io.hpp"
#include "earlyshape/nn.hpp"

namespace earlyshape {

/// Version written into every model document; load_model rejects others.
inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json to_json(const NetworkConfig& cfg) {
  nlohmann::json channels = nlohmann::json::array();
  for (const auto& ch : cfg.channels) {
    channels.push_back({{"filter_len", ch.filter_len}, {"widths", ch.widths}, {"pool_factor", ch.pool_factor}});
  }
  return {{"channels", channels},
          {"n_classes", cfg.n_classes},
          {"dropout_rate", cfg.dropout_rate},
          {"series_len", cfg.series_len}};
}

inline NetworkConfig network_config_from_json(const nlohmann::json& j) {
  NetworkConfig cfg;
  for (const auto& ch : j.at("channels")) {
    cfg.channels.push_back({ch.at("filter_len").get<std::size_t>(), ch.at("widths").get<std::vector<std::size_t>>(),
                            ch.at("pool_factor").get<std::size_t>()});
  }
  cfg.n_classes = j.at("n_classes").get<std::size_t>();
  cfg.dropout_rate = j.at("dropout_rate").get<double>();
  cfg.series_len = j.at("series_len").get<std::size_t>();
  validate(cfg);
  return cfg;
}

/// Conv filters as [out][in][taps] nested arrays; dense weights as [class][feature].
inline nlohmann::json to_json(const NetworkParams& p) {
  nlohmann::json channels = nlohmann::json::array();
  for (const auto& ch : p.channels) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : ch.layers) {
      nlohmann::json w = nlohmann::json::array();
      for (std::size_t o = 0; o < l.out_channels; ++o) {
        nlohmann::json per_in = nlohmann::json::array();
        for (std::size_t i = 0; i < l.in_channels; ++i) {
          const auto f = l.filter(o, i);
          per_in.push_back(std::vector<double>(f.begin(), f.end()));
        }
        w.push_back(std::move(per_in));
      }
      layers.push_back({{"weights", std::move(w)}, {"bias", l.bias}});
    }
    channels.push_back({{"layers", std::move(layers)}});
  }
  nlohmann::json dense = nlohmann::json::array();
  for (std::size_t k = 0; k < p.dense.rows(); ++k) {
    const auto r = p.dense.row(k);
    dense.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return {{"channels", std::move(channels)}, {"dense", std::move(dense)}, {"dense_bias", p.dense_bias}};
}

inline NetworkParams params_from_json(const nlohmann::json& j, const NetworkConfig& cfg) {
  auto p = ParameterSet::zeros(cfg);
  const auto& channels = j.at("channels");
  if (channels.size() != p.channels.size()) throw ShapeError("model file: channel count mismatch");
  for (std::size_t c = 0; c < p.channels.size(); ++c) {
    const auto& layers = channels[c].at("layers");
    if (layers.size() != p.channels[c].layers.size()) throw ShapeError("model file: layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& dst = p.channels[c].layers[l];
      const auto& w = layers[l].at("weights");
      if (w.size() != dst.out_channels) throw ShapeError("model file: filter count mismatch");
      for (std::size_t o = 0; o < dst.out_channels; ++o) {
        if (w[o].size() != dst.in_channels) throw ShapeError("model file: input channel mismatch");
        for (std::size_t i = 0; i < dst.in_channels; ++i) {
          const auto taps = w[o][i].get<std::vector<double>>();
          if (taps.size() != dst.filter_len) throw ShapeError("model file: filter length mismatch");
          for (std::size_t t = 0; t < taps.size(); ++t) dst.w(o, i, t) = taps[t];
        }
      }
      dst.bias = layers[l].at("bias").get<std::vector<double>>();
      if (dst.bias.size() != dst.out_channels) throw ShapeError("model file: bias length mismatch");
    }
  }
  const auto& dense = j.at("dense");
  if (dense.size() != p.dense.rows()) throw ShapeError("model file: dense row mismatch");
  for (std::size_t k = 0; k < p.dense.rows(); ++k) {
    const auto row = dense[k].get<std::vector<double>>();
    if (row.size() != p.dense.cols()) throw ShapeError("model file: dense column mismatch");
    std::copy(row.begin(), row.end(), p.dense.row(k).begin());
  }
  p.dense_bias = j.at("dense_bias").get<std::vector<double>>();
  if (p.dense_bias.size() != cfg.n_classes) throw ShapeError("model file: dense bias mismatch");
  return p;
}

struct Model {
  NetworkConfig config;
  NetworkParams params;
};

/// The model document {format_version, network_config, params}. Doubles are
/// printed in shortest round-trip form, so save/load is bit-exact.
inline std::string serialize_model(const Model& m) {
  nlohmann::json j{{"format_version", kModelFormatVersion},
                   {"network_config", to_json(m.config)},
                   {"params", to_json(m.params)}};
  return j.dump() + "\n";
}

inline Model parse_model(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model file is not valid JSON: ") + e.what());
  }
  if (!j.contains("format_version") || !j["format_version"].is_number_integer()) {
    throw ValidationError("model file has no integer format_version");
  }
  const int version = j["format_version"].get<int>();
  if (version != kModelFormatVersion) {
    throw ValidationError("unsupported model format_version " + std::to_string(version) + " (expected " +
                          std::to_string(kModelFormatVersion) + ")");
  }
  try {
    Model m;
    m.config = network_config_from_json(j.at("network_config"));
    m.params = params_from_json(j.at("params"), m.config);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed model file: ") + e.what());
  }
}

inline void save_model(const Model& m, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_model(m));
}

inline Model load_model(const std::filesystem::path& path) { return parse_model(read_file(path)); }

}  // namespace earlyshape
