#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "earlyshape/earlyshape.hpp"

namespace es_test {

using namespace earlyshape;

inline std::filesystem::path data_dir() { return EARLYSHAPE_DATA_DIR; }

inline Dataset ucr(const std::string& name, const std::string& split) {
  return load_ucr(data_dir() / (name + "_" + split + ".tsv"));
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("earlyshape-" + tag + "-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "-" +
             std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Small network with narrow towers, for tests that need many forward passes.
inline NetworkConfig toy_network(std::size_t L, std::size_t n_classes, std::vector<std::size_t> filter_lens,
                                 std::vector<std::size_t> widths = {3, 4, 5}, std::size_t pool = 2,
                                 double dropout = 0.0) {
  NetworkConfig cfg;
  cfg.n_classes = n_classes;
  cfg.series_len = L;
  cfg.dropout_rate = dropout;
  for (auto m : filter_lens) cfg.channels.push_back({m, widths, pool});
  return cfg;
}

inline std::vector<double> random_series(Rng& rng, std::size_t L, double lo = -2.0, double hi = 2.0) {
  return uniform_fill(rng, lo, hi, L);
}

/// Classes differ by a bump whose position depends on the label; the bump sits
/// inside [start, start + width). Noise is small, so the set is easy.
inline Dataset bump_dataset(std::size_t n_per_class, std::size_t n_classes, std::size_t L, std::uint64_t seed,
                            std::size_t start = 0, std::size_t width = 0) {
  if (width == 0) width = L;
  Rng rng(seed, "bump-fixture");
  Dataset d;
  d.n_classes = n_classes;
  d.name = "bump";
  for (std::size_t i = 0; i < n_per_class; ++i) {
    for (std::size_t c = 0; c < n_classes; ++c) {
      std::vector<double> v(L);
      for (auto& x : v) x = rng.uniform(-0.1, 0.1);
      const std::size_t seg = width / n_classes;
      const std::size_t lo = start + c * seg;
      for (std::size_t t = lo; t < lo + seg && t < L; ++t) v[t] += 2.0;
      d.series.push_back({std::move(v), c});
    }
  }
  return d;
}

/// Multiplies every parameter by `factor` (keeps toy logits out of the
/// saturated softmax region).
inline void scale_params(NetworkParams& p, double factor) { p.scale(factor); }

}  // namespace es_test
