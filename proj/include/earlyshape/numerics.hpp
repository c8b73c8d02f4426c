#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "earlyshape/error.hpp"

namespace earlyshape {

/// Dense row-major [rows x cols] array of doubles. Rows are channels or
/// filters, columns are timestamps.
class Matrix2D {
 public:
  Matrix2D() = default;
  Matrix2D(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix2D(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("Matrix2D: data length " + std::to_string(data_.size()) +
                       " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Matrix2D&, const Matrix2D&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace detail

/// Mixes a master seed with up to two indices into an independent seed.
/// Used for per-config / per-fold / per-example sub-streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t s = master ^ 0x6A09E667F3BCC909ULL;
  detail::splitmix64(s);
  s ^= a * 0xD1342543DE82EF95ULL;
  detail::splitmix64(s);
  s ^= b * 0xAF251AF3B0F025B5ULL;
  return detail::splitmix64(s);
}

/// xoshiro256** generator keyed by (seed, stream label). The state is
/// initialised by running splitmix64 from seed ^ fnv1a(label), so two streams
/// with different labels are independent and the output never depends on
/// which thread owns the generator.
class Rng {
 public:
  Rng(std::uint64_t seed, std::string_view stream_label)
      : seed_(seed), label_(stream_label) {
    std::uint64_t sm = seed ^ detail::fnv1a(stream_label);
    for (auto& s : state_) s = detail::splitmix64(sm);
  }

  std::uint64_t seed() const { return seed_; }
  const std::string& stream_label() const { return label_; }

  std::uint64_t next_u64() {
    const std::uint64_t result = detail::rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) {
    if (!(lo < hi)) throw RangeError("uniform: require lo < hi");
    const double v = lo + (hi - lo) * uniform01();
    return v < hi ? v : std::nextafter(hi, lo);
  }

  /// Unbiased integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::uint64_t seed_;
  std::string label_;
  std::uint64_t state_[4];
};

inline std::vector<double> uniform_fill(Rng& rng, double lo, double hi, std::size_t n) {
  if (!(lo < hi)) throw RangeError("uniform_fill: invalid range, lo must be < hi");
  std::vector<double> out(n);
  for (auto& v : out) v = rng.uniform(lo, hi);
  return out;
}

inline std::vector<double> matvec(const Matrix2D& w, std::span<const double> x) {
  if (w.cols() != x.size()) {
    throw ShapeError("matvec: matrix has " + std::to_string(w.cols()) + " columns, vector has " +
                     std::to_string(x.size()) + " entries");
  }
  std::vector<double> out(w.rows(), 0.0);
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const auto r = w.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) acc += r[j] * x[j];
    out[i] = acc;
  }
  return out;
}

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  bool pass = true;
  std::vector<double> numeric;
};

/// Compares an analytic gradient with central differences
/// (f(θ + h e_i) - f(θ - h e_i)) / 2h. The relative error per coordinate is
/// |a - n| / max(1e-8, |a| + |n|).
inline GradCheckReport grad_check(const std::function<double(std::span<const double>)>& f,
                                  std::span<const double> analytic, std::vector<double> theta,
                                  double h = 1e-5, double tol = 1e-4) {
  if (!(h > 0.0)) throw RangeError("grad_check: step h must be positive");
  if (analytic.size() != theta.size()) {
    throw ShapeError("grad_check: analytic gradient length does not match parameter count");
  }
  GradCheckReport report;
  report.numeric.resize(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + h;
    const double fp = f(theta);
    theta[i] = saved - h;
    const double fm = f(theta);
    theta[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("grad_check: non-finite function value at index " + std::to_string(i));
    }
    const double num = (fp - fm) / (2.0 * h);
    report.numeric[i] = num;
    const double a = analytic[i];
    const double rel = std::abs(a - num) / std::max(1e-8, std::abs(a) + std::abs(num));
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_index = i;
    }
  }
  report.pass = report.max_rel_err <= tol;
  return report;
}

}  // namespace earlyshape
