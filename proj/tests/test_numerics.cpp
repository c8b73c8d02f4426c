#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>

#include "support.hpp"

using namespace earlyshape;

TEST(Matrix2D, ShapeAndFill) {
  Matrix2D m(2, 3, 1.5);
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m.values().size(), 6u);
  m(1, 2) = -4.0;
  EXPECT_EQ(m.row(1)[2], -4.0);
  EXPECT_TRUE(m.all_finite());
  m(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(m.all_finite());
}

TEST(Matrix2D, RejectsWrongDataLength) { EXPECT_THROW(Matrix2D(2, 2, std::vector<double>{1, 2, 3}), ShapeError); }

TEST(Rng, SameSeedAndLabelGiveSameStream) {
  Rng a(42, "init"), b(42, "init");
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, LabelsSeparateStreams) {
  Rng a(42, "init"), b(42, "dropout");
  int same = 0;
  for (int i = 0; i < 100; ++i) same += a.next_u64() == b.next_u64();
  EXPECT_EQ(same, 0);
}

TEST(Rng, UniformStaysInHalfOpenRange) {
  Rng r(3, "range");
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform(-0.5, 0.5);
    ASSERT_GE(u, -0.5);
    ASSERT_LT(u, 0.5);
  }
  EXPECT_THROW(r.uniform(1.0, 1.0), RangeError);
}

TEST(Rng, BelowIsRoughlyUniform) {
  Rng r(9, "below");
  std::vector<int> counts(6, 0);
  for (int i = 0; i < 60000; ++i) ++counts[r.below(6)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 400);
}

TEST(Rng, ShuffleIsAPermutation) {
  Rng r(5, "shuffle");
  std::vector<std::size_t> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  r.shuffle(w);
  EXPECT_NE(v, w);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(v, w);
}

TEST(DeriveSeed, DependsOnEveryArgument) {
  EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(2, 2, 3));
}

TEST(UniformFill, ZeroLengthIsEmpty) {
  Rng r(1, "fill");
  EXPECT_TRUE(uniform_fill(r, 0.0, 1.0, 0).empty());
}

TEST(UniformFill, MomentsAndBounds) {
  Rng r(7, "fill");
  const auto v = uniform_fill(r, -0.5, 0.5, 1000000);
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_GE(*std::min_element(v.begin(), v.end()), -0.5);
  EXPECT_LT(*std::max_element(v.begin(), v.end()), 0.5);
}

TEST(UniformFill, Deterministic) {
  Rng a(7, "fill"), b(7, "fill");
  EXPECT_EQ(uniform_fill(a, -0.5, 0.5, 1000), uniform_fill(b, -0.5, 0.5, 1000));
}

TEST(UniformFill, RejectsEmptyRange) {
  Rng r(1, "fill");
  EXPECT_THROW(uniform_fill(r, 1.0, 0.0, 3), RangeError);
}

TEST(Matvec, Identity) {
  Matrix2D I(2, 2, std::vector<double>{1, 0, 0, 1});
  EXPECT_EQ(matvec(I, std::vector<double>{3, 4}), (std::vector<double>{3, 4}));
}

TEST(Matvec, HandDotProduct) {
  Matrix2D W(2, 2, std::vector<double>{1, 2, 0, 1});
  EXPECT_EQ(matvec(W, std::vector<double>{1, 1}), (std::vector<double>{3, 1}));
}

TEST(Matvec, MatchesNestedLoops) {
  Rng r(11, "matvec");
  for (int trial = 0; trial < 20; ++trial) {
    Matrix2D W(5, 7, uniform_fill(r, -1, 1, 35));
    const auto x = uniform_fill(r, -1, 1, 7);
    const auto y = matvec(W, x);
    for (std::size_t i = 0; i < 5; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < 7; ++j) acc += W.values()[i * 7 + j] * x[j];
      EXPECT_NEAR(y[i], acc, 1e-12);
    }
  }
}

TEST(Matvec, ShapeMismatch) {
  Matrix2D W(2, 3);
  EXPECT_THROW(matvec(W, std::vector<double>{1, 2}), ShapeError);
}

TEST(GradCheck, Quadratic) {
  auto f = [](std::span<const double> t) { return t[0] * t[0]; };
  const std::vector<double> analytic{6.0};
  const auto rep = grad_check(f, analytic, {3.0});
  EXPECT_NEAR(rep.numeric[0], 6.0, 1e-8);
  EXPECT_TRUE(rep.pass);
}

TEST(GradCheck, Constant) {
  auto f = [](std::span<const double>) { return 2.5; };
  const std::vector<double> analytic{0.0, 0.0};
  const auto rep = grad_check(f, analytic, {1.0, -1.0});
  EXPECT_EQ(rep.max_rel_err, 0.0);
  EXPECT_TRUE(rep.pass);
}

TEST(GradCheck, SumOfSquaresAtTightTolerance) {
  Rng r(2, "gc");
  for (int trial = 0; trial < 10; ++trial) {
    const auto theta = uniform_fill(r, -10, 10, 12);
    std::vector<double> analytic(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) analytic[i] = 2 * theta[i];
    auto f = [](std::span<const double> t) {
      double s = 0.0;
      for (double v : t) s += v * v;
      return s;
    };
    EXPECT_TRUE(grad_check(f, analytic, theta, 1e-5, 1e-8).pass);
  }
}

TEST(GradCheck, FlagsWrongGradient) {
  auto f = [](std::span<const double> t) { return t[0] * t[0]; };
  const std::vector<double> analytic{5.0};
  EXPECT_FALSE(grad_check(f, analytic, {3.0}).pass);
}

TEST(GradCheck, NonFiniteValueNamesIndex) {
  auto f = [](std::span<const double> t) { return t[1] > 1.0 ? std::log(-1.0) : 0.0; };
  const std::vector<double> analytic{0.0, 0.0};
  try {
    grad_check(f, analytic, {0.0, 1.0});
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("index 1"), std::string::npos);
  }
}

TEST(GradCheck, FullNetworkSingleChannel) {
  const auto cfg = es_test::toy_network(40, 3, {4});
  Rng r(1, "init");
  auto p = init_params(cfg, r);
  Rng xr(2, "series");
  const auto x = es_test::random_series(xr, 40);
  const auto fw = forward(p, cfg, x, Mode::infer, nullptr);
  const auto g = backward(p, cfg, fw.cache, 1);
  auto f = [&](std::span<const double> theta) {
    auto q = p;
    q.assign(theta);
    return loss(forward(q, cfg, x, Mode::infer, nullptr).probs, 1);
  };
  const auto rep = grad_check(f, g.flatten(), p.flatten());
  EXPECT_TRUE(rep.pass) << "max rel err " << rep.max_rel_err << " at " << rep.worst_index;
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  for (std::size_t workers : {1u, 3u, 8u}) {
    std::vector<std::atomic<int>> hits(257);
    parallel_for(hits.size(), workers, [&](std::size_t i) { ++hits[i]; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
}

TEST(ParallelFor, RethrowsWorkerException) {
  EXPECT_THROW(parallel_for(10, 4,
                            [](std::size_t i) {
                              if (i == 7) throw NumericError("boom");
                            }),
               NumericError);
}
