#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "support.hpp"

using namespace earlyshape;
using es_test::TempDir;

namespace {

std::filesystem::path write_text(const TempDir& dir, const std::string& name, const std::string& text) {
  const auto p = dir.path() / name;
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

Dataset two_class(std::size_t per_class, std::size_t L = 4) {
  Dataset d;
  d.n_classes = 2;
  for (std::size_t i = 0; i < 2 * per_class; ++i) d.series.push_back({std::vector<double>(L, double(i)), i % 2});
  return d;
}

}  // namespace

TEST(LoadUcr, TableOneShapes) {
  struct Row {
    const char* name;
    std::size_t n_train, n_test, L, classes;
  };
  for (const auto& r : {Row{"Trace", 100, 100, 275, 4}, Row{"GunPoint", 50, 150, 150, 2},
                        Row{"ItalyPowerDemand", 67, 1029, 24, 2}}) {
    const auto train = es_test::ucr(r.name, "TRAIN");
    const auto test = es_test::ucr(r.name, "TEST");
    EXPECT_EQ(train.size(), r.n_train) << r.name;
    EXPECT_EQ(test.size(), r.n_test) << r.name;
    EXPECT_EQ(train.series_length(), r.L) << r.name;
    EXPECT_EQ(train.n_classes, r.classes) << r.name;
    EXPECT_EQ(train.name, r.name);
  }
}

TEST(LoadUcr, TinyCommaFile) {
  TempDir dir("ucr");
  const auto d = load_ucr(write_text(dir, "tiny", "1,0.0,1.0\n2,1.0,0.0"));
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.series_length(), 2u);
  EXPECT_EQ(d.series[0].label, 0u);
  EXPECT_EQ(d.series[1].label, 1u);
  EXPECT_EQ(d.series[1].values, (std::vector<double>{1.0, 0.0}));
}

TEST(LoadUcr, TabsCrlfAndBlankLines) {
  TempDir dir("ucr");
  const auto d = load_ucr(write_text(dir, "crlf", "-1\t0.5\t1.5\r\n1\t2\t3\r\n\r\n\n"));
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.series[0].label, 0u);  // -1 sorts first
  EXPECT_EQ(d.series[1].values, (std::vector<double>{2.0, 3.0}));
}

TEST(LoadUcr, RemapsLabelsByAscendingValue) {
  TempDir dir("ucr");
  const auto d = load_ucr(write_text(dir, "labels", "7,0\n3,0\n5,0\n3,1\n"));
  EXPECT_EQ(d.n_classes, 3u);
  std::vector<std::size_t> labels;
  for (const auto& s : d.series) labels.push_back(s.label);
  EXPECT_EQ(labels, (std::vector<std::size_t>{2, 0, 1, 0}));
}

TEST(LoadUcr, RaggedRowReportsLine) {
  TempDir dir("ucr");
  try {
    load_ucr(write_text(dir, "ragged", "1,0,1\n2,0,1\n1,0\n"));
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(LoadUcr, NonNumericField) {
  TempDir dir("ucr");
  EXPECT_THROW(load_ucr(write_text(dir, "bad", "1,0,abc\n")), ParseError);
  EXPECT_THROW(load_ucr(write_text(dir, "nan", "1,0,nan\n")), ParseError);
}

TEST(LoadUcr, ExpectedClassMismatch) {
  TempDir dir("ucr");
  const auto p = write_text(dir, "two", "1,0\n2,1\n");
  EXPECT_NO_THROW(load_ucr(p, 2));
  EXPECT_THROW(load_ucr(p, 3), ValidationError);
}

TEST(LoadUcr, MissingFileIsIoError) { EXPECT_THROW(load_ucr("/nonexistent/file_TRAIN"), IoError); }

TEST(LoadUcr, WriteThenLoadIsIdentity) {
  TempDir dir("ucr");
  const auto original = es_test::ucr("ItalyPowerDemand", "TRAIN");
  std::ostringstream out;
  write_ucr(original, out);
  const auto back = load_ucr(write_text(dir, "roundtrip", out.str()));
  ASSERT_EQ(back.size(), original.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back.series[i].values, original.series[i].values);
    EXPECT_EQ(back.series[i].label, original.series[i].label);
  }
}

TEST(Znormalize, ClosedForm) {
  const auto z = znormalize(LabeledSeries{{1, 2, 3}, 0});
  const double a = 1.0 / std::sqrt(2.0 / 3.0);
  EXPECT_NEAR(z.values[0], -a, 1e-12);
  EXPECT_NEAR(z.values[1], 0.0, 1e-12);
  EXPECT_NEAR(z.values[2], a, 1e-12);
}

TEST(Znormalize, ConstantBecomesZero) {
  EXPECT_EQ(znormalize(LabeledSeries{{5, 5, 5}, 1}).values, (std::vector<double>{0, 0, 0}));
}

TEST(Znormalize, RandomMoments) {
  Rng r(4, "z");
  for (int trial = 0; trial < 10; ++trial) {
    const auto z = znormalize(LabeledSeries{uniform_fill(r, -3, 7, 100), 0});
    double mean = 0.0, var = 0.0;
    for (double v : z.values) mean += v;
    mean /= 100;
    for (double v : z.values) var += (v - mean) * (v - mean);
    EXPECT_LT(std::abs(mean), 1e-9);
    EXPECT_LT(std::abs(std::sqrt(var / 100) - 1.0), 1e-9);
  }
}

TEST(Truncate, Prefixes) {
  const LabeledSeries s{{1, 2, 3}, 2};
  EXPECT_EQ(truncate(s, 2).values, (std::vector<double>{1, 2}));
  EXPECT_EQ(truncate(s, 2).label, 2u);
  EXPECT_EQ(truncate(s, 3).values, s.values);
  EXPECT_THROW(truncate(s, 0), BoundsError);
  EXPECT_THROW(truncate(s, 4), BoundsError);
}

TEST(Truncate, CompositionLaw) {
  Rng r(8, "trunc");
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t L = 1 + r.below(50);
    const LabeledSeries s{uniform_fill(r, -1, 1, L), 0};
    const std::size_t b = 1 + r.below(L);
    const std::size_t a = 1 + r.below(b);
    EXPECT_EQ(truncate(truncate(s, b), a).values, truncate(s, a).values);
    const auto head = truncate(s, b);
    EXPECT_TRUE(std::equal(head.values.begin(), head.values.end(), s.values.begin()));
  }
}

TEST(StratifiedKfold, PigeonholeCase) {
  const auto d = two_class(5);
  Rng r(1, "folds");
  const auto folds = stratified_kfold(d, 5, r);
  ASSERT_EQ(folds.size(), 5u);
  for (const auto& f : folds) {
    ASSERT_EQ(f.validation.size(), 2u);
    EXPECT_NE(d.series[f.validation[0]].label, d.series[f.validation[1]].label);
  }
}

TEST(StratifiedKfold, SingleClassRejected) {
  Dataset d;
  d.n_classes = 1;
  for (int i = 0; i < 4; ++i) d.series.push_back({{0.0}, 0});
  Rng r(1, "folds");
  EXPECT_THROW(stratified_kfold(d, 2, r), StratificationError);
}

TEST(StratifiedKfold, SmallClassNamed) {
  auto d = two_class(5);
  d.n_classes = 3;
  d.series.push_back({{0.0, 0, 0, 0}, 2});
  Rng r(1, "folds");
  try {
    stratified_kfold(d, 2, r);
    FAIL();
  } catch (const StratificationError& e) {
    EXPECT_NE(std::string(e.what()).find("class 2"), std::string::npos);
  }
  EXPECT_THROW(stratified_kfold(two_class(5), 1, r), StratificationError);
}

TEST(StratifiedKfold, TraceFolds) {
  const auto d = es_test::ucr("Trace", "TRAIN");
  Rng r(3, "folds");
  const auto folds = stratified_kfold(d, 5, r);
  // Classes hold 26, 21, 22 and 31 series, so each fold gets 4 to 7 of a class.
  const auto total = d.class_counts();
  std::vector<int> seen(d.size(), 0);
  for (const auto& f : folds) {
    EXPECT_EQ(f.train.size() + f.validation.size(), d.size());
    const auto counts = d.subset(f.validation).class_counts();
    for (std::size_t c = 0; c < counts.size(); ++c) {
      EXPECT_GE(counts[c], total[c] / 5) << "class " << c;
      EXPECT_LE(counts[c], (total[c] + 4) / 5) << "class " << c;
    }
    for (auto i : f.validation) ++seen[i];
  }
  for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(StratifiedKfold, PartitionPropertyAndDeterminism) {
  Rng gen(12, "gen");
  for (int trial = 0; trial < 30; ++trial) {
    Dataset d;
    d.n_classes = 2 + gen.below(3);
    const std::size_t k = 2 + gen.below(4);
    for (std::size_t c = 0; c < d.n_classes; ++c) {
      const std::size_t n = k + gen.below(10);
      for (std::size_t i = 0; i < n; ++i) d.series.push_back({{0.0}, c});
    }
    Rng a(trial, "folds"), b(trial, "folds");
    const auto folds = stratified_kfold(d, k, a);
    const auto again = stratified_kfold(d, k, b);
    std::vector<int> seen(d.size(), 0);
    for (std::size_t f = 0; f < k; ++f) {
      EXPECT_EQ(folds[f].validation, again[f].validation);
      for (auto i : folds[f].validation) ++seen[i];
      std::set<std::size_t> train(folds[f].train.begin(), folds[f].train.end());
      for (auto i : folds[f].validation) EXPECT_EQ(train.count(i), 0u);
    }
    for (int s : seen) EXPECT_EQ(s, 1);
    for (std::size_t c = 0; c < d.n_classes; ++c) {
      std::size_t lo = SIZE_MAX, hi = 0;
      for (const auto& f : folds) {
        const auto n = d.subset(f.validation).class_counts()[c];
        lo = std::min(lo, n);
        hi = std::max(hi, n);
      }
      EXPECT_LE(hi - lo, 1u);
    }
  }
}

TEST(StratifiedHoldout, KeepsEveryClassOnBothSides) {
  const auto d = es_test::ucr("Trace", "TRAIN");
  Rng r(1, "holdout");
  const auto split = stratified_holdout(d, 0.2, r);
  const auto all = d.class_counts();
  const auto val = d.subset(split.validation).class_counts();
  const auto tr = d.subset(split.train).class_counts();
  for (std::size_t c = 0; c < all.size(); ++c) {
    EXPECT_EQ(val[c], static_cast<std::size_t>(std::floor(0.2 * all[c] + 0.5))) << "class " << c;
    EXPECT_EQ(val[c] + tr[c], all[c]);
    EXPECT_GE(tr[c], 1u);
  }
}

TEST(TruncationSampler, ValidatesArguments) {
  EXPECT_THROW(TruncationSampler(1.0, 1, 10), RangeError);
  EXPECT_THROW(TruncationSampler(-0.1, 1, 10), RangeError);
  EXPECT_THROW(TruncationSampler(0.5, 0, 10), RangeError);
  EXPECT_THROW(TruncationSampler(0.5, 11, 10), RangeError);
}

TEST(TruncationSampler, RhoZeroAlwaysGivesSmin) {
  const TruncationSampler ts(0.0, 7, 50);
  Rng r(1, "trunc");
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample_truncation(ts, r), 7u);
}

TEST(TruncationSampler, RawPmfHead) {
  Rng r(2, "geom");
  const int n = 400000;
  int ones = 0, twos = 0;
  for (int i = 0; i < n; ++i) {
    const auto s = sample_geometric(0.5, r, 1000);
    ones += s == 1;
    twos += s == 2;
  }
  EXPECT_NEAR(ones / double(n), 0.5, 0.005);
  EXPECT_NEAR(twos / double(n), 0.25, 0.005);
}

TEST(TruncationSampler, ClampedPmfSumsToOne) {
  for (double rho : {0.0, 0.5, 0.9, 0.99, 0.999}) {
    for (std::size_t s_min : {1u, 5u, 100u}) {
      const auto pmf = clamped_truncation_pmf(TruncationSampler(rho, s_min, 100));
      EXPECT_NEAR(std::accumulate(pmf.begin(), pmf.end(), 0.0), 1.0, 1e-12);
      for (std::size_t s = 0; s < s_min; ++s) EXPECT_EQ(pmf[s], 0.0);
    }
  }
}

TEST(TruncationSampler, EmpiricalMatchesClampedPmf) {
  const TruncationSampler ts(0.9, 1, 100);
  Rng r(3, "trunc");
  std::vector<double> hist(101, 0.0);
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const auto s = sample_truncation(ts, r);
    ASSERT_GE(s, 1u);
    ASSERT_LE(s, 100u);
    hist[s] += 1.0 / n;
  }
  const auto pmf = clamped_truncation_pmf(ts);
  double tv = 0.0;
  for (std::size_t s = 0; s <= 100; ++s) tv += std::abs(hist[s] - pmf[s]);
  EXPECT_LE(tv / 2, 0.005);
}

TEST(PrefixLength, RoundsHalfUp) {
  EXPECT_EQ(prefix_length(0.1, 275), 28u);  // 27.5
  EXPECT_EQ(prefix_length(1.0, 275), 275u);
  EXPECT_EQ(prefix_length(0.5, 24), 12u);
  EXPECT_EQ(prefix_length(0.05, 24), 1u);  // 1.2
  EXPECT_THROW(prefix_length(0.01, 24), BoundsError);
  EXPECT_THROW(prefix_length(0.0, 24), RangeError);
  EXPECT_THROW(prefix_length(1.5, 24), RangeError);
}
