#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "oracles/resampling_oracles.hpp"
#include "ptx/resampling/editing.hpp"
#include "ptx/resampling/multiclass.hpp"
#include "ptx/resampling/oversampling.hpp"

using namespace ptx;

namespace {

LabeledSet random_set(Rng& rng, std::size_t n, std::vector<std::string> labels, std::size_t dim = 2,
                      bool integer_grid = false) {
  LabeledSet s;
  for (std::size_t i = 0; i < n; ++i) {
    LabeledPoint p;
    for (std::size_t d = 0; d < dim; ++d)
      p.x.push_back(integer_grid ? static_cast<double>(rng.index(6)) : rng.uniform(0, 10));
    p.label = labels[rng.index(labels.size())];
    s.push_back(p);
  }
  return s;
}

oracle::Pts to_pts(const LabeledSet& s) {
  oracle::Pts p;
  for (const auto& q : s) {
    p.x.push_back(q.x);
    p.y.push_back(q.label);
  }
  return p;
}

std::vector<int> as_int(const std::vector<std::size_t>& v) { return {v.begin(), v.end()}; }

// Distance from s to segment [a, b] relative to its length.
double off_segment(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& s) {
  double ab = 0, as = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += (b[i] - a[i]) * (b[i] - a[i]);
    as += (s[i] - a[i]) * (b[i] - a[i]);
  }
  double t = ab > 0 ? as / ab : 0;
  if (t < -1e-12 || t > 1 + 1e-12) return 1e9;
  double e = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = s[i] - (a[i] + t * (b[i] - a[i]));
    e += d * d;
  }
  return std::sqrt(e);
}

FeatureMatrix paper_shaped_train(Rng& rng) {
  const std::vector<std::pair<std::string, int>> counts = {
      {"Normal", 700},
      {"Pneumonia/Acellular/Viral/Coronavirus/COVID-19", 63},
      {"Pneumonia/Acellular/Viral/Coronavirus/MERS", 7},
      {"Pneumonia/Acellular/Viral/Coronavirus/SARS", 8},
      {"Pneumonia/Acellular/Viral/Varicella", 7},
      {"Pneumonia/Celullar/Bacterial/Streptococcus", 9},
      {"Pneumonia/Celullar/Fungus/Pneumocystis", 8}};
  FeatureMatrix m{{"TOY"}, 4, {}};
  int id = 0;
  for (std::size_t l = 0; l < counts.size(); ++l)
    for (int i = 0; i < counts[l].second; ++i) {
      std::vector<double> v(4);
      for (auto& x : v) x = rng.normal() + 3.0 * static_cast<double>(l);
      m.rows.push_back({"r" + std::to_string(id++), v, counts[l].first, Split::Train, false});
    }
  return m;
}

}  // namespace

TEST(Smote, TwoPointsGiveSegmentPoint) {
  LabeledSet s = {{{0, 0}, "min"}, {{1, 1}, "min"}, {{5, 5}, "maj"}, {{6, 5}, "maj"}, {{5, 6}, "maj"}};
  auto r = smote(s, "min", 3, SmoteVariant::Plain, 1, 7);
  ASSERT_EQ(r.set.size(), 6u);
  const auto& p = r.set.back();
  EXPECT_TRUE(p.synthetic);
  EXPECT_EQ(p.label, "min");
  EXPECT_NEAR(p.x[0], p.x[1], 1e-15);
  EXPECT_GT(p.x[0], 0.0);
  EXPECT_LT(p.x[0], 1.0);
}

TEST(Smote, TargetEqualsCurrentIsIdentity) {
  Rng rng(1);
  auto s = random_set(rng, 20, {"a", "b"});
  auto n = count_labels(s)["a"];
  EXPECT_EQ(smote(s, "a", n).set, s);
  EXPECT_EQ(adasyn(s, "a", n).set, s);
}

TEST(Smote, ReplayOracle) {
  LabeledSet s = {{{0, 0}, "m"}, {{2, 0}, "m"}, {{0, 3}, "m"}, {{4, 4}, "m"}, {{1, 1}, "m"},
                  {{9, 9}, "M"}, {{8, 9}, "M"}, {{9, 8}, "M"}, {{7, 7}, "M"}, {{8, 8}, "M"},
                  {{9, 7}, "M"}, {{7, 9}, "M"}, {{6, 8}, "M"}};
  auto r = smote(s, "m", 8, SmoteVariant::Plain, 2, 42);
  ASSERT_EQ(r.draws.size(), 3u);
  for (std::size_t g = 0; g < r.draws.size(); ++g) {
    const auto& d = r.draws[g];
    ASSERT_EQ(s[d.p].label, "m");
    // q must be one of p's two nearest minority points
    auto pts = to_pts(s);
    std::vector<int> minority = {0, 1, 2, 3, 4};
    auto nn = oracle::knn(pts, minority, static_cast<int>(d.p), 2);
    EXPECT_NE(std::find(nn.begin(), nn.end(), static_cast<int>(d.q)), nn.end());
    const auto& out = r.set[s.size() + g].x;
    for (int i = 0; i < 2; ++i) EXPECT_EQ(out[i], s[d.p].x[i] + d.u * (s[d.q].x[i] - s[d.p].x[i]));
  }
  EXPECT_EQ(smote(s, "m", 8, SmoteVariant::Plain, 2, 42).set, r.set);
}

TEST(Smote, ErrorsAndBorderline) {
  LabeledSet lone = {{{0, 0}, "m"}, {{1, 0}, "M"}, {{2, 0}, "M"}};
  EXPECT_THROW(smote(lone, "m", 3), ResamplingError);

  // one minority point sits among majority points (danger), others are safe
  LabeledSet s = {{{0, 0}, "m"},   {{0.1, 0}, "m"}, {{0, 0.1}, "m"}, {{0.1, 0.1}, "m"},
                  {{5, 5}, "m"},   {{5.1, 5}, "M"}, {{5, 5.1}, "M"}, {{4.9, 5}, "M"},
                  {{5, 4.95}, "m"}, {{10, 10}, "M"}, {{10, 11}, "M"}};
  auto b1 = smote(s, "m", 12, SmoteVariant::Borderline1, 3, 5);
  EXPECT_FALSE(b1.fallback);
  for (const auto& d : b1.draws) EXPECT_TRUE(d.p == 4 || d.p == 8);
  auto b2 = smote(s, "m", 12, SmoteVariant::Borderline2, 3, 5);
  for (const auto& d : b2.draws) {
    if (s[d.q].label == "M") {
      EXPECT_LE(d.u, 0.5);
    }
  }
  LabeledSet safe = {{{0, 0}, "m"}, {{0, 1}, "m"}, {{1, 0}, "m"}, {{9, 9}, "M"}, {{9, 8}, "M"}};
  EXPECT_TRUE(smote(safe, "m", 4, SmoteVariant::Borderline1, 2, 1).fallback);
}

TEST(Adasyn, Allocation) {
  // one minority point fully surrounded by majority, one fully by minority
  LabeledSet s;
  s.push_back({{0, 0}, "m"});
  for (int i = 0; i < 5; ++i) s.push_back({{0.1 * (i + 1), 0}, "M"});
  s.push_back({{50, 50}, "m"});
  for (int i = 0; i < 5; ++i) s.push_back({{50 + 0.1 * (i + 1), 50}, "m"});
  auto r = adasyn(s, "m", 10, 5, 3);
  EXPECT_EQ(r.set.size(), s.size() + 3);
  for (const auto& d : r.draws) EXPECT_EQ(d.p, 0u);

  EXPECT_EQ(adasyn_allocation({0.5, 0.25, 0.25, 0.0}, 5), (std::vector<std::size_t>{3, 1, 1, 0}));
  EXPECT_EQ(adasyn_allocation({1.0, 1.0, 1.0}, 4), (std::vector<std::size_t>{2, 1, 1}));
  EXPECT_TRUE(adasyn_allocation({0, 0}, 3).empty());
}

TEST(Adasyn, HandComputedEightPointAllocation) {
  // minority a(0,0) b(4,0) c(10,0); majority near b and c
  LabeledSet s = {{{0, 0}, "m"},  {{1, 0}, "m"},   {{4, 0}, "m"},  {{4.5, 0}, "M"},
                  {{10, 0}, "m"}, {{10.5, 0}, "M"}, {{9.5, 0}, "M"}, {{20, 0}, "M"}};
  // k = 2 over the whole set:
  //   (0,0): (1,0) m, (4,0) m        -> 0/2
  //   (1,0): (0,0) m, (4,0) m        -> 0/2
  //   (4,0): (4.5,0) M, (1,0) m      -> 1/2
  //   (10,0): (9.5,0) M, (10.5,0) M  -> 2/2
  // 6 synthetic points split 0 : 0 : 2 : 4
  auto r = adasyn(s, "m", 10, 2, 9);
  std::map<std::size_t, int> per;
  for (const auto& d : r.draws) per[d.p]++;
  EXPECT_EQ(per[2], 2);
  EXPECT_EQ(per[4], 4);
  EXPECT_EQ(per.count(0), 0u);

  LabeledSet pure = {{{0, 0}, "m"}, {{0, 1}, "m"}, {{0, 2}, "m"}, {{50, 0}, "M"}, {{50, 1}, "M"}, {{50, 2}, "M"}};
  EXPECT_THROW(adasyn(pure, "m", 3 + 2, 2, 1), DegenerateDensityError);
  EXPECT_TRUE(adasyn(pure, "m", 5, 2, 1, true).fallback);
}

TEST(Oversampling, SegmentMembershipOnThousandPoints) {
  Rng rng(77);
  std::size_t checked = 0;
  for (int trial = 0; checked < 1000; ++trial) {
    auto s = random_set(rng, 40, {"a", "b", "b"}, 3);
    auto n = count_labels(s)["a"];
    if (n < 2) continue;
    for (int algo = 0; algo < 2; ++algo) {
      OversampleResult r = algo == 0 ? smote(s, "a", n + 25, SmoteVariant::Plain, 5, trial)
                                     : adasyn(s, "a", n + 25, 5, trial, true);
      for (std::size_t g = 0; g < r.draws.size(); ++g) {
        const auto& d = r.draws[g];
        ASSERT_EQ(s[d.p].label, "a");
        ASSERT_EQ(s[d.q].label, "a");
        ASSERT_LT(off_segment(s[d.p].x, s[d.q].x, r.set[s.size() + g].x), 1e-9);
        ++checked;
      }
    }
  }
}

TEST(EditedNN, SimpleCases) {
  LabeledSet sep = {{{0, 0}, "r"}, {{0, 1}, "r"}, {{1, 0}, "r"}, {{9, 9}, "b"}, {{9, 8}, "b"}, {{8, 9}, "b"}};
  EXPECT_EQ(edited_nn(sep).set, sep);
  LabeledSet intruder = {{{0, 0}, "r"}, {{0, 1}, "r"}, {{1, 0}, "r"}, {{1, 1}, "r"}, {{0.5, 0.5}, "b"},
                         {{9, 9}, "b"},  {{9, 8}, "b"},  {{8, 9}, "b"}};
  auto r = edited_nn(intruder, EnnMode::ENN, 3);
  EXPECT_EQ(r.set.size(), intruder.size() - 1);
  for (const auto& p : r.set) EXPECT_FALSE(p.x[0] == 0.5);
  // protected label is immune
  EXPECT_EQ(edited_nn(intruder, EnnMode::ENN, 3, std::string("b")).set.size(), intruder.size());
}

TEST(EditedNN, ClassNeverEmptied) {
  LabeledSet s = {{{0, 0}, "r"}, {{0, 1}, "r"}, {{1, 0}, "r"}, {{0.5, 0.5}, "b"}};
  auto r = edited_nn(s, EnnMode::ENN, 3);
  EXPECT_EQ(r.set.size(), 4u);
  EXPECT_EQ(r.skipped, (std::vector<std::size_t>{3}));
  EXPECT_THROW(edited_nn(s, EnnMode::ENN, 4), ResamplingError);
}

TEST(EditedNN, MatchesOracleOnRandomSets) {
  Rng rng(2024);
  for (int t = 0; t < 50; ++t) {
    auto s = random_set(rng, 30, {"x", "y", "z"}, 2, t % 2 == 0);
    auto p = to_pts(s);
    EXPECT_EQ(as_int(edited_nn(s, EnnMode::ENN, 3).kept), oracle::enn(p, 3)) << t;
    EXPECT_EQ(as_int(edited_nn(s, EnnMode::RENN, 3).kept), oracle::renn(p, 3)) << t;
    EXPECT_EQ(as_int(edited_nn(s, EnnMode::ALLKNN, 3).kept), oracle::allknn(p, 3)) << t;
    EXPECT_EQ(as_int(edited_nn(s, EnnMode::ENN, 3, std::string("x")).kept), oracle::enn(p, 3, "x")) << t;
    EXPECT_EQ(as_int(tomek_links(s).kept), oracle::tomek(p)) << t;
  }
}

TEST(EditedNN, RennIsFixpoint) {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    auto s = random_set(rng, 40, {"x", "y"});
    auto once = edited_nn(s, EnnMode::RENN, 3).set;
    EXPECT_EQ(edited_nn(once, EnnMode::ENN, 3).set, once);
  }
}

TEST(Tomek, BasicCases) {
  LabeledSet two = {{{0, 0}, "a"}, {{1, 0}, "b"}};
  EXPECT_EQ(find_tomek_links(two).size(), 1u);
  auto r = tomek_links(two);
  ASSERT_EQ(r.set.size(), 1u);
  EXPECT_EQ(r.set[0].label, "a");

  LabeledSet bigger = {{{0, 0}, "a"}, {{1, 0}, "b"}, {{5, 0}, "b"}};
  EXPECT_EQ(tomek_links(bigger).set[0].label, "a");
  LabeledSet same = {{{0, 0}, "a"}, {{1, 0}, "a"}, {{3, 0}, "a"}};
  EXPECT_EQ(tomek_links(same).set, same);

  Rng rng(15);
  for (int t = 0; t < 20; ++t) {
    auto s = random_set(rng, 15, {"p", "q"});
    std::vector<std::pair<int, int>> got;
    for (auto [a, b] : find_tomek_links(s)) got.emplace_back(static_cast<int>(a), static_cast<int>(b));
    EXPECT_EQ(got, oracle::tomek_pairs(to_pts(s)));
  }
}

TEST(SmoteTomek, Composition) {
  Rng rng(9);
  for (int t = 0; t < 10; ++t) {
    auto s = random_set(rng, 25, {"a", "b", "b"});
    auto n = count_labels(s)["a"];
    if (n < 2) continue;
    auto target = count_labels(s)["b"];
    if (target < n) continue;
    auto smoted = smote(s, "a", target, SmoteVariant::Plain, 5, t).set;
    auto expect = oracle::tomek(to_pts(smoted));
    EXPECT_EQ(as_int(smote_tomek(s, "a", target, 5, t).kept), expect);
  }
  LabeledSet balanced = {{{0, 0}, "a"}, {{1, 0}, "b"}, {{0, 1}, "a"}, {{3, 3}, "b"}};
  EXPECT_EQ(smote_tomek(balanced, "a", 2).set, tomek_links(balanced).set);
}

TEST(Multiclass, SmoteEqualizesRydlsShapedTrain) {
  Rng rng(3);
  auto m = paper_shaped_train(rng);
  ResamplingSpec spec{ResamplingAlgorithm::SMOTE, 0, 11};
  auto out = resample_multiclass(m, spec, LabelMode::LeafPath);
  for (const auto& [label, c] : out.label_counts()) EXPECT_EQ(c, 700u) << label;
  std::set<std::string> ids;
  for (const auto& r : out.rows) EXPECT_TRUE(ids.insert(r.sample_id).second);
  // originals preserved in order at the front
  for (std::size_t i = 0; i < m.rows.size(); ++i) EXPECT_EQ(out.rows[i], m.rows[i]);
  EXPECT_EQ(resample_multiclass(m, spec, LabelMode::LeafPath), out);
}

TEST(Multiclass, AllOversamplersReachMajority) {
  Rng rng(4);
  auto m = paper_shaped_train(rng);
  for (auto a : {ResamplingAlgorithm::ADASYN, ResamplingAlgorithm::SMOTE_B1, ResamplingAlgorithm::SMOTE_B2}) {
    auto out = resample_multiclass(m, {a, 0, 1});
    for (const auto& [label, c] : out.label_counts()) EXPECT_EQ(c, 700u) << resampler_name(a) << " " << label;
  }
}

TEST(Multiclass, UndersamplersNeverGrow) {
  Rng rng(6);
  auto m = paper_shaped_train(rng);
  const auto before = m.label_counts();
  for (auto a : {ResamplingAlgorithm::ENN, ResamplingAlgorithm::RENN, ResamplingAlgorithm::ALLKNN,
                 ResamplingAlgorithm::TOMEK, ResamplingAlgorithm::SMOTE_TL}) {
    ResampleReport rep;
    auto out = resample_multiclass(m, {a, 0, 2}, LabelMode::Flat, &rep);
    for (const auto& [label, c] : out.label_counts()) {
      EXPECT_GE(c, 2u);
      if (a != ResamplingAlgorithm::SMOTE_TL) {
        EXPECT_LE(c, before.at(label)) << resampler_name(a);
      }
    }
    if (a != ResamplingAlgorithm::SMOTE_TL) {
      for (const auto& r : out.rows) EXPECT_FALSE(r.synthetic);
    }
  }
  EXPECT_EQ(resample_multiclass(m, {ResamplingAlgorithm::NONE}), m);
}

TEST(Multiclass, TestRowsPassThroughUnread) {
  Rng rng(8);
  auto m = paper_shaped_train(rng);
  for (int i = 0; i < 5; ++i)
    m.rows.push_back({"t" + std::to_string(i), std::vector<double>(4, std::nan("")), "Normal", Split::Test, false});
  for (auto a : kPaperResamplers) {
    auto out = resample_multiclass(m, {a, 0, 1});
    std::size_t seen = 0;
    for (const auto& r : out.rows) {
      if (r.split == Split::Test) {
        EXPECT_TRUE(std::isnan(r.values[0]));
        ++seen;
        continue;
      }
      for (double v : r.values) ASSERT_FALSE(std::isnan(v)) << resampler_name(a);
    }
    EXPECT_EQ(seen, 5u);
  }
}

TEST(Multiclass, SingleLabelRejected) {
  FeatureMatrix m{{"T"}, 1, {{"a", {0.0}, "A", Split::Train, false}, {"b", {1.0}, "A", Split::Train, false}}};
  EXPECT_THROW(resample_multiclass(m, {ResamplingAlgorithm::SMOTE}), ResamplingError);
}
