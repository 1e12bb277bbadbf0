// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails. Criterion 9 needs PTX_RYDLS20_CONFIG pointing at
// an experiment config whose manifest carries the published split.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "oracles/classifier_oracles.hpp"
#include "oracles/descriptor_oracles.hpp"
#include "oracles/hierarchy_oracles.hpp"
#include "oracles/resampling_oracles.hpp"
#include "ptx/classifiers/classifiers.hpp"
#include "ptx/descriptors/descriptors.hpp"
#include "ptx/evaluation/metrics.hpp"
#include "ptx/fusion/fusion.hpp"
#include "ptx/hierarchy/pct.hpp"
#include "ptx/pipeline/experiment.hpp"
#include "ptx/pipeline/synthetic.hpp"
#include "ptx/resampling/editing.hpp"
#include "ptx/resampling/multiclass.hpp"
#include "ptx/resampling/oversampling.hpp"
#include "test_helpers.hpp"

using namespace ptx;
using testing_util::random_image;

namespace {

const std::string kCovid = "Pneumonia/Acellular/Viral/Coronavirus/COVID-19";

/// Failure collector; keeps the first few messages.
struct Check {
  std::size_t checks = 0, failures = 0;
  std::vector<std::string> first;
  std::vector<std::string> notes;

  void expect(bool ok, const std::string& what) {
    ++checks;
    if (ok) return;
    ++failures;
    if (first.size() < 5) first.push_back(what);
  }
  void note(const std::string& s) { notes.push_back(s); }
};

bool same_hist(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > tol) return false;
  return true;
}

std::string str(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << std::fixed << v;
  return s.str();
}

// ---- 1. descriptor oracles ----

void descriptors_vs_oracles(Check& c) {
  const std::vector<double> levels{0, 128, 255};
  const auto eqp_default = EqpParams{};
  std::size_t exhaustive = 0;
  auto compare_lbp_eqp_ldn = [&](const GrayImage& img) {
    c.expect(lbp(img).values == oracle::lbp(img), "LBP " + std::to_string(img.width()) + "x" + std::to_string(img.height()));
    c.expect(same_hist(eqp(img, eqp_default).values, oracle::eqp(img, eqp_default.tau1, eqp_default.tau2), 1e-9), "EQP");
    c.expect(same_hist(ldn(img).values, oracle::ldn(img), 1e-9), "LDN");
  };
  // every image with at most 12 pixels
  for (auto [w, h] : {std::pair{3, 3}, std::pair{3, 4}, std::pair{4, 3}}) {
    const int n = w * h;
    std::vector<double> v(static_cast<std::size_t>(n));
    std::size_t total = 1;
    for (int i = 0; i < n; ++i) total *= 3;
    for (std::size_t code = 0; code < total; ++code) {
      std::size_t r = code;
      for (int i = 0; i < n; ++i, r /= 3) v[static_cast<std::size_t>(i)] = levels[r % 3];
      compare_lbp_eqp_ldn(GrayImage(w, h, v));
      ++exhaustive;
    }
  }
  // every other shape up to 8x8, seeded
  Rng rng(1);
  std::size_t sampled = 0;
  for (int w = 3; w <= 8; ++w)
    for (int h = 3; h <= 8; ++h) {
      if (w * h <= 12) continue;
      for (int t = 0; t < 100; ++t, ++sampled) compare_lbp_eqp_ldn(random_image(rng, w, h, levels));
    }
  c.note(std::to_string(exhaustive) + " exhaustive + " + std::to_string(sampled) + " sampled 3-level images");

  const auto bsif_cfg = DescriptorConfig::defaults(DescriptorId::BSIF);
  Rng rr(2);
  for (int t = 0; t < 200; ++t) {
    const int w = 8 + static_cast<int>(rr.index(9)), h = 8 + static_cast<int>(rr.index(9));
    const auto img = random_image(rr, w, h);
    c.expect(same_hist(lpq(img).values, oracle::lpq(img), 1e-9), "LPQ image " + std::to_string(t));
    c.expect(same_hist(bsif(img, bsif_cfg.bsif_bank).values,
                       oracle::bsif(img, bsif_cfg.bsif_bank.filter_size, bsif_cfg.bsif_bank.filters), 1e-9),
             "BSIF image " + std::to_string(t));
    c.expect(same_hist(obifs(img).values, oracle::obifs(img), 1e-9), "oBIF image " + std::to_string(t));
  }
  c.note("200 random images for LPQ/BSIF/oBIF");
}

// ---- 2. dimensions ----

void dimension_contract(Check& c) {
  const std::map<DescriptorId, std::size_t> want{{DescriptorId::LBP, 59},  {DescriptorId::EQP, 256},
                                                 {DescriptorId::LDN, 56},  {DescriptorId::LPQ, 256},
                                                 {DescriptorId::BSIF, 256}, {DescriptorId::OBIF, 484},
                                                 {DescriptorId::LETRIST, 413}, {DescriptorId::INCEPTIONV3, 2048}};
  Rng rng(3);
  const auto img = random_image(rng, 24, 20);
  const auto dir = testing_util::scratch("acceptance_dims");
  for (const auto& [id, dim] : want) {
    const auto cfg = DescriptorConfig::defaults(id);
    c.expect(cfg.dim() == dim, std::string(descriptor_name(id)) + " declared " + std::to_string(cfg.dim()));
    if (!cfg.is_external()) {
      c.expect(compute_descriptor(cfg, img).dim() == dim, std::string(descriptor_name(id)) + " computed");
      continue;
    }
    const auto path = dir / (std::string(descriptor_name(id)) + ".ftc");
    {
      std::ofstream out(path);
      out << descriptor_name(id) << ' ' << dim << " 1 external\ns0";
      for (std::size_t i = 0; i < dim; ++i) out << ' ' << i % 5;
      out << '\n';
    }
    const auto rows = load_external_features(path, id, dim);
    c.expect(rows.size() == 1 && rows[0].second.dim() == dim, std::string(descriptor_name(id)) + " ingested");
  }
}

// ---- 3. resampling ----

LabeledSet random_set(Rng& rng, std::size_t n, std::vector<std::string> labels, std::size_t dim, bool grid) {
  LabeledSet s;
  for (std::size_t i = 0; i < n; ++i) {
    LabeledPoint p;
    for (std::size_t d = 0; d < dim; ++d) p.x.push_back(grid ? static_cast<double>(rng.index(6)) : rng.uniform(0, 10));
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

double off_segment(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& s) {
  double ab = 0, as = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += (b[i] - a[i]) * (b[i] - a[i]);
    as += (s[i] - a[i]) * (b[i] - a[i]);
  }
  const double t = ab > 0 ? as / ab : 0;
  if (t < -1e-12 || t > 1 + 1e-12) return 1e9;
  double e = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = s[i] - (a[i] + t * (b[i] - a[i]));
    e += d * d;
  }
  return std::sqrt(e);
}

void resampling_suite(Check& c) {
  Rng rng(77);
  std::size_t generated = 0;
  for (int trial = 0; generated < 1000; ++trial) {
    auto s = random_set(rng, 40, {"a", "b", "b"}, 3, false);
    const auto n = count_labels(s)["a"];
    if (n < 2) continue;
    for (int algo = 0; algo < 2; ++algo) {
      const auto r = algo == 0 ? smote(s, "a", n + 25, SmoteVariant::Plain, 5, static_cast<std::uint64_t>(trial))
                               : adasyn(s, "a", n + 25, 5, static_cast<std::uint64_t>(trial), true);
      for (std::size_t g = 0; g < r.draws.size(); ++g, ++generated) {
        const auto& d = r.draws[g];
        c.expect(s[d.p].label == "a" && s[d.q].label == "a", "synthetic parent label");
        c.expect(off_segment(s[d.p].x, s[d.q].x, r.set[s.size() + g].x) < 1e-9, "synthetic point off segment");
      }
    }
  }
  c.note(std::to_string(generated) + " synthetic points");

  Rng er(2024);
  for (int t = 0; t < 50; ++t) {
    const auto s = random_set(er, 30, {"x", "y", "z"}, 2, t % 2 == 0);
    const auto p = to_pts(s);
    const auto tag = " set " + std::to_string(t);
    c.expect(as_int(edited_nn(s, EnnMode::ENN, 3).kept) == oracle::enn(p, 3), "ENN" + tag);
    c.expect(as_int(edited_nn(s, EnnMode::RENN, 3).kept) == oracle::renn(p, 3), "RENN" + tag);
    c.expect(as_int(edited_nn(s, EnnMode::ALLKNN, 3).kept) == oracle::allknn(p, 3), "AllKNN" + tag);
    c.expect(as_int(tomek_links(s).kept) == oracle::tomek(p), "Tomek" + tag);
    const auto once = edited_nn(s, EnnMode::RENN, 3).set;
    c.expect(edited_nn(once, EnnMode::ENN, 3).set == once, "RENN not a fixpoint" + tag);
  }

  const std::vector<std::pair<std::string, int>> counts = {{"Normal", 700},
                                                           {kCovid, 63},
                                                           {"Pneumonia/Acellular/Viral/Coronavirus/MERS", 7},
                                                           {"Pneumonia/Acellular/Viral/Coronavirus/SARS", 8},
                                                           {"Pneumonia/Acellular/Viral/Varicella", 7},
                                                           {"Pneumonia/Celullar/Bacterial/Streptococcus", 9},
                                                           {"Pneumonia/Celullar/Fungus/Pneumocystis", 8}};
  FeatureMatrix m{{"TOY"}, 4, {}};
  Rng mr(3);
  int id = 0;
  for (std::size_t l = 0; l < counts.size(); ++l)
    for (int i = 0; i < counts[l].second; ++i) {
      std::vector<double> v(4);
      for (auto& x : v) x = mr.normal() + 3.0 * static_cast<double>(l);
      m.rows.push_back({"r" + std::to_string(id++), v, counts[l].first, Split::Train, false});
    }
  for (auto a : {ResamplingAlgorithm::SMOTE, ResamplingAlgorithm::ADASYN, ResamplingAlgorithm::SMOTE_B1,
                 ResamplingAlgorithm::SMOTE_B2}) {
    const auto out = resample_multiclass(m, {a, 0, 11}, LabelMode::LeafPath);
    for (const auto& [label, n] : out.label_counts())
      c.expect(n == 700, std::string(resampler_name(a)) + " left " + label + " at " + std::to_string(n));
  }
}

// ---- 4. classifiers ----

TrainingData blob_data(std::uint64_t seed, std::size_t n, std::size_t dim, int n_labels, bool grid = false) {
  Rng rng(seed);
  std::vector<std::vector<double>> x(n, std::vector<double>(dim));
  std::vector<std::string> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int l = static_cast<int>(i % static_cast<std::size_t>(n_labels));
    y[i] = std::string(1, static_cast<char>('a' + l));
    for (auto& v : x[i]) v = grid ? static_cast<double>(rng.index(4)) : rng.normal() + 0.8 * l;
  }
  return TrainingData::from_rows(x, y);
}

void classifier_suite(Check& c) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::size_t n = 10 + seed % 41;
    const auto d = blob_data(seed, n, 3, 3, seed % 2 == 0);
    Rng rng(seed + 100);
    for (int k : {3, 5}) {
      const auto m = KnnClassifier::fit(d, static_cast<std::size_t>(k));
      for (int q = 0; q < 20; ++q) {
        std::vector<double> x(3);
        for (auto& v : x) v = seed % 2 == 0 ? static_cast<double>(rng.index(4)) : rng.normal();
        const auto want = oracle::brute_knn(d.x, d.y, static_cast<int>(d.n_labels()), x, k);
        c.expect(m.predict_scores(x).scores == want.scores, "kNN scores");
        c.expect(m.predict_index(x) == static_cast<std::size_t>(want.label), "kNN label");
      }
    }
  }

  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto d = blob_data(seed, 10, 4, 3);
    const auto net = MlpClassifier::initial_net(4, 13, 3, false, seed + 4);
    std::vector<double> grad;
    const double alpha = 0.05, h = 1e-5;
    mlp_loss(net, d.x, d.y, alpha, &grad);
    for (std::size_t i = 0; i < net.theta.size(); ++i) {
      auto plus = net, minus = net;
      plus.theta[i] += h;
      minus.theta[i] -= h;
      const double fd = (mlp_loss(plus, d.x, d.y, alpha, nullptr) - mlp_loss(minus, d.x, d.y, alpha, nullptr)) / (2 * h);
      worst = std::max(worst, std::abs(fd - grad[i]) / std::max(std::abs(fd) + std::abs(grad[i]), 1e-7));
    }
  }
  c.expect(worst < 1e-4, "MLP gradient relative error " + str(worst, 8));
  c.note("MLP gradient rel. error " + str(worst, 8));

  double kkt = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto d = blob_data(seed, 60, 3, 3);
    std::vector<BinarySvmSolution> sols;
    const SvmParams p;
    const auto m = SvmClassifier::fit(d, p, &sols);
    for (std::size_t k = 0; k < sols.size(); ++k)
      for (std::size_t i = 0; i < d.size(); ++i) {
        const double a = sols[k].alpha[i];
        const double margin = (d.y[i] == static_cast<int>(k) ? 1 : -1) * m.decision_values(d.x[i])[k];
        double r = 0;
        if (a < 0 || a > p.C) r = 1;
        else if (a > 0 && a < p.C) r = std::abs(margin - 1);
        else if (a == 0) r = std::max(0.0, 1 - margin);
        else r = std::max(0.0, margin - 1);
        kkt = std::max(kkt, r);
      }
  }
  c.expect(kkt <= 1e-3, "SVM KKT residual " + str(kkt, 8));

  double qp_gap = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto d = blob_data(seed + 40, 12, 2, 2);
    double mean = 0, var = 0;
    for (const auto& r : d.x)
      for (double v : r) mean += v / 24;
    for (const auto& r : d.x)
      for (double v : r) var += (v - mean) * (v - mean) / 24;
    const double gamma = 1 / (2 * var);
    std::vector<std::vector<double>> K(12, std::vector<double>(12));
    for (std::size_t i = 0; i < 12; ++i)
      for (std::size_t j = 0; j < 12; ++j) {
        double s = 0;
        for (std::size_t f = 0; f < 2; ++f) s += (d.x[i][f] - d.x[j][f]) * (d.x[i][f] - d.x[j][f]);
        K[i][j] = std::exp(-gamma * s);
      }
    std::vector<int> y(12);
    for (std::size_t i = 0; i < 12; ++i) y[i] = d.y[i] == 0 ? 1 : -1;
    const auto qp = oracle::svm_qp(K, y, 1.0);
    SvmParams tight;
    tight.tol = 1e-6;
    const auto m = SvmClassifier::fit(d, tight);
    for (std::size_t i = 0; i < 12; ++i) {
      double f = qp.b;
      for (std::size_t j = 0; j < 12; ++j) f += qp.alpha[j] * y[j] * K[i][j];
      qp_gap = std::max(qp_gap, std::abs(m.decision_values(d.x[i])[0] - f));
    }
  }
  c.expect(qp_gap <= 1e-4, "SVM vs QP reference " + str(qp_gap, 8));
  c.note("SVM KKT " + str(kkt, 6) + ", QP gap " + str(qp_gap, 8));

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto d = blob_data(seed, 50 + seed * 25, 5, 2 + static_cast<int>(seed % 4));
    const auto t = DecisionTree::fit(d, {});
    for (const auto& n : t.nodes()) {
      c.expect(n.depth <= 10, "tree depth");
      if (n.feature < 0) {
        c.expect(n.samples >= 10, "leaf below 10 samples");
      } else {
        c.expect(n.samples >= 20, "split below 20 samples");
        c.expect(t.nodes()[static_cast<std::size_t>(n.left)].samples + t.nodes()[static_cast<std::size_t>(n.right)].samples ==
                     n.samples,
                 "children do not partition the node");
      }
    }
  }
}

// ---- 5. hierarchy ----

HierData toy_hier(std::uint64_t seed, std::size_t n, std::size_t dim, double noise) {
  const auto tax = rydls20_taxonomy();
  const auto leaves = tax.leaves();
  Rng rng(seed);
  HierData d;
  for (std::size_t i = 0; i < n; ++i) {
    const auto leaf = leaves[i % leaves.size()];
    std::vector<double> x(dim);
    for (auto& v : x) v = rng.normal();
    x[0] = static_cast<double>(leaf) + noise * rng.normal();
    if (dim > 1) x[1] = static_cast<double>(tax.node(leaf).depth) + noise * rng.normal();
    d.x.push_back(x);
    d.paths.push_back(tax.node(leaf).path);
  }
  return d;
}

bool child_le_parent(const NodeVector& v, const Taxonomy& tax) {
  for (std::size_t i = 0; i < tax.size(); ++i) {
    const int parent = tax.node(static_cast<int>(i)).parent;
    if (parent >= 0 && v[i] > v[static_cast<std::size_t>(parent)] + 1e-12) return false;
  }
  return true;
}

void hierarchy_suite(Check& c) {
  const auto tax = rydls20_taxonomy();
  std::size_t cases = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    PctParams p;
    p.seed = seed;
    p.f_level = 0.125;
    const auto f = PctForest::fit(toy_hier(seed, 120, 6, 3.0), tax, p);
    for (const auto& t : f.trees())
      for (const auto& n : t.nodes()) c.expect(child_le_parent(n.prediction, tax), "tree node prediction");
    Rng rng(seed);
    for (int q = 0; q < 1000; ++q, ++cases) {
      std::vector<double> x(6);
      for (auto& v : x) v = rng.normal() * 4;
      c.expect(child_le_parent(f.node_scores(x), tax), "forest node scores");
    }
  }
  c.note(std::to_string(cases) + " emitted node vectors");

  for (const auto& path : tax.label_paths()) {
    const auto v = encode_node_vector(path, tax);
    c.expect(v == oracle::encode(path, tax.label_paths()), "encode " + path);
    c.expect(decode_path(v, tax) == path, "decode(encode(" + path + "))");
  }
  c.expect(tax.label_paths().size() == 14, "taxonomy path count");

  const auto w = node_weights(tax, 0.75);
  std::size_t scans = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const std::size_t n = 3 + seed % 18;
    const auto d = toy_hier(seed, n, 3, 2.0);
    std::vector<NodeVector> y;
    for (const auto& path : d.paths) y.push_back(oracle::encode(path, tax.label_paths()));
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    const std::vector<int> irows(rows.begin(), rows.end());
    for (std::size_t min_leaf : {1u, 2u, 3u}) {
      ++scans;
      const auto want = oracle::scan(d.x, y, irows, w, min_leaf);
      const auto got = best_split(d.x, y, rows, {0, 1, 2}, w, 1.0, min_leaf);
      if (want.feature < 0 || n <= 2) {
        c.expect(!got.has_value(), "unexpected split");
        continue;
      }
      c.expect(got.has_value() && got->feature == want.feature &&
                   std::abs(got->threshold - want.threshold) <= 1e-12 * std::max(1.0, std::abs(want.threshold)) &&
                   std::abs(got->reduction - want.reduction) <= 1e-9,
               "best_split seed " + std::to_string(seed));
    }
  }
  c.note(std::to_string(scans) + " exhaustive split scans");
}

// ---- 6. fusion ----

void fusion_suite(Check& c) {
  auto sv = [](std::vector<double> s) { return ScoreVector{{"A", "B"}, std::move(s)}; };
  const auto sum = late_fuse({sv({0.8, 0.2}), sv({0.4, 0.6})}, FusionRule::SUM);
  c.expect(std::abs(sum.scores.scores[0] - 0.6) < 1e-15 && sum.label() == "A", "SUM hand example");
  const auto vote = late_fuse({sv({0.9, 0.1}), sv({0.6, 0.4}), sv({0.2, 0.8})}, FusionRule::VOTE);
  c.expect(std::abs(vote.scores.scores[0] - 2.0 / 3) < 1e-15, "VOTE hand example");
  const auto prod = late_fuse({sv({0.5, 0.5}), sv({0.8, 0.2})}, FusionRule::PROD);
  c.expect(std::abs(prod.scores.scores[0] - 0.8) < 1e-12, "PROD hand example");

  Rng rng(17);
  for (int round = 0; round < 200; ++round) {
    const std::size_t L = 2 + rng.index(6), m = 2 + rng.index(4);
    std::vector<ScoreVector> in;
    for (std::size_t i = 0; i < m; ++i) {
      ScoreVector s;
      double total = 0;
      for (std::size_t l = 0; l < L; ++l) {
        s.labels.push_back(std::string(1, static_cast<char>('a' + l)));
        s.scores.push_back(rng.uniform());
        total += s.scores.back();
      }
      for (auto& v : s.scores) v /= total;
      in.push_back(s);
    }
    for (auto rule : {FusionRule::SUM, FusionRule::PROD, FusionRule::VOTE}) {
      const auto out = late_fuse(in, rule);
      auto perm = in;
      std::reverse(perm.begin(), perm.end());
      c.expect(late_fuse(perm, rule).winner == out.winner, "member order changed the winner");
      if (rule == FusionRule::PROD) continue;
      auto scaled = in;
      for (auto& s : scaled) {
        double total = 0;
        for (auto& v : s.scores) total += (v *= 7.5);
        for (auto& v : s.scores) v /= total;
      }
      c.expect(late_fuse(scaled, rule).winner == out.winner, "rescaling changed the winner");
    }
  }

  const std::vector<std::string> feats{"BSIF", "EQP", "LBP", "LDN", "LETRIST", "LPQ", "OBIF", "INCEPTIONV3"};
  std::vector<ScenarioScore> results;
  for (const auto& f : feats)
    for (const auto* cl : {"KNN3", "SVM", "MLP"}) results.push_back({f, cl, "SMOTE", rng.uniform()});
  const std::vector<std::size_t> want{28, 56, 70, 56};
  for (std::size_t m = 2; m <= 5; ++m) {
    const auto n = select_scenarios(results, {SelectionKind::BestPerFeature, m}).size();
    c.expect(n == want[m - 2], "BestPerFeature size " + std::to_string(m) + " gave " + std::to_string(n));
  }
  const auto sets = enumerate_fusion_sets(feats, {2, 3}, true);
  std::size_t fused = 0;
  for (const auto& s : sets) fused += s.size() > 1;
  c.expect(fused == 84, "fusion-set count " + std::to_string(fused));
}

// ---- 7. metrics ----

void metric_suite(Check& c) {
  const auto r = prf1({{"A", "B"}, {{8, 2}, {1, 9}}});
  c.expect(std::abs(r.macro_f1 - 0.850) <= 5e-4, "macro-F1 " + str(r.macro_f1));
  c.expect(std::abs(r.per_label[0].precision - 8.0 / 9) < 1e-15 && std::abs(r.per_label[0].recall - 0.8) < 1e-15,
           "precision/recall of A");
  const auto diag = prf1({{"A", "B"}, {{3, 0}, {0, 4}}});
  c.expect(diag.macro_f1 == 1.0, "diagonal matrix");
  const auto zero = prf1({{"A", "B"}, {{0, 3}, {0, 4}}});
  c.expect(zero.per_label[0].f1 == 0.0 && zero.per_label[0].precision == 0.0, "label never predicted");
  c.note("macro-F1 [[8,2],[1,9]] = " + str(r.macro_f1));

  using O = std::optional<double>;
  Rng rng(4);
  for (int round = 0; round < 50; ++round) {
    std::vector<std::vector<O>> s(8, std::vector<O>(4)), t(8, std::vector<O>(4));
    for (std::size_t m = 0; m < 8; ++m)
      for (std::size_t k = 0; k < 4; ++k) {
        const double v = std::round(rng.uniform() * 10) / 10;
        s[m][k] = v;
        t[m][k] = std::exp(3 * v) + static_cast<double>(k);
      }
    const std::vector<std::string> methods{"m0", "m1", "m2", "m3", "m4", "m5", "m6", "m7"};
    const std::vector<std::string> contexts{"c0", "c1", "c2", "c3"};
    c.expect(friedman_ranks(methods, contexts, s).mean_rank == friedman_ranks(methods, contexts, t).mean_rank,
             "Friedman ranks changed under a monotone transform");
  }
}

// ---- 8. synthetic end-to-end ----

std::map<std::string, ExperimentResult> run_cells(const ExperimentConfig& cfg) {
  const auto w = open_workspace(cfg, {});
  run_grid(w, false, {});
  return ResultLog(cfg.out_dir / "results.jsonl").latest();
}

void synthetic_benchmark(Check& c) {
  const auto dir = testing_util::scratch("acceptance_synthetic");
  ExperimentConfig cfg;
  cfg.manifest = write_synthetic_corpus(dir / "corpus", 2024);
  cfg.cache_dir = dir / "cache";
  cfg.out_dir = dir / "out";
  cfg.descriptors = {DescriptorConfig::defaults(DescriptorId::LBP)};
  cfg.fusion_sizes = {};
  cfg.classifiers = {"MLP"};
  cfg.flat_resamplers = {ResamplingAlgorithm::RENN};
  cfg.hier_resamplers = {ResamplingAlgorithm::RENN};
  cfg.select_on_test = true;
  cfg.seed = 1;
  const auto results = run_cells(cfg);
  const ExperimentResult* flat = nullptr;
  const ExperimentResult* hier = nullptr;
  for (const auto& [key, r] : results) {
    c.expect(r.ok, key + ": " + r.error);
    if (r.schema == "flat") flat = &r;
    if (r.schema == "hier") hier = &r;
  }
  c.expect(flat && flat->macro_f1 >= 0.90, "flat LBP+MLP+RENN macro-F1 " + (flat ? str(flat->macro_f1) : "missing"));
  c.expect(hier && hier->focus_f1 >= 0.90, "hierarchical COVID-19 F1 " + (hier ? str(hier->focus_f1) : "missing"));
  if (flat) c.note("flat macro-F1 " + str(flat->macro_f1));
  if (hier) c.note("hier COVID-19 F1 " + str(hier->focus_f1) + ", hier macro-F1 " + str(hier->macro_f1));
}

// ---- 9. RYDLS-20 ----

bool rydls20(Check& c) {
  const char* env = std::getenv("PTX_RYDLS20_CONFIG");
  if (!env || !*env) return false;
  const auto base = load_config(env);
  const auto root = testing_util::scratch("acceptance_rydls20");
  std::vector<double> flat, hier;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto f = base;
    f.seed = seed;
    f.out_dir = root / ("flat-" + std::to_string(seed));
    f.descriptors = {DescriptorConfig::defaults(DescriptorId::LBP)};
    f.fusion_sizes = {};
    f.flat = true;
    f.classifiers = {"MLP"};
    f.flat_resamplers = {ResamplingAlgorithm::RENN};
    f.hierarchical = false;
    for (const auto& [key, r] : run_cells(f))
      if (r.ok && r.schema == "flat") flat.push_back(r.macro_f1);

    auto h = base;
    h.seed = seed;
    h.out_dir = root / ("hier-" + std::to_string(seed));
    h.descriptors = {};
    for (const auto& d : base.descriptors)
      if (d.id == DescriptorId::BSIF || d.id == DescriptorId::EQP || d.id == DescriptorId::LPQ) h.descriptors.push_back(d);
    for (auto id : {DescriptorId::BSIF, DescriptorId::EQP, DescriptorId::LPQ})
      if (std::none_of(h.descriptors.begin(), h.descriptors.end(), [&](const auto& d) { return d.id == id; }))
        h.descriptors.push_back(DescriptorConfig::defaults(id));
    h.fusion_sizes = {3};
    h.flat = false;
    h.hierarchical = true;
    h.hier_resamplers = {ResamplingAlgorithm::SMOTE};
    for (const auto& [key, r] : run_cells(h))
      if (r.ok && r.schema == "hier" && r.fusion == "early")
        hier.push_back(r.focus_f1);
  }
  auto mean = [](const std::vector<double>& v) { return v.empty() ? NAN : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); };
  const double mf = mean(flat), mh = mean(hier);
  c.expect(flat.size() == 5 && std::abs(mf - 0.6491) <= 0.08, "flat LBP+MLP+RENN mean macro-F1 " + str(mf));
  c.expect(hier.size() == 5 && std::abs(mh - 0.8889) <= 0.08, "hier BSIF+EQP+LPQ COVID-19 mean F1 " + str(mh));
  c.note("flat mean macro-F1 " + str(mf) + ", hier mean COVID-19 F1 " + str(mh) + " over 5 seeds");
  return true;
}

}  // namespace

int main() {
  int failed = 0;
  auto run = [&](int n, const std::string& title, const std::function<bool(Check&)>& body) {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    bool ran = true;
    try {
      ran = body(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream line;
    line << "criterion " << n << " " << title << ": ";
    if (!ran) {
      line << "SKIP (set PTX_RYDLS20_CONFIG to an experiment config with the published split)";
    } else {
      line << (c.failures ? "FAIL" : "PASS") << " (" << c.checks << " checks, " << c.failures << " failed, " << str(secs, 1)
           << " s)";
      for (const auto& s : c.notes) line << "; " << s;
      for (const auto& s : c.first) line << "\n    " << s;
      failed += c.failures > 0;
    }
    std::cout << line.str() << std::endl;
  };
  auto always = [](void (*f)(Check&)) { return [f](Check& c) { f(c); return true; }; };
  run(1, "descriptor oracles", always(descriptors_vs_oracles));
  run(2, "dimension contract", always(dimension_contract));
  run(3, "resampling", always(resampling_suite));
  run(4, "classifiers", always(classifier_suite));
  run(5, "hierarchy", always(hierarchy_suite));
  run(6, "fusion", always(fusion_suite));
  run(7, "metrics", always(metric_suite));
  run(8, "synthetic end-to-end", always(synthetic_benchmark));
  run(9, "RYDLS-20", rydls20);
  return failed ? 1 : 0;
}
