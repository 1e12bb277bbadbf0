#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "ptx/classifiers/classifier.hpp"
#include "ptx/rng.hpp"

namespace ptx {

struct TreeParams {
  std::size_t max_depth = 10;
  std::size_t min_samples_split = 20;
  std::size_t min_samples_leaf = 10;
  std::size_t max_features = 0;  // 0: every feature at every node
  bool balanced_weights = false;
  std::uint64_t seed = 0;
};

/// CART tree with weighted Gini impurity. Samples with x[feature] <= threshold
/// go left. Leaves hold weighted label frequencies.
class DecisionTree final : public Classifier {
public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0;
    int left = -1, right = -1;
    std::size_t depth = 0;
    std::size_t samples = 0;
    std::vector<double> dist;
  };

  DecisionTree() = default;

  static DecisionTree fit(const TrainingData& d, const TreeParams& p) {
    check_training(d);
    const auto w = p.balanced_weights ? d.balanced_weights() : std::vector<double>(d.size(), 1.0);
    std::vector<std::size_t> rows(d.size());
    std::iota(rows.begin(), rows.end(), 0);
    return fit_rows(d, rows, w, p);
  }

  /// Fits on `rows` (repeats allowed) with per-row weights indexed like d.
  static DecisionTree fit_rows(const TrainingData& d, const std::vector<std::size_t>& rows,
                               const std::vector<double>& weights, const TreeParams& p) {
    if (p.min_samples_leaf == 0) throw ParameterError("min_samples_leaf must be positive");
    DecisionTree t;
    t.labels_ = d.labels;
    t.dim_ = d.dim();
    Rng rng(p.seed);
    t.grow(d, rows, weights, p, 0, rng);
    return t;
  }

  ModelKind kind() const override { return ModelKind::DT; }
  const std::vector<std::string>& labels() const override { return labels_; }
  std::size_t dim() const override { return dim_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }

  std::size_t depth() const {
    std::size_t m = 0;
    for (const auto& n : nodes_) m = std::max(m, n.depth);
    return m;
  }

  const Node& leaf_for(const std::vector<double>& x) const {
    std::size_t i = 0;
    while (nodes_[i].feature >= 0)
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes_[i].feature)] <= nodes_[i].threshold
                                       ? nodes_[i].left
                                       : nodes_[i].right);
    return nodes_[i];
  }

  std::vector<double> probabilities(const std::vector<double>& x) const override { return leaf_for(x).dist; }

  void save_payload(BinaryWriter& w) const override {
    w.strings(labels_);
    w.u64(dim_);
    w.u64(nodes_.size());
    for (const auto& n : nodes_) {
      w.u64(static_cast<std::uint64_t>(n.feature + 1));
      w.f64(n.threshold);
      w.u64(static_cast<std::uint64_t>(n.left + 1));
      w.u64(static_cast<std::uint64_t>(n.right + 1));
      w.u64(n.depth);
      w.u64(n.samples);
      w.vec(n.dist);
    }
  }

  static DecisionTree load_payload(BinaryReader& r) {
    DecisionTree t;
    t.labels_ = r.strings();
    t.dim_ = r.count();
    t.nodes_.resize(r.count());
    for (auto& n : t.nodes_) {
      n.feature = static_cast<int>(r.count(t.dim_)) - 1;
      n.threshold = r.f64();
      n.left = static_cast<int>(r.count(t.nodes_.size())) - 1;
      n.right = static_cast<int>(r.count(t.nodes_.size())) - 1;
      n.depth = r.count();
      n.samples = r.count();
      n.dist = r.vec();
      if (n.dist.size() != t.labels_.size()) throw FormatError("tree leaf distribution has the wrong length");
    }
    if (t.nodes_.empty()) throw FormatError("tree has no nodes");
    return t;
  }

private:
  static double gini(const std::vector<double>& s, double total) {
    if (total <= 0) return 0;
    double g = 1;
    for (double v : s) g -= (v / total) * (v / total);
    return g;
  }

  int grow(const TrainingData& d, const std::vector<std::size_t>& rows, const std::vector<double>& w,
           const TreeParams& p, std::size_t depth, Rng& rng) {
    const std::size_t L = labels_.size();
    Node node;
    node.depth = depth;
    node.samples = rows.size();
    std::vector<double> sums(L, 0.0);
    double total = 0;
    for (auto r : rows) {
      sums[static_cast<std::size_t>(d.y[r])] += w[r];
      total += w[r];
    }
    node.dist.resize(L);
    for (std::size_t c = 0; c < L; ++c) node.dist[c] = total > 0 ? sums[c] / total : 0.0;
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(node);

    const double parent = gini(sums, total);
    if (depth >= p.max_depth || rows.size() < p.min_samples_split || parent <= 0 ||
        rows.size() < 2 * p.min_samples_leaf)
      return id;

    std::vector<std::size_t> features;
    if (p.max_features == 0 || p.max_features >= dim_) {
      features.resize(dim_);
      std::iota(features.begin(), features.end(), 0);
    } else {
      features = rng.sample_without_replacement(dim_, p.max_features);
      std::sort(features.begin(), features.end());
    }

    double best_gain = 1e-12;
    int best_f = -1;
    double best_thr = 0;
    std::vector<std::size_t> order = rows;
    std::vector<double> left(L);
    for (auto f : features) {
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return d.x[a][f] != d.x[b][f] ? d.x[a][f] < d.x[b][f] : a < b;
      });
      std::fill(left.begin(), left.end(), 0.0);
      double wl = 0;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const auto r = order[i];
        left[static_cast<std::size_t>(d.y[r])] += w[r];
        wl += w[r];
        const double a = d.x[r][f], b = d.x[order[i + 1]][f];
        if (!(a < b)) continue;
        if (i + 1 < p.min_samples_leaf || order.size() - i - 1 < p.min_samples_leaf) continue;
        std::vector<double> right(L);
        for (std::size_t c = 0; c < L; ++c) right[c] = sums[c] - left[c];
        const double wr = total - wl;
        const double gain = total * parent - wl * gini(left, wl) - wr * gini(right, wr);
        if (gain > best_gain) {
          best_gain = gain;
          best_f = static_cast<int>(f);
          best_thr = a + (b - a) / 2;
          if (!(best_thr < b)) best_thr = a;
        }
      }
    }
    if (best_f < 0) return id;

    std::vector<std::size_t> lrows, rrows;
    for (auto r : rows) (d.x[r][static_cast<std::size_t>(best_f)] <= best_thr ? lrows : rrows).push_back(r);
    const int l = grow(d, lrows, w, p, depth + 1, rng);
    const int rr = grow(d, rrows, w, p, depth + 1, rng);
    nodes_[static_cast<std::size_t>(id)].feature = best_f;
    nodes_[static_cast<std::size_t>(id)].threshold = best_thr;
    nodes_[static_cast<std::size_t>(id)].left = l;
    nodes_[static_cast<std::size_t>(id)].right = rr;
    return id;
  }

  std::vector<std::string> labels_;
  std::size_t dim_ = 0;
  std::vector<Node> nodes_;
};

struct ForestParams {
  std::size_t n_trees = 10;
  bool bootstrap = true;
  std::size_t max_features = 0;  // 0: floor(sqrt(dim)), at least 1
  bool balanced_weights = true;
  TreeParams tree{};
  std::uint64_t seed = 0;
};

/// Bagged CART trees; scores are the mean of the trees' leaf distributions.
class RandomForest final : public Classifier {
public:
  RandomForest() = default;

  static RandomForest fit(const TrainingData& d, const ForestParams& p) {
    check_training(d);
    if (p.n_trees == 0) throw ParameterError("a forest needs at least one tree");
    RandomForest f;
    f.labels_ = d.labels;
    f.dim_ = d.dim();
    const auto w = p.balanced_weights ? d.balanced_weights() : std::vector<double>(d.size(), 1.0);
    TreeParams tp = p.tree;
    tp.balanced_weights = false;
    tp.max_features =
        p.max_features ? p.max_features
                       : std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(f.dim_))));
    for (std::size_t t = 0; t < p.n_trees; ++t) {
      const auto seed = derive_seed(p.seed, "tree:" + std::to_string(t));
      Rng rng(seed);
      std::vector<std::size_t> rows(d.size());
      if (p.bootstrap)
        for (auto& r : rows) r = rng.index(d.size());
      else
        std::iota(rows.begin(), rows.end(), 0);
      tp.seed = derive_seed(seed, "splits");
      f.trees_.push_back(DecisionTree::fit_rows(d, rows, w, tp));
    }
    return f;
  }

  ModelKind kind() const override { return ModelKind::RF; }
  const std::vector<std::string>& labels() const override { return labels_; }
  std::size_t dim() const override { return dim_; }
  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }

  std::vector<double> probabilities(const std::vector<double>& x) const override {
    std::vector<double> p(labels_.size(), 0.0);
    for (const auto& t : trees_) {
      const auto& q = t.leaf_for(x).dist;
      for (std::size_t c = 0; c < p.size(); ++c) p[c] += q[c] / static_cast<double>(trees_.size());
    }
    return p;
  }

  void save_payload(BinaryWriter& w) const override {
    w.strings(labels_);
    w.u64(dim_);
    w.u64(trees_.size());
    for (const auto& t : trees_) t.save_payload(w);
  }

  static RandomForest load_payload(BinaryReader& r) {
    RandomForest f;
    f.labels_ = r.strings();
    f.dim_ = r.count();
    const auto n = r.count();
    for (std::size_t i = 0; i < n; ++i) f.trees_.push_back(DecisionTree::load_payload(r));
    return f;
  }

private:
  std::vector<std::string> labels_;
  std::size_t dim_ = 0;
  std::vector<DecisionTree> trees_;
};

}  // namespace ptx
