#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/distributions/fisher_f.hpp>

#include "ptx/classifiers/classifier.hpp"
#include "ptx/dataset/taxonomy.hpp"
#include "ptx/evaluation/metrics.hpp"
#include "ptx/io/binary.hpp"
#include "ptx/parallel.hpp"
#include "ptx/rng.hpp"

namespace ptx {

/// One value per taxonomy node (root excluded), in taxonomy index order.
using NodeVector = std::vector<double>;

inline NodeVector encode_node_vector(const std::string& path, const Taxonomy& tax) {
  NodeVector v(tax.size(), 0.0);
  for (int a : tax.lineage(tax.require(path))) v[static_cast<std::size_t>(a)] = 1.0;
  return v;
}

inline bool is_hierarchy_consistent(const NodeVector& v, const Taxonomy& tax, double slack = 1e-12) {
  for (std::size_t i = 0; i < tax.size(); ++i) {
    const int p = tax.node(static_cast<int>(i)).parent;
    if (p >= 0 && v[i] > v[static_cast<std::size_t>(p)] + slack) return false;
  }
  return true;
}

/// Coordinate weights w0^depth, root children at depth 1.
inline std::vector<double> node_weights(const Taxonomy& tax, double w0) {
  std::vector<double> w;
  for (const auto& n : tax.nodes()) w.push_back(std::pow(w0, static_cast<double>(n.depth)));
  return w;
}

enum class DecodeMode { Relative, Absolute };

/// Greedy descent. At each level the highest-scoring child is taken (ties
/// to the smaller name) while it scores at least `threshold` times its
/// parent (Relative; root counts as 1) or at least `threshold` (Absolute).
/// The first level is always taken so the result is never empty.
inline std::string decode_path(const NodeVector& scores, const Taxonomy& tax, DecodeMode mode = DecodeMode::Relative,
                               double threshold = 0.5) {
  int current = -1;
  double parent_score = 1.0;
  while (true) {
    const auto& kids = tax.children(current);
    if (kids.empty()) break;
    int best = -1;
    for (int c : kids) {
      const auto sc = scores[static_cast<std::size_t>(c)], sb = best < 0 ? 0.0 : scores[static_cast<std::size_t>(best)];
      if (best < 0 || sc > sb || (sc == sb && tax.node(c).name < tax.node(best).name)) best = c;
    }
    const double s = scores[static_cast<std::size_t>(best)];
    const double bar = mode == DecodeMode::Relative ? threshold * parent_score : threshold;
    if (current >= 0 && s < bar) break;
    current = best;
    parent_score = s;
  }
  return tax.node(current).path;
}

struct PctParams {
  std::vector<double> f_test_levels{0.001, 0.005, 0.01, 0.05, 0.1, 0.125};
  double f_level = 0.05;
  std::size_t iterations = 10;
  std::size_t min_leaf = 2;
  double w0 = 0.75;
  bool bootstrap = true;
  std::size_t max_features = 0;  // 0: every feature for one tree, floor(sqrt(dim)) in a forest
  DecodeMode decode = DecodeMode::Relative;
  double decode_threshold = 0.5;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

struct PctSplit {
  int feature = -1;
  double threshold = 0;
  double reduction = 0;  // weighted sum-of-squares reduction
  double f_stat = 0;
  double p_value = 1;
};

namespace detail {

/// Weighted sum of squares of the node vectors of `rows`.
inline double weighted_ss(const std::vector<NodeVector>& y, const std::vector<std::size_t>& rows,
                          const std::vector<double>& w) {
  if (rows.empty()) return 0;
  double ss = 0;
  for (std::size_t n = 0; n < w.size(); ++n) {
    double s = 0, q = 0;
    for (auto r : rows) {
      s += y[r][n];
      q += y[r][n] * y[r][n];
    }
    ss += w[n] * std::max(0.0, q - s * s / static_cast<double>(rows.size()));
  }
  return ss;
}

}  // namespace detail

/// Best (feature, midpoint) by reduction of weighted within-cluster sum of
/// squares. Candidates leaving a child below min_leaf are skipped. The best
/// candidate must pass a one-way F test (1, n-2 degrees of freedom) at
/// `level`; otherwise no split is returned.
inline std::optional<PctSplit> best_split(const std::vector<std::vector<double>>& x, const std::vector<NodeVector>& y,
                                          const std::vector<std::size_t>& rows, const std::vector<std::size_t>& features,
                                          const std::vector<double>& w, double level, std::size_t min_leaf) {
  const std::size_t m = rows.size(), N = w.size();
  if (m < 2 || m < 2 * std::max<std::size_t>(min_leaf, 1)) return std::nullopt;
  const double total = detail::weighted_ss(y, rows, w);
  if (total <= 1e-12) return std::nullopt;

  std::vector<double> sum(N, 0.0), sq(N, 0.0);
  for (auto r : rows)
    for (std::size_t n = 0; n < N; ++n) {
      sum[n] += y[r][n];
      sq[n] += y[r][n] * y[r][n];
    }
  auto ss_of = [&](const std::vector<double>& s, const std::vector<double>& q, double cnt) {
    double v = 0;
    for (std::size_t n = 0; n < N; ++n) v += w[n] * std::max(0.0, q[n] - s[n] * s[n] / cnt);
    return v;
  };

  PctSplit best;
  double best_within = 0;
  std::vector<std::size_t> order = rows;
  std::vector<double> ls(N), lq(N), rs(N), rq(N);
  for (auto f : features) {
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return x[a][f] != x[b][f] ? x[a][f] < x[b][f] : a < b; });
    std::fill(ls.begin(), ls.end(), 0.0);
    std::fill(lq.begin(), lq.end(), 0.0);
    for (std::size_t i = 0; i + 1 < m; ++i) {
      const auto r = order[i];
      for (std::size_t n = 0; n < N; ++n) {
        ls[n] += y[r][n];
        lq[n] += y[r][n] * y[r][n];
      }
      const double a = x[r][f], b = x[order[i + 1]][f];
      if (!(a < b) || i + 1 < min_leaf || m - i - 1 < min_leaf) continue;
      for (std::size_t n = 0; n < N; ++n) {
        rs[n] = sum[n] - ls[n];
        rq[n] = sq[n] - lq[n];
      }
      const double within = ss_of(ls, lq, static_cast<double>(i + 1)) + ss_of(rs, rq, static_cast<double>(m - i - 1));
      const double reduction = total - within;
      if (reduction > best.reduction + 1e-12) {
        double thr = a + (b - a) / 2;
        if (!(thr < b)) thr = a;
        best = {static_cast<int>(f), thr, reduction, 0, 1};
        best_within = within;
      }
    }
  }
  if (best.feature < 0) return std::nullopt;
  if (m <= 2) return std::nullopt;
  const double df2 = static_cast<double>(m - 2);
  if (best_within <= 1e-12) {
    best.f_stat = std::numeric_limits<double>::infinity();
    best.p_value = 0;
  } else {
    best.f_stat = best.reduction / (best_within / df2);
    best.p_value = boost::math::cdf(boost::math::complement(boost::math::fisher_f(1.0, df2), best.f_stat));
  }
  if (best.p_value > level) return std::nullopt;
  return best;
}

/// Hierarchical data: rows with full label paths.
struct HierData {
  std::vector<std::vector<double>> x;
  std::vector<std::string> paths;

  std::size_t size() const noexcept { return x.size(); }
  std::size_t dim() const { return x.empty() ? 0 : x.front().size(); }

  static HierData from_matrix(const FeatureMatrix& m) {
    HierData d;
    for (const auto& r : m.rows)
      if (r.split == Split::Train) {
        d.x.push_back(r.values);
        d.paths.push_back(r.label);
      }
    return d;
  }
};

/// Predictive clustering tree over node vectors. Leaves predict the mean
/// node vector of their members.
class PctTree {
public:
  struct Node {
    int feature = -1;
    double threshold = 0;
    int left = -1, right = -1;
    std::size_t depth = 0;
    std::size_t samples = 0;
    NodeVector prediction;
  };

  static PctTree fit(const HierData& d, const Taxonomy& tax, const PctParams& p) {
    std::vector<std::size_t> rows(d.size());
    std::iota(rows.begin(), rows.end(), 0);
    return fit_rows(d, tax, p, rows, p.max_features, p.seed);
  }

  /// `rows` may repeat (bootstrap). `max_features` 0 means every feature.
  static PctTree fit_rows(const HierData& d, const Taxonomy& tax, const PctParams& p,
                          const std::vector<std::size_t>& rows, std::size_t max_features, std::uint64_t seed) {
    if (d.size() == 0) throw ParameterError("hierarchical training set is empty");
    if (p.min_leaf == 0) throw ParameterError("min_leaf must be positive");
    std::vector<NodeVector> y;
    for (const auto& path : d.paths) y.push_back(encode_node_vector(path, tax));
    PctTree t;
    t.dim_ = d.dim();
    t.n_nodes_ = tax.size();
    const auto w = node_weights(tax, p.w0);
    t.grow(d.x, y, w, rows, p, max_features, seed, "", 0);
    return t;
  }

  std::size_t dim() const noexcept { return dim_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }

  std::size_t depth() const {
    std::size_t m = 0;
    for (const auto& n : nodes_) m = std::max(m, n.depth);
    return m;
  }

  const NodeVector& node_scores(const std::vector<double>& x) const {
    std::size_t i = 0;
    while (nodes_[i].feature >= 0)
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes_[i].feature)] <= nodes_[i].threshold
                                       ? nodes_[i].left
                                       : nodes_[i].right);
    return nodes_[i].prediction;
  }

  void save(BinaryWriter& w) const {
    w.u64(dim_);
    w.u64(n_nodes_);
    w.u64(nodes_.size());
    for (const auto& n : nodes_) {
      w.u64(static_cast<std::uint64_t>(n.feature + 1));
      w.f64(n.threshold);
      w.u64(static_cast<std::uint64_t>(n.left + 1));
      w.u64(static_cast<std::uint64_t>(n.right + 1));
      w.u64(n.depth);
      w.u64(n.samples);
      w.vec(n.prediction);
    }
  }

  static PctTree load(BinaryReader& r) {
    PctTree t;
    t.dim_ = r.count();
    t.n_nodes_ = r.count();
    t.nodes_.resize(r.count());
    if (t.nodes_.empty()) throw FormatError("tree has no nodes");
    for (auto& n : t.nodes_) {
      n.feature = static_cast<int>(r.count(t.dim_)) - 1;
      n.threshold = r.f64();
      n.left = static_cast<int>(r.count(t.nodes_.size())) - 1;
      n.right = static_cast<int>(r.count(t.nodes_.size())) - 1;
      n.depth = r.count();
      n.samples = r.count();
      n.prediction = r.vec();
      if (n.prediction.size() != t.n_nodes_) throw FormatError("node vector has the wrong length");
    }
    return t;
  }

  bool operator==(const PctTree& o) const {
    if (dim_ != o.dim_ || nodes_.size() != o.nodes_.size()) return false;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto &a = nodes_[i], &b = o.nodes_[i];
      if (a.feature != b.feature || a.threshold != b.threshold || a.left != b.left || a.right != b.right ||
          a.samples != b.samples || a.prediction != b.prediction)
        return false;
    }
    return true;
  }

private:
  // Each node draws its feature subset from a seed derived from its position,
  // so a node's candidates never depend on what happened elsewhere in the tree.
  int grow(const std::vector<std::vector<double>>& x, const std::vector<NodeVector>& y, const std::vector<double>& w,
           const std::vector<std::size_t>& rows, const PctParams& p, std::size_t max_features, std::uint64_t seed,
           const std::string& position, std::size_t depth) {
    Node node;
    node.depth = depth;
    node.samples = rows.size();
    node.prediction.assign(n_nodes_, 0.0);
    for (auto r : rows)
      for (std::size_t n = 0; n < n_nodes_; ++n) node.prediction[n] += y[r][n];
    for (auto& v : node.prediction) v /= static_cast<double>(std::max<std::size_t>(rows.size(), 1));
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(node);

    std::vector<std::size_t> features;
    if (max_features == 0 || max_features >= dim_) {
      features.resize(dim_);
      std::iota(features.begin(), features.end(), 0);
    } else {
      Rng rng(derive_seed(seed, "node:" + position));
      features = rng.sample_without_replacement(dim_, max_features);
      std::sort(features.begin(), features.end());
    }
    const auto split = best_split(x, y, rows, features, w, p.f_level, p.min_leaf);
    if (!split) return id;
    std::vector<std::size_t> lrows, rrows;
    for (auto r : rows) (x[r][static_cast<std::size_t>(split->feature)] <= split->threshold ? lrows : rrows).push_back(r);
    const int l = grow(x, y, w, lrows, p, max_features, seed, position + "L", depth + 1);
    const int rr = grow(x, y, w, rrows, p, max_features, seed, position + "R", depth + 1);
    auto& me = nodes_[static_cast<std::size_t>(id)];
    me.feature = split->feature;
    me.threshold = split->threshold;
    me.left = l;
    me.right = rr;
    return id;
  }

  std::size_t dim_ = 0;
  std::size_t n_nodes_ = 0;
  std::vector<Node> nodes_;
};

/// Bagged PCTs. Node scores are member means; the predicted path is the
/// majority of the members' own decoded paths.
class PctForest {
public:
  static PctForest fit(const HierData& d, const Taxonomy& tax, const PctParams& p) {
    if (d.size() == 0) throw ParameterError("hierarchical training set is empty");
    if (p.iterations == 0) throw ParameterError("a forest needs at least one tree");
    PctForest f;
    f.tax_ = tax;
    f.params_ = p;
    f.dim_ = d.dim();
    const std::size_t mf =
        p.max_features ? p.max_features
                       : std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(f.dim_))));
    f.trees_.resize(p.iterations);
    parallel_for(p.iterations, p.workers, [&](std::size_t t) {
      const auto seed = derive_seed(p.seed, "pct:" + std::to_string(t));
      std::vector<std::size_t> rows(d.size());
      if (p.bootstrap) {
        Rng rng(seed);
        for (auto& r : rows) r = rng.index(d.size());
      } else {
        std::iota(rows.begin(), rows.end(), 0);
      }
      f.trees_[t] = PctTree::fit_rows(d, tax, p, rows, mf, derive_seed(seed, "splits"));
    });
    return f;
  }

  const std::vector<PctTree>& trees() const noexcept { return trees_; }
  const Taxonomy& taxonomy() const noexcept { return tax_; }
  const PctParams& params() const noexcept { return params_; }
  std::size_t dim() const noexcept { return dim_; }

  NodeVector node_scores(const std::vector<double>& x) const {
    check(x);
    NodeVector s(tax_.size(), 0.0);
    for (const auto& t : trees_) {
      const auto& v = t.node_scores(x);
      for (std::size_t n = 0; n < s.size(); ++n) s[n] += v[n];
    }
    for (auto& v : s) v /= static_cast<double>(trees_.size());
    return s;
  }

  /// Majority vote over member paths; ties go to the path whose deepest node
  /// has the higher ensemble score, then to the smaller path.
  std::string predict_path(const std::vector<double>& x) const {
    check(x);
    std::map<std::string, std::size_t> votes;
    for (const auto& t : trees_) ++votes[decode_path(t.node_scores(x), tax_, params_.decode, params_.decode_threshold)];
    const auto mean = node_scores(x);
    const std::string* best = nullptr;
    for (const auto& [path, v] : votes) {
      if (!best) {
        best = &path;
        continue;
      }
      const auto bv = votes.at(*best);
      const double ms = mean[static_cast<std::size_t>(tax_.require(path))];
      const double bs = mean[static_cast<std::size_t>(tax_.require(*best))];
      if (v > bv || (v == bv && ms > bs)) best = &path;
    }
    return *best;
  }

  void save(std::ostream& out) const {
    BinaryWriter w(out);
    w.magic();
    w.u8(static_cast<std::uint8_t>(ModelKind::PCT_FOREST));
    w.strings(tax_.label_paths());
    w.u64(dim_);
    w.f64(params_.f_level);
    w.f64(params_.w0);
    w.u8(params_.decode == DecodeMode::Relative ? 0 : 1);
    w.f64(params_.decode_threshold);
    w.u64(trees_.size());
    for (const auto& t : trees_) t.save(w);
  }

  static PctForest load(std::istream& in) {
    BinaryReader r(in);
    r.magic();
    if (r.u8() != static_cast<std::uint8_t>(ModelKind::PCT_FOREST)) throw FormatError("not a hierarchical ensemble");
    PctForest f;
    f.tax_ = Taxonomy::from_paths(r.strings());
    f.dim_ = r.count();
    f.params_.f_level = r.f64();
    f.params_.w0 = r.f64();
    f.params_.decode = r.u8() == 0 ? DecodeMode::Relative : DecodeMode::Absolute;
    f.params_.decode_threshold = r.f64();
    f.trees_.resize(r.count());
    for (auto& t : f.trees_) t = PctTree::load(r);
    return f;
  }

private:
  void check(const std::vector<double>& x) const {
    if (x.size() != dim_) throw ParameterError("input dimension mismatch");
  }

  Taxonomy tax_;
  PctParams params_;
  std::size_t dim_ = 0;
  std::vector<PctTree> trees_;
};

/// Chooses the F-test level with the best node macro-F1 on a seeded,
/// per-label 80/20 split of the training rows. Ties go to the earlier level.
/// Labels with a single row stay on the fitting side.
inline double select_f_level(const HierData& d, const Taxonomy& tax, const PctParams& p) {
  if (p.f_test_levels.empty()) throw ParameterError("no F-test levels to choose from");
  for (double l : p.f_test_levels)
    if (!(l > 0 && l < 1)) throw ParameterError("F-test levels must lie in (0,1)");
  if (p.f_test_levels.size() == 1) return p.f_test_levels.front();
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < d.size(); ++i) by_label[d.paths[i]].push_back(i);
  HierData fit, val;
  for (auto& [label, idx] : by_label) {
    Rng rng(derive_seed(p.seed, "flevel:" + label));
    rng.shuffle(idx);
    const std::size_t keep = idx.size() < 2 ? idx.size() : static_cast<std::size_t>(std::ceil(0.8 * static_cast<double>(idx.size()) - 1e-9));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto& dst = i < keep ? fit : val;
      dst.x.push_back(d.x[idx[i]]);
      dst.paths.push_back(label);
    }
  }
  if (val.size() == 0) return p.f_test_levels.front();
  double best_level = p.f_test_levels.front(), best_f1 = -1;
  for (double level : p.f_test_levels) {
    PctParams q = p;
    q.f_level = level;
    const auto forest = PctForest::fit(fit, tax, q);
    std::vector<std::string> pred;
    for (const auto& x : val.x) pred.push_back(forest.predict_path(x));
    const double f1 = hierarchical_report(pred, val.paths, tax).nodes.macro_f1;
    if (f1 > best_f1 + 1e-12) {
      best_f1 = f1;
      best_level = level;
    }
  }
  return best_level;
}

/// Level selection followed by a forest on all training rows.
inline PctForest fit_hierarchical(const HierData& d, const Taxonomy& tax, PctParams p) {
  p.f_level = select_f_level(d, tax, p);
  return PctForest::fit(d, tax, p);
}

}  // namespace ptx
