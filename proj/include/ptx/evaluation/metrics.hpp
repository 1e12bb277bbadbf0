#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "ptx/dataset/taxonomy.hpp"
#include "ptx/error.hpp"

namespace ptx {

/// Rows are true labels, columns predicted labels.
struct ConfusionMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<std::size_t>> counts;

  std::size_t total() const {
    std::size_t t = 0;
    for (const auto& r : counts)
      for (auto c : r) t += c;
    return t;
  }
  std::size_t trace() const {
    std::size_t t = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) t += counts[i][i];
    return t;
  }
};

inline ConfusionMatrix confusion(const std::vector<std::string>& pred, const std::vector<std::string>& truth,
                                 const std::vector<std::string>& labels) {
  if (pred.size() != truth.size()) throw AlignmentError("prediction and truth lists differ in length");
  std::map<std::string, std::size_t> at;
  for (std::size_t i = 0; i < labels.size(); ++i) at.emplace(labels[i], i);
  auto index = [&](const std::string& l) {
    const auto it = at.find(l);
    if (it == at.end()) throw SchemaError("label '" + l + "' not in the label order");
    return it->second;
  };
  ConfusionMatrix m{labels, std::vector<std::vector<std::size_t>>(labels.size(), std::vector<std::size_t>(labels.size(), 0))};
  for (std::size_t i = 0; i < pred.size(); ++i) ++m.counts[index(truth[i])][index(pred[i])];
  return m;
}

struct LabelMetrics {
  std::string label;
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0, recall = 0, f1 = 0;

  std::size_t support() const noexcept { return tp + fn; }
};

struct MetricsReport {
  std::vector<LabelMetrics> per_label;
  double macro_f1 = 0;

  const LabelMetrics* find(const std::string& label) const {
    for (const auto& m : per_label)
      if (m.label == label) return &m;
    return nullptr;
  }
  double f1_of(const std::string& label) const {
    const auto* m = find(label);
    return m ? m->f1 : 0.0;
  }
};

inline LabelMetrics binary_metrics(std::string label, std::size_t tp, std::size_t fp, std::size_t fn) {
  LabelMetrics m{std::move(label), tp, fp, fn};
  m.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

/// Macro F1 is the plain mean over labels with ground-truth support.
inline double macro_over_support(const std::vector<LabelMetrics>& v) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& m : v)
    if (m.support() > 0) {
      sum += m.f1;
      ++n;
    }
  return n ? sum / static_cast<double>(n) : 0.0;
}

inline MetricsReport prf1(const ConfusionMatrix& m) {
  MetricsReport r;
  const std::size_t L = m.labels.size();
  for (std::size_t i = 0; i < L; ++i) {
    std::size_t row = 0, col = 0;
    for (std::size_t j = 0; j < L; ++j) {
      row += m.counts[i][j];
      col += m.counts[j][i];
    }
    const std::size_t tp = m.counts[i][i];
    r.per_label.push_back(binary_metrics(m.labels[i], tp, col - tp, row - tp));
  }
  r.macro_f1 = macro_over_support(r.per_label);
  return r;
}

struct HierarchicalReport {
  MetricsReport nodes;          // one entry per taxonomy node, taxonomy order
  ConfusionMatrix grouped;      // rows/cols indexed by each path's deepest node
  std::size_t exact_matches = 0;
};

/// Per-node metrics from ancestor closures: a node is true (predicted) for a
/// sample when it lies on or above the true (predicted) path's deepest node.
/// With `exact_path` only the deepest node itself counts.
inline HierarchicalReport hierarchical_report(const std::vector<std::string>& pred,
                                              const std::vector<std::string>& truth, const Taxonomy& tax,
                                              bool exact_path = false) {
  if (pred.size() != truth.size()) throw AlignmentError("prediction and truth lists differ in length");
  const std::size_t N = tax.size();
  std::vector<std::size_t> tp(N, 0), fp(N, 0), fn(N, 0);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < N; ++i) names.push_back(tax.node(static_cast<int>(i)).path);
  HierarchicalReport out;
  out.grouped = {names, std::vector<std::vector<std::size_t>>(N, std::vector<std::size_t>(N, 0))};
  auto closure = [&](const std::string& path) {
    const auto idx = static_cast<std::size_t>(tax.require(path));
    std::vector<bool> on(N, false);
    if (exact_path)
      on[idx] = true;
    else
      for (int a : tax.lineage(static_cast<int>(idx))) on[static_cast<std::size_t>(a)] = true;
    return std::pair{idx, on};
  };
  for (std::size_t s = 0; s < pred.size(); ++s) {
    const auto [ti, t] = closure(truth[s]);
    const auto [pi, p] = closure(pred[s]);
    ++out.grouped.counts[ti][pi];
    out.exact_matches += ti == pi;
    for (std::size_t n = 0; n < N; ++n) {
      if (t[n] && p[n]) ++tp[n];
      else if (p[n]) ++fp[n];
      else if (t[n]) ++fn[n];
    }
  }
  for (std::size_t n = 0; n < N; ++n) out.nodes.per_label.push_back(binary_metrics(names[n], tp[n], fp[n], fn[n]));
  out.nodes.macro_f1 = macro_over_support(out.nodes.per_label);
  return out;
}

struct RankTable {
  std::vector<std::string> methods;
  std::vector<std::string> contexts;
  std::vector<std::vector<double>> ranks;  // [method][context]
  std::vector<double> mean_rank;
  double chi_square = 0;
  double p_value = 1;
};

/// Ranks methods within each context (1 = highest score, ties averaged) and
/// computes the Friedman statistic 12N/(k(k+1)) * sum(R_j^2) - 3N(k+1).
/// A missing cell is an empty optional.
inline RankTable friedman_ranks(const std::vector<std::string>& methods, const std::vector<std::string>& contexts,
                                const std::vector<std::vector<std::optional<double>>>& scores) {
  const std::size_t k = methods.size(), N = contexts.size();
  if (k == 0 || N == 0) throw SchemaError("rank table needs at least one method and one context");
  if (scores.size() != k) throw SchemaError("score table has the wrong number of methods");
  RankTable t{methods, contexts, std::vector<std::vector<double>>(k, std::vector<double>(N, 0.0)), {}, 0, 1};
  for (std::size_t c = 0; c < N; ++c) {
    std::vector<std::pair<double, std::size_t>> col;
    for (std::size_t m = 0; m < k; ++m) {
      if (scores[m].size() != N || !scores[m][c] || std::isnan(*scores[m][c]))
        throw SchemaError("missing score for method '" + methods[m] + "' in context '" + contexts[c] + "'");
      col.emplace_back(*scores[m][c], m);
    }
    std::sort(col.begin(), col.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; i < k;) {
      std::size_t j = i;
      while (j + 1 < k && col[j + 1].first == col[i].first) ++j;
      const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2;
      for (std::size_t q = i; q <= j; ++q) t.ranks[col[q].second][c] = avg;
      i = j + 1;
    }
  }
  double sum_sq = 0;
  for (std::size_t m = 0; m < k; ++m) {
    double s = 0;
    for (double r : t.ranks[m]) s += r;
    t.mean_rank.push_back(s / static_cast<double>(N));
    sum_sq += s * s;
  }
  const double kk = static_cast<double>(k), nn = static_cast<double>(N);
  t.chi_square = 12.0 / (nn * kk * (kk + 1)) * sum_sq - 3 * nn * (kk + 1);
  if (k > 1) {
    boost::math::chi_squared dist(kk - 1);
    t.p_value = t.chi_square > 0 ? boost::math::cdf(boost::math::complement(dist, t.chi_square)) : 1.0;
  }
  return t;
}

}  // namespace ptx
